#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "erdmd/core_dmd.hpp"
#include "erdmd/erdmd.hpp"
#include "erdmd/io.hpp"
#include "erdmd/systems.hpp"

namespace erdmd {

namespace fs = std::filesystem;

// ERDMD_LOG=quiet|info|debug (default info); verbosity is the only
// environment influence on behavior.
inline int log_level()
{
    static const int level = [] {
        const char *env = std::getenv("ERDMD_LOG");
        if (!env) return 1;
        const std::string v(env);
        if (v == "quiet" || v == "0") return 0;
        if (v == "debug" || v == "2") return 2;
        return 1;
    }();
    return level;
}

inline void log_info(const std::string &msg)
{
    if (log_level() >= 1) std::fprintf(stderr, "[erdmd] %s\n", msg.c_str());
}

inline void log_debug(const std::string &msg)
{
    if (log_level() >= 2) std::fprintf(stderr, "[erdmd] %s\n", msg.c_str());
}

struct ExperimentConfig {
    std::string name = "run";
    uint64_t seed = 0;
    std::string format = "csv"; // csv | json
    bool baseline = false;
    int forecast_steps = 0;
    json system; // normalized system object, defaults filled
    std::optional<double> window_t_start, window_t_end;
    ERConfig er;
    int inner_lag_count = 0, outer_lag_count = 0;
};

namespace detail {

inline void check_keys(const json &j, const std::vector<std::string> &allowed,
                       const std::string &where)
{
    for (const auto &item : j.items()) {
        bool ok = false;
        for (const auto &k : allowed)
            if (item.key() == k) ok = true;
        require(ok, "config", "unknown key '" + item.key() + "' in " + where);
    }
}

inline json normalize_system(json sys)
{
    require(sys.is_object() && sys.contains("type"), "config", "system needs a 'type' field");
    const std::string type = sys["type"].get<std::string>();
    json out;
    out["type"] = type;
    if (type == "lorenz63" || type == "rossler") {
        check_keys(sys, {"type", "dt", "t_start", "t_end", "params", "y0"}, "system");
        const ODESpec defaults = type == "lorenz63" ? lorenz63_spec() : rossler_spec();
        out["dt"] = sys.value("dt", defaults.dt);
        out["t_start"] = sys.value("t_start", defaults.t_start);
        out["t_end"] = sys.value("t_end", defaults.t_end);
        json params;
        for (const auto &[k, v] : defaults.params) params[k] = v;
        if (sys.contains("params"))
            for (const auto &item : sys["params"].items()) {
                require(params.contains(item.key()), "config",
                        "unknown " + type + " parameter '" + item.key() + "'");
                params[item.key()] = item.value().get<double>();
            }
        out["params"] = params;
        std::vector<double> y0 = {defaults.y0(0), defaults.y0(1), defaults.y0(2)};
        if (sys.contains("y0")) y0 = sys["y0"].get<std::vector<double>>();
        require(y0.size() == 3, "config", "y0 must have three entries");
        out["y0"] = y0;
    } else if (type == "ks") {
        check_keys(sys, {"type", "half_period", "n_modes", "dt", "t_burn", "t_final", "pod_modes"},
                   "system");
        out["half_period"] = sys.value("half_period", 11.0);
        out["n_modes"] = sys.value("n_modes", 128);
        out["dt"] = sys.value("dt", 0.25);
        out["t_burn"] = sys.value("t_burn", 10.0);
        out["t_final"] = sys.value("t_final", 160.0);
        out["pod_modes"] = sys.value("pod_modes", 12);
    } else if (type == "lagged_scalar") {
        check_keys(sys, {"type", "coeffs", "n_steps", "init_scale"}, "system");
        require(sys.contains("coeffs") && sys["coeffs"].is_object(), "config",
                "lagged_scalar needs a 'coeffs' object mapping lag -> coefficient");
        out["coeffs"] = sys["coeffs"];
        out["n_steps"] = sys.value("n_steps", 500);
        out["init_scale"] = sys.value("init_scale", 1.0);
    } else if (type == "data") {
        check_keys(sys, {"type", "path"}, "system");
        require(sys.contains("path"), "config", "data system needs a 'path' field");
        out["path"] = sys["path"].get<std::string>();
    } else {
        fail("config", "unknown system type '" + type + "'");
    }
    return out;
}

} // namespace detail

inline ExperimentConfig load_config(const fs::path &path)
{
    const json j = read_json(path);
    detail::check_keys(j, {"name", "seed", "format", "baseline", "forecast_steps", "system",
                           "window", "er", "spectrum"},
                       "config");
    ExperimentConfig cfg;
    cfg.name = j.value("name", path.stem().string());
    cfg.seed = j.value("seed", static_cast<uint64_t>(0));
    cfg.format = j.value("format", std::string("csv"));
    require(cfg.format == "csv" || cfg.format == "json", "config", "format must be csv or json");
    cfg.baseline = j.value("baseline", false);
    cfg.forecast_steps = j.value("forecast_steps", 0);
    require(cfg.forecast_steps >= 0, "config", "forecast_steps must be nonnegative");
    require(j.contains("system"), "config", "config needs a 'system' object");
    cfg.system = detail::normalize_system(j["system"]);
    if (j.contains("window")) {
        detail::check_keys(j["window"], {"t_start", "t_end"}, "window");
        if (j["window"].contains("t_start")) cfg.window_t_start = j["window"]["t_start"].get<double>();
        if (j["window"].contains("t_end")) cfg.window_t_end = j["window"]["t_end"].get<double>();
    }
    require(j.contains("er") && j["er"].contains("d"), "config", "config needs er.d");
    const json &er = j["er"];
    detail::check_keys(er, {"d", "k_neighbors", "n_shuffles", "alpha", "rel_svd_tol",
                            "max_lag_count", "eval_window_start"},
                       "er");
    cfg.er.d = er["d"].get<int>();
    cfg.er.k_neighbors = er.value("k_neighbors", 5);
    cfg.er.n_shuffles = er.value("n_shuffles", 100);
    cfg.er.alpha = er.value("alpha", 0.05);
    cfg.er.rel_svd_tol = er.value("rel_svd_tol", 1e-10);
    if (er.contains("max_lag_count") && !er["max_lag_count"].is_null())
        cfg.er.max_lag_count = er["max_lag_count"].get<int>();
    if (er.contains("eval_window_start") && !er["eval_window_start"].is_null())
        cfg.er.eval_window_start = er["eval_window_start"].get<int>();
    cfg.er.seed = cfg.seed;
    if (j.contains("spectrum")) {
        detail::check_keys(j["spectrum"], {"inner_lag_count", "outer_lag_count"}, "spectrum");
        cfg.inner_lag_count = j["spectrum"].value("inner_lag_count", 0);
        cfg.outer_lag_count = j["spectrum"].value("outer_lag_count", 0);
    }
    return cfg;
}

inline json config_echo(const ExperimentConfig &cfg)
{
    json j;
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    j["format"] = cfg.format;
    j["baseline"] = cfg.baseline;
    j["forecast_steps"] = cfg.forecast_steps;
    j["system"] = cfg.system;
    j["window"]["t_start"] = cfg.window_t_start ? json(*cfg.window_t_start) : json(nullptr);
    j["window"]["t_end"] = cfg.window_t_end ? json(*cfg.window_t_end) : json(nullptr);
    j["er"]["d"] = cfg.er.d;
    j["er"]["k_neighbors"] = cfg.er.k_neighbors;
    j["er"]["n_shuffles"] = cfg.er.n_shuffles;
    j["er"]["alpha"] = cfg.er.alpha;
    j["er"]["rel_svd_tol"] = cfg.er.rel_svd_tol;
    j["er"]["max_lag_count"] = cfg.er.max_lag_count ? json(*cfg.er.max_lag_count) : json(nullptr);
    j["er"]["eval_window_start"] =
        cfg.er.eval_window_start ? json(*cfg.er.eval_window_start) : json(nullptr);
    j["spectrum"]["inner_lag_count"] = cfg.inner_lag_count;
    j["spectrum"]["outer_lag_count"] = cfg.outer_lag_count;
    return j;
}

// Wall-clock bookkeeping lives in its own sidecar so summary.json stays
// byte-reproducible across runs.
inline void update_timing(const fs::path &out, const std::string &key, double seconds)
{
    const fs::path path = out / "timing.json";
    json j = fs::exists(path) ? read_json(path) : json::object();
    j[key] = seconds;
    write_json(path, j);
}

class Stopwatch {
  public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

namespace detail {

inline void write_series(const ExperimentConfig &cfg, const fs::path &out,
                         const std::string &stem, const TimeSeries &ts)
{
    if (cfg.format == "json")
        write_timeseries_json(out / (stem + ".json"), ts);
    else
        write_timeseries_csv(out / (stem + ".csv"), ts);
}

inline TimeSeries load_series(const fs::path &out)
{
    if (fs::exists(out / "series.csv")) return read_timeseries_csv(out / "series.csv");
    if (fs::exists(out / "series.json")) return read_timeseries_json(out / "series.json");
    fail("io", "no series.csv/series.json under " + out.string() + "; run simulate first");
}

inline int time_index(const TimeSeries &ts, double t)
{
    const int idx = static_cast<int>(std::lround((t - ts.t0) / ts.dt));
    require(idx >= 0 && idx <= ts.n_steps(), "config",
            "time " + std::to_string(t) + " lies outside the series");
    return idx;
}

struct WindowIndices {
    int i_begin = 0, i_end = 0;
};

inline WindowIndices resolve_window(const TimeSeries &ts, const ExperimentConfig &cfg)
{
    WindowIndices w;
    w.i_begin = cfg.window_t_start ? time_index(ts, *cfg.window_t_start) : 0;
    w.i_end = cfg.window_t_end ? time_index(ts, *cfg.window_t_end) : ts.n_steps();
    require(w.i_end > w.i_begin, "config", "analysis window is empty");
    require(cfg.er.d < w.i_end - w.i_begin, "config",
            "maximum lag must be smaller than the analysis window length");
    return w;
}

} // namespace detail

inline void cmd_simulate(const ExperimentConfig &cfg, const fs::path &out)
{
    Stopwatch timer;
    fs::create_directories(out);
    const std::string type = cfg.system["type"].get<std::string>();
    if (type == "lorenz63" || type == "rossler") {
        ODESpec spec = type == "lorenz63" ? lorenz63_spec() : rossler_spec();
        spec.dt = cfg.system["dt"].get<double>();
        spec.t_start = cfg.system["t_start"].get<double>();
        spec.t_end = cfg.system["t_end"].get<double>();
        for (const auto &item : cfg.system["params"].items())
            spec.params[item.key()] = item.value().get<double>();
        const auto y0 = cfg.system["y0"].get<std::vector<double>>();
        spec.y0 = Eigen::Map<const Eigen::Vector3d>(y0.data());
        const TimeSeries ts = integrate_rk4(spec);
        detail::write_series(cfg, out, "series", ts);
        log_info(type + ": " + std::to_string(ts.state_dim()) + "x" +
                 std::to_string(ts.n_cols()) + " series written");
    } else if (type == "ks") {
        KSSpec spec;
        spec.half_period = cfg.system["half_period"].get<double>();
        spec.n_modes = cfg.system["n_modes"].get<int>();
        spec.dt = cfg.system["dt"].get<double>();
        spec.t_burn = cfg.system["t_burn"].get<double>();
        spec.t_final = cfg.system["t_final"].get<double>();
        spec.seed = cfg.seed;
        const TimeSeries field = integrate_ks_etdrk4(spec);
        detail::write_series(cfg, out, "field", field);
        const int pod_modes = cfg.system["pod_modes"].get<int>();
        auto [basis, coeffs] = pod_reduce(field, pod_modes);
        detail::write_series(cfg, out, "series", coeffs);
        json pj;
        pj["pod_modes"] = pod_modes;
        pj["energy_fraction"] = basis.energy_fraction;
        json sv = json::array();
        for (Eigen::Index i = 0; i < basis.singular_values.size(); ++i)
            sv.push_back(basis.singular_values(i));
        pj["singular_values"] = std::move(sv);
        json mf = json::array();
        for (Eigen::Index i = 0; i < basis.mean_field.size(); ++i)
            mf.push_back(basis.mean_field(i));
        pj["mean_field"] = std::move(mf);
        pj["modes"] = matrix_to_json(basis.modes);
        write_json(out / "pod_basis.json", pj);
        log_info("ks: field " + std::to_string(field.state_dim()) + "x" +
                 std::to_string(field.n_cols()) + ", " + std::to_string(pod_modes) +
                 " pod modes capture " + std::to_string(basis.energy_fraction) + " of the energy");
    } else if (type == "lagged_scalar") {
        std::vector<int> lags;
        std::vector<Eigen::MatrixXd> mats;
        for (const auto &item : cfg.system["coeffs"].items()) {
            lags.push_back(std::stoi(item.key()));
            mats.push_back(Eigen::MatrixXd::Constant(1, 1, item.value().get<double>()));
        }
        // json object keys sort lexicographically; order numerically instead
        std::vector<size_t> order(lags.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&lags](size_t a, size_t b) { return lags[a] < lags[b]; });
        std::vector<int> sorted_lags;
        std::vector<Eigen::MatrixXd> sorted_mats;
        for (size_t i : order) {
            sorted_lags.push_back(lags[i]);
            sorted_mats.push_back(mats[i]);
        }
        const LaggedModel gen(1, LagSet(sorted_lags), std::move(sorted_mats));
        const TimeSeries ts = lagged_linear_series(gen, cfg.system["n_steps"].get<int>(), cfg.seed,
                                                   cfg.system["init_scale"].get<double>());
        detail::write_series(cfg, out, "series", ts);
        log_info("lagged_scalar: " + std::to_string(ts.n_cols()) + " samples written");
    } else { // data: normalize a copy into the run directory, input untouched
        const fs::path src = cfg.system["path"].get<std::string>();
        const TimeSeries ts = src.extension() == ".json" ? read_timeseries_json(src)
                                                         : read_timeseries_csv(src);
        detail::write_series(cfg, out, "series", ts);
        log_info("data: copied " + src.string());
    }
    update_timing(out, "simulate_seconds", timer.seconds());
}

inline void cmd_fit(const ExperimentConfig &cfg, const fs::path &out)
{
    Stopwatch timer;
    const TimeSeries full = detail::load_series(out);
    const detail::WindowIndices win = detail::resolve_window(full, cfg);
    const TimeSeries ts = full.slice_cols(win.i_begin, win.i_end);

    // initialize / build* / prune* / final refit, logging each decision.
    ERState state = initialize(ts, cfg.er);
    log_info("initialize: lag-1 model over " +
             std::to_string(ts.n_steps() - cfg.er.window_start() + 1) + " target samples");
    ERTrace trace;
    for (;;) {
        ERStepResult step = build_step(ts, cfg.er, std::move(state));
        state = std::move(step.state);
        if (step.event) {
            log_info("build: lag " + std::to_string(step.event->lag) +
                     " cmi=" + std::to_string(step.event->cmi) +
                     " quantile=" + std::to_string(step.event->quantile) +
                     (step.event->accepted ? " accepted" : " rejected"));
            trace.events.push_back(std::move(*step.event));
        }
        if (step.done) break;
    }
    for (;;) {
        ERStepResult step = prune_step(ts, cfg.er, std::move(state));
        state = std::move(step.state);
        if (step.event) {
            log_info("prune: lag " + std::to_string(step.event->lag) +
                     " cmi=" + std::to_string(step.event->cmi) +
                     " quantile=" + std::to_string(step.event->quantile) +
                     (step.event->accepted ? " removed" : " kept"));
            trace.events.push_back(std::move(*step.event));
        }
        if (step.done) break;
    }
    const LaggedModel model = fit(ts, state.chosen, cfg.er.window_start(), cfg.er.rel_svd_tol);

    json mj = model_to_json(model);
    mj["name"] = cfg.name;
    mj["seed"] = cfg.seed;
    mj["window"]["i_begin"] = win.i_begin;
    mj["window"]["i_end"] = win.i_end;
    mj["eval_window_start"] = cfg.er.window_start();
    write_json(out / "model.json", mj);

    json tj;
    tj["events"] = json::array();
    for (const auto &ev : trace.events) {
        json e;
        e["phase"] = to_string(ev.phase);
        e["lag"] = ev.lag;
        e["cmi"] = ev.cmi;
        e["quantile"] = ev.quantile;
        e["accepted"] = ev.accepted;
        e["saturated"] = ev.saturated;
        e["lags_after"] = ev.lags_after;
        e["test_seed"] = ev.test_seed;
        tj["events"].push_back(std::move(e));
    }
    write_json(out / "trace.json", tj);

    json fj;
    fj["name"] = cfg.name;
    fj["seed"] = cfg.seed;
    fj["config"] = config_echo(cfg);
    fj["window"]["i_begin"] = win.i_begin;
    fj["window"]["i_end"] = win.i_end;
    fj["eval_window_start"] = cfg.er.window_start();
    fj["lags"] = model.lags.values();
    json norms = json::array();
    for (const auto &[lag, norm] : lag_matrix_norms(model)) norms.push_back({lag, norm});
    fj["lag_norms"] = std::move(norms);

    if (cfg.baseline) {
        log_info("baseline: all-lags fit with d=" + std::to_string(cfg.er.d));
        const LaggedModel base = fit(ts, LagSet::all_up_to(cfg.er.d), cfg.er.window_start(),
                                     cfg.er.rel_svd_tol, /*allow_underdetermined=*/true);
        json bj = model_to_json(base);
        bj["name"] = cfg.name + "-baseline";
        bj["seed"] = cfg.seed;
        bj["window"]["i_begin"] = win.i_begin;
        bj["window"]["i_end"] = win.i_end;
        bj["eval_window_start"] = cfg.er.window_start();
        write_json(out / "baseline_model.json", bj);
        json bnorms = json::array();
        for (const auto &[lag, norm] : lag_matrix_norms(base)) bnorms.push_back({lag, norm});
        fj["baseline_lag_norms"] = std::move(bnorms);
    }
    write_json(out / "fit.json", fj);
    update_timing(out, "fit_seconds", timer.seconds());
    std::string lag_str;
    for (int lag : model.lags.values()) lag_str += (lag_str.empty() ? "" : ",") + std::to_string(lag);
    log_info("fit: selected lags {" + lag_str + "}");
}

namespace detail {

inline void reconstruct_one(const ExperimentConfig &cfg, const fs::path &out,
                            const TimeSeries &full, const fs::path &model_path,
                            const std::string &label)
{
    const json mj = read_json(model_path);
    const LaggedModel model = model_from_json(mj);
    const int i_begin = mj["window"]["i_begin"].get<int>();
    const int i_end = mj["window"]["i_end"].get<int>();
    const int w = mj["eval_window_start"].get<int>();
    require(i_end <= full.n_steps(), "io", "model window exceeds the stored series");

    const int i_ext = std::min(i_end + cfg.forecast_steps, full.n_steps());
    const int beyond_data = i_end + cfg.forecast_steps - i_ext;
    const TimeSeries ts = full.slice_cols(i_begin, i_ext);
    const int horizon = i_ext - i_begin;
    const TimeSeries recon = reconstruct(model, ts, w, horizon, beyond_data);
    write_series(cfg, out, "recon_" + label, recon);

    // Per-dimension absolute error wherever truth exists.
    const int s = full.state_dim();
    Eigen::MatrixXd err(s, horizon - w + 1);
    for (int j = w; j <= horizon; ++j)
        err.col(j - w) = (recon.data.col(j) - ts.data.col(j)).cwiseAbs();
    TimeSeries err_ts(std::move(err), ts.dt, ts.time_at(w));
    write_series(cfg, out, "errors_" + label, err_ts);
    log_info("reconstruct " + label + ": max abs error " +
             std::to_string(err_ts.data.maxCoeff()) + " over " +
             std::to_string(err_ts.n_cols()) + " samples");
}

} // namespace detail

inline void cmd_reconstruct(const ExperimentConfig &cfg, const fs::path &out)
{
    Stopwatch timer;
    const TimeSeries full = detail::load_series(out);
    require(fs::exists(out / "model.json"), "io", "model.json missing; run fit first");
    detail::reconstruct_one(cfg, out, full, out / "model.json", "erdmd");
    if (cfg.baseline) {
        require(fs::exists(out / "baseline_model.json"), "io",
                "baseline_model.json missing; run fit with --baseline first");
        detail::reconstruct_one(cfg, out, full, out / "baseline_model.json", "baseline");
    }
    update_timing(out, "reconstruct_seconds", timer.seconds());
}

inline void cmd_spectrum(const ExperimentConfig &cfg, const fs::path &out)
{
    Stopwatch timer;
    require(fs::exists(out / "model.json"), "io", "model.json missing; run fit first");
    const LaggedModel model = model_from_json(read_json(out / "model.json"));
    std::vector<SpectrumResult> spectra;
    std::vector<std::string> warnings;

    const long full_dim = static_cast<long>(model.state_dim) * model.max_lag();
    if (full_dim <= kMaxDenseEigenDim) {
        spectra.push_back(full_spectrum(model));
    } else {
        warnings.push_back("full companion dimension " + std::to_string(full_dim) +
                           " exceeds the dense eigensolver guard; skipped");
    }
    if (cfg.inner_lag_count > 0) {
        if (cfg.inner_lag_count >= 2 && cfg.inner_lag_count <= model.lags.size()) {
            try {
                spectra.push_back(reduced_inner_spectrum(model, cfg.inner_lag_count));
            } catch (const error &e) {
                warnings.push_back(std::string("inner reduction failed: ") + e.what());
            }
        } else {
            warnings.push_back("inner_lag_count incompatible with " +
                               std::to_string(model.lags.size()) + " selected lags; skipped");
        }
    }
    if (cfg.outer_lag_count > 0) {
        if (cfg.outer_lag_count <= model.lags.size()) {
            try {
                spectra.push_back(reduced_outer_spectrum(model, cfg.outer_lag_count));
            } catch (const error &e) {
                warnings.push_back(std::string("outer reduction failed: ") + e.what());
            }
        } else {
            warnings.push_back("outer_lag_count incompatible with " +
                               std::to_string(model.lags.size()) + " selected lags; skipped");
        }
    }
    write_eigenvalues_csv(out / "eigenvalues.csv", spectra);
    json meta;
    meta["reference_circle_radius"] = 1.0; // plot |z|=1 for Koopman stability reading
    for (const auto &sp : spectra)
        meta["counts"][to_string(sp.source)] = sp.eigenvalues.size();
    meta["warnings"] = warnings;
    write_json(out / "spectrum_meta.json", meta);
    update_timing(out, "spectrum_seconds", timer.seconds());
    log_info("spectrum: " + std::to_string(spectra.size()) + " source(s) written");
}

// ---- minimal SVG quick-looks ------------------------------------------------

namespace detail {

inline std::string svg_num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline void write_error_svg(const fs::path &path,
                            const std::vector<std::pair<std::string, TimeSeries>> &curves)
{
    if (curves.empty()) return;
    const double width = 720, height = 420, ml = 60, mr = 20, mt = 20, mb = 40;
    double tmin = 1e300, tmax = -1e300, lo = 1e300, hi = -1e300;
    for (const auto &[label, ts] : curves) {
        tmin = std::min(tmin, ts.t0);
        tmax = std::max(tmax, ts.time_at(ts.n_steps()));
        for (int j = 0; j <= ts.n_steps(); ++j)
            for (int i = 0; i < ts.state_dim(); ++i) {
                const double v = std::log10(std::max(ts.data(i, j), 1e-18));
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    }
    if (hi <= lo) hi = lo + 1.0;
    if (tmax <= tmin) tmax = tmin + 1.0;
    const char *colors[] = {"#c62828", "#212121", "#1565c0", "#2e7d32"};
    std::ofstream svg = open_out(path);
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    auto px = [&](double t) { return ml + (t - tmin) / (tmax - tmin) * (width - ml - mr); };
    auto py = [&](double v) { return height - mb - (v - lo) / (hi - lo) * (height - mt - mb); };
    svg << "<line x1='" << ml << "' y1='" << height - mb << "' x2='" << width - mr << "' y2='"
        << height - mb << "' stroke='black'/>\n<line x1='" << ml << "' y1='" << mt << "' x2='"
        << ml << "' y2='" << height - mb << "' stroke='black'/>\n";
    svg << "<text x='" << width / 2 << "' y='" << height - 8 << "' font-size='13'>time</text>\n";
    svg << "<text x='12' y='" << height / 2
        << "' font-size='13' transform='rotate(-90 12 " << height / 2
        << ")'>log10 abs error</text>\n";
    int ci = 0;
    for (const auto &[label, ts] : curves) {
        const char *color = colors[ci % 4];
        for (int i = 0; i < ts.state_dim(); ++i) {
            svg << "<polyline fill='none' stroke='" << color << "' stroke-width='1' points='";
            for (int j = 0; j <= ts.n_steps(); ++j)
                svg << svg_num(px(ts.time_at(j))) << ','
                    << svg_num(py(std::log10(std::max(ts.data(i, j), 1e-18)))) << ' ';
            svg << "'/>\n";
        }
        svg << "<text x='" << width - mr - 150 << "' y='" << mt + 16 * (ci + 1)
            << "' font-size='13' fill='" << color << "'>" << label << "</text>\n";
        ++ci;
    }
    svg << "</svg>\n";
}

inline void write_spectrum_svg(const fs::path &path, const std::vector<SpectrumResult> &spectra)
{
    if (spectra.empty()) return;
    const double size = 520, margin = 40;
    double extent = 1.1;
    for (const auto &sp : spectra)
        for (const auto &ev : sp.eigenvalues)
            extent = std::max({extent, std::abs(ev.real()), std::abs(ev.imag())});
    extent = std::min(extent, 3.0); // clip wild outliers so the circle stays visible
    auto px = [&](double v) { return margin + (v + extent) / (2 * extent) * (size - 2 * margin); };
    std::ofstream svg = open_out(path);
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << size << "' height='" << size
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<circle cx='" << px(0) << "' cy='" << px(0) << "' r='"
        << (size - 2 * margin) / (2 * extent) << "' fill='none' stroke='#9e9e9e'/>\n";
    svg << "<line x1='" << margin << "' y1='" << px(0) << "' x2='" << size - margin << "' y2='"
        << px(0) << "' stroke='#e0e0e0'/>\n<line x1='" << px(0) << "' y1='" << margin << "' x2='"
        << px(0) << "' y2='" << size - margin << "' stroke='#e0e0e0'/>\n";
    int ci = 0;
    const char *colors[] = {"#1565c0", "#c62828", "#2e7d32"};
    for (const auto &sp : spectra) {
        const char *color = colors[ci % 3];
        for (const auto &ev : sp.eigenvalues) {
            if (std::abs(ev.real()) > extent || std::abs(ev.imag()) > extent) continue;
            svg << "<circle cx='" << svg_num(px(ev.real())) << "' cy='"
                << svg_num(px(-ev.imag())) << "' r='2' fill='" << color
                << "' fill-opacity='0.6'/>\n";
        }
        svg << "<text x='" << margin << "' y='" << 16 * (ci + 1) << "' font-size='13' fill='"
            << color << "'>" << to_string(sp.source) << "</text>\n";
        ++ci;
    }
    svg << "</svg>\n";
}

inline std::optional<TimeSeries> try_load_series(const fs::path &out, const std::string &stem)
{
    if (fs::exists(out / (stem + ".csv"))) return read_timeseries_csv(out / (stem + ".csv"));
    if (fs::exists(out / (stem + ".json"))) return read_timeseries_json(out / (stem + ".json"));
    return std::nullopt;
}

inline json series_to_summary_json(const TimeSeries &ts)
{
    json j;
    json time = json::array();
    for (int c = 0; c <= ts.n_steps(); ++c) time.push_back(ts.time_at(c));
    j["time"] = std::move(time);
    j["abs_error"] = matrix_to_json(ts.data);
    return j;
}

} // namespace detail

inline void cmd_report(const fs::path &out)
{
    Stopwatch timer;
    require(fs::exists(out / "fit.json"), "io", "fit.json missing; run fit first");
    json summary;
    std::vector<std::string> warnings;

    const json fj = read_json(out / "fit.json");
    summary["name"] = fj.value("name", "run");
    summary["seed"] = fj.value("seed", static_cast<uint64_t>(0));
    summary["config"] = fj.contains("config") ? fj["config"] : json(nullptr);
    summary["window"] = fj.contains("window") ? fj["window"] : json(nullptr);
    summary["lags"] = fj.contains("lags") ? fj["lags"] : json(nullptr);
    summary["lag_norms"] = fj.contains("lag_norms") ? fj["lag_norms"] : json(nullptr);
    if (fj.contains("baseline_lag_norms")) summary["baseline_lag_norms"] = fj["baseline_lag_norms"];

    if (fs::exists(out / "trace.json")) {
        summary["trace"] = read_json(out / "trace.json")["events"];
    } else {
        warnings.push_back("trace.json missing");
    }

    std::vector<std::pair<std::string, TimeSeries>> error_curves;
    for (const std::string label : {"erdmd", "baseline"}) {
        if (auto ts = detail::try_load_series(out, "errors_" + label)) {
            summary["errors"][label] = detail::series_to_summary_json(*ts);
            error_curves.emplace_back(label, std::move(*ts));
        } else if (label == "erdmd") {
            warnings.push_back("errors_erdmd missing (run reconstruct)");
        }
    }

    std::vector<SpectrumResult> spectra;
    if (fs::exists(out / "eigenvalues.csv")) {
        spectra = read_eigenvalues_csv(out / "eigenvalues.csv");
        for (const auto &sp : spectra) {
            json evs = json::array();
            for (const auto &ev : sp.eigenvalues) evs.push_back({ev.real(), ev.imag()});
            summary["eigenvalues"][to_string(sp.source)] = std::move(evs);
        }
    } else {
        warnings.push_back("eigenvalues.csv missing (run spectrum)");
    }

    if (fs::exists(out / "pod_basis.json")) {
        const json pj = read_json(out / "pod_basis.json");
        summary["pod"]["pod_modes"] = pj.value("pod_modes", 0);
        summary["pod"]["energy_fraction"] = pj.value("energy_fraction", 0.0);
    }

    summary["warnings"] = warnings;
    write_json(out / "summary.json", summary);
    if (!error_curves.empty()) detail::write_error_svg(out / "errors.svg", error_curves);
    if (!spectra.empty()) detail::write_spectrum_svg(out / "spectrum.svg", spectra);
    update_timing(out, "report_seconds", timer.seconds());
    log_info("report: summary.json with " + std::to_string(warnings.size()) + " warning(s)");
}

} // namespace erdmd
