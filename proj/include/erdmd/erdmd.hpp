#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "erdmd/core_dmd.hpp"
#include "erdmd/infotheory.hpp"
#include "erdmd/rng.hpp"
#include "erdmd/types.hpp"

namespace erdmd {

struct ERConfig {
    int d = 2;                  // maximum candidate lag
    int k_neighbors = 5;
    int n_shuffles = 100;
    double alpha = 0.05;
    double rel_svd_tol = 1e-10;
    std::optional<int> max_lag_count; // cap on |chosen|; unset = unlimited
    uint64_t seed = 0;
    std::optional<int> eval_window_start; // first target index; defaults to d

    int window_start() const { return eval_window_start.value_or(d); }
};

struct EREvent {
    enum class Phase { Build, Prune };
    Phase phase = Phase::Build;
    int lag = 0;           // candidate lag examined by the significance test
    double cmi = 0.0;      // observed CMI of that candidate
    double quantile = 0.0; // shuffle quantile it was compared against
    bool accepted = false; // build: lag added; prune: lag removed
    bool saturated = false; // prune: reduced model already at numerical precision,
                            // so the lag was dropped regardless of the test
    std::vector<int> lags_after;
    uint64_t test_seed = 0; // seed handed to shuffle_significance (audit/replay)
};

inline const char *to_string(EREvent::Phase p)
{
    return p == EREvent::Phase::Build ? "build" : "prune";
}

struct ERTrace {
    std::vector<EREvent> events;
};

struct ERState {
    LagSet chosen;
    std::vector<int> remaining; // ascending candidate lags not yet chosen
    LaggedModel model;
    int n_tests = 0; // significance tests run so far (drives per-test seeds)
};

struct ERResult {
    LaggedModel model;
    LagSet lags;
    ERTrace trace;
};

struct ERStepResult {
    ERState state;
    std::optional<EREvent> event;
    bool done = false;
};

namespace detail {

inline uint64_t derive_test_seed(uint64_t seed, uint64_t counter)
{
    uint64_t s = seed + 0x9E3779B97F4A7C15ULL * (counter + 1);
    return splitmix64(s);
}

} // namespace detail

inline void validate_er_config(const TimeSeries &ts, const ERConfig &cfg)
{
    ts.validate();
    require(cfg.d >= 2, "argument", "maximum lag must be >= 2");
    require(cfg.alpha > 0.0 && cfg.alpha < 1.0, "argument", "alpha must lie in (0,1)");
    require(cfg.k_neighbors >= 1, "argument", "k_neighbors must be >= 1");
    require(cfg.n_shuffles >= 20, "argument", "need at least 20 shuffles");
    require(cfg.rel_svd_tol > 0.0, "argument", "rel_svd_tol must be positive");
    if (cfg.max_lag_count) require(*cfg.max_lag_count >= 1, "argument", "max_lag_count must be >= 1");
    const int w = cfg.window_start();
    require(w >= cfg.d, "argument", "evaluation window must start at or after the maximum lag");
    require(w <= ts.n_steps(), "argument", "evaluation window starts beyond the series");
    const int n = ts.n_steps() - w + 1;
    require(n >= 2 * cfg.k_neighbors + 2, "sample",
            "evaluation window has " + std::to_string(n) + " samples; need at least " +
                std::to_string(2 * cfg.k_neighbors + 2));
}

inline ERState initialize(const TimeSeries &ts, const ERConfig &cfg)
{
    validate_er_config(ts, cfg);
    ERState state;
    state.chosen = LagSet({1});
    state.model = fit(ts, state.chosen, cfg.window_start(), cfg.rel_svd_tol);
    state.remaining.reserve(static_cast<size_t>(cfg.d) - 1);
    for (int l = 2; l <= cfg.d; ++l) state.remaining.push_back(l);
    return state;
}

namespace detail {

// Relative one-step residual of a model over the common window. Once this
// drops to the fit tolerance the data is explained to numerical precision
// and information estimates on what remains are meaningless tie noise.
inline double window_residual(const TimeSeries &ts, const LaggedModel &model, int w)
{
    const Eigen::MatrixXd targets = ts.data.middleCols(w, ts.n_steps() - w + 1);
    const Eigen::MatrixXd preds = one_step_predictions(model, ts, w);
    const double scale = targets.norm();
    return scale > 0.0 ? (targets - preds).norm() / scale : 0.0;
}

} // namespace detail

// One BUILD round: fit every chosen+{candidate} model over the common
// window, rank candidates by I(candidate prediction; target | current
// prediction), shuffle-test the argmax, and accept it if significant.
// done=true once candidates are exhausted, the cap is hit, the current
// model already explains the window to numerical precision, or the best
// candidate fails the significance test.
//
// Conditional MI is invariant under shifts measurable from the condition,
// so I(X; Y | Z) = I(X−Z; Y−Z | Z). The estimator sees the shifted clouds:
// once the current model predicts well, the remaining information lives at
// the deviation scale, far below the nearest-neighbor spacing of the raw
// clouds, and only the shifted form resolves it.
inline ERStepResult build_step(const TimeSeries &ts, const ERConfig &cfg, ERState state)
{
    ERStepResult res;
    if (state.remaining.empty() ||
        (cfg.max_lag_count && state.chosen.size() >= *cfg.max_lag_count) ||
        detail::window_residual(ts, state.model, cfg.window_start()) <= cfg.rel_svd_tol) {
        res.state = std::move(state);
        res.done = true;
        return res;
    }
    const int w = cfg.window_start();
    const Eigen::MatrixXd targets = ts.data.middleCols(w, ts.n_steps() - w + 1);
    const Eigen::MatrixXd zpred = one_step_predictions(state.model, ts, w);
    const SampleCloud y = SampleCloud::from_columns(targets - zpred);
    const SampleCloud z = SampleCloud::from_columns(zpred);

    std::vector<LaggedModel> candidates;
    std::vector<SampleCloud> xs;
    candidates.reserve(state.remaining.size());
    xs.reserve(state.remaining.size());
    for (int lag : state.remaining) {
        candidates.push_back(fit(ts, state.chosen.with(lag), w, cfg.rel_svd_tol));
        xs.push_back(SampleCloud::from_columns(
            one_step_predictions(candidates.back(), ts, w) - zpred));
    }
    const std::vector<double> cmis =
        batch_conditional_mutual_information(xs, y, z, cfg.k_neighbors);

    size_t best = 0; // ties resolve to the smaller lag (ascending scan, strict >)
    for (size_t j = 1; j < cmis.size(); ++j)
        if (cmis[j] > cmis[best]) best = j;

    const uint64_t test_seed = detail::derive_test_seed(cfg.seed, static_cast<uint64_t>(state.n_tests));
    state.n_tests += 1;
    const SignificanceResult sig = shuffle_significance(
        xs[best], y, z, cfg.k_neighbors, cfg.n_shuffles, cfg.alpha, test_seed);

    EREvent ev;
    ev.phase = EREvent::Phase::Build;
    ev.lag = state.remaining[best];
    ev.cmi = sig.observed_cmi;
    ev.quantile = sig.shuffle_quantile;
    ev.accepted = sig.significant;
    ev.test_seed = test_seed;
    if (sig.significant) {
        state.chosen = state.chosen.with(ev.lag);
        state.model = std::move(candidates[best]);
        state.remaining.erase(state.remaining.begin() + static_cast<long>(best));
    } else {
        res.done = true;
    }
    ev.lags_after = state.chosen.values();
    res.event = std::move(ev);
    res.state = std::move(state);
    return res;
}

// One PRUNE round: for each removable lag, fit the reduced model and measure
// I(full prediction; target | reduced prediction). The argmin lag is the one
// the full model least depends on; if that residual information is
// insignificant the lag is dropped and the reduced fit becomes the model.
// A reduced model that already explains the window to numerical precision
// drops its lag outright — the shuffle test has nothing real to measure
// there. Lag 1 is never a removal candidate. done=true when the weakest
// lag still carries significant information (or nothing is removable).
inline ERStepResult prune_step(const TimeSeries &ts, const ERConfig &cfg, ERState state)
{
    ERStepResult res;
    if (state.chosen.size() < 2) {
        res.state = std::move(state);
        res.done = true;
        return res;
    }
    const int w = cfg.window_start();
    const Eigen::MatrixXd targets = ts.data.middleCols(w, ts.n_steps() - w + 1);
    const Eigen::MatrixXd fullpred = one_step_predictions(state.model, ts, w);

    // Same shift invariance as in build_step, here relative to each
    // reduced model's prediction. A candidate whose reduced model still
    // explains the window to numerical precision is redundant by
    // construction and takes precedence over CMI comparison (which is
    // degenerate in that regime); among several such, drop the largest lag.
    int best_lag = 0;
    double best_cmi = 0.0;
    bool best_saturated = false;
    LaggedModel best_model;
    SampleCloud best_x, best_y, best_z;
    bool first = true;
    for (int idx = 0; idx < state.chosen.size(); ++idx) {
        const int lag = state.chosen[idx];
        if (lag == 1) continue;
        LaggedModel reduced = fit(ts, state.chosen.without(lag), w, cfg.rel_svd_tol);
        const bool sat = detail::window_residual(ts, reduced, w) <= cfg.rel_svd_tol;
        const Eigen::MatrixXd zpred = one_step_predictions(reduced, ts, w);
        SampleCloud x = SampleCloud::from_columns(fullpred - zpred);
        SampleCloud y = SampleCloud::from_columns(targets - zpred);
        SampleCloud z = SampleCloud::from_columns(zpred);
        const double cmi = conditional_mutual_information(x, y, z, cfg.k_neighbors);
        const bool better = first ||
                            (sat && !best_saturated) ||
                            (sat && best_saturated && lag > best_lag) ||
                            (!sat && !best_saturated && cmi < best_cmi); // ties to smaller lag
        if (better) {
            first = false;
            best_lag = lag;
            best_cmi = cmi;
            best_saturated = sat;
            best_model = std::move(reduced);
            best_x = std::move(x);
            best_y = std::move(y);
            best_z = std::move(z);
        }
    }

    const uint64_t test_seed = detail::derive_test_seed(cfg.seed, static_cast<uint64_t>(state.n_tests));
    state.n_tests += 1;
    const SignificanceResult sig = shuffle_significance(
        best_x, best_y, best_z, cfg.k_neighbors, cfg.n_shuffles, cfg.alpha, test_seed);
    const bool saturated = best_saturated;

    EREvent ev;
    ev.phase = EREvent::Phase::Prune;
    ev.lag = best_lag;
    ev.cmi = sig.observed_cmi;
    ev.quantile = sig.shuffle_quantile;
    ev.accepted = saturated || !sig.significant; // no extra information => remove
    ev.saturated = saturated;
    ev.test_seed = test_seed;
    if (ev.accepted) {
        state.chosen = state.chosen.without(best_lag);
        state.model = std::move(best_model);
    } else {
        res.done = true;
    }
    ev.lags_after = state.chosen.values();
    res.event = std::move(ev);
    res.state = std::move(state);
    return res;
}

// Full Algorithm: INITIALIZE, BUILD to termination, PRUNE to termination,
// final refit on the surviving lag set. Deterministic given cfg.seed.
inline ERResult run(const TimeSeries &ts, const ERConfig &cfg)
{
    ERState state = initialize(ts, cfg);
    ERTrace trace;
    for (;;) {
        ERStepResult step = build_step(ts, cfg, std::move(state));
        state = std::move(step.state);
        if (step.event) trace.events.push_back(std::move(*step.event));
        if (step.done) break;
    }
    for (;;) {
        ERStepResult step = prune_step(ts, cfg, std::move(state));
        state = std::move(step.state);
        if (step.event) trace.events.push_back(std::move(*step.event));
        if (step.done) break;
    }
    ERResult result;
    result.lags = state.chosen;
    result.model = fit(ts, state.chosen, cfg.window_start(), cfg.rel_svd_tol);
    result.trace = std::move(trace);
    return result;
}

} // namespace erdmd
