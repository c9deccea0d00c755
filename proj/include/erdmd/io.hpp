#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "erdmd/types.hpp"

namespace erdmd {

using json = nlohmann::ordered_json;

namespace detail {

// %.17g round-trips doubles exactly through decimal text.
inline std::string fmt_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string &line)
{
    std::vector<std::string> fields;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) fields.push_back(cur);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

} // namespace detail

inline std::ofstream open_out(const std::filesystem::path &path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    require(out.good(), "io", "cannot open " + path.string() + " for writing");
    return out;
}

inline std::ifstream open_in(const std::filesystem::path &path)
{
    std::ifstream in(path);
    require(in.good(), "io", "cannot open " + path.string() + " for reading");
    return in;
}

// CSV layout: header "time,y0,...,y{s-1}", one row per snapshot, full-precision
// decimal values. The reader recovers dt from the first two time entries.
inline void write_timeseries_csv(const std::filesystem::path &path, const TimeSeries &ts)
{
    ts.validate();
    std::ofstream out = open_out(path);
    out << "time";
    for (int i = 0; i < ts.state_dim(); ++i) out << ",y" << i;
    out << "\n";
    for (int j = 0; j <= ts.n_steps(); ++j) {
        out << detail::fmt_double(ts.time_at(j));
        for (int i = 0; i < ts.state_dim(); ++i) out << ',' << detail::fmt_double(ts.data(i, j));
        out << "\n";
    }
    require(out.good(), "io", "write failed for " + path.string());
}

inline TimeSeries read_timeseries_csv(const std::filesystem::path &path)
{
    std::ifstream in = open_in(path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "io", path.string() + " is empty");
    const size_t n_fields = detail::split_csv_line(line).size();
    require(n_fields >= 2, "io", path.string() + " needs a time column and one state column");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = detail::split_csv_line(line);
        require(fields.size() == n_fields, "io",
                path.string() + ": ragged row " + std::to_string(rows.size() + 2));
        std::vector<double> row(fields.size());
        for (size_t i = 0; i < fields.size(); ++i) {
            try {
                row[i] = std::stod(fields[i]);
            } catch (const std::exception &) {
                fail("io", path.string() + ": non-numeric field '" + fields[i] + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    require(rows.size() >= 2, "io", path.string() + " needs at least two snapshots");

    const int s = static_cast<int>(n_fields) - 1;
    const int n_cols = static_cast<int>(rows.size());
    Eigen::MatrixXd data(s, n_cols);
    for (int j = 0; j < n_cols; ++j)
        for (int i = 0; i < s; ++i) data(i, j) = rows[static_cast<size_t>(j)][static_cast<size_t>(i) + 1];
    const double t0 = rows[0][0];
    const double dt = rows[1][0] - t0;
    require(dt > 0.0, "io", path.string() + ": time column must be strictly increasing");
    return TimeSeries(std::move(data), dt, t0);
}

inline json matrix_to_json(const Eigen::MatrixXd &m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json &j)
{
    require(j.is_array() && !j.empty() && j[0].is_array(), "io",
            "matrix JSON must be a nested array");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        require(j[static_cast<size_t>(i)].size() == static_cast<size_t>(cols), "io",
                "ragged matrix JSON");
        for (Eigen::Index c = 0; c < cols; ++c)
            m(i, c) = j[static_cast<size_t>(i)][static_cast<size_t>(c)].get<double>();
    }
    return m;
}

inline json model_to_json(const LaggedModel &model)
{
    model.validate();
    json j;
    j["state_dim"] = model.state_dim;
    j["lags"] = model.lags.values();
    json mats = json::array();
    for (const auto &m : model.matrices) mats.push_back(matrix_to_json(m));
    j["matrices"] = std::move(mats);
    return j;
}

inline LaggedModel model_from_json(const json &j)
{
    require(j.contains("state_dim") && j.contains("lags") && j.contains("matrices"), "io",
            "model JSON needs state_dim, lags, matrices");
    const int s = j["state_dim"].get<int>();
    LagSet lags(j["lags"].get<std::vector<int>>());
    std::vector<Eigen::MatrixXd> mats;
    for (const auto &m : j["matrices"]) mats.push_back(matrix_from_json(m));
    LaggedModel model(s, std::move(lags), std::move(mats));
    model.validate();
    return model;
}

inline void write_json(const std::filesystem::path &path, const json &j)
{
    std::ofstream out = open_out(path);
    out << j.dump(2) << "\n";
    require(out.good(), "io", "write failed for " + path.string());
}

inline json read_json(const std::filesystem::path &path)
{
    std::ifstream in = open_in(path);
    json j;
    try {
        in >> j;
    } catch (const std::exception &e) {
        fail("io", path.string() + ": " + e.what());
    }
    return j;
}

inline void write_eigenvalues_csv(const std::filesystem::path &path,
                                  const std::vector<SpectrumResult> &spectra)
{
    std::ofstream out = open_out(path);
    out << "re,im,source\n";
    for (const auto &spectrum : spectra)
        for (const auto &ev : spectrum.eigenvalues)
            out << detail::fmt_double(ev.real()) << ',' << detail::fmt_double(ev.imag()) << ','
                << to_string(spectrum.source) << "\n";
    require(out.good(), "io", "write failed for " + path.string());
}

inline std::vector<SpectrumResult> read_eigenvalues_csv(const std::filesystem::path &path)
{
    std::ifstream in = open_in(path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "io", path.string() + " is empty");
    std::vector<SpectrumResult> spectra;
    auto slot = [&spectra](SpectrumSource src) -> SpectrumResult & {
        for (auto &sp : spectra)
            if (sp.source == src) return sp;
        spectra.push_back(SpectrumResult{{}, src});
        return spectra.back();
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = detail::split_csv_line(line);
        require(fields.size() == 3, "io", path.string() + ": expected re,im,source rows");
        SpectrumSource src;
        if (fields[2] == "full-companion") src = SpectrumSource::FullCompanion;
        else if (fields[2] == "reduced-inner") src = SpectrumSource::ReducedInner;
        else if (fields[2] == "reduced-outer") src = SpectrumSource::ReducedOuter;
        else fail("io", path.string() + ": unknown spectrum source '" + fields[2] + "'");
        slot(src).eigenvalues.emplace_back(std::stod(fields[0]), std::stod(fields[1]));
    }
    return spectra;
}

// JSON rendering of a series, for --format json: {"t0":, "dt":, "time": [...],
// "data": row-major (state dim x snapshots)}.
inline void write_timeseries_json(const std::filesystem::path &path, const TimeSeries &ts)
{
    ts.validate();
    json j;
    j["t0"] = ts.t0;
    j["dt"] = ts.dt;
    json time = json::array();
    for (int c = 0; c <= ts.n_steps(); ++c) time.push_back(ts.time_at(c));
    j["time"] = std::move(time);
    j["data"] = matrix_to_json(ts.data);
    write_json(path, j);
}

inline TimeSeries read_timeseries_json(const std::filesystem::path &path)
{
    const json j = read_json(path);
    require(j.contains("t0") && j.contains("dt") && j.contains("data"), "io",
            path.string() + " needs t0, dt, data");
    return TimeSeries(matrix_from_json(j["data"]), j["dt"].get<double>(), j["t0"].get<double>());
}

} // namespace erdmd
