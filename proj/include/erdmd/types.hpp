#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace erdmd {

// Error with a stable machine-readable code, surfaced by the CLI as JSON.
class error : public std::runtime_error {
  public:
    error(std::string code, const std::string &message)
        : std::runtime_error(message), code_(std::move(code))
    {
    }

    const std::string &code() const { return code_; }

  private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string &code, const std::string &message)
{
    throw error(code, message);
}

inline void require(bool cond, const std::string &code, const std::string &message)
{
    if (!cond) fail(code, message);
}

// An s-dimensional state sampled at a uniform step dt. Column j is the state
// at time t0 + j*dt; columns run 0..n_steps() inclusive.
struct TimeSeries {
    Eigen::MatrixXd data; // s x (N_T + 1)
    double dt = 1.0;
    double t0 = 0.0;

    TimeSeries() = default;
    TimeSeries(Eigen::MatrixXd d, double dt_, double t0_ = 0.0)
        : data(std::move(d)), dt(dt_), t0(t0_)
    {
        validate();
    }

    int state_dim() const { return static_cast<int>(data.rows()); }
    int n_cols() const { return static_cast<int>(data.cols()); }
    // N_T: index of the last column.
    int n_steps() const { return n_cols() - 1; }
    double time_at(int j) const { return t0 + j * dt; }

    void validate() const
    {
        require(data.rows() >= 1 && data.cols() >= 2, "dimension",
                "time series needs s >= 1 and at least two columns");
        require(dt > 0.0, "argument", "time step must be positive");
        require(data.allFinite(), "data", "time series contains non-finite entries");
    }

    // Columns [j_begin, j_end] inclusive as a new series.
    TimeSeries slice_cols(int j_begin, int j_end) const
    {
        require(j_begin >= 0 && j_end <= n_steps() && j_begin < j_end, "argument",
                "slice range out of bounds");
        return TimeSeries(data.middleCols(j_begin, j_end - j_begin + 1), dt, time_at(j_begin));
    }

    // Nearest-index slice by time range.
    TimeSeries slice_time(double t_begin, double t_end) const
    {
        int j0 = static_cast<int>(std::lround((t_begin - t0) / dt));
        int j1 = static_cast<int>(std::lround((t_end - t0) / dt));
        return slice_cols(j0, j1);
    }
};

// Strictly increasing positive lags; lag 1 is always present.
class LagSet {
  public:
    LagSet() = default;
    explicit LagSet(std::vector<int> lags) : lags_(std::move(lags)) { validate(); }

    static LagSet all_up_to(int d)
    {
        require(d >= 1, "argument", "max lag must be >= 1");
        std::vector<int> l(static_cast<size_t>(d));
        for (int i = 0; i < d; ++i) l[static_cast<size_t>(i)] = i + 1;
        return LagSet(std::move(l));
    }

    const std::vector<int> &values() const { return lags_; }
    int size() const { return static_cast<int>(lags_.size()); }
    int max_lag() const { return lags_.back(); }
    int operator[](int k) const { return lags_[static_cast<size_t>(k)]; }

    bool contains(int lag) const
    {
        return std::binary_search(lags_.begin(), lags_.end(), lag);
    }

    LagSet with(int lag) const
    {
        std::vector<int> l = lags_;
        l.insert(std::upper_bound(l.begin(), l.end(), lag), lag);
        return LagSet(std::move(l));
    }

    LagSet without(int lag) const
    {
        std::vector<int> l = lags_;
        l.erase(std::remove(l.begin(), l.end(), lag), l.end());
        return LagSet(std::move(l));
    }

    bool operator==(const LagSet &o) const { return lags_ == o.lags_; }

  private:
    void validate() const
    {
        require(!lags_.empty(), "argument", "lag set is empty");
        require(lags_.front() == 1, "argument", "lag set must contain lag 1");
        for (size_t i = 1; i < lags_.size(); ++i)
            require(lags_[i] > lags_[i - 1], "argument",
                    "lags must be strictly increasing with no duplicates");
    }

    std::vector<int> lags_;
};

// One s x s matrix per lag, ordered as the lags.
struct LaggedModel {
    int state_dim = 0;
    LagSet lags;
    std::vector<Eigen::MatrixXd> matrices;

    LaggedModel() = default;
    LaggedModel(int s, LagSet l, std::vector<Eigen::MatrixXd> mats)
        : state_dim(s), lags(std::move(l)), matrices(std::move(mats))
    {
        validate();
    }

    int max_lag() const { return lags.max_lag(); }

    const Eigen::MatrixXd &matrix_for(int lag) const
    {
        for (int k = 0; k < lags.size(); ++k)
            if (lags[k] == lag) return matrices[static_cast<size_t>(k)];
        fail("argument", "lag " + std::to_string(lag) + " not in model");
    }

    void validate() const
    {
        require(state_dim >= 1, "dimension", "state dimension must be >= 1");
        require(static_cast<int>(matrices.size()) == lags.size(), "dimension",
                "one matrix required per lag");
        for (const auto &m : matrices) {
            require(m.rows() == state_dim && m.cols() == state_dim, "dimension",
                    "lag matrices must be s x s");
            require(m.allFinite(), "data", "lag matrix contains non-finite entries");
        }
    }
};

enum class SpectrumSource { FullCompanion, ReducedInner, ReducedOuter };

inline const char *to_string(SpectrumSource s)
{
    switch (s) {
    case SpectrumSource::FullCompanion: return "full-companion";
    case SpectrumSource::ReducedInner: return "reduced-inner";
    case SpectrumSource::ReducedOuter: return "reduced-outer";
    }
    return "unknown";
}

struct SpectrumResult {
    std::vector<std::complex<double>> eigenvalues;
    SpectrumSource source = SpectrumSource::FullCompanion;
};

} // namespace erdmd
