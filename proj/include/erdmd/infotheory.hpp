#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "erdmd/rng.hpp"
#include "erdmd/types.hpp"

namespace erdmd {

// n points in R^D used as i.i.d.-style samples: row = sample, col = coordinate.
struct SampleCloud {
    Eigen::MatrixXd points;

    SampleCloud() = default;
    explicit SampleCloud(Eigen::MatrixXd pts) : points(std::move(pts))
    {
        require(points.size() == 0 || points.allFinite(), "data",
                "sample cloud contains non-finite entries");
    }
    // Adapter for the time-series convention: columns are samples,
    // state dimensions are coordinates.
    static SampleCloud from_columns(const Eigen::Ref<const Eigen::MatrixXd> &m)
    {
        return SampleCloud(m.transpose());
    }

    int n() const { return static_cast<int>(points.rows()); }
    int dim() const { return static_cast<int>(points.cols()); }
};

struct SignificanceResult {
    double observed_cmi = 0.0;
    double shuffle_quantile = 0.0;
    int n_shuffles = 0;
    double alpha = 0.0;
    bool significant = false;
};

namespace detail {

inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

// psi(m) = -gamma + H_{m-1} for integer m >= 1; table index = argument.
inline std::vector<double> psi_table(int n_max)
{
    std::vector<double> psi(static_cast<size_t>(n_max) + 1, 0.0);
    double harmonic = 0.0;
    for (int m = 1; m <= n_max; ++m) {
        psi[static_cast<size_t>(m)] = -kEulerGamma + harmonic;
        harmonic += 1.0 / m;
    }
    return psi;
}

inline double jitter_unit(int row, int col)
{
    uint64_t s = 0x6a09e667f3bcc909ULL ^ (static_cast<uint64_t>(row) * 0x9E3779B97F4A7C15ULL) ^
                 (static_cast<uint64_t>(col) + 1ULL);
    return (splitmix64(s) >> 11) * 0x1.0p-53 - 0.5;
}

// Standardize each coordinate to zero mean / unit variance, dropping
// zero-variance coordinates. Exactly duplicated points (distance-zero pairs
// the kNN machinery cannot rank) receive a deterministic 1e-12-scale jitter
// keyed on (sample index, kept-coordinate index), identical no matter which
// argument slot the cloud occupies; all other points stay untouched so
// fine-scale structure survives.
inline Eigen::MatrixXd prepare_cloud(const Eigen::MatrixXd &pts)
{
    const int n = static_cast<int>(pts.rows());
    std::vector<int> kept;
    std::vector<double> means, scales;
    for (int c = 0; c < pts.cols(); ++c) {
        const double mean = pts.col(c).mean();
        const double ssq = (pts.col(c).array() - mean).square().sum();
        if (ssq <= 0.0) continue;
        kept.push_back(c);
        means.push_back(mean);
        scales.push_back(std::sqrt(ssq / (n - 1)));
    }
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(kept.size()));
    for (size_t c = 0; c < kept.size(); ++c)
        out.col(static_cast<Eigen::Index>(c)) = (pts.col(kept[c]).array() - means[c]) / scales[c];

    if (out.cols() == 0) return out;
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    std::sort(idx.begin(), idx.end(), [&out](int a, int b) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            if (out(a, c) < out(b, c)) return true;
            if (out(a, c) > out(b, c)) return false;
        }
        return a < b;
    });
    int head = idx[0]; // first of each duplicate run stays unjittered
    for (int r = 1; r < n; ++r) {
        const int i = idx[static_cast<size_t>(r)];
        if ((out.row(i).array() == out.row(head).array()).all()) {
            for (Eigen::Index c = 0; c < out.cols(); ++c)
                out(i, c) += 1e-12 * jitter_unit(i, static_cast<int>(c));
        } else {
            head = i;
        }
    }
    return out;
}

inline void maxnorm_row(const Eigen::MatrixXd &pts, int i, Eigen::VectorXd &dist)
{
    const int n = static_cast<int>(pts.rows());
    if (pts.cols() == 0) {
        dist.setZero(n);
        return;
    }
    dist = (pts.rowwise() - pts.row(i)).cwiseAbs().rowwise().maxCoeff();
}

// Shared machinery for the KSG-style estimates: holds the prepared Y and Z
// clouds (Z may be empty) and, when memory allows, cached pairwise max-norm
// distance matrices, so that many X clouds (selection-loop candidates,
// shuffle permutations) are evaluated against the same conditional structure.
class CmiWorkspace {
  public:
    CmiWorkspace(const SampleCloud &y, const SampleCloud &z, int k)
        : n_(y.n()), k_(k), y_(prepare_cloud(y.points)), z_(prepare_cloud(z.points)),
          z_empty_(z_.cols() == 0), psi_(psi_table(std::max(n_, k) + 1))
    {
        require(k_ >= 1, "argument", "k_neighbors must be >= 1");
        require(z.n() == 0 || z.n() == n_, "sample", "conditioning cloud sample count differs");
        require(n_ >= 2 * k_ + 2, "sample",
                "need at least 2k+2 samples, got " + std::to_string(n_));
        // Cache the O(n^2) distance tables below ~512 MB; stream rows otherwise.
        cache_ = static_cast<long>(n_) * n_ * 16 <= (512L << 20);
        if (cache_) {
            dyz_.resize(n_, n_);
            if (!z_empty_) dz_.resize(n_, n_);
            Eigen::VectorXd dy(n_), dz(n_);
            for (int i = 0; i < n_; ++i) {
                maxnorm_row(y_, i, dy);
                if (!z_empty_) {
                    maxnorm_row(z_, i, dz);
                    dz_.col(i) = dz;
                    dyz_.col(i) = dy.cwiseMax(dz);
                } else {
                    dyz_.col(i) = dy;
                }
            }
        }
    }

    int n() const { return n_; }

    // I(X;Y|Z) for a raw (unprepared) X cloud with matching sample count.
    double evaluate(const Eigen::MatrixXd &x_raw) const
    {
        return std::max(0.0, evaluate_signed(x_raw));
    }

    // The estimator before the nonnegativity clip; its permutation null
    // centers at zero, which the clipped value cannot.
    double evaluate_signed(const Eigen::MatrixXd &x_raw) const
    {
        const Eigen::MatrixXd x = prepare_cloud(x_raw);
        const double inf = std::numeric_limits<double>::infinity();
        Eigen::VectorXd dx(n_), dy(n_), dzv(n_);
        std::vector<std::pair<double, int>> order(static_cast<size_t>(n_));
        double acc = 0.0;
        for (int i = 0; i < n_; ++i) {
            maxnorm_row(x, i, dx);
            const double *dyz_row;
            const double *dz_row = nullptr;
            if (cache_) {
                dyz_row = dyz_.col(i).data();
                if (!z_empty_) dz_row = dz_.col(i).data();
            } else {
                maxnorm_row(y_, i, dy);
                if (!z_empty_) {
                    maxnorm_row(z_, i, dzv);
                    dy = dy.cwiseMax(dzv);
                    dz_row = dzv.data();
                }
                dyz_row = dy.data();
            }
            for (int j = 0; j < n_; ++j)
                order[static_cast<size_t>(j)] = {std::max(dx(j), dyz_row[j]), j};
            order[static_cast<size_t>(i)].first = inf; // exclude self
            std::nth_element(order.begin(), order.begin() + (k_ - 1), order.end());
            const double eps = order[static_cast<size_t>(k_ - 1)].first;

            int n_xz = 0, n_yz = 0, n_z = 0;
            if (z_empty_) {
                for (int j = 0; j < n_; ++j) {
                    if (j == i) continue;
                    n_xz += dx(j) < eps;
                    n_yz += dyz_row[j] < eps;
                }
                n_z = n_ - 1; // psi(n) term: the MI special case of the CMI formula
            } else {
                for (int j = 0; j < n_; ++j) {
                    if (j == i) continue;
                    n_xz += std::max(dx(j), dz_row[j]) < eps;
                    n_yz += dyz_row[j] < eps;
                    n_z += dz_row[j] < eps;
                }
            }
            acc += psi_[static_cast<size_t>(n_xz + 1)] + psi_[static_cast<size_t>(n_yz + 1)] -
                   psi_[static_cast<size_t>(n_z + 1)];
        }
        return psi_[static_cast<size_t>(k_)] - acc / n_;
    }

  private:
    int n_, k_;
    Eigen::MatrixXd y_, z_;
    bool z_empty_;
    bool cache_ = false;
    Eigen::MatrixXd dyz_, dz_;
    std::vector<double> psi_;
};

inline void check_pair(const SampleCloud &x, const SampleCloud &y)
{
    require(x.n() == y.n(), "sample",
            "sample counts differ: " + std::to_string(x.n()) + " vs " + std::to_string(y.n()));
    require(x.dim() >= 1 && y.dim() >= 1, "sample", "clouds need at least one coordinate");
}

} // namespace detail

// KSG estimate (variant 1, max-norm) of I(X;Y) in nats, clipped at zero.
inline double mutual_information(const SampleCloud &x, const SampleCloud &y, int k = 5)
{
    detail::check_pair(x, y);
    detail::CmiWorkspace ws(y, SampleCloud(Eigen::MatrixXd(x.n(), 0)), k);
    return ws.evaluate(x.points);
}

// Frenzel-Pompe-style kNN estimate of I(X;Y|Z) in nats: neighbor radii from
// the joint (X,Y,Z) space, counts in the (X,Z), (Y,Z), (Z) marginals. With a
// zero-column Z this reduces exactly to mutual_information.
inline double conditional_mutual_information(const SampleCloud &x, const SampleCloud &y,
                                             const SampleCloud &z, int k = 5)
{
    detail::check_pair(x, y);
    detail::CmiWorkspace ws(y, z, k);
    return ws.evaluate(x.points);
}

// Many X clouds against one (Y,Z): shares the prepared conditional structure.
inline std::vector<double> batch_conditional_mutual_information(
    const std::vector<SampleCloud> &xs, const SampleCloud &y, const SampleCloud &z, int k = 5)
{
    std::vector<double> out;
    out.reserve(xs.size());
    if (xs.empty()) return out;
    for (const auto &x : xs) detail::check_pair(x, y);
    detail::CmiWorkspace ws(y, z, k);
    for (const auto &x : xs) out.push_back(ws.evaluate(x.points));
    return out;
}

// Permutation test of I(X;Y|Z) > 0: the row order of x alone is shuffled
// (destroying the X association, preserving all marginals) n_shuffles times
// with independent counter-based streams (seed, shuffle index). The
// comparison threshold is the ceil((1-alpha)(B+1))-th order statistic of the
// B shuffled values (capped at the maximum), the standard permutation-test
// quantile; with B=20, alpha=0.05 this is the maximum shuffled value.
inline SignificanceResult shuffle_significance(const SampleCloud &x, const SampleCloud &y,
                                               const SampleCloud &z, int k, int n_shuffles,
                                               double alpha, uint64_t seed)
{
    require(n_shuffles >= 20, "argument", "need at least 20 shuffles");
    require(alpha > 0.0 && alpha < 1.0, "argument", "alpha must lie in (0,1)");
    detail::check_pair(x, y);
    detail::CmiWorkspace ws(y, z, k);

    SignificanceResult result;
    result.n_shuffles = n_shuffles;
    result.alpha = alpha;
    result.observed_cmi = ws.evaluate(x.points);

    const int n = x.n();
    std::vector<double> shuffled(static_cast<size_t>(n_shuffles));
    Eigen::MatrixXd x_perm(n, x.dim());
    for (int b = 0; b < n_shuffles; ++b) {
        RngStream stream(seed, static_cast<uint64_t>(b));
        const std::vector<int> perm = stream.permutation(n);
        for (int i = 0; i < n; ++i) x_perm.row(i) = x.points.row(perm[static_cast<size_t>(i)]);
        shuffled[static_cast<size_t>(b)] = ws.evaluate(x_perm);
    }
    std::sort(shuffled.begin(), shuffled.end());
    const int idx = std::min(n_shuffles,
                             static_cast<int>(std::ceil((1.0 - alpha) * (n_shuffles + 1))));
    result.shuffle_quantile = shuffled[static_cast<size_t>(idx - 1)];
    result.significant = result.observed_cmi > result.shuffle_quantile;
    return result;
}

} // namespace erdmd
