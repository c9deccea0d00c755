#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include "erdmd/types.hpp"

namespace erdmd {

// Guard for dense nonsymmetric eigensolves.
inline constexpr int kMaxDenseEigenDim = 5000;

// Aligned least-squares blocks for a lagged model. Column j of `targets` is
// y_{m+j}; the k-th s-row block of `regressors` (top block first) holds
// y_{m+j-l} for the k-th *largest* lag l, so that the stacked coefficient
// matrix reads (K_{l_max} ... K_1).
struct RegressionBlocks {
    Eigen::MatrixXd targets;    // s x n_samples
    Eigen::MatrixXd regressors; // (s * N_L) x n_samples
    int target_start = 0;

    int n_samples() const { return static_cast<int>(targets.cols()); }
};

inline RegressionBlocks build_regression(const TimeSeries &ts, const LagSet &lags,
                                         int target_start)
{
    ts.validate();
    const int s = ts.state_dim();
    const int n_t = ts.n_steps();
    const int n_lags = lags.size();
    require(target_start >= lags.max_lag(), "lag-underflow",
            "target_start " + std::to_string(target_start) + " precedes max lag " +
                std::to_string(lags.max_lag()));
    require(target_start <= n_t, "argument", "target_start beyond end of series");

    const int n = n_t - target_start + 1;
    RegressionBlocks blocks;
    blocks.target_start = target_start;
    blocks.targets = ts.data.middleCols(target_start, n);
    blocks.regressors.resize(static_cast<Eigen::Index>(s) * n_lags, n);
    for (int k = 0; k < n_lags; ++k) {
        const int lag = lags[n_lags - 1 - k]; // largest lag in the top block
        blocks.regressors.middleRows(static_cast<Eigen::Index>(k) * s, s) =
            ts.data.middleCols(target_start - lag, n);
    }
    return blocks;
}

// Minimum-Frobenius-norm least-squares solution of K * regressors = targets,
// via truncated-SVD pseudo-inversion of the regressor block. Singular values
// below rel_svd_tol * sigma_max are dropped. The default rejects problems
// with fewer samples than unknown columns; allow_underdetermined opts into
// the min-norm interpolating solution (the all-lags baseline needs it).
inline LaggedModel fit(const TimeSeries &ts, const LagSet &lags, int target_start,
                       double rel_svd_tol = 1e-10, bool allow_underdetermined = false)
{
    require(rel_svd_tol > 0.0, "argument", "rel_svd_tol must be positive");
    RegressionBlocks blocks = build_regression(ts, lags, target_start);
    const int s = ts.state_dim();
    const int n_lags = lags.size();
    if (!allow_underdetermined)
        require(blocks.n_samples() >= s * n_lags, "underdetermined",
                std::to_string(blocks.n_samples()) + " samples cannot determine " +
                    std::to_string(s * n_lags) + " regressor columns");

    // Solve R^T K^T = T^T column-wise; the SVD path avoids squaring the
    // condition number the way the normal equations would.
    Eigen::BDCSVD<Eigen::MatrixXd> svd(blocks.regressors.transpose(),
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(rel_svd_tol);
    Eigen::MatrixXd stacked = svd.solve(blocks.targets.transpose()).transpose();

    std::vector<Eigen::MatrixXd> mats(static_cast<size_t>(n_lags));
    for (int k = 0; k < n_lags; ++k) {
        // Block k of the stacked solution belongs to the k-th largest lag.
        mats[static_cast<size_t>(n_lags - 1 - k)] =
            stacked.middleCols(static_cast<Eigen::Index>(k) * s, s);
    }
    return LaggedModel(s, lags, std::move(mats));
}

// One-step prediction from true history: column H-l of `history` is the
// state l steps back, so the last column is the most recent state.
inline Eigen::VectorXd predict_one(const LaggedModel &model,
                                   const Eigen::Ref<const Eigen::MatrixXd> &history)
{
    require(history.rows() == model.state_dim, "dimension",
            "history rows must equal the model state dimension");
    const int h = static_cast<int>(history.cols());
    require(h >= model.max_lag(), "lag-underflow",
            "history shorter than the maximum model lag");
    Eigen::VectorXd next = Eigen::VectorXd::Zero(model.state_dim);
    for (int k = 0; k < model.lags.size(); ++k)
        next.noalias() += model.matrices[static_cast<size_t>(k)] * history.col(h - model.lags[k]);
    return next;
}

// Predictions over targets [target_start, N_T] with every input taken from
// the true series (open-loop one-step diagnostic; also the model-output
// matrix K(l) Y_-(l) used by the selection loop).
inline Eigen::MatrixXd one_step_predictions(const LaggedModel &model, const TimeSeries &ts,
                                            int target_start)
{
    RegressionBlocks blocks = build_regression(ts, model.lags, target_start);
    const int s = model.state_dim;
    const int n_lags = model.lags.size();
    Eigen::MatrixXd pred = Eigen::MatrixXd::Zero(s, blocks.n_samples());
    for (int k = 0; k < n_lags; ++k)
        pred.noalias() += model.matrices[static_cast<size_t>(n_lags - 1 - k)] *
                          blocks.regressors.middleRows(static_cast<Eigen::Index>(k) * s, s);
    return pred;
}

// Frobenius norm of (targets - K * regressors) on the fitting window.
inline double training_residual(const LaggedModel &model, const TimeSeries &ts,
                                int target_start)
{
    RegressionBlocks blocks = build_regression(ts, model.lags, target_start);
    return (blocks.targets - one_step_predictions(model, ts, target_start)).norm();
}

// Closed-loop run: columns [0, seed_end) are copied true data, columns
// [seed_end, horizon_end] are model outputs fed back as inputs. Reconstruction
// while horizon_end <= N_T; forecast_steps extends past the data.
inline TimeSeries reconstruct(const LaggedModel &model, const TimeSeries &ts, int seed_end,
                              int horizon_end, int forecast_steps = 0)
{
    ts.validate();
    require(model.state_dim == ts.state_dim(), "dimension",
            "model and series state dimensions differ");
    require(seed_end >= model.max_lag(), "lag-underflow",
            "seed must cover the maximum model lag");
    require(horizon_end >= seed_end && horizon_end <= ts.n_steps(), "argument",
            "horizon must lie within the data; use forecast_steps to extend");
    require(forecast_steps >= 0, "argument", "forecast_steps must be nonnegative");

    const int s = model.state_dim;
    const int last = horizon_end + forecast_steps;
    Eigen::MatrixXd out(s, last + 1);
    out.leftCols(seed_end) = ts.data.leftCols(seed_end);
    for (int j = seed_end; j <= last; ++j) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(s);
        for (int k = 0; k < model.lags.size(); ++k)
            next.noalias() += model.matrices[static_cast<size_t>(k)] * out.col(j - model.lags[k]);
        out.col(j) = next;
    }
    return TimeSeries(std::move(out), ts.dt, ts.t0);
}

// Block companion form of the one-step Koopman operator: superdiagonal
// identity blocks, bottom block row carrying K_l at block column l_max - l
// (rightmost block is K_1, leftmost is K_{l_max}).
inline Eigen::MatrixXd companion_matrix(const LaggedModel &model)
{
    model.validate();
    const int s = model.state_dim;
    const int l_max = model.max_lag();
    const Eigen::Index dim = static_cast<Eigen::Index>(s) * l_max;
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i + 1 < l_max; ++i)
        comp.block(static_cast<Eigen::Index>(i) * s, static_cast<Eigen::Index>(i + 1) * s, s, s) =
            Eigen::MatrixXd::Identity(s, s);
    for (int k = 0; k < model.lags.size(); ++k) {
        const int lag = model.lags[k];
        comp.block(static_cast<Eigen::Index>(l_max - 1) * s,
                   static_cast<Eigen::Index>(l_max - lag) * s, s, s) =
            model.matrices[static_cast<size_t>(k)];
    }
    return comp;
}

namespace detail {

inline void sort_by_magnitude_then_angle(std::vector<std::complex<double>> &vals)
{
    std::sort(vals.begin(), vals.end(), [](const auto &a, const auto &b) {
        const double ma = std::abs(a), mb = std::abs(b);
        if (ma != mb) return ma > mb;
        return std::arg(a) < std::arg(b);
    });
}

} // namespace detail

inline SpectrumResult full_spectrum(const LaggedModel &model)
{
    const Eigen::Index dim = static_cast<Eigen::Index>(model.state_dim) * model.max_lag();
    require(dim <= kMaxDenseEigenDim, "size",
            "companion dimension " + std::to_string(dim) + " exceeds the dense eigensolver guard");
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion_matrix(model),
                                               /*computeEigenvectors=*/false);
    SpectrumResult result;
    result.source = SpectrumSource::FullCompanion;
    result.eigenvalues.reserve(static_cast<size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) result.eigenvalues.push_back(solver.eigenvalues()(i));
    detail::sort_by_magnitude_then_angle(result.eigenvalues);
    return result;
}

namespace detail {

// std::pow(complex, exponent) goes through exp(y*log(z)) and yields NaN at
// z=0, y=0; integer exponents deserve the exact recurrence.
inline std::complex<double> ipow(std::complex<double> z, int n)
{
    std::complex<double> acc(1.0, 0.0);
    for (std::complex<double> base = z; n > 0; n >>= 1, base *= base)
        if (n & 1) acc *= base;
    return acc;
}

} // namespace detail

// p_a(z) = det( sum_k K_{l_k} z^{l_max - l_k} - z^{l_max} I ).
inline std::complex<double> eval_char_poly(const LaggedModel &model, std::complex<double> z)
{
    const int s = model.state_dim;
    const int l_max = model.max_lag();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(s, s);
    for (int k = 0; k < model.lags.size(); ++k)
        m += model.matrices[static_cast<size_t>(k)] * detail::ipow(z, l_max - model.lags[k]);
    m -= detail::ipow(z, l_max) * Eigen::MatrixXcd::Identity(s, s);
    return Eigen::PartialPivLU<Eigen::MatrixXcd>(m).determinant();
}

// |p_a(z)| normalized by the coefficient-magnitude scale: the Hadamard bound
// of the evaluated matrix with all cancellation removed (every term entering
// at its absolute size). The bound of the evaluated matrix itself would be
// useless here — for s=1 it IS |p_a(z)|.
inline double char_poly_residual(const LaggedModel &model, std::complex<double> z)
{
    const int s = model.state_dim;
    const int l_max = model.max_lag();
    const double az = std::abs(z);
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(s, s);
    Eigen::VectorXd row_bound = Eigen::VectorXd::Constant(s, std::pow(az, l_max));
    for (int k = 0; k < model.lags.size(); ++k) {
        const Eigen::MatrixXd &kk = model.matrices[static_cast<size_t>(k)];
        m += kk * detail::ipow(z, l_max - model.lags[k]);
        row_bound += kk.rowwise().norm() * std::pow(az, l_max - model.lags[k]);
    }
    m -= detail::ipow(z, l_max) * Eigen::MatrixXcd::Identity(s, s);
    const double scale = row_bound.prod();
    const double det = std::abs(Eigen::PartialPivLU<Eigen::MatrixXcd>(m).determinant());
    return det / std::max(scale, 1e-300);
}

// All roots of det( sum_i A_i z^{d_i} [- z^m I] ) via block-companion
// linearization, falling back to a generalized eigensolve when the leading
// coefficient block is singular. The caller performs any z = z~^{1/p}
// de-substitution afterwards.
inline SpectrumResult matrix_poly_roots(
    const std::vector<std::pair<int, Eigen::MatrixXd>> &coeffs,
    std::optional<int> monic_leading_degree = std::nullopt,
    SpectrumSource source = SpectrumSource::ReducedInner)
{
    require(!coeffs.empty(), "argument", "matrix polynomial needs at least one term");
    const int s = static_cast<int>(coeffs.front().second.rows());
    int max_deg = monic_leading_degree.value_or(0);
    std::vector<int> degrees;
    for (const auto &[deg, mat] : coeffs) {
        require(deg >= 0, "argument", "polynomial degrees must be nonnegative");
        require(mat.rows() == s && mat.cols() == s, "dimension",
                "all coefficient matrices must be the same square size");
        max_deg = std::max(max_deg, deg);
        degrees.push_back(deg);
    }
    if (monic_leading_degree) degrees.push_back(*monic_leading_degree);
    std::sort(degrees.begin(), degrees.end());
    degrees.erase(std::unique(degrees.begin(), degrees.end()), degrees.end());
    require(degrees.size() >= 2, "argument", "need at least two distinct degrees");

    const int d = max_deg;
    require(static_cast<long>(d) * s <= kMaxDenseEigenDim, "size",
            "linearization dimension exceeds the dense eigensolver guard");

    std::vector<Eigen::MatrixXd> c(static_cast<size_t>(d) + 1, Eigen::MatrixXd::Zero(s, s));
    for (const auto &[deg, mat] : coeffs) c[static_cast<size_t>(deg)] += mat;
    if (monic_leading_degree)
        c[static_cast<size_t>(*monic_leading_degree)] -= Eigen::MatrixXd::Identity(s, s);

    // A pencil whose determinant vanishes identically has no discrete roots;
    // probe det at fixed generic points to detect that.
    {
        const std::complex<double> probes[] = {{0.7313, 0.4821}, {-1.1347, 0.2899}, {0.3071, -0.9337}};
        bool all_zero = true;
        for (const auto &z : probes) {
            Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(s, s);
            for (int deg = 0; deg <= d; ++deg)
                m += c[static_cast<size_t>(deg)] * std::pow(z, static_cast<double>(deg));
            double hadamard = 1.0;
            for (int i = 0; i < s; ++i) hadamard *= m.row(i).norm();
            if (std::abs(Eigen::PartialPivLU<Eigen::MatrixXcd>(m).determinant()) >
                1e-12 * std::max(hadamard, 1e-300)) {
                all_zero = false;
                break;
            }
        }
        require(!all_zero, "degenerate-pencil", "determinant vanishes identically");
    }

    const Eigen::Index dim = static_cast<Eigen::Index>(d) * s;
    const Eigen::MatrixXd &lead = c[static_cast<size_t>(d)];
    Eigen::JacobiSVD<Eigen::MatrixXd> lead_svd(lead);
    const bool lead_invertible =
        lead_svd.singularValues()(s - 1) > 1e-12 * lead_svd.singularValues()(0);

    SpectrumResult result;
    result.source = source;
    if (lead_invertible) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lead_lu(lead);
        Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(dim, dim);
        for (int i = 0; i + 1 < d; ++i)
            comp.block(static_cast<Eigen::Index>(i) * s, static_cast<Eigen::Index>(i + 1) * s, s,
                       s) = Eigen::MatrixXd::Identity(s, s);
        for (int j = 0; j < d; ++j)
            comp.block(static_cast<Eigen::Index>(d - 1) * s, static_cast<Eigen::Index>(j) * s, s,
                       s) = -lead_lu.solve(c[static_cast<size_t>(j)]);
        Eigen::EigenSolver<Eigen::MatrixXd> solver(comp, false);
        for (Eigen::Index i = 0; i < dim; ++i)
            result.eigenvalues.push_back(solver.eigenvalues()(i));
    } else {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::MatrixXd b = Eigen::MatrixXd::Identity(dim, dim);
        for (int i = 0; i + 1 < d; ++i)
            a.block(static_cast<Eigen::Index>(i) * s, static_cast<Eigen::Index>(i + 1) * s, s, s) =
                Eigen::MatrixXd::Identity(s, s);
        for (int j = 0; j < d; ++j)
            a.block(static_cast<Eigen::Index>(d - 1) * s, static_cast<Eigen::Index>(j) * s, s, s) =
                -c[static_cast<size_t>(j)];
        b.block(static_cast<Eigen::Index>(d - 1) * s, static_cast<Eigen::Index>(d - 1) * s, s, s) =
            lead;
        Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> solver(a, b, false);
        double beta_scale = 0.0;
        for (Eigen::Index i = 0; i < dim; ++i)
            beta_scale = std::max(beta_scale, std::abs(solver.betas()(i)));
        for (Eigen::Index i = 0; i < dim; ++i) {
            const double beta = solver.betas()(i);
            if (std::abs(beta) <= 1e-10 * beta_scale) continue; // infinite eigenvalue
            const std::complex<double> root = solver.alphas()(i) / beta;
            if (std::isfinite(root.real()) && std::isfinite(root.imag()))
                result.eigenvalues.push_back(root);
        }
    }
    detail::sort_by_magnitude_then_angle(result.eigenvalues);
    return result;
}

// All n complex n-th roots of z, principal root first.
inline std::vector<std::complex<double>> nth_roots(std::complex<double> z, int n)
{
    require(n >= 1, "argument", "root order must be >= 1");
    std::vector<std::complex<double>> roots(static_cast<size_t>(n));
    const double r = std::pow(std::abs(z), 1.0 / n);
    const double theta = std::arg(z);
    for (int m = 0; m < n; ++m) {
        const double phi = (theta + 2.0 * M_PI * m) / n;
        roots[static_cast<size_t>(m)] = std::polar(r, phi);
    }
    return roots;
}

// Inner reduced polynomial: keep the `count` largest lags of the model, i.e.
// the lowest powers z^{l_max - l} of the characteristic polynomial, which
// dominate inside the unit circle under strong lag separation. With
// substitution power p = min nonzero exponent, the kept terms become a low-
// degree matrix polynomial in z~ = z^p (exponents rounded to the nearest
// multiple of p); its roots are mapped back through all p-th roots.
inline SpectrumResult reduced_inner_spectrum(const LaggedModel &model, int count)
{
    const int n_lags = model.lags.size();
    require(count >= 2 && count <= n_lags, "argument",
            "inner reduction needs between 2 and all of the model's lags");
    const int l_max = model.max_lag();
    int p = 0;
    for (int k = n_lags - count; k < n_lags; ++k) {
        const int e = l_max - model.lags[k];
        if (e > 0) p = p == 0 ? e : std::min(p, e);
    }
    std::vector<std::pair<int, Eigen::MatrixXd>> coeffs;
    for (int k = n_lags - count; k < n_lags; ++k) {
        const int e = l_max - model.lags[k];
        const int deg = static_cast<int>(std::lround(static_cast<double>(e) / p));
        coeffs.emplace_back(deg, model.matrices[static_cast<size_t>(k)]);
    }
    const SpectrumResult pencil = matrix_poly_roots(coeffs, std::nullopt, SpectrumSource::ReducedInner);
    SpectrumResult result;
    result.source = SpectrumSource::ReducedInner;
    result.eigenvalues.reserve(pencil.eigenvalues.size() * static_cast<size_t>(p));
    for (const auto &root : pencil.eigenvalues)
        for (const auto &z : nth_roots(root, p)) result.eigenvalues.push_back(z);
    detail::sort_by_magnitude_then_angle(result.eigenvalues);
    return result;
}

// Outer reduced polynomial: keep the `count` smallest lags, i.e. the highest
// powers of the characteristic polynomial, dominant outside the unit circle:
// det( z^m I - sum_{kept} K_l z^{m-l} ) with m the largest kept lag.
inline SpectrumResult reduced_outer_spectrum(const LaggedModel &model, int count)
{
    require(count >= 1 && count <= model.lags.size(), "argument",
            "outer reduction needs between 1 and all of the model's lags");
    const int m = model.lags[count - 1];
    std::vector<std::pair<int, Eigen::MatrixXd>> coeffs;
    for (int k = 0; k < count; ++k)
        coeffs.emplace_back(m - model.lags[k], model.matrices[static_cast<size_t>(k)]);
    return matrix_poly_roots(coeffs, m, SpectrumSource::ReducedOuter);
}

inline std::vector<std::pair<int, double>> lag_matrix_norms(const LaggedModel &model)
{
    std::vector<std::pair<int, double>> norms;
    norms.reserve(static_cast<size_t>(model.lags.size()));
    for (int k = 0; k < model.lags.size(); ++k)
        norms.emplace_back(model.lags[k], model.matrices[static_cast<size_t>(k)].norm());
    return norms;
}

} // namespace erdmd
