#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "erdmd/rng.hpp"
#include "erdmd/types.hpp"

namespace erdmd {

struct ODESpec {
    std::string name; // lorenz63 | rossler
    std::map<std::string, double> params;
    Eigen::VectorXd y0;
    double dt = 0.01;
    double t_start = 0.0;
    double t_end = 1.0;
};

inline ODESpec lorenz63_spec(double dt = 0.01, double t_end = 22.0)
{
    ODESpec spec;
    spec.name = "lorenz63";
    spec.params = {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}};
    spec.y0 = Eigen::Vector3d(1.0, 1.0, 1.0);
    spec.dt = dt;
    spec.t_end = t_end;
    return spec;
}

inline ODESpec rossler_spec(double dt = 0.01, double t_end = 40.0)
{
    ODESpec spec;
    spec.name = "rossler";
    spec.params = {{"a", 0.1}, {"b", 0.1}, {"c", 14.0}};
    spec.y0 = Eigen::Vector3d(1.0, 1.0, 0.0);
    spec.dt = dt;
    spec.t_end = t_end;
    return spec;
}

namespace detail {

inline double get_param(const ODESpec &spec, const std::string &key)
{
    auto it = spec.params.find(key);
    require(it != spec.params.end(), "argument", spec.name + " needs parameter " + key);
    return it->second;
}

} // namespace detail

inline Eigen::VectorXd ode_rhs(const ODESpec &spec, const Eigen::VectorXd &y)
{
    Eigen::VectorXd dy(3);
    if (spec.name == "lorenz63") {
        const double sigma = detail::get_param(spec, "sigma");
        const double rho = detail::get_param(spec, "rho");
        const double beta = detail::get_param(spec, "beta");
        dy << sigma * (y(1) - y(0)), y(0) * (rho - y(2)) - y(1), y(0) * y(1) - beta * y(2);
    } else if (spec.name == "rossler") {
        const double a = detail::get_param(spec, "a");
        const double b = detail::get_param(spec, "b");
        const double c = detail::get_param(spec, "c");
        dy << -y(1) - y(2), y(0) + a * y(1), b + y(2) * (y(0) - c);
    } else {
        fail("argument", "unknown system '" + spec.name + "'");
    }
    return dy;
}

// Classical fixed-step 4th-order Runge-Kutta; samples at every dt.
inline TimeSeries integrate_rk4(const ODESpec &spec)
{
    require(spec.dt > 0.0, "argument", "dt must be positive");
    require(spec.t_end > spec.t_start, "argument", "t_end must exceed t_start");
    require(spec.y0.size() == 3, "dimension", "initial state must be 3-dimensional");
    const int n_steps = static_cast<int>(std::lround((spec.t_end - spec.t_start) / spec.dt));
    require(n_steps >= 1, "argument", "time span shorter than one step");

    const double h = spec.dt;
    Eigen::MatrixXd data(3, n_steps + 1);
    Eigen::VectorXd y = spec.y0;
    data.col(0) = y;
    for (int j = 1; j <= n_steps; ++j) {
        const Eigen::VectorXd k1 = ode_rhs(spec, y);
        const Eigen::VectorXd k2 = ode_rhs(spec, y + 0.5 * h * k1);
        const Eigen::VectorXd k3 = ode_rhs(spec, y + 0.5 * h * k2);
        const Eigen::VectorXd k4 = ode_rhs(spec, y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        require(y.allFinite(), "divergence", "state blew up at step " + std::to_string(j));
        data.col(j) = y;
    }
    return TimeSeries(std::move(data), spec.dt, spec.t_start);
}

struct KSSpec {
    double half_period = 11.0; // L: original domain is [0, 2L)
    int n_modes = 128;         // grid points / Fourier modes, power of two
    double dt = 0.25;
    double t_burn = 10.0;
    double t_final = 160.0;
    Eigen::VectorXd u0;       // initial field on the grid; empty = seeded noise
    uint64_t seed = 0;        // drives the default initial field
    bool linear_only = false; // drop the nonlinear term (dispersion checks)
};

// Small random Fourier noise: modes 1..8 with 1/k-weighted Gaussian
// amplitudes, deterministic in the seed.
inline Eigen::VectorXd ks_default_initial_field(const KSSpec &spec)
{
    RngStream stream(spec.seed, 0);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(spec.n_modes);
    for (int k = 1; k <= 8; ++k) {
        const double a = 0.1 * stream.next_gaussian() / k;
        const double b = 0.1 * stream.next_gaussian() / k;
        for (int j = 0; j < spec.n_modes; ++j) {
            const double x = 2.0 * M_PI * j / spec.n_modes;
            u(j) += a * std::cos(k * x) + b * std::sin(k * x);
        }
    }
    return u;
}

// u_t + u_xx + nu*u_xxxx + u*u_x = 0 on [0, 2pi), nu = (pi/L)^2 (the [0, 2L)
// problem mapped to the unit circle). Fourier pseudo-spectral with 2/3-rule
// dealiasing; ETDRK4 stepping with the phi-coefficients evaluated by a
// 32-point contour integral around each linear eigenvalue to dodge
// cancellation. Burn-in discarded; snapshots every dt from t_burn on.
inline TimeSeries integrate_ks_etdrk4(const KSSpec &spec)
{
    const int n = spec.n_modes;
    require(n >= 8 && (n & (n - 1)) == 0, "argument", "n_modes must be a power of two >= 8");
    require(spec.dt > 0.0, "argument", "dt must be positive");
    require(spec.half_period > 0.0, "argument", "half_period must be positive");
    require(spec.t_burn >= 0.0 && spec.t_final > spec.t_burn, "argument",
            "need 0 <= t_burn < t_final");

    const double nu = std::pow(M_PI / spec.half_period, 2.0);
    const int n_burn = static_cast<int>(std::lround(spec.t_burn / spec.dt));
    const int n_keep = static_cast<int>(std::lround((spec.t_final - spec.t_burn) / spec.dt));
    require(n_keep >= 1, "argument", "no snapshots between t_burn and t_final");

    Eigen::VectorXd u0 = spec.u0;
    if (u0.size() == 0) u0 = ks_default_initial_field(spec);
    require(u0.size() == n, "dimension", "initial field size must equal n_modes");

    // Linear symbol and ETDRK4 coefficients.
    Eigen::VectorXd lin(n), wavenumber(n);
    for (int j = 0; j < n; ++j) {
        const double k = j <= n / 2 ? j : j - n;
        wavenumber(j) = k;
        lin(j) = k * k - nu * k * k * k * k;
    }

    // The explicit nonlinear stages limit the stable step to a fraction of the
    // fastest growth time, so stride the snapshot interval with substeps; the
    // linear propagation stays exact over each snapshot either way.
    const double omega_max = lin.maxCoeff();
    const int substeps = std::max(1, static_cast<int>(std::ceil(spec.dt * omega_max / 0.1)));
    const double h = spec.dt / substeps;

    Eigen::VectorXd e_full = (h * lin.array()).exp();
    Eigen::VectorXd e_half = (0.5 * h * lin.array()).exp();
    Eigen::VectorXd q(n), f1(n), f2(n), f3(n);
    {
        const int m = 32;
        for (int j = 0; j < n; ++j) {
            std::complex<double> sq = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
            for (int p = 0; p < m; ++p) {
                const std::complex<double> r =
                    std::polar(1.0, M_PI * (p + 0.5) / m); // upper half circle; real() doubles it
                const std::complex<double> lr = h * lin(j) + r;
                const std::complex<double> elr = std::exp(lr);
                sq += (std::exp(lr / 2.0) - 1.0) / lr;
                const std::complex<double> lr3 = lr * lr * lr;
                s1 += (-4.0 - lr + elr * (4.0 - 3.0 * lr + lr * lr)) / lr3;
                s2 += (2.0 + lr + elr * (-2.0 + lr)) / lr3;
                s3 += (-4.0 - 3.0 * lr - lr * lr + elr * (4.0 - lr)) / lr3;
            }
            q(j) = h * sq.real() / m;
            f1(j) = h * s1.real() / m;
            f2(j) = h * s2.real() / m;
            f3(j) = h * s3.real() / m;
        }
    }

    // 2/3-rule mask combined with the -i*k/2 factor of N(u) = -(u^2/2)_x.
    Eigen::VectorXcd nonlin_factor(n);
    for (int j = 0; j < n; ++j) {
        const bool keep = std::abs(wavenumber(j)) < n / 3.0;
        nonlin_factor(j) =
            keep ? std::complex<double>(0.0, -0.5 * wavenumber(j)) : std::complex<double>(0.0);
    }

    Eigen::FFT<double> fft;
    Eigen::VectorXcd v(n), buf(n);
    Eigen::VectorXcd work = u0.cast<std::complex<double>>();
    fft.fwd(v, work);

    // The state must represent a real field. Its conjugate-asymmetric part is
    // invisible to the nonlinear term (which reads the real part only), so it
    // evolves purely linearly and rounding noise in the growing modes would
    // amplify as exp(omega_max * t) until FFT round-off bleeds it back into
    // the real dynamics. Project it out after every step.
    auto enforce_real_field = [n](Eigen::VectorXcd &state) {
        state(0) = std::complex<double>(state(0).real(), 0.0);
        state(n / 2) = std::complex<double>(state(n / 2).real(), 0.0);
        for (int j = 1; j < n / 2; ++j) {
            const std::complex<double> s = 0.5 * (state(j) + std::conj(state(n - j)));
            state(j) = s;
            state(n - j) = std::conj(s);
        }
    };
    enforce_real_field(v);

    auto eval_nonlinear = [&](const Eigen::VectorXcd &state) -> Eigen::VectorXcd {
        if (spec.linear_only) return Eigen::VectorXcd::Zero(n);
        fft.inv(buf, state);
        work = buf.real().cwiseProduct(buf.real()).cast<std::complex<double>>();
        Eigen::VectorXcd out(n);
        fft.fwd(out, work);
        return nonlin_factor.cwiseProduct(out);
    };

    Eigen::MatrixXd data(n, n_keep + 1);
    int col = 0;
    if (n_burn == 0) {
        fft.inv(buf, v);
        data.col(col++) = buf.real();
    }
    const int total_steps = n_burn + n_keep;
    for (int step = 1; step <= total_steps; ++step) {
        for (int sub = 0; sub < substeps; ++sub) {
            const Eigen::VectorXcd nv = eval_nonlinear(v);
            const Eigen::VectorXcd a = e_half.cwiseProduct(v) + q.cwiseProduct(nv);
            const Eigen::VectorXcd na = eval_nonlinear(a);
            const Eigen::VectorXcd b = e_half.cwiseProduct(v) + q.cwiseProduct(na);
            const Eigen::VectorXcd nb = eval_nonlinear(b);
            const Eigen::VectorXcd c = e_half.cwiseProduct(a) + q.cwiseProduct(2.0 * nb - nv);
            const Eigen::VectorXcd nc = eval_nonlinear(c);
            v = e_full.cwiseProduct(v) + f1.cwiseProduct(nv) + 2.0 * f2.cwiseProduct(na + nb) +
                f3.cwiseProduct(nc);
            enforce_real_field(v);
            require(v.allFinite(), "divergence", "field blew up at step " + std::to_string(step));
        }
        if (step >= n_burn) {
            fft.inv(buf, v);
            data.col(col++) = buf.real();
        }
    }
    return TimeSeries(std::move(data), spec.dt, spec.t_burn);
}

// Iterate a known lagged linear map from a seeded Gaussian prefix: the
// ground-truth generator for exact-recovery checks. Columns [0, max_lag)
// are i.i.d. N(0, init_scale^2); the rest follow the model exactly.
inline TimeSeries lagged_linear_series(const LaggedModel &generator, int n_steps, uint64_t seed,
                                       double init_scale = 1.0)
{
    generator.validate();
    require(n_steps >= generator.max_lag() + 1, "argument",
            "need at least max_lag + 1 steps of data");
    const int s = generator.state_dim;
    const int m = generator.max_lag();
    Eigen::MatrixXd data(s, n_steps + 1);
    RngStream stream(seed, 0);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < s; ++i) data(i, j) = init_scale * stream.next_gaussian();
    for (int j = m; j <= n_steps; ++j) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(s);
        for (int k = 0; k < generator.lags.size(); ++k)
            next.noalias() +=
                generator.matrices[static_cast<size_t>(k)] * data.col(j - generator.lags[k]);
        require(next.allFinite(), "divergence", "series blew up at step " + std::to_string(j));
        data.col(j) = next;
    }
    return TimeSeries(std::move(data), 1.0, 0.0);
}

struct PODBasis {
    Eigen::MatrixXd modes;           // grid x n_modes, orthonormal columns
    Eigen::VectorXd singular_values; // all singular values of the centered snapshots
    double energy_fraction = 0.0;    // retained squared singular value share
    Eigen::VectorXd mean_field;
};

// SVD of the mean-removed snapshot matrix; coeffs_j = modes^T (snapshot_j - mean).
inline std::pair<PODBasis, TimeSeries> pod_reduce(const TimeSeries &field, int n_modes)
{
    field.validate();
    const int cols = field.n_cols();
    require(n_modes >= 1 && n_modes <= std::min<int>(field.state_dim(), cols), "argument",
            "n_modes must lie in [1, min(grid, snapshots)]");

    PODBasis basis;
    basis.mean_field = field.data.rowwise().mean();
    Eigen::MatrixXd centered = field.data.colwise() - basis.mean_field;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
    basis.singular_values = svd.singularValues();
    require(basis.singular_values(n_modes - 1) >
                1e-14 * std::max(basis.singular_values(0), 1e-300),
            "rank", "snapshot matrix rank below requested mode count");
    basis.modes = svd.matrixU().leftCols(n_modes);
    const double total = basis.singular_values.squaredNorm();
    basis.energy_fraction = basis.singular_values.head(n_modes).squaredNorm() / total;

    TimeSeries coeffs(basis.modes.transpose() * centered, field.dt, field.t0);
    return {std::move(basis), std::move(coeffs)};
}

inline TimeSeries pod_reconstruct(const PODBasis &basis, const TimeSeries &coeffs)
{
    require(basis.modes.cols() == coeffs.state_dim(), "dimension",
            "coefficient dimension must match mode count");
    require(basis.modes.rows() == basis.mean_field.size(), "dimension",
            "mean field size must match mode rows");
    Eigen::MatrixXd field = basis.modes * coeffs.data;
    field.colwise() += basis.mean_field;
    return TimeSeries(std::move(field), coeffs.dt, coeffs.t0);
}

} // namespace erdmd
