#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <complex>
#include <vector>

#include "erdmd/core_dmd.hpp"
#include "erdmd/systems.hpp"
#include "oracles.hpp"

using namespace erdmd;
using oracle::cd;

namespace {

TimeSeries ramp_series(int n_cols)
{
    Eigen::MatrixXd data(1, n_cols);
    for (int j = 0; j < n_cols; ++j) data(0, j) = j;
    return TimeSeries(std::move(data), 1.0);
}

LaggedModel scalar_model(const std::vector<int> &lags, const std::vector<double> &coeffs)
{
    std::vector<Eigen::MatrixXd> mats;
    for (double c : coeffs) mats.push_back(Eigen::MatrixXd::Constant(1, 1, c));
    return LaggedModel(1, LagSet(lags), std::move(mats));
}

std::vector<cd> to_vector(const SpectrumResult &sp) { return sp.eigenvalues; }

} // namespace

TEST_CASE("time series columns map to times and slices are inclusive")
{
    TimeSeries ts = ramp_series(6);
    CHECK(ts.n_steps() == 5);
    CHECK(ts.time_at(3) == doctest::Approx(3.0));
    TimeSeries cut = ts.slice_cols(2, 4);
    CHECK(cut.n_cols() == 3);
    CHECK(cut.data(0, 0) == 2.0);
    CHECK(cut.data(0, 2) == 4.0);
    CHECK(cut.t0 == doctest::Approx(2.0));
    CHECK_THROWS_AS(ts.slice_cols(4, 9), error);
    CHECK_THROWS_AS(TimeSeries(Eigen::MatrixXd::Zero(1, 2), -1.0), error);
}

TEST_CASE("lag sets are sorted, start at one, and reject duplicates")
{
    CHECK_THROWS_AS(LagSet({2, 5}), error);
    CHECK_THROWS_AS(LagSet({1, 5, 5}), error);
    CHECK_THROWS_AS(LagSet(std::vector<int>{}), error);
    LagSet l = LagSet::all_up_to(3);
    CHECK(l.values() == std::vector<int>{1, 2, 3});
    CHECK(l.with(7).values() == std::vector<int>{1, 2, 3, 7});
    CHECK(l.without(2).values() == std::vector<int>{1, 3});
    CHECK(l.contains(2));
    CHECK(!l.contains(4));
}

TEST_CASE("regression blocks align unit-lag targets and regressors")
{
    RegressionBlocks b = build_regression(ramp_series(6), LagSet({1}), 1);
    CHECK(b.n_samples() == 5);
    for (int j = 0; j < 5; ++j) {
        CHECK(b.targets(0, j) == j + 1);
        CHECK(b.regressors(0, j) == j);
    }
}

TEST_CASE("regression blocks put the largest lag in the top row block")
{
    RegressionBlocks b = build_regression(ramp_series(6), LagSet({1, 3}), 3);
    REQUIRE(b.n_samples() == 3);
    for (int j = 0; j < 3; ++j) {
        CHECK(b.targets(0, j) == 3 + j);
        CHECK(b.regressors(0, j) == j);     // lag-3 block
        CHECK(b.regressors(1, j) == 2 + j); // lag-1 block
    }
}

TEST_CASE("regression block shapes follow the sample-count formula")
{
    TimeSeries ts(oracle::gaussian_matrix(3, 2201, 11), 0.01);
    RegressionBlocks b = build_regression(ts, LagSet({1, 149}), 150);
    CHECK(b.targets.rows() == 3);
    CHECK(b.targets.cols() == 2051);
    CHECK(b.regressors.rows() == 6);
    CHECK(b.regressors.cols() == 2051);
}

TEST_CASE("regression rejects targets before the maximum lag")
{
    try {
        build_regression(ramp_series(10), LagSet({1, 4}), 3);
        FAIL("expected lag-underflow");
    } catch (const error &e) {
        CHECK(e.code() == "lag-underflow");
    }
    CHECK_THROWS_AS(build_regression(ramp_series(10), LagSet({1}), 42), error);
}

TEST_CASE("fit recovers a one-lag scalar map to round-off")
{
    Eigen::MatrixXd data(1, 40);
    data(0, 0) = 1.0;
    for (int j = 1; j < 40; ++j) data(0, j) = 0.9 * data(0, j - 1);
    LaggedModel model = fit(TimeSeries(std::move(data), 1.0), LagSet({1}), 1);
    CHECK(model.matrices[0](0, 0) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("fit recovers two scalar lags from generated data")
{
    const LaggedModel truth = scalar_model({1, 5}, {0.5, 0.3});
    TimeSeries ts = lagged_linear_series(truth, 500, 1);
    LaggedModel model = fit(ts, LagSet({1, 5}), 5);
    CHECK(std::abs(model.matrices[0](0, 0) - 0.5) < 1e-8);
    CHECK(std::abs(model.matrices[1](0, 0) - 0.3) < 1e-8);
}

TEST_CASE("fit recovers random stable multivariate generators")
{
    std::vector<Eigen::MatrixXd> mats = {0.3 * oracle::random_orthogonal(2, 3),
                                         0.3 * oracle::random_orthogonal(2, 4),
                                         0.3 * oracle::random_orthogonal(2, 5)};
    const LaggedModel truth(2, LagSet({1, 4, 9}), mats);
    TimeSeries ts = lagged_linear_series(truth, 200, 2);
    LaggedModel model = fit(ts, truth.lags, 9);
    for (size_t k = 0; k < mats.size(); ++k)
        CHECK((model.matrices[k] - mats[k]).norm() < 1e-8);
}

TEST_CASE("fit rejects underdetermined problems unless asked")
{
    TimeSeries ts(oracle::gaussian_matrix(3, 13, 6), 1.0);
    try {
        fit(ts, LagSet::all_up_to(4), 4);
        FAIL("expected underdetermined");
    } catch (const error &e) {
        CHECK(e.code() == "underdetermined");
    }
    LaggedModel model = fit(ts, LagSet::all_up_to(4), 4, 1e-10, true);
    CHECK(model.lags.size() == 4);
}

TEST_CASE("fitted coefficients minimize the training residual")
{
    TimeSeries ts(oracle::gaussian_matrix(2, 60, 7), 1.0);
    LaggedModel model = fit(ts, LagSet({1, 3}), 3);
    const double base = training_residual(model, ts, 3);
    CHECK(base > 0.0);
    for (uint64_t trial = 0; trial < 4; ++trial) {
        for (size_t k = 0; k < model.matrices.size(); ++k) {
            LaggedModel bumped = model;
            Eigen::MatrixXd delta = oracle::gaussian_matrix(2, 2, 100 + 10 * trial + k);
            bumped.matrices[k] += 1e-3 * delta / delta.norm();
            CHECK(training_residual(bumped, ts, 3) > base);
        }
    }
}

TEST_CASE("a long-lag pair fit tracks a chaotic window in closed loop")
{
    TimeSeries full = integrate_rk4(lorenz63_spec());
    TimeSeries ts = full.slice_time(20.0, 22.0);
    REQUIRE(ts.n_cols() == 201);
    LaggedModel model = fit(ts, LagSet({1, 149}), 149);
    TimeSeries recon = reconstruct(model, ts, 149, ts.n_steps());
    const double err =
        (recon.data.rightCols(52) - ts.data.rightCols(52)).cwiseAbs().maxCoeff();
    CHECK(err < 1.0); // state units; attractor coordinates span roughly +-20
}

TEST_CASE("predict_one applies each lag matrix to the right history column")
{
    LaggedModel ident(2, LagSet({1}), {Eigen::MatrixXd::Identity(2, 2)});
    Eigen::MatrixXd history(2, 3);
    history << 7, 0, 3, 7, 0, -1;
    Eigen::VectorXd next = predict_one(ident, history);
    CHECK(next(0) == doctest::Approx(3.0));
    CHECK(next(1) == doctest::Approx(-1.0));

    LaggedModel two = scalar_model({1, 5}, {0.5, 0.3});
    Eigen::MatrixXd h(1, 5);
    h << 2, 9, 9, 9, 1; // y_{j-4} = 2, y_j = 1
    CHECK(predict_one(two, h)(0) == doctest::Approx(1.1));
    CHECK(predict_one(two, Eigen::MatrixXd::Zero(1, 6))(0) == 0.0);
    try {
        predict_one(two, Eigen::MatrixXd::Zero(1, 4));
        FAIL("expected lag-underflow");
    } catch (const error &e) {
        CHECK(e.code() == "lag-underflow");
    }
}

TEST_CASE("reconstruct with the exact model reproduces the data")
{
    Eigen::MatrixXd rot(2, 2);
    rot << std::cos(0.3), -std::sin(0.3), std::sin(0.3), std::cos(0.3);
    const LaggedModel truth(2, LagSet({1}), {0.99 * rot});
    TimeSeries ts = lagged_linear_series(truth, 100, 3);
    TimeSeries recon = reconstruct(truth, ts, 1, ts.n_steps());
    CHECK((recon.data - ts.data).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("reconstruct follows the generator over hundreds of steps")
{
    const LaggedModel truth = scalar_model({1, 5}, {0.5, 0.3});
    TimeSeries ts = lagged_linear_series(truth, 300, 4);
    TimeSeries recon = reconstruct(truth, ts, 5, 300);
    CHECK((recon.data - ts.data).cwiseAbs().maxCoeff() < 1e-8);
    TimeSeries again = reconstruct(truth, ts, 5, 300);
    CHECK((recon.data.array() == again.data.array()).all()); // bit-reproducible
}

TEST_CASE("forecast steps continue the recurrence beyond the data")
{
    const LaggedModel truth = scalar_model({1, 5}, {0.5, 0.3});
    TimeSeries full = lagged_linear_series(truth, 320, 5);
    TimeSeries head = full.slice_cols(0, 300);
    CHECK_THROWS_AS(reconstruct(truth, head, 5, 310), error);
    TimeSeries recon = reconstruct(truth, head, 5, 300, 20);
    REQUIRE(recon.n_cols() == 321);
    CHECK((recon.data - full.data).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("single-lag companion matrix is the lag matrix itself")
{
    Eigen::MatrixXd k1 = oracle::gaussian_matrix(3, 3, 8);
    LaggedModel model(3, LagSet({1}), {k1});
    CHECK((companion_matrix(model) - k1).norm() == 0.0);
}

TEST_CASE("companion matrix lays out shift blocks and lag matrices")
{
    LaggedModel model = scalar_model({1, 3}, {0.5, 0.25});
    Eigen::MatrixXd expect(3, 3);
    expect << 0, 1, 0, 0, 0, 1, 0.25, 0, 0.5;
    CHECK((companion_matrix(model) - expect).norm() == 0.0);
}

TEST_CASE("sparse long-lag companion has zero blocks between lags")
{
    std::vector<Eigen::MatrixXd> mats = {0.4 * oracle::random_orthogonal(3, 9),
                                         0.2 * oracle::random_orthogonal(3, 10)};
    LaggedModel model(3, LagSet({1, 149}), mats);
    Eigen::MatrixXd comp = companion_matrix(model);
    REQUIRE(comp.rows() == 447);
    const auto bottom = comp.bottomRows(3);
    int nonzero_blocks = 0;
    for (int bcol = 0; bcol < 149; ++bcol)
        if (bottom.middleCols(3 * bcol, 3).norm() > 0.0) ++nonzero_blocks;
    CHECK(nonzero_blocks == 2);
    CHECK((bottom.middleCols(0, 3) - mats[1]).norm() == 0.0);     // K_149
    CHECK((bottom.middleCols(3 * 148, 3) - mats[0]).norm() == 0.0); // K_1
}

TEST_CASE("full spectrum of a single-lag model is the matrix spectrum")
{
    Eigen::MatrixXd k1 = oracle::gaussian_matrix(4, 4, 12);
    LaggedModel model(4, LagSet({1}), {k1});
    SpectrumResult sp = full_spectrum(model);
    REQUIRE(sp.eigenvalues.size() == 4);
    Eigen::EigenSolver<Eigen::MatrixXd> direct(k1, false);
    std::vector<cd> expect;
    for (int i = 0; i < 4; ++i) expect.push_back(direct.eigenvalues()(i));
    CHECK(oracle::hausdorff_one_sided(to_vector(sp), expect) < 1e-10);
}

TEST_CASE("pure delay spectrum lands on the roots of unity")
{
    LaggedModel model = scalar_model({1, 3}, {0.0, 1.0});
    SpectrumResult sp = full_spectrum(model);
    std::vector<cd> expect = {cd(1, 0), std::polar(1.0, 2 * M_PI / 3),
                              std::polar(1.0, -2 * M_PI / 3)};
    CHECK(oracle::hausdorff_one_sided(to_vector(sp), expect) < 1e-10);
    CHECK(oracle::hausdorff_one_sided(expect, to_vector(sp)) < 1e-10);
}

TEST_CASE("every companion eigenvalue annihilates the characteristic polynomial")
{
    std::vector<Eigen::MatrixXd> mats = {0.5 * oracle::random_orthogonal(3, 13),
                                         0.3 * oracle::random_orthogonal(3, 14)};
    LaggedModel model(3, LagSet({1, 7}), mats);
    SpectrumResult sp = full_spectrum(model);
    REQUIRE(sp.eigenvalues.size() == 21);
    for (const cd &ev : sp.eigenvalues) CHECK(char_poly_residual(model, ev) < 1e-6);
}

TEST_CASE("scalar spectra match an independent polynomial root finder")
{
    LaggedModel model = scalar_model({1, 2, 5}, {0.4, -0.2, 0.1});
    SpectrumResult sp = full_spectrum(model);
    std::vector<cd> expect = oracle::durand_kerner(oracle::scalar_model_poly(model));
    CHECK(oracle::hausdorff_one_sided(to_vector(sp), expect) < 1e-8);
    CHECK(oracle::hausdorff_one_sided(expect, to_vector(sp)) < 1e-8);
}

TEST_CASE("spectrum dimension guard fails loudly")
{
    std::vector<Eigen::MatrixXd> mats = {Eigen::MatrixXd::Identity(3, 3),
                                         Eigen::MatrixXd::Identity(3, 3)};
    LaggedModel model(3, LagSet({1, 2000}), mats);
    try {
        full_spectrum(model);
        FAIL("expected size guard");
    } catch (const error &e) {
        CHECK(e.code() == "size");
    }
}

TEST_CASE("characteristic polynomial evaluates to closed forms")
{
    Eigen::MatrixXd k1 = oracle::gaussian_matrix(3, 3, 15);
    LaggedModel one(3, LagSet({1}), {k1});
    CHECK(std::abs(eval_char_poly(one, cd(0, 0)) - cd(k1.determinant(), 0)) < 1e-12);

    LaggedModel two = scalar_model({1, 3}, {0.5, 0.25});
    CHECK(std::abs(eval_char_poly(two, cd(1, 0)) - cd(-0.25, 0)) < 1e-14);
}

TEST_CASE("matrix polynomial roots solve scalar pencils")
{
    std::vector<std::pair<int, Eigen::MatrixXd>> lin = {
        {0, Eigen::MatrixXd::Constant(1, 1, 0.5)}, {1, Eigen::MatrixXd::Constant(1, 1, 1.0)}};
    SpectrumResult sp = matrix_poly_roots(lin);
    REQUIRE(sp.eigenvalues.size() == 1);
    CHECK(std::abs(sp.eigenvalues[0] - cd(-0.5, 0)) < 1e-12);

    std::vector<std::pair<int, Eigen::MatrixXd>> quad = {
        {0, Eigen::MatrixXd::Constant(1, 1, 1.0)}};
    SpectrumResult sq = matrix_poly_roots(quad, 2);
    std::vector<cd> expect = {cd(1, 0), cd(-1, 0)};
    CHECK(oracle::hausdorff_one_sided(to_vector(sq), expect) < 1e-12);
    CHECK(oracle::hausdorff_one_sided(expect, to_vector(sq)) < 1e-12);
}

TEST_CASE("matrix polynomial roots survive a singular leading block")
{
    Eigen::MatrixXd lead = Eigen::MatrixXd::Zero(2, 2);
    lead(0, 0) = 1.0; // rank one: generalized path with one infinite eigenvalue
    std::vector<std::pair<int, Eigen::MatrixXd>> coeffs = {
        {1, lead}, {0, Eigen::MatrixXd::Identity(2, 2)}};
    SpectrumResult sp = matrix_poly_roots(coeffs);
    REQUIRE(sp.eigenvalues.size() == 1);
    CHECK(std::abs(sp.eigenvalues[0] - cd(-1, 0)) < 1e-10);
}

TEST_CASE("matrix polynomial rejects identically singular pencils and huge sizes")
{
    std::vector<std::pair<int, Eigen::MatrixXd>> zeros = {
        {0, Eigen::MatrixXd::Zero(2, 2)}, {1, Eigen::MatrixXd::Zero(2, 2)}};
    try {
        matrix_poly_roots(zeros);
        FAIL("expected degenerate-pencil");
    } catch (const error &e) {
        CHECK(e.code() == "degenerate-pencil");
    }
    std::vector<std::pair<int, Eigen::MatrixXd>> big = {
        {0, Eigen::MatrixXd::Identity(3, 3)}, {1700, Eigen::MatrixXd::Identity(3, 3)}};
    try {
        matrix_poly_roots(big);
        FAIL("expected size guard");
    } catch (const error &e) {
        CHECK(e.code() == "size");
    }
}

TEST_CASE("nth roots enumerate all branches, principal first")
{
    std::vector<cd> quarters = nth_roots(cd(1, 0), 4);
    std::vector<cd> expect = {cd(1, 0), cd(0, 1), cd(-1, 0), cd(0, -1)};
    REQUIRE(quarters.size() == 4);
    for (size_t i = 0; i < 4; ++i) CHECK(std::abs(quarters[i] - expect[i]) < 1e-12);

    std::vector<cd> cubes = nth_roots(cd(-8, 0), 3);
    CHECK(std::abs(cubes[0] - 2.0 * std::polar(1.0, M_PI / 3)) < 1e-12);
    for (const cd &r : cubes) CHECK(std::abs(std::abs(r) - 2.0) < 1e-12);

    const cd z(0.3, 0.7);
    for (const cd &r : nth_roots(z, 148)) {
        CHECK(std::abs(std::pow(r, 148) - z) < 1e-10 * std::abs(z));
    }
    CHECK_THROWS_AS(nth_roots(z, 0), error);
}

TEST_CASE("lag matrix norms report Frobenius norms in lag order")
{
    std::vector<Eigen::MatrixXd> mats = {Eigen::MatrixXd::Identity(3, 3),
                                         Eigen::MatrixXd::Zero(3, 3)};
    LaggedModel model(3, LagSet({1, 4}), mats);
    auto norms = lag_matrix_norms(model);
    REQUIRE(norms.size() == 2);
    CHECK(norms[0].first == 1);
    CHECK(norms[0].second == doctest::Approx(std::sqrt(3.0)));
    CHECK(norms[1].first == 4);
    CHECK(norms[1].second == 0.0);
}

TEST_CASE("outer reduction with every lag kept reproduces the full spectrum")
{
    std::vector<Eigen::MatrixXd> mats = {0.5 * oracle::random_orthogonal(2, 21),
                                         0.3 * oracle::random_orthogonal(2, 22)};
    LaggedModel model(2, LagSet({1, 3}), mats);
    SpectrumResult full = full_spectrum(model);
    SpectrumResult outer = reduced_outer_spectrum(model, 2);
    CHECK(outer.source == SpectrumSource::ReducedOuter);
    REQUIRE(outer.eigenvalues.size() == full.eigenvalues.size());
    CHECK(oracle::hausdorff_one_sided(to_vector(outer), to_vector(full)) < 1e-8);
    CHECK(oracle::hausdorff_one_sided(to_vector(full), to_vector(outer)) < 1e-8);
}

TEST_CASE("inner reduction de-substitutes through the lag separation power")
{
    LaggedModel model = scalar_model({1, 10}, {0.9, 1e-8});
    SpectrumResult inner = reduced_inner_spectrum(model, 2);
    CHECK(inner.source == SpectrumSource::ReducedInner);
    REQUIRE(inner.eigenvalues.size() == 9); // one pencil root, nine branches
    const cd ztilde(-1e-8 / 0.9, 0.0);
    for (const cd &r : inner.eigenvalues)
        CHECK(std::abs(std::pow(r, 9) - ztilde) < 1e-12);
}

TEST_CASE("inner reduction rounds near-multiple exponents onto the substitution grid")
{
    LaggedModel model = scalar_model({1, 123, 141, 158}, {0.5, 0.1, -0.2, 0.05});
    SpectrumResult inner = reduced_inner_spectrum(model, 3);
    // exponents 35, 17, 0 collapse to degrees 2, 1, 0 in z~ = z^17
    REQUIRE(inner.eigenvalues.size() == 34);
    for (const cd &r : inner.eigenvalues) {
        const cd zt = std::pow(r, 17);
        const cd residual = 0.1 * zt * zt - 0.2 * zt + cd(0.05, 0);
        CHECK(std::abs(residual) < 1e-9);
    }
}
