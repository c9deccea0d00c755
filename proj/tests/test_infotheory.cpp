#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "erdmd/infotheory.hpp"
#include "erdmd/rng.hpp"
#include "oracles.hpp"

using namespace erdmd;

namespace {

SampleCloud uniform_cloud(int n, uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd m(n, 1);
    for (int i = 0; i < n; ++i) m(i, 0) = u(gen);
    return SampleCloud(std::move(m));
}

SampleCloud empty_cloud(int n) { return SampleCloud(Eigen::MatrixXd(n, 0)); }

SampleCloud permuted(const SampleCloud &x, uint64_t seed, uint64_t stream_index)
{
    RngStream stream(seed, stream_index);
    const std::vector<int> perm = stream.permutation(x.n());
    Eigen::MatrixXd shuffled(x.n(), x.dim());
    for (int i = 0; i < x.n(); ++i) shuffled.row(i) = x.points.row(perm[static_cast<size_t>(i)]);
    return SampleCloud(std::move(shuffled));
}

} // namespace

TEST_CASE("independent uniforms carry no mutual information")
{
    SampleCloud x = uniform_cloud(2000, 1);
    SampleCloud y = uniform_cloud(2000, 2);
    const double mi = mutual_information(x, y, 5);
    CHECK(mi >= 0.0);
    CHECK(mi <= 0.02);
}

TEST_CASE("correlated Gaussians match the analytic mutual information")
{
    auto [xm, ym] = oracle::correlated_pair(4000, 0.8, 3);
    const double mi = mutual_information(SampleCloud(xm), SampleCloud(ym), 5);
    CHECK(std::abs(mi - oracle::gaussian_mi(0.8)) < 0.05);
}

TEST_CASE("a deterministic copy saturates the estimator and grows with n")
{
    SampleCloud x4000 = uniform_cloud(4000, 4);
    SampleCloud x1000(Eigen::MatrixXd(x4000.points.topRows(1000)));
    const double mi_small = mutual_information(x1000, x1000, 5);
    const double mi_large = mutual_information(x4000, x4000, 5);
    CHECK(mi_large > 2.0);
    CHECK(mi_large > mi_small);
}

TEST_CASE("mutual information is exactly symmetric")
{
    auto [xm, ym] = oracle::correlated_pair(800, 0.6, 5);
    SampleCloud x(xm), y(ym);
    CHECK(mutual_information(x, y, 5) == mutual_information(y, x, 5));
    SampleCloud x2(oracle::gaussian_matrix(500, 2, 6));
    SampleCloud y2(oracle::gaussian_matrix(500, 2, 7));
    CHECK(mutual_information(x2, y2, 4) == mutual_information(y2, x2, 4));
}

TEST_CASE("estimates are clipped to be nonnegative")
{
    for (uint64_t seed = 10; seed < 16; ++seed) {
        SampleCloud x = uniform_cloud(64, seed);
        SampleCloud y = uniform_cloud(64, seed + 100);
        SampleCloud z = uniform_cloud(64, seed + 200);
        CHECK(mutual_information(x, y, 3) >= 0.0);
        CHECK(conditional_mutual_information(x, y, z, 3) >= 0.0);
    }
}

TEST_CASE("conditioning on an informative variable keeps independence at zero")
{
    auto [ym, zm] = oracle::correlated_pair(2000, 0.7, 20);
    SampleCloud x = uniform_cloud(2000, 21);
    const double cmi = conditional_mutual_information(x, SampleCloud(ym), SampleCloud(zm), 5);
    CHECK(cmi >= 0.0);
    CHECK(cmi <= 0.03);
}

TEST_CASE("a Markov chain is conditionally independent given the middle link")
{
    oracle::MarkovChain chain = oracle::markov_chain(2000, 0.85, 0.85, 22);
    SampleCloud x(chain.x), y(chain.y), z(chain.z);
    const double mi_xy = mutual_information(x, y, 5);
    const double cmi = conditional_mutual_information(x, y, z, 5);
    CHECK(mi_xy > 0.2);
    CHECK(cmi < 0.05);
}

TEST_CASE("an empty conditioning cloud reduces exactly to mutual information")
{
    auto [xm, ym] = oracle::correlated_pair(1500, 0.8, 23);
    SampleCloud x(xm), y(ym);
    CHECK(conditional_mutual_information(x, y, empty_cloud(1500), 5) ==
          mutual_information(x, y, 5));
}

TEST_CASE("with 20 shuffles the significance quantile is the null maximum")
{
    auto [xm, ym] = oracle::correlated_pair(400, 0.5, 30);
    SampleCloud x(xm), y(ym), z = empty_cloud(400);
    SignificanceResult res = shuffle_significance(x, y, z, 5, 20, 0.05, 7);
    CHECK(res.observed_cmi == conditional_mutual_information(x, y, z, 5));
    double null_max = -1.0;
    for (uint64_t b = 0; b < 20; ++b)
        null_max = std::max(null_max,
                            conditional_mutual_information(permuted(x, 7, b), y, z, 5));
    CHECK(res.shuffle_quantile == null_max);
    CHECK(res.significant == (res.observed_cmi > res.shuffle_quantile));
}

TEST_CASE("with 100 shuffles the quantile is the 96th order statistic")
{
    auto [xm, ym] = oracle::correlated_pair(256, 0.3, 31);
    SampleCloud x(xm), y(ym), z = empty_cloud(256);
    SignificanceResult res = shuffle_significance(x, y, z, 5, 100, 0.05, 8);
    std::vector<double> null_values;
    for (uint64_t b = 0; b < 100; ++b)
        null_values.push_back(conditional_mutual_information(permuted(x, 8, b), y, z, 5));
    std::sort(null_values.begin(), null_values.end());
    CHECK(res.shuffle_quantile == null_values[95]);
}

TEST_CASE("a deterministic functional relation is detected as significant")
{
    SampleCloud x = uniform_cloud(1000, 32);
    Eigen::MatrixXd ym(1000, 1);
    for (int i = 0; i < 1000; ++i) ym(i, 0) = std::sin(3.0 * x.points(i, 0));
    SignificanceResult res =
        shuffle_significance(x, SampleCloud(std::move(ym)), empty_cloud(1000), 5, 50, 0.05, 9);
    CHECK(res.significant);
    CHECK(res.observed_cmi > res.shuffle_quantile + 0.5);
}

TEST_CASE("significance results are bit-identical across repeat runs")
{
    oracle::MarkovChain chain = oracle::markov_chain(300, 0.6, 0.6, 33);
    SampleCloud x(chain.x), y(chain.y), z(chain.z);
    SignificanceResult a = shuffle_significance(x, y, z, 4, 25, 0.1, 17);
    SignificanceResult b = shuffle_significance(x, y, z, 4, 25, 0.1, 17);
    CHECK(a.observed_cmi == b.observed_cmi);
    CHECK(a.shuffle_quantile == b.shuffle_quantile);
    CHECK(a.significant == b.significant);
    CHECK(a.n_shuffles == b.n_shuffles);
    CHECK(a.alpha == b.alpha);
}

TEST_CASE("independent data rarely crosses the significance threshold")
{
    int positives = 0;
    for (uint64_t trial = 0; trial < 40; ++trial) {
        SampleCloud x(oracle::gaussian_matrix(128, 1, 500 + trial));
        SampleCloud y(oracle::gaussian_matrix(128, 1, 900 + trial));
        if (shuffle_significance(x, y, empty_cloud(128), 5, 20, 0.05, trial).significant)
            ++positives;
    }
    CHECK(positives <= 7); // expected rate 1/21 over 40 trials
}

TEST_CASE("shuffled-x conditional MI values average to zero within noise")
{
    oracle::MarkovChain chain = oracle::markov_chain(1000, 0.85, 0.85, 34);
    SampleCloud y(chain.y), z(chain.z);
    std::vector<SampleCloud> xs;
    for (uint64_t b = 0; b < 100; ++b) xs.push_back(permuted(SampleCloud(chain.x), 35, b));

    // The null centers at zero for the signed estimator; the public value is
    // its nonnegative clip (whose mean is positive by construction).
    detail::CmiWorkspace ws(y, z, 5);
    std::vector<double> values;
    for (const SampleCloud &x : xs) values.push_back(ws.evaluate_signed(x.points));
    const std::vector<double> clipped = batch_conditional_mutual_information(xs, y, z, 5);
    REQUIRE(values.size() == 100);
    for (size_t b = 0; b < values.size(); ++b)
        CHECK(clipped[b] == std::max(0.0, values[b]));
    CHECK(clipped[0] == conditional_mutual_information(xs[0], y, z, 5));

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= 100.0;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= 99.0;
    const double se = std::sqrt(var / 100.0);
    CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("positive affine rescalings leave the estimate unchanged")
{
    auto [xm, ym] = oracle::correlated_pair(4000, 0.8, 36);
    const double base = mutual_information(SampleCloud(xm), SampleCloud(ym), 5);
    Eigen::MatrixXd xs = (3.7 * xm.array() - 2.0).matrix();
    Eigen::MatrixXd ys = (0.01 * ym.array() + 5.0).matrix();
    const double scaled = mutual_information(SampleCloud(xs), SampleCloud(ys), 5);
    CHECK(std::abs(scaled - base) < 0.02);
}

TEST_CASE("estimator rejects malformed inputs")
{
    SampleCloud x = uniform_cloud(100, 40);
    SampleCloud y = uniform_cloud(99, 41);
    try {
        mutual_information(x, y, 5);
        FAIL("expected sample error");
    } catch (const error &e) {
        CHECK(e.code() == "sample");
    }
    try {
        mutual_information(uniform_cloud(10, 42), uniform_cloud(10, 43), 5);
        FAIL("expected sample error");
    } catch (const error &e) {
        CHECK(e.code() == "sample");
    }
    SampleCloud x2 = uniform_cloud(100, 44), y2 = uniform_cloud(100, 45);
    CHECK_THROWS_AS(shuffle_significance(x2, y2, empty_cloud(100), 5, 19, 0.05, 0), error);
    CHECK_THROWS_AS(shuffle_significance(x2, y2, empty_cloud(100), 5, 20, 0.0, 0), error);
    CHECK_THROWS_AS(shuffle_significance(x2, y2, empty_cloud(100), 5, 20, 1.0, 0), error);
}
