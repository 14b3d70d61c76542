#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "ccmpc/gmm.hpp"

#include <doctest.h>

#include <cmath>

#include "oracles.hpp"

using namespace ccmpc;

namespace {
GaussianMixture paper_mixture() {
    return GaussianMixture({Gaussian::scalar(1.0, 1.0), Gaussian::scalar(10.0, 1.0)},
                           Eigen::Vector2d(0.5, 0.5));
}
}  // namespace

TEST_CASE("inverse_normal_cdf matches bisection oracle") {
    CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    // Frozen from the erfc bisection oracle.
    CHECK(std::abs(inverse_normal_cdf(0.95) - 1.6449) < 1e-4);
    CHECK(std::abs(inverse_normal_cdf(0.975) - 1.9600) < 1e-4);
    CHECK(std::abs(inverse_normal_cdf(0.95) - oracles::std_normal_quantile_bisect(0.95)) < 1e-9);
    CHECK(std::abs(inverse_normal_cdf(0.005) - oracles::std_normal_quantile_bisect(0.005)) < 1e-9);

    CHECK_THROWS_AS(inverse_normal_cdf(0.0), std::domain_error);
    CHECK_THROWS_AS(inverse_normal_cdf(1.0), std::domain_error);
    CHECK_THROWS_AS(inverse_normal_cdf(-0.3), std::domain_error);
}

TEST_CASE("inverse_normal_cdf round trip over a grid") {
    for (double p = 0.001; p < 0.9995; p += 0.0007) {
        double q = inverse_normal_cdf(p);
        CHECK(std::abs(normal_cdf(q) - p) < 1e-8);
    }
}

TEST_CASE("sampling shapes, determinism and moments") {
    GaussianMixture iso = GaussianMixture::single(
        Gaussian(Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity()));
    auto one = sample(iso, 1, 7);
    REQUIRE(one.size() == 1);
    CHECK(one[0].size() == 3);

    auto mix = paper_mixture();
    auto draws = sample(mix, 2000, 42);
    double mean = 0.0;
    for (const auto& v : draws) mean += v(0);
    mean /= draws.size();
    CHECK(std::abs(mean - 5.5) < 0.3);  // 3 sigma / sqrt(n) tolerance from the CLT

    auto again = sample(mix, 2000, 42);
    for (size_t i = 0; i < draws.size(); ++i) {
        CHECK(draws[i](0) == again[i](0));  // bit-for-bit
    }

    GaussianMixture degenerate({Gaussian::scalar(3.0, 1.0), Gaussian::scalar(50.0, 1.0)},
                               Eigen::Vector2d(1.0, 0.0));
    for (const auto& v : sample(degenerate, 200, 9)) {
        CHECK(std::abs(v(0) - 3.0) < 6.0);  // never from the far mode
    }
}

TEST_CASE("cluster_and_estimate on a tiny exact instance") {
    std::vector<Eigen::VectorXd> samples;
    for (double v : {0.9, 1.1, 9.9, 10.1}) {
        samples.push_back(Eigen::VectorXd::Constant(1, v));
    }
    auto res = cluster_and_estimate(samples, 2, 1);
    REQUIRE(res.estimates.size() == 2);
    double m0 = res.estimates[0].mean_hat(0);
    double m1 = res.estimates[1].mean_hat(0);
    if (m0 > m1) std::swap(m0, m1);
    CHECK(m0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m1 == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(res.weights(0) == doctest::Approx(0.5));
    CHECK(res.weights(1) == doctest::Approx(0.5));
}

TEST_CASE("cluster_and_estimate with k=1 returns full-sample moments") {
    Rng rng(3);
    std::vector<Eigen::VectorXd> samples;
    for (int i = 0; i < 57; ++i) {
        Eigen::VectorXd v(2);
        v << rng.normal() * 2.0 + 1.0, rng.normal() - 4.0;
        samples.push_back(v);
    }
    auto res = cluster_and_estimate(samples, 1, 99);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
    for (const auto& v : samples) mean += v;
    mean /= samples.size();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
    for (const auto& v : samples) cov += (v - mean) * (v - mean).transpose();
    cov /= (samples.size() - 1);
    CHECK((res.estimates[0].mean_hat - mean).norm() < 1e-12);
    CHECK((res.estimates[0].cov_hat - cov).norm() < 1e-10);
}

TEST_CASE("cluster_and_estimate recovers well-separated modes") {
    GaussianMixture mix({Gaussian::scalar(0.0, 1.0), Gaussian::scalar(8.0, 1.0)},
                        Eigen::Vector2d(0.4, 0.6));
    auto draws = sample(mix, 2000, 11);
    auto res = cluster_and_estimate(draws, 2, 5);
    double lo = std::min(res.estimates[0].mean_hat(0), res.estimates[1].mean_hat(0));
    double hi = std::max(res.estimates[0].mean_hat(0), res.estimates[1].mean_hat(0));
    CHECK(std::abs(lo - 0.0) < 0.1);
    CHECK(std::abs(hi - 8.0) < 0.1);
}

TEST_CASE("concentration bounds: formula value, monotonicity, vanishing") {
    MomentEstimate est;
    est.mean_hat = Eigen::VectorXd::Zero(1);
    est.cov_hat = Eigen::MatrixXd::Constant(1, 1, 1.0);
    est.n_samples = 2000;
    auto b = concentration_bounds(est, 0.05);
    CHECK(b.r1 == doctest::Approx(std::sqrt(2.0 * std::log(40.0) / 2000.0)).epsilon(1e-12));
    CHECK(std::abs(b.r1 - 0.0607) < 5e-4);

    est.n_samples = 1000000000;
    auto tiny = concentration_bounds(est, 0.05);
    CHECK(tiny.r1 < 1e-3);
    CHECK(tiny.r2 < 1e-3);

    est.n_samples = 500;
    CHECK(concentration_bounds(est, 0.05).r1 >= concentration_bounds(est, 0.2).r1);

    double prev_r1 = 1e100, prev_r2 = 1e100;
    for (int n : {10, 100, 1000, 10000}) {
        est.n_samples = n;
        auto bn = concentration_bounds(est, 0.05);
        CHECK(bn.r1 <= prev_r1);
        CHECK(bn.r2 <= prev_r2);
        prev_r1 = bn.r1;
        prev_r2 = bn.r2;
    }
}

TEST_CASE("gmm_var_cvar closed forms and quadrature oracle") {
    auto std_norm = GaussianMixture::single(Gaussian::scalar(0.0, 1.0));
    auto vc = gmm_var_cvar(std_norm, 0.05);
    CHECK(std::abs(vc.var - 1.6449) < 1e-4);
    CHECK(std::abs(vc.cvar - normal_pdf(vc.var) / 0.05) < 1e-9);
    CHECK(std::abs(vc.cvar - 2.0627) < 1e-4);

    // affine equivariance
    auto shifted = GaussianMixture::single(Gaussian::scalar(3.0, 4.0));
    auto vcs = gmm_var_cvar(shifted, 0.05);
    CHECK(vcs.cvar == doctest::Approx(3.0 + 2.0 * vc.cvar).epsilon(1e-9));

    // bimodal tail vs adaptive quadrature of the tail integral
    auto mix = paper_mixture();
    auto vm = gmm_var_cvar(mix, 0.05);
    double tail = oracles::adaptive_simpson([&](double x) { return x * mix.pdf1d(x); }, vm.var,
                                            vm.var + 60.0, 1e-12);
    CHECK(std::abs(vm.cvar - tail / 0.05) < 1e-4);
}

TEST_CASE("cvar dominates var across mixtures and epsilons") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        int k = 1 + static_cast<int>(rng.uniform() * 3);
        std::vector<Gaussian> modes;
        Eigen::VectorXd w(k);
        for (int i = 0; i < k; ++i) {
            modes.push_back(Gaussian::scalar(rng.uniform(-5, 5), rng.uniform(0.1, 4.0)));
            w(i) = rng.uniform(0.1, 1.0);
        }
        w /= w.sum();
        GaussianMixture mix(modes, w);
        double eps = rng.uniform(0.01, 0.6);
        auto vc = gmm_var_cvar(mix, eps);
        CHECK(vc.cvar >= vc.var - 1e-9);
    }
}

TEST_CASE("make_psd repairs tiny violations and rejects large ones") {
    Eigen::Matrix2d m;
    m << 1.0, 0.0, 0.0, -1e-9;
    auto fixed = make_psd(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fixed);
    CHECK(es.eigenvalues().minCoeff() >= 0.0);

    Eigen::Matrix2d bad;
    bad << 1.0, 0.0, 0.0, -0.5;
    CHECK_THROWS_AS(make_psd(bad), std::invalid_argument);
}
