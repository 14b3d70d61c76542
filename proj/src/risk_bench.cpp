#include "ccmpc/risk_bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ccmpc {

std::string bench_method_name(BenchMethod m) {
    switch (m) {
        case BenchMethod::CC_MTA: return "cc_mta";
        case BenchMethod::CVAR_CUT: return "cvar_cut";
        case BenchMethod::CC_MRA: return "cc_mra";
        case BenchMethod::CC_SCENARIO: return "cc_scenario";
        case BenchMethod::CVAR_SAA: return "cvar_saa";
        case BenchMethod::CVAR_DR: return "cvar_dr";
    }
    return "unknown";
}

void ScalarRiskProblem::validate() const {
    truth.validate();
    if (truth.dim() != 1) throw std::invalid_argument("ScalarRiskProblem: truth must be scalar");
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw std::invalid_argument("ScalarRiskProblem: epsilon must lie in (0,1)");
    }
    if (n_train < 2 * truth.num_modes()) {
        throw std::invalid_argument("ScalarRiskProblem: n_train must be >= 2K");
    }
    if (n_test < 1) throw std::invalid_argument("ScalarRiskProblem: n_test must be >= 1");
}

double solve_cc_mta(const GaussianMixture& moments, double epsilon,
                    const Eigen::VectorXd& eps_alloc) {
    moments.validate();
    if (moments.dim() != 1) throw std::invalid_argument("solve_cc_mta: requires d=1");
    const int k = moments.num_modes();
    Eigen::VectorXd eps = eps_alloc;
    if (eps.size() == 0) eps = Eigen::VectorXd::Constant(k, epsilon);
    if (eps.size() != k) throw std::invalid_argument("solve_cc_mta: allocation size mismatch");
    double mixed = moments.weights.dot(eps);
    if (std::abs(mixed - epsilon) > 1e-9) {
        throw std::invalid_argument("solve_cc_mta: sum_k pi_k eps_k != epsilon");
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
        double v = moments.modes[i].mean(0) +
                   inverse_normal_cdf(1.0 - eps(i)) * moments.modes[i].stddev();
        if (v > best) best = v;  // strict: ties keep the lowest mode index
    }
    return best;
}

double solve_cvar_cutting_plane(const GaussianMixture& moments, double epsilon, double tol,
                                int max_iter) {
    moments.validate();
    if (moments.dim() != 1) throw std::invalid_argument("solve_cvar_cutting_plane: requires d=1");

    // Constraint map g(x) = CVaR_eps(delta - x), convex in x. Each cut uses
    // the tail-indicator subgradient -1, so the cut at x_n reads
    // x >= x_n + g(x_n). Iterate the cut model until the step is below tol.
    auto shifted_cvar = [&](double x) {
        std::vector<Gaussian> modes = moments.modes;
        for (auto& g : modes) g.mean(0) -= x;
        GaussianMixture shifted(modes, moments.weights);
        return gmm_var_cvar(shifted, epsilon).cvar;
    };

    double x = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < moments.num_modes(); ++k) {
        x = std::max(x, moments.modes[k].mean(0));
    }
    for (int it = 0; it < max_iter; ++it) {
        double cut_bound = x + shifted_cvar(x);
        if (std::abs(cut_bound - x) < tol) return cut_bound;
        x = std::max(x, cut_bound);
    }
    throw std::runtime_error("solve_cvar_cutting_plane: no convergence after " +
                             std::to_string(max_iter) + " iterations, best iterate " +
                             std::to_string(x));
}

double solve_cc_mra(const std::vector<MomentEstimate>& estimates, const Eigen::VectorXd& weights,
                    double epsilon, double beta, const ConcentrationConfig& config) {
    if (estimates.empty()) throw std::invalid_argument("solve_cc_mra: no estimates");
    if (weights.size() != static_cast<Eigen::Index>(estimates.size())) {
        throw std::invalid_argument("solve_cc_mra: weights size mismatch");
    }
    double gamma = inverse_normal_cdf(1.0 - epsilon);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& est : estimates) {
        if (est.n_samples < 2) throw std::invalid_argument("solve_cc_mra: per-mode n must be >= 2");
        auto b = concentration_bounds(est, beta, config);
        double sigma_hat = std::sqrt(std::max(0.0, est.cov_hat(0, 0)));
        double v = est.mean_hat(0) + b.r1 + gamma * sigma_hat * std::sqrt(1.0 + b.r2);
        if (v > best) best = v;
    }
    return best;
}

double solve_cc_scenario(const std::vector<std::vector<double>>& samples_per_mode) {
    if (samples_per_mode.empty()) throw std::invalid_argument("solve_cc_scenario: no modes");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& mode : samples_per_mode) {
        if (mode.empty()) throw std::invalid_argument("solve_cc_scenario: empty mode");
        best = std::max(best, *std::max_element(mode.begin(), mode.end()));
    }
    return best;
}

double solve_cvar_saa(std::vector<double> samples, double epsilon) {
    if (samples.empty()) throw std::invalid_argument("solve_cvar_saa: no samples");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) {
        throw std::invalid_argument("solve_cvar_saa: epsilon must lie in (0,1]");
    }
    std::sort(samples.begin(), samples.end());
    const int n = static_cast<int>(samples.size());
    const double mass = epsilon * n;
    int m = static_cast<int>(std::floor(mass + 1e-12));
    m = std::min(m, n);
    double theta = mass - m;
    double acc = 0.0;
    for (int i = n - m; i < n; ++i) acc += samples[i];
    if (theta > 1e-12 && n - m - 1 >= 0) acc += theta * samples[n - m - 1];
    return acc / mass;
}

double solve_cvar_dr(const std::vector<double>& samples, double epsilon, double gamma) {
    if (gamma < 0.0) throw std::invalid_argument("solve_cvar_dr: gamma must be >= 0");
    return solve_cvar_saa(samples, epsilon) + gamma / epsilon;
}

double evaluate_violation(double x_star, const GaussianMixture& truth, int n_test,
                          std::uint64_t seed) {
    if (n_test < 1) throw std::invalid_argument("evaluate_violation: n_test must be >= 1");
    auto draws = sample(truth, n_test, seed);
    int count = 0;
    for (const auto& v : draws) {
        if (v(0) > x_star) ++count;
    }
    return static_cast<double>(count) / n_test;
}

std::vector<BenchResult> run_bench(const GaussianMixture& truth, const BenchProtocol& protocol) {
    truth.validate();
    if (truth.dim() != 1) throw std::invalid_argument("run_bench: truth must be scalar");
    std::vector<BenchResult> results;
    results.reserve(protocol.reps * 6);

    for (int rep = 0; rep < protocol.reps; ++rep) {
        const std::uint64_t rep_seed = protocol.seed + 1000003ull * rep;
        auto train = sample(truth, protocol.n_train, rep_seed);

        auto clusters = cluster_and_estimate(train, protocol.k_modes, rep_seed + 7);

        // stable mode order: ascending cluster mean
        std::vector<int> order(clusters.estimates.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return clusters.estimates[a].mean_hat(0) < clusters.estimates[b].mean_hat(0);
        });

        std::vector<MomentEstimate> estimates;
        std::vector<Gaussian> est_modes;
        Eigen::VectorXd weights(protocol.k_modes);
        std::vector<std::vector<double>> mode_samples(protocol.k_modes);
        for (int rank = 0; rank < protocol.k_modes; ++rank) {
            int c = order[rank];
            estimates.push_back(clusters.estimates[c]);
            est_modes.emplace_back(clusters.estimates[c].mean_hat, clusters.estimates[c].cov_hat);
            weights(rank) = clusters.weights(c);
            for (size_t i = 0; i < train.size(); ++i) {
                if (clusters.assignment[i] == c) mode_samples[rank].push_back(train[i](0));
            }
        }
        GaussianMixture estimated(est_modes, weights);

        std::vector<double> raw;
        raw.reserve(train.size());
        for (const auto& v : train) raw.push_back(v(0));

        auto timed = [&](BenchMethod method, auto&& solve) {
            BenchResult r;
            r.method = method;
            r.seed = rep_seed;
            auto t0 = std::chrono::steady_clock::now();
            r.x_star = solve();
            auto t1 = std::chrono::steady_clock::now();
            r.solve_time = std::chrono::duration<double>(t1 - t0).count();
            r.violation_rate = evaluate_violation(r.x_star, truth, protocol.n_test, rep_seed + 13);
            results.push_back(r);
        };

        timed(BenchMethod::CC_MTA, [&] { return solve_cc_mta(estimated, protocol.epsilon); });
        timed(BenchMethod::CVAR_CUT,
              [&] { return solve_cvar_cutting_plane(estimated, protocol.epsilon); });
        timed(BenchMethod::CC_MRA, [&] {
            return solve_cc_mra(estimates, weights, protocol.epsilon, protocol.beta);
        });
        timed(BenchMethod::CC_SCENARIO, [&] { return solve_cc_scenario(mode_samples); });
        timed(BenchMethod::CVAR_SAA, [&] { return solve_cvar_saa(raw, protocol.epsilon); });
        timed(BenchMethod::CVAR_DR,
              [&] { return solve_cvar_dr(raw, protocol.epsilon, protocol.gamma); });
    }
    return results;
}

}  // namespace ccmpc
