#include "ccmpc/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ccmpc {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt2Pi = 2.5066282746310002;
}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("inverse_normal_cdf: p must lie in (0,1), got " + std::to_string(p));
    }

    // Acklam's rational approximation, |relative error| < 1.15e-9.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;

    double x;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement against the erfc-based CDF.
    for (int it = 0; it < 2; ++it) {
        double e = normal_cdf(x) - p;
        double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
        x = x - u / (1.0 + 0.5 * x * u);
    }
    return x;
}

Eigen::MatrixXd make_psd(const Eigen::MatrixXd& m, double tol) {
    if (m.rows() != m.cols()) {
        throw std::invalid_argument("make_psd: matrix must be square");
    }
    Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -tol) {
        throw std::invalid_argument("make_psd: matrix is not PSD, min eigenvalue " +
                                    std::to_string(min_eig));
    }
    if (min_eig >= 0.0) {
        return sym;
    }
    Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

Gaussian::Gaussian(Eigen::VectorXd mu, Eigen::MatrixXd sigma)
    : mean(std::move(mu)), cov(std::move(sigma)) {
    validate();
    cov = make_psd(cov);
}

Gaussian Gaussian::scalar(double mu, double var) {
    Gaussian g;
    g.mean = Eigen::VectorXd::Constant(1, mu);
    g.cov = Eigen::MatrixXd::Constant(1, 1, var);
    g.validate();
    return g;
}

double Gaussian::stddev() const {
    if (dim() != 1) throw std::logic_error("Gaussian::stddev: requires d=1");
    return std::sqrt(std::max(0.0, cov(0, 0)));
}

void Gaussian::validate() const {
    if (mean.size() == 0) throw std::invalid_argument("Gaussian: empty mean");
    if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
        throw std::invalid_argument("Gaussian: cov dimensions do not match mean");
    }
    if (!mean.allFinite() || !cov.allFinite()) {
        throw std::invalid_argument("Gaussian: non-finite entries");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, cov.norm())) {
        throw std::invalid_argument("Gaussian: covariance is not PSD");
    }
}

GaussianMixture::GaussianMixture(std::vector<Gaussian> m, Eigen::VectorXd w)
    : modes(std::move(m)), weights(std::move(w)) {
    validate();
}

GaussianMixture GaussianMixture::single(Gaussian g) {
    GaussianMixture mix;
    mix.modes.push_back(std::move(g));
    mix.weights = Eigen::VectorXd::Ones(1);
    return mix;
}

int GaussianMixture::dim() const {
    if (modes.empty()) throw std::logic_error("GaussianMixture: no modes");
    return modes.front().dim();
}

void GaussianMixture::validate() const {
    if (modes.empty()) throw std::invalid_argument("GaussianMixture: no modes");
    if (weights.size() != static_cast<Eigen::Index>(modes.size())) {
        throw std::invalid_argument("GaussianMixture: weights/modes length mismatch");
    }
    if (weights.minCoeff() < 0.0) {
        throw std::invalid_argument("GaussianMixture: negative weight");
    }
    if (std::abs(weights.sum() - 1.0) > 1e-9) {
        throw std::invalid_argument("GaussianMixture: weights must sum to 1, got " +
                                    std::to_string(weights.sum()));
    }
    int d = modes.front().dim();
    for (const auto& g : modes) {
        g.validate();
        if (g.dim() != d) throw std::invalid_argument("GaussianMixture: mode dimension mismatch");
    }
}

double GaussianMixture::cdf1d(double x) const {
    double acc = 0.0;
    for (int k = 0; k < num_modes(); ++k) {
        double sd = modes[k].stddev();
        double z = sd > 0.0 ? (x - modes[k].mean(0)) / sd : std::numeric_limits<double>::infinity() *
                                                                (x >= modes[k].mean(0) ? 1.0 : -1.0);
        if (sd == 0.0) {
            acc += weights(k) * (x >= modes[k].mean(0) ? 1.0 : 0.0);
        } else {
            acc += weights(k) * normal_cdf(z);
        }
    }
    return acc;
}

double GaussianMixture::pdf1d(double x) const {
    double acc = 0.0;
    for (int k = 0; k < num_modes(); ++k) {
        double sd = modes[k].stddev();
        if (sd > 0.0) acc += weights(k) * normal_pdf((x - modes[k].mean(0)) / sd) / sd;
    }
    return acc;
}

double GaussianMixture::mean1d() const {
    double acc = 0.0;
    for (int k = 0; k < num_modes(); ++k) acc += weights(k) * modes[k].mean(0);
    return acc;
}

ConcentrationBounds concentration_bounds(const MomentEstimate& estimate, double beta,
                                         const ConcentrationConfig& config) {
    if (!(beta > 0.0 && beta < 1.0)) {
        throw std::domain_error("concentration_bounds: beta must lie in (0,1)");
    }
    if (estimate.n_samples < 2) {
        throw std::invalid_argument("concentration_bounds: n_samples must be >= 2");
    }
    const double n = static_cast<double>(estimate.n_samples);
    const double d = static_cast<double>(estimate.mean_hat.size());
    const double log_term = std::log(2.0 / beta);
    ConcentrationBounds out;
    out.r1 = std::sqrt(estimate.cov_hat.norm()) * std::sqrt(config.c1 * log_term / n);
    out.r2 = std::sqrt(d / n) + std::sqrt(config.c2 * log_term / n);
    out.beta = beta;
    out.n_samples = estimate.n_samples;
    return out;
}

double Rng::uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    // Quantile inversion keeps the stream platform-independent.
    double u = uniform();
    u = std::min(std::max(u, 1e-17), 1.0 - 1e-16);
    return inverse_normal_cdf(u);
}

int Rng::categorical(const Eigen::VectorXd& weights) {
    double u = uniform() * weights.sum();
    double acc = 0.0;
    for (int k = 0; k < weights.size(); ++k) {
        acc += weights(k);
        if (u < acc) return k;
    }
    return static_cast<int>(weights.size()) - 1;
}

Eigen::VectorXd sample_gaussian(const Gaussian& g, Rng& rng) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g.cov + g.cov.transpose()));
    Eigen::VectorXd scale = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::VectorXd z(g.dim());
    for (int i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return g.mean + es.eigenvectors() * scale.asDiagonal() * z;
}

std::vector<Eigen::VectorXd> sample(const GaussianMixture& mixture, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    mixture.validate();
    Rng rng(seed);
    std::vector<Eigen::VectorXd> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        int k = rng.categorical(mixture.weights);
        out.push_back(sample_gaussian(mixture.modes[k], rng));
    }
    return out;
}

namespace {

struct KmeansRun {
    std::vector<int> assignment;
    std::vector<Eigen::VectorXd> centers;
    double inertia = std::numeric_limits<double>::infinity();
};

KmeansRun kmeans_once(const std::vector<Eigen::VectorXd>& samples, int k, Rng& rng) {
    const int n = static_cast<int>(samples.size());
    KmeansRun run;
    run.centers.reserve(k);

    // k-means++ seeding
    run.centers.push_back(samples[static_cast<int>(rng.uniform() * n) % n]);
    std::vector<double> dist2(n, 0.0);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& ctr : run.centers) {
                best = std::min(best, (samples[i] - ctr).squaredNorm());
            }
            dist2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            run.centers.push_back(samples[static_cast<int>(rng.uniform() * n) % n]);
            continue;
        }
        double u = rng.uniform() * total;
        double acc = 0.0;
        int pick = n - 1;
        for (int i = 0; i < n; ++i) {
            acc += dist2[i];
            if (u < acc) {
                pick = i;
                break;
            }
        }
        run.centers.push_back(samples[pick]);
    }

    run.assignment.assign(n, 0);
    for (int iter = 0; iter < 200; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best_c = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                double d = (samples[i] - run.centers[c]).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best_c = c;
                }
            }
            if (run.assignment[i] != best_c) {
                run.assignment[i] = best_c;
                changed = true;
            }
        }
        std::vector<Eigen::VectorXd> sums(k, Eigen::VectorXd::Zero(samples[0].size()));
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            sums[run.assignment[i]] += samples[i];
            counts[run.assignment[i]]++;
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) run.centers[c] = sums[c] / counts[c];
        }
        if (!changed && iter > 0) break;
    }

    run.inertia = 0.0;
    for (int i = 0; i < n; ++i) {
        run.inertia += (samples[i] - run.centers[run.assignment[i]]).squaredNorm();
    }
    return run;
}

}  // namespace

ClusterResult cluster_and_estimate(const std::vector<Eigen::VectorXd>& samples, int k,
                                   std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("cluster_and_estimate: k must be >= 1");
    if (static_cast<int>(samples.size()) < 2 * k) {
        throw std::invalid_argument("cluster_and_estimate: need at least 2k samples");
    }
    const int n = static_cast<int>(samples.size());
    const int d = static_cast<int>(samples[0].size());

    KmeansRun best;
    if (k == 1) {
        best.assignment.assign(n, 0);
    } else {
        Rng rng(seed);
        const int restarts = 50;
        for (int r = 0; r < restarts; ++r) {
            KmeansRun run = kmeans_once(samples, k, rng);
            if (run.inertia < best.inertia) best = std::move(run);
        }
    }

    ClusterResult result;
    result.assignment = best.assignment;
    result.weights = Eigen::VectorXd::Zero(k);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) counts[best.assignment[i]]++;
    for (int c = 0; c < k; ++c) {
        if (counts[c] == 0) {
            throw std::runtime_error("cluster_and_estimate: empty cluster " + std::to_string(c));
        }
        result.weights(c) = static_cast<double>(counts[c]) / n;
    }

    for (int c = 0; c < k; ++c) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < n; ++i) {
            if (best.assignment[i] == c) mean += samples[i];
        }
        mean /= counts[c];
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
        if (counts[c] >= 2) {
            for (int i = 0; i < n; ++i) {
                if (best.assignment[i] == c) {
                    Eigen::VectorXd diff = samples[i] - mean;
                    cov += diff * diff.transpose();
                }
            }
            cov /= (counts[c] - 1);
        }
        MomentEstimate est;
        est.mean_hat = mean;
        est.cov_hat = make_psd(cov);
        est.n_samples = counts[c];
        est.mode_index = c;
        result.estimates.push_back(std::move(est));
    }
    return result;
}

VarCvar gmm_var_cvar(const GaussianMixture& mixture, double epsilon) {
    if (mixture.dim() != 1) throw std::invalid_argument("gmm_var_cvar: requires d=1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw std::domain_error("gmm_var_cvar: epsilon must lie in (0,1)");
    }
    const double target = 1.0 - epsilon;

    // Bracket the quantile, then bisect the CDF to 1e-9.
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < mixture.num_modes(); ++k) {
        double sd = std::max(mixture.modes[k].stddev(), 1e-12);
        lo = std::min(lo, mixture.modes[k].mean(0) - 12.0 * sd);
        hi = std::max(hi, mixture.modes[k].mean(0) + 12.0 * sd);
    }
    while (mixture.cdf1d(lo) > target) lo -= (hi - lo);
    while (mixture.cdf1d(hi) < target) hi += (hi - lo);
    for (int it = 0; it < 200 && (hi - lo) > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        if (mixture.cdf1d(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double var = 0.5 * (lo + hi);

    // CVaR = (1/eps) * sum_k pi_k * E[X_k 1{X_k > var}] with Gaussian
    // partial expectation E[X 1{X>q}] = mu*(1-Phi(z)) + sigma*phi(z).
    double tail = 0.0;
    for (int k = 0; k < mixture.num_modes(); ++k) {
        double mu = mixture.modes[k].mean(0);
        double sd = mixture.modes[k].stddev();
        if (sd > 0.0) {
            double z = (var - mu) / sd;
            tail += mixture.weights(k) * (mu * (1.0 - normal_cdf(z)) + sd * normal_pdf(z));
        } else if (mu > var) {
            tail += mixture.weights(k) * mu;
        }
    }
    return {var, tail / epsilon};
}

}  // namespace ccmpc
