#ifndef CCMPC_GMM_HPP
#define CCMPC_GMM_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace ccmpc {

/// Standard normal CDF, PDF and quantile.
double normal_cdf(double x);
double normal_pdf(double x);

/// Quantile of the standard normal: returns q with normal_cdf(q) = p.
/// Rational approximation refined with Halley steps; |error| <= 1e-9.
/// Throws std::domain_error outside (0,1).
double inverse_normal_cdf(double p);

/// Symmetrize and clip slightly negative eigenvalues to zero.
/// Violations below -tol are treated as data errors and throw.
Eigen::MatrixXd make_psd(const Eigen::MatrixXd& m, double tol = 1e-8);

struct Gaussian {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    Gaussian() = default;
    Gaussian(Eigen::VectorXd mu, Eigen::MatrixXd sigma);
    static Gaussian scalar(double mu, double var);

    int dim() const { return static_cast<int>(mean.size()); }
    double stddev() const;  // d=1 only
    void validate() const;
};

struct GaussianMixture {
    std::vector<Gaussian> modes;
    Eigen::VectorXd weights;

    GaussianMixture() = default;
    GaussianMixture(std::vector<Gaussian> m, Eigen::VectorXd w);
    static GaussianMixture single(Gaussian g);

    int num_modes() const { return static_cast<int>(modes.size()); }
    int dim() const;
    void validate() const;

    // d=1 helpers
    double cdf1d(double x) const;
    double pdf1d(double x) const;
    double mean1d() const;
};

struct MomentEstimate {
    Eigen::VectorXd mean_hat;
    Eigen::MatrixXd cov_hat;
    int n_samples = 0;
    int mode_index = 0;
};

struct ConcentrationBounds {
    double r1 = 0.0;
    double r2 = 0.0;
    double beta = 0.0;
    int n_samples = 0;
};

/// Bound family for the moment concentration radii. The constants are
/// configurable; defaults give
///   r1 = sqrt(||Sigma_hat||_F) * sqrt(c1 * ln(2/beta) / N)
///   r2 = sqrt(d / N) + sqrt(c2 * ln(2/beta) / N)
struct ConcentrationConfig {
    double c1 = 2.0;
    double c2 = 2.0;
};

ConcentrationBounds concentration_bounds(const MomentEstimate& estimate, double beta,
                                         const ConcentrationConfig& config = {});

/// Deterministic random stream. Uniforms come from the top 53 bits of a
/// mt19937_64 draw, normals from quantile inversion, so output is
/// platform-independent for a fixed seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform();                                  // [0, 1)
    double uniform(double lo, double hi);
    double normal();
    int categorical(const Eigen::VectorXd& weights);   // CDF inversion
    std::uint64_t next_u64() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

/// Draw a deterministic multivariate normal sample: mean + L * z with
/// L from the eigendecomposition of cov (PSD-repaired).
Eigen::VectorXd sample_gaussian(const Gaussian& g, Rng& rng);

std::vector<Eigen::VectorXd> sample(const GaussianMixture& mixture, int n, std::uint64_t seed);

struct ClusterResult {
    std::vector<MomentEstimate> estimates;  // one per mode, cluster order
    Eigen::VectorXd weights;                // cluster fractions
    std::vector<int> assignment;            // per-sample cluster index
};

/// k-means with k-means++ seeding, 50 restarts, deterministic given seed.
/// Per-cluster moments use the unbiased (N-1) covariance denominator.
ClusterResult cluster_and_estimate(const std::vector<Eigen::VectorXd>& samples, int k,
                                   std::uint64_t seed);

struct VarCvar {
    double var = 0.0;
    double cvar = 0.0;
};

/// (1-epsilon) quantile of a scalar mixture by root finding on the CDF,
/// and the conditional tail expectation from per-mode closed forms.
VarCvar gmm_var_cvar(const GaussianMixture& mixture, double epsilon);

}  // namespace ccmpc

#endif
