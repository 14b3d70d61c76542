#ifndef CCMPC_CHANCE_ROWS_HPP
#define CCMPC_CHANCE_ROWS_HPP

#include "ccmpc/dynamics.hpp"
#include "ccmpc/gmm.hpp"
#include "ccmpc/obstacle.hpp"

#include <vector>

namespace ccmpc {

/// Uniform risk split of the joint chance constraint: each (t, j, i) gets
/// eps/(T*J), with the per-mode level equal to the same value so the
/// pi-weighted mode sum reproduces it.
struct RiskAllocation {
    double epsilon_total = 0.0;
    int horizon = 0;        // closed-loop T
    int num_obstacles = 0;
    double eps_per_row = 0.0;
    double gamma = 0.0;     // Psi^{-1}(1 - eps_per_row)

    double eps(int t, int j, int i, int k) const;
    double gamma_at(int t, int j, int i, int k) const;
    void validate() const;
};

/// eps_{ij}^t = eps/(TJ) with per-mode uniform split; errors when the
/// per-row level reaches 0.5 (the quantile would be non-positive) and
/// floors it at 1e-6 to keep the quantile finite.
RiskAllocation allocate_risk(double epsilon, int horizon, int num_obstacles);

enum class SocRowKind { NOMINAL, ROBUST, MOMENT_ROBUST };

/// One face chance constraint in deterministic form, value(x) <= M z.
struct SocRow {
    SocRowKind kind = SocRowKind::NOMINAL;
    Eigen::VectorXd mean;    // (n_x + 1)
    Eigen::MatrixXd cov;     // (n_x+1)^2; ROBUST uses only its Frobenius norm
    double frob_sqrt = 0.0;  // sqrt(||cov||_F), cached for ROBUST rows
    double gamma = 0.0;
    double r1 = 0.0, r2 = 0.0;  // MOMENT_ROBUST only
    double big_m = 0.0;
    int t = 0, j = 0, i = 0, k = 0;
    int group = -1;          // index into the group list
    void validate() const;
};

/// Big-M disjunction group: exactly one face per (t, j, k) is active
/// (z = 0), all others are released (sum_i z = I_j - 1).
struct BinaryGroup {
    int t = 0, j = 0, k = 0;
    std::vector<int> row_indices;  // member SocRows, one per face
};

/// Gamma * sqrt(x~' Sigma x~) + x~' mu
double nominal_row_value(const Eigen::VectorXd& x_hom, const SocRow& row);
/// Gamma * sqrt(||Sigma||_F) * ||x~||_2 + x~' mu
double robust_row_value(const Eigen::VectorXd& x_hom, const SocRow& row);
/// Gamma * sqrt((1+r2) x~' Sigma_hat x~) + r1 ||x~||_2 + x~' mu_hat
double moment_robust_row_value(const Eigen::VectorXd& x_hom, const SocRow& row);
/// Dispatch on row.kind.
double row_value(const Eigen::VectorXd& x_hom, const SocRow& row);

/// Upper bound on ||x~||_2 over the state box (requires finite position
/// bounds on the coordinates that carry obstacle normals).
double state_radius_bound(const ConvexSet& state_set);

struct BuiltRows {
    std::vector<SocRow> rows;
    std::vector<BinaryGroup> groups;
};

/// Rows and groups for all t in (tau, t_end], every obstacle, face and mode
/// present in the prediction at planning step tau. M follows the
/// worst-case row bound over the state box, doubled.
/// mode_filter, when nonempty, keeps only the listed (j, k) pairs.
BuiltRows build_rows(const GmmPrediction& pred, const RiskAllocation& alloc, SocRowKind kind,
                     int tau, int t_end, const ConvexSet& state_set,
                     const std::vector<std::pair<int, int>>& mode_filter = {},
                     const ConcentrationConfig& moment_config = {}, int moment_samples = 0,
                     double moment_beta = 0.05);

}  // namespace ccmpc

#endif
