#ifndef CCMPC_SOCP_HPP
#define CCMPC_SOCP_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <vector>

namespace ccmpc {

/// Cone layout of the inequality block: leading nonnegative-orthant rows
/// followed by second-order cones of the listed dimensions.
struct ConeSpec {
    int orthant = 0;
    std::vector<int> soc_dims;

    int total_rows() const;
    int degree() const;  // orthant rows + number of SOC blocks
    void validate() const;
};

enum class ConicStatus { OPTIMAL, MAX_ITERATIONS, NUMERICAL_ERROR };

struct ConicSettings {
    int max_iterations = 60;
    double feas_tol = 1e-8;
    double abs_gap_tol = 1e-8;
    double rel_gap_tol = 1e-8;
    double static_reg = 1e-9;
    int refine_steps = 2;
    bool verbose = false;  // per-iteration summary on stderr
};

struct ConicResult {
    ConicStatus status = ConicStatus::NUMERICAL_ERROR;
    Eigen::VectorXd x, y, z, s;
    double objective = 0.0;
    double gap = 0.0, rel_gap = 0.0;
    double primal_res = 0.0, dual_res = 0.0;
    int iterations = 0;
};

/// minimize   (1/2) x'Px + q'x
/// subject to A x = b,  G x + s = h,  s in K
struct ConicProblem {
    Eigen::SparseMatrix<double> quad;  // P, n x n, PSD (may be empty for n x n zero)
    Eigen::VectorXd lin;               // q
    Eigen::SparseMatrix<double> eq;    // A, p x n
    Eigen::VectorXd eq_rhs;            // b
    Eigen::SparseMatrix<double> ineq;  // G, m x n
    Eigen::VectorXd ineq_rhs;          // h
    ConeSpec cone;

    int num_vars() const { return static_cast<int>(lin.size()); }
    void validate() const;
};

/// Primal-dual interior point with Nesterov-Todd scaling and Mehrotra
/// predictor-corrector. Infeasible problems do not converge here; use
/// conic_feasibility to certify them. A primal warm start (matching
/// num_vars) replaces the least-squares initialization.
ConicResult solve_conic(const ConicProblem& problem, const ConicSettings& settings = {},
                        const Eigen::VectorXd& x_warm = Eigen::VectorXd());

struct FeasibilityResult {
    ConicStatus status = ConicStatus::NUMERICAL_ERROR;
    double shift = 0.0;  // optimal t of: min t s.t. Ax=b, Gx + s = h + t e
    Eigen::VectorXd x;
    bool feasible(double tol = 1e-6) const { return status == ConicStatus::OPTIMAL && shift <= tol; }
};

/// Phase-1 certificate: relax every cone row by t along the cone identity
/// and minimize t (bounded below by -1). shift > tol certifies
/// infeasibility of the original rows; shift < 0 yields a strictly
/// feasible x.
FeasibilityResult conic_feasibility(const ConicProblem& problem, const ConicSettings& settings = {});

}  // namespace ccmpc

#endif
