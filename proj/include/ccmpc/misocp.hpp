#ifndef CCMPC_MISOCP_HPP
#define CCMPC_MISOCP_HPP

#include "ccmpc/socp.hpp"

#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace ccmpc {

/// Mixed-integer second-order cone program. Variables are the continuous
/// block [0, n_cont) followed by binaries [n_cont, n_cont + n_bin). Every
/// binary belongs to exactly one selection group; a group picks one
/// "active" member (z = 0) and releases the rest (sum z = size - 1).
struct Misocp {
    int n_cont = 0;
    int n_bin = 0;

    // objective (continuous vars only): 1/2 v'Qv + c'v + constant
    std::vector<std::tuple<int, int, double>> quad;  // symmetric triplets
    Eigen::VectorXd lin;
    double constant = 0.0;

    struct LinRow {
        std::vector<std::pair<int, double>> coeffs;  // full-column indices
        double rhs = 0.0;
        bool equality = false;
        int binary = -1;  // binary whose big-M term sits in coeffs, if any
    };
    std::vector<LinRow> rows;

    struct Soc {
        // || arg * v + arg_off || <= rhs'v + rhs_off
        std::vector<std::tuple<int, int, double>> arg;  // (arg row, column, value)
        Eigen::VectorXd arg_off;
        std::vector<std::pair<int, double>> rhs_coeffs;
        double rhs_off = 0.0;
        int binary = -1;  // binary whose big-M term sits in rhs_coeffs, if any
    };
    std::vector<Soc> socs;

    std::vector<std::vector<int>> groups;

    // set by builders that guarantee the big-M constant dominates each row
    // over the feasible set, allowing released rows to be dropped
    bool bigm_certified = false;

    int num_vars() const { return n_cont + n_bin; }
    int col_bin(int b) const { return n_cont + b; }
    void validate() const;
};

enum class MiStatus { OPTIMAL, INFEASIBLE, TIME_LIMIT };

std::string mi_status_name(MiStatus status);

struct SolveResult {
    MiStatus status = MiStatus::INFEASIBLE;
    double objective = 0.0;
    Eigen::VectorXd primal;         // continuous block
    std::vector<int> binaries;      // 0/1 values
    std::vector<int> group_choice;  // active member index per group
    int node_count = 0;
    double solve_time = 0.0;
    double bound_gap = 0.0;
};

struct MisocpSettings {
    double time_limit = 120.0;
    double feas_tol = 1e-6;
    double int_tol = 1e-6;
    ConicSettings conic;
};

struct ConvexNodeResult {
    bool solved = false;    // interior point reached optimality
    bool feasible = false;  // phase-1 accepted the node
    double objective = 0.0;
    Eigen::VectorXd cont;
    Eigen::VectorXd binaries;  // all n_bin values, fixed entries included
    // diagnostics
    ConicStatus phase1_status = ConicStatus::NUMERICAL_ERROR;
    double phase1_shift = 0.0;
    ConicStatus main_status = ConicStatus::NUMERICAL_ERROR;
    double primal_res = 0.0, dual_res = 0.0, rel_gap = 0.0;
    int iterations = 0;
};

/// Solve the convex subproblem with the given group choices: -1 relaxes a
/// group's binaries into [0,1], any other value fixes that member active
/// (z=0) and the rest released (z=1). A converged main solve certifies
/// feasibility directly; otherwise the phase-1 problem classifies the node.
/// warm_cont/warm_bin (parent values) seed the interior point when given.
ConvexNodeResult solve_convex(const Misocp& prob, const std::vector<int>& choices,
                              const MisocpSettings& settings = {},
                              const Eigen::VectorXd& warm_cont = Eigen::VectorXd(),
                              const Eigen::VectorXd& warm_bin = Eigen::VectorXd());

/// Canonical tie rule for degenerate assignments: given the continuous
/// optimum, each group activates its lowest-indexed member whose tagged
/// rows already hold at z = 0. Groups with untagged members keep the
/// fallback choice.
std::vector<int> canonical_group_choice(const Misocp& prob, const Eigen::VectorXd& cont,
                                        const std::vector<int>& fallback, double tol = 1e-6);

/// Repair of a relaxation solution: when the continuous point satisfies at
/// least one tagged member per group, that canonical assignment is feasible
/// at the same objective. Empty when some group has no satisfied member.
std::optional<std::vector<int>> satisfied_choice(const Misocp& prob, const Eigen::VectorXd& cont,
                                                 double tol = 1e-6);

/// Best-first branch and bound over the group choices. Branching picks the
/// group holding the most fractional relaxed binary (ties to the lowest
/// group index); children enumerate its members in face order. Objective
/// ties between assignments resolve through canonical_group_choice, which
/// yields the lexicographically smallest satisfiable binary vector at the
/// continuous optimum. Deterministic for a fixed problem.
SolveResult solve_misocp(const Misocp& prob, const MisocpSettings& settings = {});

}  // namespace ccmpc

#endif
