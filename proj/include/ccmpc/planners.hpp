#ifndef CCMPC_PLANNERS_HPP
#define CCMPC_PLANNERS_HPP

#include "ccmpc/chance_rows.hpp"
#include "ccmpc/dynamics.hpp"
#include "ccmpc/misocp.hpp"
#include "ccmpc/obstacle.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace ccmpc {

enum class PlannerKind { NOMINAL, ROBUST, CONTINGENCY };
std::string planner_name(PlannerKind kind);

struct HorizonPolicy {
    enum class Mode { SHRINKING, RECEDING };
    Mode mode = Mode::SHRINKING;
    int closed_loop_T = 10;  // T
    int receding_span = 8;   // T_s, open-loop length in receding mode
    void validate() const;
};

/// Stage cost. LANE_CHANGE is the scalar terminal form
/// (x_{T,lat} - goal)^2 - w * x_{T,lon}; QUADRATIC is
/// ||pos(x_T) - goal||_P^2 + sum_t ||u_t||_{R1}^2 + ||du_t||_{R2}^2.
struct CostSpec {
    enum class Kind { LANE_CHANGE, QUADRATIC };
    Kind kind = Kind::LANE_CHANGE;

    // lane change
    double lat_goal = 3.5;
    int lat_coord = 1;
    int lon_coord = 0;
    double lon_weight = 0.1;

    // quadratic
    Eigen::Matrix2d pos_weight = 300.0 * Eigen::Matrix2d::Identity();
    Eigen::Vector2d goal_pos = Eigen::Vector2d::Zero();
    Eigen::Matrix2d r1 = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d r2 = Eigen::Matrix2d::Identity();
    std::optional<Eigen::Vector2d> u_prev;  // previous applied input for the first du term
};

/// Mode subsets S_l for contingency branches, as (obstacle, mode) pairs.
using ModeSubsets = std::vector<std::vector<std::pair<int, int>>>;

/// One open-loop problem instance with the metadata needed to read
/// trajectories and re-check rows afterwards.
struct BuiltProblem {
    Misocp problem;
    int tau = 0;
    int t_end = 0;  // plan covers states (tau, t_end]
    int n_x = 0, n_u = 0;
    int branches = 1;
    int coincide_span = 0;  // inputs tied across branches for t < tau + span
    std::vector<SocRow> row_meta;
    std::vector<int> row_branch;
    std::vector<BinaryGroup> groups_meta;
    Eigen::VectorXd x_now;

    int u_var(int branch, int t) const;  // t in [tau, t_end)
    int x_var(int branch, int t) const;  // t in (tau, t_end]
};

BuiltProblem build_nominal(int tau, int t_end, const LtvSystem& system,
                           const Eigen::VectorXd& x_now, const GmmPrediction& pred,
                           const RiskAllocation& alloc, const CostSpec& cost);

BuiltProblem build_robust(int tau, int t_end, const LtvSystem& system, const Eigen::VectorXd& x_now,
                          const GmmPrediction& pred, const RiskAllocation& alloc,
                          const CostSpec& cost);

/// L branch copies with coinciding inputs for t in [tau, tau+t_c); branch l
/// carries the chance rows of subset S_l only. Subsets must cover every
/// (obstacle, mode) pair of the prediction at this step.
BuiltProblem build_contingency(int tau, int t_end, const LtvSystem& system,
                               const Eigen::VectorXd& x_now, const GmmPrediction& pred,
                               const RiskAllocation& alloc, const CostSpec& cost,
                               const ModeSubsets& subsets, int t_c);

/// Default subset selection: S_l pairs the l-th mode of every obstacle,
/// obstacles with fewer modes contribute their last mode.
ModeSubsets default_subsets(const GmmPrediction& pred, int tau);

/// Unconstrained-by-obstacles problem (receding lane keeping).
BuiltProblem build_free(int tau, int t_end, const LtvSystem& system, const Eigen::VectorXd& x_now,
                        const CostSpec& cost);

struct PlanResult {
    int tau = 0, t_end = 0;
    MiStatus status = MiStatus::INFEASIBLE;
    double objective = 0.0;
    double solve_time = 0.0;
    int node_count = 0;
    std::vector<std::vector<Eigen::VectorXd>> inputs;  // [branch][t - tau]
    std::vector<std::vector<Eigen::VectorXd>> states;  // [branch][t - tau - 1]
    std::vector<SocRow> rows;
    std::vector<int> row_branch;
    std::vector<int> binaries;
    std::vector<BinaryGroup> groups;
};

PlanResult solve_step(const BuiltProblem& built, const MisocpSettings& settings);

struct TraceStep {
    int time = 0;  // absolute step index; executing reaches state time+1
    bool interaction = false;
    int tau = 0;    // maneuver step while in interaction
    int t_oh = 0;   // open-loop end (absolute)
    PlanResult plan;
    Eigen::VectorXd executed_input;
    Eigen::VectorXd executed_state;
};

struct ClosedLoopTrace {
    Eigen::VectorXd x0;
    std::vector<TraceStep> steps;
    std::optional<int> infeasible_at;  // maneuver tau of the failed solve
    bool goal_reached = false;
    int switch_time = -1;  // absolute time shrinking planning started
};

struct MpcSetup {
    PlannerKind planner = PlannerKind::NOMINAL;
    HorizonPolicy policy;
    double epsilon = 0.05;
    int t_c = 1;
    ModeSubsets subsets;  // empty -> default_subsets per step
    CostSpec cost;
    MisocpSettings misocp;
    int max_receding_steps = 40;
};

/// Hooks the scenario supplies to the closed-loop driver.
struct MpcHooks {
    // prediction for a maneuver starting at the given absolute time;
    // steps are indexed by maneuver step tau
    std::function<GmmPrediction(int start_time)> shrink_prediction;
    // LTV system for the maneuver (absolute maneuver-time indexing over
    // [tau, T); may relinearize around the previous plan)
    std::function<LtvSystem(int tau, const Eigen::VectorXd& x_now, const PlanResult* prev)>
        shrink_system;
    // receding-mode system and interaction trigger; both optional when the
    // run starts in the interaction state
    std::function<LtvSystem(int time, const Eigen::VectorXd& x_now)> receding_system;
    std::function<bool(int time, const std::vector<Eigen::VectorXd>& planned_states)>
        interaction_trigger;
};

/// Algorithm-1 closed loop with the two-state machine: receding-horizon
/// steps without obstacle rows until the trigger fires and the shrinking
/// problem is feasible at its first step, then a shrinking maneuver of T
/// steps. Returns early with infeasible_at on a failed shrinking solve.
ClosedLoopTrace run_mpc(const MpcSetup& setup, const MpcHooks& hooks, const Eigen::VectorXd& x0,
                        bool start_in_interaction = true);

struct FeasibilityMargin {
    int tau = 0;  // margins of the tau+1 rows at the tau plan
    double min_margin = 0.0;
    int rows_checked = 0;
};

struct RecursiveFeasibilityReport {
    std::vector<FeasibilityMargin> margins;
    double worst = 0.0;
    bool certified = false;  // every margin >= -tol
};

/// Re-check the proof certificate: the tail of the plan from step tau,
/// with its binary selection, must satisfy the ROBUST rows built from the
/// tau+1 prediction. Margin is M z - row value per row; negative margins
/// falsify the certificate.
RecursiveFeasibilityReport verify_recursive_feasibility(const ClosedLoopTrace& trace,
                                                        const GmmPrediction& pred,
                                                        const RiskAllocation& alloc,
                                                        double tol = 1e-8);

/// Margins M z - row value of every t = tau+1 row at the executed state
/// of each interaction step (the closed-loop safety certificate; for
/// contingency plans this covers the rows of every branch, since executed
/// states coincide).
std::vector<double> executed_row_margins(const ClosedLoopTrace& trace);

}  // namespace ccmpc

#endif
