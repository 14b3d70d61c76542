#ifndef CCMPC_SCENARIO_HPP
#define CCMPC_SCENARIO_HPP

#include "ccmpc/planners.hpp"

#include <string>
#include <vector>

namespace ccmpc {

struct OvSpec {
    Eigen::Vector2d init_pos = Eigen::Vector2d::Zero();
    double init_speed = 5.56;
    double heading = 0.0;
    std::vector<double> mode_accels = {-1.2, 1.5};  // yield, accelerate
    Eigen::VectorXd mode_weights;                   // empty -> uniform
    Eigen::Vector2d half_extents = Eigen::Vector2d(2.0, 1.0);
    // scripted turn for the intersection scene: mode turns by this heading
    // change over the crossing when nonzero
    std::vector<double> mode_turn = {};
};

struct ScenarioConfig {
    enum class Scene { LANE_CHANGE, T_INTERSECTION_LITE };
    Scene scene = Scene::LANE_CHANGE;

    Eigen::VectorXd ev_init;
    std::vector<OvSpec> ovs;
    int horizon = 10;       // closed-loop T of the maneuver
    double dt = 0.4;
    double epsilon = 0.05;
    std::vector<PlannerKind> planners = {PlannerKind::NOMINAL, PlannerKind::ROBUST,
                                         PlannerKind::CONTINGENCY};
    std::uint64_t seed = 1;
    int n_trials = 10;
    int t_c = 1;
    int receding_span = 8;

    // lane-change geometry
    double lane_width = 3.5;
    double lat_goal = 3.5;

    // state box (finite; also sizes the disjunction constants)
    Eigen::VectorXd state_lower, state_upper;

    // prediction noise model
    double sigma_base = 0.02;      // per-step growth of the position noise, m
    double sigma_lat_frac = 0.4;   // lateral noise as a fraction of sigma
    double mean_noise_frac = 0.8;  // mean-shift budget as a fraction of Gamma*g
    double cov_decay = 0.5;        // covariance multiplier per planning step

    int collision_samples = 10000;

    // intersection geometry
    Eigen::Vector2d region_lo = Eigen::Vector2d(-6.0, -6.0);
    Eigen::Vector2d region_hi = Eigen::Vector2d(6.0, 6.0);
    Eigen::Vector2d goal_pos = Eigen::Vector2d(2.0, 14.0);

    void validate() const;
    void apply_defaults();
};

/// Synthetic lane-change predictions reproducing the paper's construction:
/// two modes at the first planning step collapsing to the realized mode
/// afterwards, covariance scaled by cov_decay per step, mean perturbations
/// clipped inside the Assumption-3 budget. Steps tau in [0, tau_max],
/// horizon T; realized_mode picks the surviving chain.
GmmPrediction gen_lane_change_predictions(const ScenarioConfig& config, int tau_max, int t_horizon,
                                          std::uint64_t seed, int realized_mode);

/// Spec-facing convenience: tau_max steps of the default single-OV scene.
GmmPrediction gen_lane_change_predictions(int tau_max, int t_horizon, std::uint64_t seed);

/// Fraction of sampled obstacle parameter draws that collide with the
/// executed states of the trace (a draw collides when every face value is
/// positive for some obstacle). Also returns per-step rates.
struct CollisionReport {
    double rate = 0.0;
    std::vector<double> per_step;
    long long samples = 0;
};
CollisionReport evaluate_collision_rate(const ClosedLoopTrace& trace, const GmmPrediction& pred,
                                        int n_samples, std::uint64_t seed);

struct TrialRecord {
    PlannerKind planner;
    std::uint64_t seed = 0;
    int realized_mode = 0;
    bool feasible = false;
    int infeasible_at = -1;
    double closed_loop_cost = 0.0;
    double travel_time = 0.0;
    double collision_rate = 0.0;
    double worst_solve_time = 0.0;
    ClosedLoopTrace trace;
};

struct MetricsRow {
    PlannerKind planner;
    double feasibility = 0.0;       // fraction of trials
    double travel_time = 0.0;       // mean over feasible trials
    double cost = 0.0;              // mean closed-loop cost over feasible trials
    double collision_rate = 0.0;    // mean over feasible trials
    double worst_solve_time = 0.0;  // mean over trials of the worst step time
    int trials = 0;
};

/// Aggregate per-trial records into one row per planner (pure fold,
/// deterministic in seed order).
std::vector<MetricsRow> aggregate_metrics(const std::vector<TrialRecord>& records);

/// Run the configured scene for every planner and trial seed.
std::vector<TrialRecord> run_trials(const ScenarioConfig& config, int n_trials);

/// Single trial (exposed for tests and the CLI).
TrialRecord run_single_trial(const ScenarioConfig& config, PlannerKind planner,
                             std::uint64_t trial_seed);

/// The closed-loop cost the tables report: the stage cost evaluated on the
/// final executed state (lane change) or accumulated quadratic cost
/// (intersection).
double closed_loop_cost(const ScenarioConfig& config, const ClosedLoopTrace& trace);

}  // namespace ccmpc

#endif
