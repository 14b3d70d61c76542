#include "ccmpc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ccmpc {

void ScenarioConfig::apply_defaults() {
    if (ev_init.size() == 0) {
        if (scene == Scene::LANE_CHANGE) {
            ev_init = Eigen::Vector4d(0.0, 0.0, 5.56, 0.0);
        } else {
            ev_init = Eigen::Vector4d(-20.0, -1.75, 0.0, 6.0);
        }
    }
    if (ovs.empty()) {
        OvSpec ov;
        if (scene == Scene::LANE_CHANGE) {
            ov.init_pos = Eigen::Vector2d(6.0, lat_goal);
            ov.init_speed = 5.56;
            ov.heading = 0.0;
            ov.mode_accels = {-1.2, 1.5};
        } else {
            ov.init_pos = Eigen::Vector2d(-1.75, 18.0);
            ov.init_speed = 6.0;
            ov.heading = -M_PI / 2.0;
            ov.mode_accels = {0.0, -2.5};
            ov.half_extents = Eigen::Vector2d(1.6, 1.0);
        }
        ovs.push_back(ov);
    }
    for (auto& ov : ovs) {
        if (ov.mode_weights.size() == 0) {
            ov.mode_weights = Eigen::VectorXd::Constant(
                static_cast<int>(ov.mode_accels.size()),
                1.0 / static_cast<double>(ov.mode_accels.size()));
        }
    }
    if (state_lower.size() == 0) {
        if (scene == Scene::LANE_CHANGE) {
            state_lower = Eigen::Vector4d(-10.0, -lane_width / 2.0, 0.0, -5.56);
            state_upper = Eigen::Vector4d(80.0, 1.5 * lane_width, 22.2, 5.56);
        } else {
            state_lower = Eigen::Vector4d(-30.0, -30.0, -3.5, 0.0);
            state_upper = Eigen::Vector4d(30.0, 30.0, 3.5, 10.0);
        }
    }
    if (scene == Scene::T_INTERSECTION_LITE && dt == 0.4) dt = 0.5;
}

void ScenarioConfig::validate() const {
    if (horizon < 2) throw std::invalid_argument("ScenarioConfig: T must be >= 2");
    if (!(dt > 0.0)) throw std::invalid_argument("ScenarioConfig: dt must be > 0");
    if (!(epsilon > 0.0 && epsilon < 0.5)) {
        throw std::invalid_argument("ScenarioConfig: epsilon must lie in (0, 0.5)");
    }
    if (ovs.empty()) throw std::invalid_argument("ScenarioConfig: no obstacles configured");
    for (const auto& ov : ovs) {
        if (ov.mode_accels.empty()) throw std::invalid_argument("ScenarioConfig: OV without modes");
        if (ov.mode_weights.size() != static_cast<int>(ov.mode_accels.size())) {
            throw std::invalid_argument("ScenarioConfig: OV weights/modes mismatch");
        }
    }
    if (state_lower.size() != 4 || state_upper.size() != 4) {
        throw std::invalid_argument("ScenarioConfig: state box must cover the 4 state coordinates");
    }
}

namespace {

// scripted OV center at an absolute time step (discrete integration keeps
// speeds nonnegative)
Pose scripted_pose(const OvSpec& ov, double accel, double dt, int step) {
    double v = ov.init_speed;
    Eigen::Vector2d dir(std::cos(ov.heading), std::sin(ov.heading));
    Eigen::Vector2d pos = ov.init_pos;
    for (int s = 0; s < step; ++s) {
        pos += v * dt * dir;
        v = std::clamp(v + accel * dt, 0.0, 30.0);
    }
    return Pose{pos(0), pos(1), ov.heading};
}

struct NoiseModel {
    double sigma_lon = 0.0;
    double sigma_lat = 0.0;
    double decay = 0.5;
};

// per-face variance of the offset entry for a positional jitter
// diag(sx^2, sy^2) expressed in the world frame of the face normal
double face_offset_var(const Eigen::VectorXd& delta, double sx, double sy) {
    double nx = delta(0), ny = delta(1);
    return nx * nx * sx * sx + ny * ny * sy * sy;
}

}  // namespace

GmmPrediction gen_lane_change_predictions(const ScenarioConfig& config, int tau_max, int t_horizon,
                                          std::uint64_t seed, int realized_mode) {
    if (t_horizon < 2) throw std::invalid_argument("gen_lane_change_predictions: T must be >= 2");
    if (tau_max >= t_horizon) tau_max = t_horizon - 1;

    const int state_dim = 4;
    const int n_obs = static_cast<int>(config.ovs.size());
    const double gamma =
        inverse_normal_cdf(1.0 - std::max(config.epsilon / (t_horizon * n_obs), 1e-6));

    GmmPrediction pred;
    pred.state_dim = state_dim;
    pred.horizon = t_horizon;
    for (const auto& ov : config.ovs) {
        PolytopeObstacle box;
        box.half_extents = ov.half_extents;
        box.id = static_cast<int>(pred.obstacles.size());
        pred.obstacles.push_back(box);
    }
    pred.steps.resize(tau_max + 1);

    Rng rng(seed);
    const double root_decay = std::sqrt(config.cov_decay);

    for (int j = 0; j < n_obs; ++j) {
        const auto& ov = config.ovs[j];
        const int n_modes = static_cast<int>(ov.mode_accels.size());
        const int survivor = std::clamp(realized_mode, 0, n_modes - 1);

        // base means at tau = 0 for every mode and face
        // chain[k][t - 1][i] holds the current mean of face i at time t
        std::vector<std::vector<std::vector<Eigen::VectorXd>>> chain(n_modes);
        for (int k = 0; k < n_modes; ++k) {
            chain[k].resize(t_horizon);
            for (int t = 1; t <= t_horizon; ++t) {
                Pose pose = scripted_pose(ov, ov.mode_accels[k], config.dt, t);
                auto faces = pose_to_faces(pose, pred.obstacles[j], state_dim);
                for (const auto& f : faces) chain[k][t - 1].push_back(f.delta);
            }
        }

        for (int tau = 0; tau <= tau_max; ++tau) {
            if (static_cast<int>(pred.steps[tau].size()) != n_obs) {
                pred.steps[tau].resize(n_obs);
            }
            auto& step = pred.steps[tau][j];
            const bool first = tau == 0;
            const int k_here = first ? n_modes : 1;
            step.weights = first ? ov.mode_weights : Eigen::VectorXd::Ones(1);
            step.parents.resize(k_here);
            for (int k = 0; k < k_here; ++k) {
                step.parents[k] = first ? k : (tau == 1 ? survivor : 0);
            }

            const double cov_scale = std::pow(config.cov_decay, tau);
            for (int t = tau + 1; t <= t_horizon; ++t) {
                std::vector<std::vector<Gaussian>> entry(k_here);
                for (int k = 0; k < k_here; ++k) {
                    const int mode_id = first ? k : survivor;
                    const double s_lon = config.sigma_base * t * config.dt;
                    const double s_lat = s_lon * config.sigma_lat_frac;
                    for (int i = 0; i < pred.faces_per(j); ++i) {
                        const Eigen::VectorXd& mean = chain[mode_id][t - 1][i];
                        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(state_dim + 1, state_dim + 1);
                        cov(state_dim, state_dim) =
                            cov_scale * face_offset_var(mean, s_lon, s_lat);
                        entry[k].push_back(Gaussian(mean, cov));
                    }
                }
                step.faces.push_back(std::move(entry));
            }

            // perturb the surviving chain for the next planning step inside
            // the Assumption-3 budget: |n'D| <= frac * Gamma * g_face
            if (tau == tau_max) break;
            for (int t = tau + 2; t <= t_horizon; ++t) {
                Eigen::Vector2d jitter(rng.normal(), rng.normal());
                const double s_lon = config.sigma_base * t * config.dt;
                const double s_lat = s_lon * config.sigma_lat_frac;
                jitter(0) *= 0.3 * s_lon;
                jitter(1) *= 0.3 * s_lat;
                double scale = 1.0;
                for (int i = 0; i < pred.faces_per(j); ++i) {
                    const Eigen::VectorXd& mean = chain[survivor][t - 1][i];
                    double sig_face = std::sqrt(face_offset_var(mean, s_lon, s_lat));
                    double g_face = sig_face * std::pow(root_decay, tau) * (1.0 - root_decay);
                    double shift = std::abs(mean(0) * jitter(0) + mean(1) * jitter(1));
                    double budget = config.mean_noise_frac * gamma * g_face;
                    if (shift > budget && shift > 0.0) {
                        scale = std::min(scale, budget / shift);
                    }
                }
                jitter *= scale;
                for (int i = 0; i < pred.faces_per(j); ++i) {
                    Eigen::VectorXd& mean = chain[survivor][t - 1][i];
                    mean(state_dim) += mean(0) * jitter(0) + mean(1) * jitter(1);
                }
            }
        }
    }
    pred.validate();
    return pred;
}

GmmPrediction gen_lane_change_predictions(int tau_max, int t_horizon, std::uint64_t seed) {
    ScenarioConfig config;
    config.scene = ScenarioConfig::Scene::LANE_CHANGE;
    config.horizon = t_horizon;
    config.apply_defaults();
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    int realized = rng.uniform() < 0.5 ? 0 : 1;
    return gen_lane_change_predictions(config, tau_max, t_horizon, seed, realized);
}

CollisionReport evaluate_collision_rate(const ClosedLoopTrace& trace, const GmmPrediction& pred,
                                        int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("evaluate_collision_rate: n_samples >= 1");
    CollisionReport report;
    Rng rng(seed);

    std::vector<const TraceStep*> steps;
    for (const auto& s : trace.steps) {
        if (s.interaction && s.plan.status == MiStatus::OPTIMAL) steps.push_back(&s);
    }
    if (steps.empty()) return report;

    long long collisions_total = 0;
    for (const auto* step : steps) {
        const int tau = step->tau;
        Eigen::VectorXd x_hom(step->executed_state.size() + 1);
        x_hom << step->executed_state, 1.0;
        long long collisions = 0;
        for (int n = 0; n < n_samples; ++n) {
            bool any_obstacle = false;
            for (int j = 0; j < pred.num_obstacles() && !any_obstacle; ++j) {
                if (!pred.has(tau, tau + 1, j)) continue;
                int k = rng.categorical(pred.steps[tau][j].weights);
                bool inside_all = true;
                for (int i = 0; i < pred.faces_per(j) && inside_all; ++i) {
                    const Gaussian& g = pred.moment(tau, tau + 1, j, i, k);
                    Eigen::VectorXd delta = sample_gaussian(g, rng);
                    inside_all = delta.dot(x_hom) > 0.0;
                }
                any_obstacle = inside_all;
            }
            if (any_obstacle) ++collisions;
        }
        collisions_total += collisions;
        report.per_step.push_back(static_cast<double>(collisions) / n_samples);
    }
    report.samples = static_cast<long long>(steps.size()) * n_samples;
    report.rate = static_cast<double>(collisions_total) / static_cast<double>(report.samples);
    return report;
}

namespace {

LtvSystem lane_change_system(const ScenarioConfig& config, int horizon) {
    LtvSystem sys = zoh_double_integrator(config.dt, horizon);

    auto sets = lane_change_sets();
    sys.input_set.lower = sets.input.lower;
    sys.input_set.upper = sets.input.upper;
    // coupled rows in a feasible convex arrangement built from the same
    // constants: 1.3|u2| <= 5.56 - u1, 2|v2| <= min(v1, 22.2 - v1)
    sys.input_set.halfplanes.clear();
    for (double sign : {1.0, -1.0}) {
        ConvexSet::Halfplane hp;
        hp.normal = Eigen::Vector2d(1.0, sign * 1.3);
        hp.offset = 5.56;
        sys.input_set.halfplanes.push_back(hp);
    }

    sys.state_set.lower = config.state_lower;
    sys.state_set.upper = config.state_upper;
    sys.state_set.lower(2) = std::max(sys.state_set.lower(2), 0.0);
    sys.state_set.upper(2) = std::min(sys.state_set.upper(2), 22.2);
    sys.state_set.lower(3) = std::max(sys.state_set.lower(3), -5.56);
    sys.state_set.upper(3) = std::min(sys.state_set.upper(3), 5.56);
    for (double sign : {1.0, -1.0}) {
        ConvexSet::Halfplane hp;
        hp.normal = Eigen::Vector4d(0.0, 0.0, 1.0, sign * 2.0);
        hp.offset = 22.2;
        sys.state_set.halfplanes.push_back(hp);
        ConvexSet::Halfplane hp2;
        hp2.normal = Eigen::Vector4d(0.0, 0.0, -1.0, sign * 2.0);
        hp2.offset = 0.0;
        sys.state_set.halfplanes.push_back(hp2);
    }
    return sys;
}

LtvSystem intersection_system(const ScenarioConfig& config, int tau, int horizon,
                              const Eigen::VectorXd& x_now, const PlanResult* prev,
                              const BicycleParams& params) {
    // nominal trajectory: previous plan shifted, constant-speed rollout tail
    std::vector<Eigen::Vector4d> states;
    std::vector<Eigen::Vector2d> inputs;
    Eigen::Vector4d x = x_now;
    states.push_back(x);
    for (int t = tau; t < horizon; ++t) {
        Eigen::Vector2d u = Eigen::Vector2d::Zero();
        if (prev && prev->status == MiStatus::OPTIMAL) {
            int idx = t - prev->tau;
            if (idx >= 0 && idx < static_cast<int>(prev->inputs[0].size())) {
                u = prev->inputs[0][idx];
            }
        }
        x = x + config.dt * bicycle_rhs(x, u, params);
        x(3) = std::clamp(x(3), params.v_min, params.v_max);
        states.push_back(x);
        inputs.push_back(u);
    }
    LtvSystem local = linearize_bicycle(states, inputs, config.dt, params);

    // reindex to absolute maneuver time [tau, horizon)
    LtvSystem sys;
    sys.horizon = horizon;
    sys.a_mats.assign(horizon, Eigen::MatrixXd::Identity(4, 4));
    sys.b_mats.assign(horizon, Eigen::MatrixXd::Zero(4, 2));
    sys.affine.assign(horizon, Eigen::VectorXd::Zero(4));
    for (int t = tau; t < horizon; ++t) {
        sys.a_mats[t] = local.a_mats[t - tau];
        sys.b_mats[t] = local.b_mats[t - tau];
        sys.affine[t] = local.affine[t - tau];
    }
    auto sets = bicycle_sets(params);
    sys.state_set = sets.state;
    sys.input_set = sets.input;
    sys.state_set.lower = config.state_lower;
    sys.state_set.upper = config.state_upper;
    sys.validate();
    return sys;
}

}  // namespace

double closed_loop_cost(const ScenarioConfig& config, const ClosedLoopTrace& trace) {
    if (trace.steps.empty()) return 0.0;
    if (config.scene == ScenarioConfig::Scene::LANE_CHANGE) {
        const Eigen::VectorXd& xf = trace.steps.back().executed_state;
        double d = xf(1) - config.lat_goal;
        return d * d - 0.1 * xf(0);
    }
    // accumulated quadratic cost over the executed maneuver
    Eigen::Matrix2d r1;
    r1 << 0.05, 0.02, 0.02, 0.10;
    Eigen::Matrix2d r2;
    r2 << 0.05, 0.01, 0.01, 0.20;
    double acc = 0.0;
    Eigen::Vector2d prev_u = Eigen::Vector2d::Zero();
    bool have_prev = false;
    for (const auto& step : trace.steps) {
        if (!step.interaction) continue;
        Eigen::Vector2d u = step.executed_input;
        acc += u.dot(r1 * u);
        if (have_prev) {
            Eigen::Vector2d du = u - prev_u;
            acc += du.dot(r2 * du);
        }
        prev_u = u;
        have_prev = true;
    }
    const Eigen::VectorXd& xf = trace.steps.back().executed_state;
    Eigen::Vector2d pe = xf.head<2>() - config.goal_pos;
    acc += 300.0 * pe.squaredNorm();
    return acc;
}

TrialRecord run_single_trial(const ScenarioConfig& raw_config, PlannerKind planner,
                             std::uint64_t trial_seed) {
    ScenarioConfig config = raw_config;
    config.apply_defaults();
    config.validate();

    TrialRecord record;
    record.planner = planner;
    record.seed = trial_seed;

    Rng mode_rng(trial_seed * 2654435761ull + 17);
    record.realized_mode = mode_rng.categorical(config.ovs.front().mode_weights);

    MpcSetup setup;
    setup.planner = planner;
    setup.policy.closed_loop_T = config.horizon;
    setup.policy.mode = HorizonPolicy::Mode::SHRINKING;
    setup.policy.receding_span = config.receding_span;
    setup.epsilon = config.epsilon;
    setup.t_c = config.t_c;

    MpcHooks hooks;
    bool start_in_interaction = true;

    if (config.scene == ScenarioConfig::Scene::LANE_CHANGE) {
        setup.cost.kind = CostSpec::Kind::LANE_CHANGE;
        setup.cost.lat_goal = config.lat_goal;

        LtvSystem sys = lane_change_system(config, config.horizon);
        hooks.shrink_prediction = [&config, trial_seed, &record](int) {
            return gen_lane_change_predictions(config, config.horizon - 1, config.horizon,
                                               trial_seed, record.realized_mode);
        };
        hooks.shrink_system = [sys](int, const Eigen::VectorXd&, const PlanResult*) { return sys; };
    } else {
        setup.policy.mode = HorizonPolicy::Mode::RECEDING;
        setup.cost.kind = CostSpec::Kind::QUADRATIC;
        setup.cost.goal_pos = config.goal_pos;
        setup.cost.pos_weight = 300.0 * Eigen::Matrix2d::Identity();
        setup.cost.r1 << 0.05, 0.02, 0.02, 0.10;
        setup.cost.r2 << 0.05, 0.01, 0.01, 0.20;
        start_in_interaction = false;

        BicycleParams params;
        ScenarioConfig cfg = config;
        hooks.shrink_system = [cfg, params](int tau, const Eigen::VectorXd& x_now,
                                            const PlanResult* prev) {
            return intersection_system(cfg, tau, cfg.horizon, x_now, prev, params);
        };
        hooks.shrink_prediction = [cfg, trial_seed, &record](int start_time) {
            // the observed OV past follows its realized behavior; the mode
            // split concerns the future only
            ScenarioConfig shifted = cfg;
            for (auto& ov : shifted.ovs) {
                const double accel =
                    ov.mode_accels[std::min<size_t>(record.realized_mode,
                                                    ov.mode_accels.size() - 1)];
                Pose p = scripted_pose(ov, accel, cfg.dt, start_time);
                double v = ov.init_speed;
                for (int s = 0; s < start_time; ++s) {
                    v = std::clamp(v + accel * cfg.dt, 0.0, 30.0);
                }
                ov.init_pos = Eigen::Vector2d(p.x, p.y);
                ov.init_speed = v;
            }
            return gen_lane_change_predictions(shifted, shifted.horizon - 1, shifted.horizon,
                                               trial_seed + start_time, record.realized_mode);
        };
        hooks.receding_system = [cfg, params](int time, const Eigen::VectorXd& x_now) {
            // straight constant-speed nominal for lane keeping
            std::vector<Eigen::Vector4d> states;
            std::vector<Eigen::Vector2d> inputs;
            Eigen::Vector4d x = x_now;
            states.push_back(x);
            for (int s = 0; s < cfg.receding_span; ++s) {
                x = x + cfg.dt * bicycle_rhs(x, Eigen::Vector2d::Zero(), params);
                states.push_back(x);
                inputs.push_back(Eigen::Vector2d::Zero());
            }
            LtvSystem local = linearize_bicycle(states, inputs, cfg.dt, params);
            LtvSystem sys;
            const int end = time + cfg.receding_span;
            sys.horizon = end;
            sys.a_mats.assign(end, Eigen::MatrixXd::Identity(4, 4));
            sys.b_mats.assign(end, Eigen::MatrixXd::Zero(4, 2));
            sys.affine.assign(end, Eigen::VectorXd::Zero(4));
            for (int t = time; t < end; ++t) {
                sys.a_mats[t] = local.a_mats[t - time];
                sys.b_mats[t] = local.b_mats[t - time];
                sys.affine[t] = local.affine[t - time];
            }
            auto sets = bicycle_sets(params);
            sys.state_set = sets.state;
            sys.input_set = sets.input;
            sys.state_set.lower = cfg.state_lower;
            sys.state_set.upper = cfg.state_upper;
            return sys;
        };
        hooks.interaction_trigger = [cfg](int, const std::vector<Eigen::VectorXd>& planned) {
            for (const auto& x : planned) {
                if (x(0) >= cfg.region_lo(0) && x(0) <= cfg.region_hi(0) &&
                    x(1) >= cfg.region_lo(1) && x(1) <= cfg.region_hi(1)) {
                    return true;
                }
            }
            return false;
        };
    }

    auto trace = run_mpc(setup, hooks, config.ev_init, start_in_interaction);
    record.trace = trace;
    record.feasible = !trace.infeasible_at.has_value() && trace.goal_reached;
    record.infeasible_at = trace.infeasible_at.value_or(-1);
    if (record.feasible) {
        record.closed_loop_cost = closed_loop_cost(config, trace);
        int maneuver_steps = 0;
        for (const auto& s : trace.steps) maneuver_steps += s.interaction ? 1 : 0;
        record.travel_time = maneuver_steps * config.dt;
        GmmPrediction pred = hooks.shrink_prediction(std::max(trace.switch_time, 0));
        record.collision_rate =
            evaluate_collision_rate(trace, pred, config.collision_samples, trial_seed + 101).rate;
    }
    double worst = 0.0;
    for (const auto& s : trace.steps) worst = std::max(worst, s.plan.solve_time);
    record.worst_solve_time = worst;
    return record;
}

std::vector<TrialRecord> run_trials(const ScenarioConfig& raw_config, int n_trials) {
    if (n_trials < 1) throw std::invalid_argument("run_trials: n_trials must be >= 1");
    ScenarioConfig config = raw_config;
    config.apply_defaults();
    config.validate();

    std::vector<TrialRecord> records;
    for (PlannerKind planner : config.planners) {
        for (int trial = 0; trial < n_trials; ++trial) {
            records.push_back(run_single_trial(config, planner, config.seed + trial));
        }
    }
    return records;
}

std::vector<MetricsRow> aggregate_metrics(const std::vector<TrialRecord>& records) {
    std::map<PlannerKind, MetricsRow> rows;
    std::map<PlannerKind, int> feasible_count;
    for (const auto& r : records) {
        auto& row = rows[r.planner];
        row.planner = r.planner;
        row.trials++;
        row.worst_solve_time += r.worst_solve_time;
        if (r.feasible) {
            feasible_count[r.planner]++;
            row.travel_time += r.travel_time;
            row.cost += r.closed_loop_cost;
            row.collision_rate += r.collision_rate;
        }
    }
    std::vector<MetricsRow> out;
    for (auto& [planner, row] : rows) {
        const int n_feas = feasible_count[planner];
        row.feasibility = row.trials > 0 ? static_cast<double>(n_feas) / row.trials : 0.0;
        row.worst_solve_time /= std::max(1, row.trials);
        if (n_feas > 0) {
            row.travel_time /= n_feas;
            row.cost /= n_feas;
            row.collision_rate /= n_feas;
        }
        out.push_back(row);
    }
    return out;
}

}  // namespace ccmpc
