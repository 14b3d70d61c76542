#include "ccmpc/planners.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace ccmpc {

std::string planner_name(PlannerKind kind) {
    switch (kind) {
        case PlannerKind::NOMINAL: return "nominal";
        case PlannerKind::ROBUST: return "robust";
        case PlannerKind::CONTINGENCY: return "contingency";
    }
    return "unknown";
}

void HorizonPolicy::validate() const {
    if (closed_loop_T < 2) throw std::invalid_argument("HorizonPolicy: T must be >= 2");
    if (mode == Mode::RECEDING && (receding_span < 1 || receding_span >= closed_loop_T)) {
        throw std::invalid_argument("HorizonPolicy: need 1 <= T_s < T");
    }
}

int BuiltProblem::u_var(int branch, int t) const {
    const int stride = (t_end - tau) * (n_u + n_x);
    return branch * stride + (t - tau) * (n_u + n_x);
}

int BuiltProblem::x_var(int branch, int t) const {
    const int stride = (t_end - tau) * (n_u + n_x);
    return branch * stride + (t - 1 - tau) * (n_u + n_x) + n_u;
}

namespace {

void add_quad(Misocp& prob, int r, int c, double v) {
    if (v != 0.0) prob.quad.emplace_back(r, c, v);
}

void add_set_rows(Misocp& prob, const ConvexSet& set, int var0) {
    for (int c = 0; c < set.dim(); ++c) {
        if (std::isfinite(set.upper(c))) {
            prob.rows.push_back({{{var0 + c, 1.0}}, set.upper(c), false, -1});
        }
        if (std::isfinite(set.lower(c))) {
            prob.rows.push_back({{{var0 + c, -1.0}}, -set.lower(c), false, -1});
        }
    }
    for (const auto& hp : set.halfplanes) {
        Misocp::LinRow row;
        for (int c = 0; c < set.dim(); ++c) {
            if (hp.normal(c) != 0.0) row.coeffs.emplace_back(var0 + c, hp.normal(c));
        }
        row.rhs = hp.offset;
        prob.rows.push_back(row);
    }
}

void add_dynamics_and_sets(BuiltProblem& built, const LtvSystem& system, int branch) {
    Misocp& prob = built.problem;
    const int n_x = built.n_x, n_u = built.n_u;
    for (int t = built.tau; t < built.t_end; ++t) {
        // x_{t+1} - A_t x_t - B_t u_t = c_t  (x_tau folded into the rhs)
        const Eigen::MatrixXd& a = system.a_mats.at(t);
        const Eigen::MatrixXd& b = system.b_mats.at(t);
        Eigen::VectorXd rhs = system.affine.empty() ? Eigen::VectorXd::Zero(n_x)
                                                    : system.affine.at(t);
        if (t == built.tau) rhs += a * built.x_now;
        for (int r = 0; r < n_x; ++r) {
            Misocp::LinRow row;
            row.equality = true;
            row.coeffs.emplace_back(built.x_var(branch, t + 1) + r, 1.0);
            if (t > built.tau) {
                for (int c = 0; c < n_x; ++c) {
                    if (a(r, c) != 0.0) row.coeffs.emplace_back(built.x_var(branch, t) + c, -a(r, c));
                }
            }
            for (int c = 0; c < n_u; ++c) {
                if (b(r, c) != 0.0) row.coeffs.emplace_back(built.u_var(branch, t) + c, -b(r, c));
            }
            row.rhs = rhs(r);
            prob.rows.push_back(row);
        }
        add_set_rows(prob, system.input_set, built.u_var(branch, t));
        add_set_rows(prob, system.state_set, built.x_var(branch, t + 1));
    }
}

void add_cost(BuiltProblem& built, const CostSpec& cost, int branch) {
    Misocp& prob = built.problem;
    if (cost.kind == CostSpec::Kind::LANE_CHANGE) {
        const int lat = built.x_var(branch, built.t_end) + cost.lat_coord;
        const int lon = built.x_var(branch, built.t_end) + cost.lon_coord;
        add_quad(prob, lat, lat, 2.0);
        prob.lin(lat) += -2.0 * cost.lat_goal;
        prob.lin(lon) += -cost.lon_weight;
        prob.constant += cost.lat_goal * cost.lat_goal;
        return;
    }

    // terminal position tracking
    const int xe = built.x_var(branch, built.t_end);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) add_quad(prob, xe + r, xe + c, 2.0 * cost.pos_weight(r, c));
    }
    Eigen::Vector2d lin_term = -2.0 * cost.pos_weight * cost.goal_pos;
    prob.lin(xe) += lin_term(0);
    prob.lin(xe + 1) += lin_term(1);
    prob.constant += cost.goal_pos.dot(cost.pos_weight * cost.goal_pos);

    // input magnitude and smoothness
    const int n_u = built.n_u;
    for (int t = built.tau; t < built.t_end; ++t) {
        const int ut = built.u_var(branch, t);
        for (int r = 0; r < n_u; ++r) {
            for (int c = 0; c < n_u; ++c) add_quad(prob, ut + r, ut + c, 2.0 * cost.r1(r, c));
        }
    }
    for (int t = built.tau; t + 1 < built.t_end; ++t) {
        const int ua = built.u_var(branch, t + 1);
        const int ub = built.u_var(branch, t);
        for (int r = 0; r < n_u; ++r) {
            for (int c = 0; c < n_u; ++c) {
                add_quad(prob, ua + r, ua + c, 2.0 * cost.r2(r, c));
                add_quad(prob, ub + r, ub + c, 2.0 * cost.r2(r, c));
                add_quad(prob, ua + r, ub + c, -2.0 * cost.r2(r, c));
                add_quad(prob, ub + r, ua + c, -2.0 * cost.r2(r, c));
            }
        }
    }
    if (cost.u_prev) {
        const int u0 = built.u_var(branch, built.tau);
        const Eigen::Vector2d& up = *cost.u_prev;
        for (int r = 0; r < n_u; ++r) {
            for (int c = 0; c < n_u; ++c) add_quad(prob, u0 + r, u0 + c, 2.0 * cost.r2(r, c));
        }
        Eigen::Vector2d lt = -2.0 * cost.r2 * up;
        prob.lin(u0) += lt(0);
        prob.lin(u0 + 1) += lt(1);
        prob.constant += up.dot(cost.r2 * up);
    }
}

// lower one chance row over x~_t of the given branch; returns its binary id
void add_chance_row(BuiltProblem& built, const SocRow& row, int branch) {
    Misocp& prob = built.problem;
    const int n_x = built.n_x;
    const int xv = built.x_var(branch, row.t);
    const int bin = prob.n_bin++;
    const int zcol = prob.col_bin(bin);

    auto rhs_terms = [&]() {
        std::vector<std::pair<int, double>> rhs;
        rhs.emplace_back(zcol, row.big_m);
        for (int c = 0; c < n_x; ++c) {
            if (row.mean(c) != 0.0) rhs.emplace_back(xv + c, -row.mean(c));
        }
        return rhs;
    };
    const double rhs_off = -row.mean(n_x);

    if (row.kind == SocRowKind::ROBUST) {
        const double kappa = row.gamma * row.frob_sqrt;
        if (kappa <= 1e-14) {
            Misocp::LinRow lin;
            lin.coeffs = rhs_terms();
            for (auto& [c, v] : lin.coeffs) v = -v;  // mu'x - Mz <= -mu_off
            lin.rhs = rhs_off;
            lin.binary = bin;
            prob.rows.push_back(lin);
            return;
        }
        Misocp::Soc soc;
        soc.arg_off = Eigen::VectorXd::Zero(n_x + 1);
        soc.arg_off(n_x) = kappa;  // homogeneous coordinate
        for (int c = 0; c < n_x; ++c) soc.arg.emplace_back(c, xv + c, kappa);
        soc.rhs_coeffs = rhs_terms();
        soc.rhs_off = rhs_off;
        soc.binary = bin;
        prob.socs.push_back(soc);
        return;
    }

    // NOMINAL / MOMENT_ROBUST share the covariance factor
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (row.cov + row.cov.transpose()));
    const double scale = row.kind == SocRowKind::MOMENT_ROBUST ? (1.0 + row.r2) : 1.0;
    std::vector<Eigen::VectorXd> factor_rows;
    for (int e = 0; e < es.eigenvalues().size(); ++e) {
        double lam = es.eigenvalues()(e);
        if (lam > 1e-14 * std::max(1.0, es.eigenvalues().maxCoeff())) {
            factor_rows.push_back(std::sqrt(lam * scale) * row.gamma *
                                  es.eigenvectors().col(e));
        }
    }

    if (row.kind != SocRowKind::NOMINAL) {
        throw std::invalid_argument("add_chance_row: planners emit NOMINAL or ROBUST rows only");
    }
    if (factor_rows.empty()) {
        Misocp::LinRow lin;
        lin.coeffs = rhs_terms();
        for (auto& [c, v] : lin.coeffs) v = -v;
        lin.rhs = rhs_off;
        lin.binary = bin;
        prob.rows.push_back(lin);
        return;
    }
    Misocp::Soc soc;
    soc.arg_off = Eigen::VectorXd::Zero(static_cast<int>(factor_rows.size()));
    for (size_t r = 0; r < factor_rows.size(); ++r) {
        for (int c = 0; c < n_x; ++c) {
            if (factor_rows[r](c) != 0.0) {
                soc.arg.emplace_back(static_cast<int>(r), xv + c, factor_rows[r](c));
            }
        }
        soc.arg_off(static_cast<int>(r)) = factor_rows[r](n_x);
    }
    soc.rhs_coeffs = rhs_terms();
    soc.rhs_off = rhs_off;
    soc.binary = bin;
    prob.socs.push_back(soc);
}

BuiltProblem build_common(PlannerKind kind, int tau, int t_end, const LtvSystem& system,
                          const Eigen::VectorXd& x_now, const GmmPrediction* pred,
                          const RiskAllocation* alloc, const CostSpec& cost,
                          const ModeSubsets* subsets, int t_c) {
    system.validate();
    if (t_end <= tau) throw std::invalid_argument("planner build: empty horizon");
    if (system.horizon < t_end) {
        throw std::invalid_argument("planner build: system horizon too short");
    }
    if (x_now.size() != system.state_dim()) {
        throw std::invalid_argument("planner build: state dimension mismatch");
    }

    BuiltProblem built;
    built.tau = tau;
    built.t_end = t_end;
    built.n_x = system.state_dim();
    built.n_u = system.input_dim();
    built.x_now = x_now;

    ModeSubsets effective;
    if (kind == PlannerKind::CONTINGENCY) {
        effective = subsets && !subsets->empty() ? *subsets : default_subsets(*pred, tau);
        // coverage check
        std::set<std::pair<int, int>> covered;
        for (const auto& s : effective) covered.insert(s.begin(), s.end());
        for (int j = 0; j < pred->num_obstacles(); ++j) {
            for (int k = 0; k < pred->modes(tau, j); ++k) {
                if (!covered.count({j, k})) {
                    throw std::invalid_argument("build_contingency: subsets must cover mode (" +
                                                std::to_string(j) + "," + std::to_string(k) + ")");
                }
            }
        }
        built.branches = static_cast<int>(effective.size());
        built.coincide_span = t_c;
    }

    const int stride = (t_end - tau) * (built.n_u + built.n_x);
    Misocp& prob = built.problem;
    prob.n_cont = built.branches * stride;
    prob.lin = Eigen::VectorXd::Zero(prob.n_cont);
    prob.bigm_certified = true;

    for (int l = 0; l < built.branches; ++l) {
        add_dynamics_and_sets(built, system, l);
        add_cost(built, cost, l);
    }

    // coinciding inputs across branches
    if (built.branches > 1) {
        for (int l = 1; l < built.branches; ++l) {
            for (int t = tau; t < std::min(tau + t_c, t_end); ++t) {
                for (int c = 0; c < built.n_u; ++c) {
                    Misocp::LinRow row;
                    row.equality = true;
                    row.coeffs.emplace_back(built.u_var(0, t) + c, 1.0);
                    row.coeffs.emplace_back(built.u_var(l, t) + c, -1.0);
                    row.rhs = 0.0;
                    prob.rows.push_back(row);
                }
            }
        }
    }

    // chance rows
    if (pred && pred->num_obstacles() > 0 && alloc) {
        SocRowKind row_kind =
            kind == PlannerKind::ROBUST ? SocRowKind::ROBUST : SocRowKind::NOMINAL;
        if (kind == PlannerKind::CONTINGENCY) {
            for (int l = 0; l < built.branches; ++l) {
                auto rows = build_rows(*pred, *alloc, row_kind, tau, t_end, system.state_set,
                                       effective[l]);
                // binaries are assigned in row order by add_chance_row
                int bin_base = prob.n_bin;
                for (const auto& row : rows.rows) {
                    add_chance_row(built, row, l);
                    built.row_meta.push_back(row);
                    built.row_branch.push_back(l);
                }
                for (const auto& g : rows.groups) {
                    std::vector<int> members;
                    for (int idx : g.row_indices) members.push_back(bin_base + idx);
                    prob.groups.push_back(members);
                    BinaryGroup meta = g;
                    meta.row_indices = members;
                    built.groups_meta.push_back(meta);
                }
            }
        } else {
            auto rows = build_rows(*pred, *alloc, row_kind, tau, t_end, system.state_set);
            int bin_base = prob.n_bin;
            for (const auto& row : rows.rows) {
                add_chance_row(built, row, 0);
                built.row_meta.push_back(row);
                built.row_branch.push_back(0);
            }
            for (const auto& g : rows.groups) {
                std::vector<int> members;
                for (int idx : g.row_indices) members.push_back(bin_base + idx);
                prob.groups.push_back(members);
                BinaryGroup meta = g;
                meta.row_indices = members;
                built.groups_meta.push_back(meta);
            }
        }
    }

    prob.validate();
    return built;
}

}  // namespace

BuiltProblem build_nominal(int tau, int t_end, const LtvSystem& system,
                           const Eigen::VectorXd& x_now, const GmmPrediction& pred,
                           const RiskAllocation& alloc, const CostSpec& cost) {
    return build_common(PlannerKind::NOMINAL, tau, t_end, system, x_now, &pred, &alloc, cost,
                        nullptr, 0);
}

BuiltProblem build_robust(int tau, int t_end, const LtvSystem& system, const Eigen::VectorXd& x_now,
                          const GmmPrediction& pred, const RiskAllocation& alloc,
                          const CostSpec& cost) {
    return build_common(PlannerKind::ROBUST, tau, t_end, system, x_now, &pred, &alloc, cost,
                        nullptr, 0);
}

BuiltProblem build_contingency(int tau, int t_end, const LtvSystem& system,
                               const Eigen::VectorXd& x_now, const GmmPrediction& pred,
                               const RiskAllocation& alloc, const CostSpec& cost,
                               const ModeSubsets& subsets, int t_c) {
    if (t_c < 1) throw std::invalid_argument("build_contingency: T_c must be >= 1");
    return build_common(PlannerKind::CONTINGENCY, tau, t_end, system, x_now, &pred, &alloc, cost,
                        &subsets, t_c);
}

BuiltProblem build_free(int tau, int t_end, const LtvSystem& system, const Eigen::VectorXd& x_now,
                        const CostSpec& cost) {
    return build_common(PlannerKind::NOMINAL, tau, t_end, system, x_now, nullptr, nullptr, cost,
                        nullptr, 0);
}

ModeSubsets default_subsets(const GmmPrediction& pred, int tau) {
    int max_modes = 0;
    for (int j = 0; j < pred.num_obstacles(); ++j) {
        max_modes = std::max(max_modes, pred.modes(tau, j));
    }
    ModeSubsets subsets;
    for (int l = 0; l < max_modes; ++l) {
        std::vector<std::pair<int, int>> s;
        for (int j = 0; j < pred.num_obstacles(); ++j) {
            s.emplace_back(j, std::min(l, pred.modes(tau, j) - 1));
        }
        subsets.push_back(std::move(s));
    }
    return subsets;
}

PlanResult solve_step(const BuiltProblem& built, const MisocpSettings& settings) {
    auto res = solve_misocp(built.problem, settings);
    PlanResult plan;
    plan.tau = built.tau;
    plan.t_end = built.t_end;
    plan.status = res.status;
    plan.objective = res.objective;
    plan.solve_time = res.solve_time;
    plan.node_count = res.node_count;
    plan.rows = built.row_meta;
    plan.row_branch = built.row_branch;
    plan.binaries = res.binaries;
    plan.groups = built.groups_meta;
    if (res.status != MiStatus::INFEASIBLE && res.primal.size() > 0) {
        for (int l = 0; l < built.branches; ++l) {
            std::vector<Eigen::VectorXd> us, xs;
            for (int t = built.tau; t < built.t_end; ++t) {
                us.push_back(res.primal.segment(built.u_var(l, t), built.n_u));
                xs.push_back(res.primal.segment(built.x_var(l, t + 1), built.n_x));
            }
            plan.inputs.push_back(std::move(us));
            plan.states.push_back(std::move(xs));
        }
    }
    return plan;
}

ClosedLoopTrace run_mpc(const MpcSetup& setup, const MpcHooks& hooks, const Eigen::VectorXd& x0,
                        bool start_in_interaction) {
    setup.policy.validate();
    ClosedLoopTrace trace;
    trace.x0 = x0;

    Eigen::VectorXd x = x0;
    int time = 0;
    bool interaction = start_in_interaction;
    int switch_time = interaction ? 0 : -1;
    GmmPrediction maneuver_pred;
    PlanResult pending_first_plan;
    bool have_pending = false;

    if (interaction) {
        maneuver_pred = hooks.shrink_prediction(0);
    }

    auto build_shrink = [&](int tau, const Eigen::VectorXd& x_now,
                            const PlanResult* prev) -> BuiltProblem {
        const int t_horizon = setup.policy.closed_loop_T;
        LtvSystem sys = hooks.shrink_system(tau, x_now, prev);
        if (maneuver_pred.num_obstacles() == 0) {
            return build_free(tau, t_horizon, sys, x_now, setup.cost);
        }
        auto alloc =
            allocate_risk(setup.epsilon, t_horizon, maneuver_pred.num_obstacles());
        switch (setup.planner) {
            case PlannerKind::NOMINAL:
                return build_nominal(tau, t_horizon, sys, x_now, maneuver_pred, alloc, setup.cost);
            case PlannerKind::ROBUST:
                return build_robust(tau, t_horizon, sys, x_now, maneuver_pred, alloc, setup.cost);
            case PlannerKind::CONTINGENCY:
                return build_contingency(tau, t_horizon, sys, x_now, maneuver_pred, alloc,
                                         setup.cost, setup.subsets, setup.t_c);
        }
        throw std::logic_error("run_mpc: unknown planner");
    };

    // receding-horizon prelude (non-interactive lane keeping)
    while (!interaction && time < setup.max_receding_steps) {
        if (!hooks.receding_system) {
            throw std::invalid_argument("run_mpc: receding mode requires a receding_system hook");
        }
        LtvSystem sys = hooks.receding_system(time, x);
        auto built = build_free(time, time + setup.policy.receding_span, sys, x, setup.cost);
        auto plan = solve_step(built, setup.misocp);
        if (plan.status != MiStatus::OPTIMAL) {
            trace.infeasible_at = -(time + 1);  // negative marks a receding failure
            return trace;
        }

        if (hooks.interaction_trigger && hooks.interaction_trigger(time, plan.states[0])) {
            // transition test: the shrinking problem must be feasible now
            maneuver_pred = hooks.shrink_prediction(time);
            auto shrink_built = build_shrink(0, x, nullptr);
            auto shrink_plan = solve_step(shrink_built, setup.misocp);
            if (shrink_plan.status == MiStatus::OPTIMAL) {
                interaction = true;
                switch_time = time;
                pending_first_plan = std::move(shrink_plan);
                have_pending = true;
                break;
            }
            // otherwise stay in the receding state
        }

        TraceStep step;
        step.time = time;
        step.interaction = false;
        step.tau = -1;
        step.t_oh = time + setup.policy.receding_span;
        step.executed_input = plan.inputs[0][0];
        step.executed_state = plan.states[0][0];
        step.plan = std::move(plan);
        x = step.executed_state;
        trace.steps.push_back(std::move(step));
        ++time;
    }

    if (!interaction) return trace;  // trigger never fired

    trace.switch_time = switch_time;
    const int t_horizon = setup.policy.closed_loop_T;
    const PlanResult* prev_plan = nullptr;

    for (int tau = 0; tau < t_horizon; ++tau) {
        PlanResult plan;
        if (tau == 0 && have_pending) {
            plan = std::move(pending_first_plan);
        } else {
            auto built = build_shrink(tau, x, prev_plan);
            plan = solve_step(built, setup.misocp);
        }
        if (plan.status != MiStatus::OPTIMAL) {
            trace.infeasible_at = tau;
            return trace;
        }

        TraceStep step;
        step.time = switch_time + tau;
        step.interaction = true;
        step.tau = tau;
        step.t_oh = switch_time + t_horizon;
        step.executed_input = plan.inputs[0][0];
        step.executed_state = plan.states[0][0];
        step.plan = std::move(plan);
        x = step.executed_state;
        trace.steps.push_back(std::move(step));
        prev_plan = &trace.steps.back().plan;
    }
    trace.goal_reached = true;
    return trace;
}

RecursiveFeasibilityReport verify_recursive_feasibility(const ClosedLoopTrace& trace,
                                                        const GmmPrediction& pred,
                                                        const RiskAllocation& alloc,
                                                        double tol) {
    RecursiveFeasibilityReport report;
    report.worst = std::numeric_limits<double>::infinity();

    // interaction steps only, consecutive pairs (tau, tau+1)
    std::vector<const TraceStep*> shrink_steps;
    for (const auto& s : trace.steps) {
        if (s.interaction) shrink_steps.push_back(&s);
    }
    for (size_t idx = 0; idx + 1 < shrink_steps.size(); ++idx) {
        const TraceStep& old_step = *shrink_steps[idx];
        const int tau = old_step.tau;
        if (tau + 1 >= pred.num_steps()) break;
        const PlanResult& old_plan = old_step.plan;

        FeasibilityMargin margin;
        margin.tau = tau;
        margin.min_margin = std::numeric_limits<double>::infinity();

        const int t_last = old_plan.t_end;
        for (int t = tau + 2; t <= t_last; ++t) {
            for (int j = 0; j < pred.num_obstacles(); ++j) {
                if (!pred.has(tau + 1, t, j)) continue;
                for (int k = 0; k < pred.modes(tau + 1, j); ++k) {
                    const int kp = pred.parent(tau + 1, j, k);
                    for (int i = 0; i < pred.faces_per(j); ++i) {
                        // old plan's binary for (t, j, i, parent mode)
                        int old_row_idx = -1;
                        for (size_t r = 0; r < old_plan.rows.size(); ++r) {
                            const auto& row = old_plan.rows[r];
                            if (row.t == t && row.j == j && row.i == i && row.k == kp &&
                                old_plan.row_branch[r] == 0) {
                                old_row_idx = static_cast<int>(r);
                                break;
                            }
                        }
                        if (old_row_idx < 0) continue;
                        const auto& old_row = old_plan.rows[old_row_idx];
                        const int z = old_plan.binaries[old_row_idx];

                        const Gaussian& new_moment = pred.moment(tau + 1, t, j, i, k);
                        SocRow new_row;
                        new_row.kind = SocRowKind::ROBUST;
                        new_row.mean = new_moment.mean;
                        new_row.cov = new_moment.cov;
                        new_row.frob_sqrt = std::sqrt(new_moment.cov.norm());
                        new_row.gamma = alloc.gamma_at(t, j, i, k);
                        new_row.big_m = old_row.big_m;

                        const Eigen::VectorXd& x_old = old_plan.states[0][t - tau - 1];
                        Eigen::VectorXd x_hom(x_old.size() + 1);
                        x_hom << x_old, 1.0;
                        double value = robust_row_value(x_hom, new_row);
                        double m = new_row.big_m * z - value;
                        margin.min_margin = std::min(margin.min_margin, m);
                        margin.rows_checked++;
                    }
                }
            }
        }
        if (margin.rows_checked > 0) {
            report.worst = std::min(report.worst, margin.min_margin);
            report.margins.push_back(margin);
        }
    }
    if (report.margins.empty()) report.worst = 0.0;
    report.certified = report.worst >= -tol;
    return report;
}

std::vector<double> executed_row_margins(const ClosedLoopTrace& trace) {
    std::vector<double> margins;
    for (const auto& step : trace.steps) {
        if (!step.interaction || step.plan.status != MiStatus::OPTIMAL) continue;
        Eigen::VectorXd x_hom(step.executed_state.size() + 1);
        x_hom << step.executed_state, 1.0;
        for (size_t r = 0; r < step.plan.rows.size(); ++r) {
            const auto& row = step.plan.rows[r];
            if (row.t != step.tau + 1) continue;
            double value = row_value(x_hom, row);
            margins.push_back(row.big_m * step.plan.binaries[r] - value);
        }
    }
    return margins;
}

}  // namespace ccmpc
