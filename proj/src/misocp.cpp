#include "ccmpc/misocp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace ccmpc {

std::string mi_status_name(MiStatus status) {
    switch (status) {
        case MiStatus::OPTIMAL: return "OPTIMAL";
        case MiStatus::INFEASIBLE: return "INFEASIBLE";
        case MiStatus::TIME_LIMIT: return "TIME_LIMIT";
    }
    return "UNKNOWN";
}

void Misocp::validate() const {
    if (n_cont < 0 || n_bin < 0) throw std::invalid_argument("Misocp: negative sizes");
    if (lin.size() != n_cont) throw std::invalid_argument("Misocp: objective size mismatch");
    std::vector<int> owner(n_bin, -1);
    for (size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw std::invalid_argument("Misocp: empty group");
        for (int b : groups[g]) {
            if (b < 0 || b >= n_bin) throw std::invalid_argument("Misocp: binary index range");
            if (owner[b] != -1) throw std::invalid_argument("Misocp: binary in two groups");
            owner[b] = static_cast<int>(g);
        }
    }
    for (int b = 0; b < n_bin; ++b) {
        if (owner[b] == -1) throw std::invalid_argument("Misocp: orphan binary variable");
    }
    auto col_ok = [this](int c) { return c >= 0 && c < num_vars(); };
    for (const auto& [r, c, v] : quad) {
        if (r < 0 || r >= n_cont || c < 0 || c >= n_cont) {
            throw std::invalid_argument("Misocp: quad index range");
        }
        (void)v;
    }
    for (const auto& row : rows) {
        for (const auto& [c, v] : row.coeffs) {
            if (!col_ok(c)) throw std::invalid_argument("Misocp: row column range");
            (void)v;
        }
    }
    for (const auto& soc : socs) {
        if (soc.arg_off.size() == 0) throw std::invalid_argument("Misocp: empty soc argument");
        for (const auto& [r, c, v] : soc.arg) {
            if (r < 0 || r >= soc.arg_off.size() || !col_ok(c)) {
                throw std::invalid_argument("Misocp: soc argument index range");
            }
            (void)v;
        }
        for (const auto& [c, v] : soc.rhs_coeffs) {
            if (!col_ok(c)) throw std::invalid_argument("Misocp: soc rhs column range");
            (void)v;
        }
        if (soc.binary >= n_bin) throw std::invalid_argument("Misocp: soc binary range");
    }
}

namespace {

struct Lowering {
    ConicProblem conic;
    std::vector<int> bin_to_var;  // -1 when fixed
    std::vector<double> bin_fixed;
    int n_vars = 0;
};

// Map group choices onto per-binary fixed values (active member 0, rest 1).
std::vector<double> fixed_binary_values(const Misocp& prob, const std::vector<int>& choices) {
    std::vector<double> fixed(prob.n_bin, -1.0);
    for (size_t g = 0; g < prob.groups.size(); ++g) {
        if (choices[g] < 0) continue;
        if (choices[g] >= static_cast<int>(prob.groups[g].size())) {
            throw std::invalid_argument("solve_convex: group choice out of range");
        }
        for (size_t m = 0; m < prob.groups[g].size(); ++m) {
            fixed[prob.groups[g][m]] = (static_cast<int>(m) == choices[g]) ? 0.0 : 1.0;
        }
    }
    return fixed;
}

Lowering lower(const Misocp& prob, const std::vector<int>& choices) {
    if (choices.size() != prob.groups.size()) {
        throw std::invalid_argument("solve_convex: one choice per group required");
    }
    Lowering low;
    low.bin_fixed = fixed_binary_values(prob, choices);
    low.bin_to_var.assign(prob.n_bin, -1);
    int next = prob.n_cont;
    for (int b = 0; b < prob.n_bin; ++b) {
        if (low.bin_fixed[b] < 0.0) low.bin_to_var[b] = next++;
    }
    low.n_vars = next;

    auto var_of = [&](int col) -> std::pair<int, double> {
        // returns (variable index or -1, fixed value)
        if (col < prob.n_cont) return {col, 0.0};
        int b = col - prob.n_cont;
        if (low.bin_to_var[b] >= 0) return {low.bin_to_var[b], 0.0};
        return {-1, low.bin_fixed[b]};
    };

    std::vector<Eigen::Triplet<double>> quad_trip;
    for (const auto& [r, c, v] : prob.quad) quad_trip.emplace_back(r, c, v);
    low.conic.quad = Eigen::SparseMatrix<double>(low.n_vars, low.n_vars);
    low.conic.quad.setFromTriplets(quad_trip.begin(), quad_trip.end());
    low.conic.lin = Eigen::VectorXd::Zero(low.n_vars);
    low.conic.lin.head(prob.n_cont) = prob.lin;

    std::vector<Eigen::Triplet<double>> eq_trip, ineq_trip;
    std::vector<double> eq_rhs, ineq_rhs;
    ConeSpec cone;

    auto add_lin = [&](const std::vector<std::pair<int, double>>& coeffs, double rhs,
                       bool equality) {
        double shift = 0.0;
        std::vector<std::pair<int, double>> vars;
        for (const auto& [col, v] : coeffs) {
            auto [idx, fval] = var_of(col);
            if (idx >= 0) {
                vars.emplace_back(idx, v);
            } else {
                shift += v * fval;
            }
        }
        if (vars.empty()) {
            // fully fixed row: consistency is the caller's concern for
            // equalities produced by group fixing; flag real conflicts
            double lhs = shift;
            if (equality ? std::abs(lhs - rhs) > 1e-9 : lhs > rhs + 1e-9) {
                // encode an infeasible row so phase-1 reports it
                int r = static_cast<int>(ineq_rhs.size());
                ineq_rhs.push_back(equality ? -1.0 : rhs - lhs);
                (void)r;
            }
            return;
        }
        if (equality) {
            int r = static_cast<int>(eq_rhs.size());
            for (const auto& [idx, v] : vars) eq_trip.emplace_back(r, idx, v);
            eq_rhs.push_back(rhs - shift);
        } else {
            int r = static_cast<int>(ineq_rhs.size());
            for (const auto& [idx, v] : vars) ineq_trip.emplace_back(r, idx, v);
            ineq_rhs.push_back(rhs - shift);
        }
    };

    for (const auto& row : prob.rows) add_lin(row.coeffs, row.rhs, row.equality);

    // group cardinality rows over the still-free binaries
    for (size_t g = 0; g < prob.groups.size(); ++g) {
        if (choices[g] >= 0) continue;
        std::vector<std::pair<int, double>> coeffs;
        for (int b : prob.groups[g]) coeffs.emplace_back(prob.col_bin(b), 1.0);
        add_lin(coeffs, static_cast<double>(prob.groups[g].size()) - 1.0, true);
    }
    // binary box rows
    for (int b = 0; b < prob.n_bin; ++b) {
        if (low.bin_to_var[b] < 0) continue;
        add_lin({{prob.col_bin(b), 1.0}}, 1.0, false);
        add_lin({{prob.col_bin(b), -1.0}}, 0.0, false);
    }

    cone.orthant = static_cast<int>(ineq_rhs.size());

    for (const auto& soc : prob.socs) {
        if (prob.bigm_certified && soc.binary >= 0 && low.bin_fixed[soc.binary] == 1.0) {
            continue;  // released row dominated by its big-M bound
        }
        const int d = static_cast<int>(soc.arg_off.size()) + 1;
        const int base = static_cast<int>(ineq_rhs.size());
        // head row: h - Gv = rhs'v + rhs_off
        double head_rhs = soc.rhs_off;
        for (const auto& [col, v] : soc.rhs_coeffs) {
            auto [idx, fval] = var_of(col);
            if (idx >= 0) {
                ineq_trip.emplace_back(base, idx, -v);
            } else {
                head_rhs += v * fval;
            }
        }
        ineq_rhs.push_back(head_rhs);
        for (int r = 0; r < d - 1; ++r) ineq_rhs.push_back(soc.arg_off(r));
        for (const auto& [r, col, v] : soc.arg) {
            auto [idx, fval] = var_of(col);
            if (idx >= 0) {
                ineq_trip.emplace_back(base + 1 + r, idx, -v);
            } else {
                ineq_rhs[base + 1 + r] += v * fval;
            }
        }
        cone.soc_dims.push_back(d);
    }

    low.conic.eq = Eigen::SparseMatrix<double>(static_cast<int>(eq_rhs.size()), low.n_vars);
    low.conic.eq.setFromTriplets(eq_trip.begin(), eq_trip.end());
    low.conic.eq_rhs = Eigen::Map<Eigen::VectorXd>(eq_rhs.data(), eq_rhs.size());
    low.conic.ineq = Eigen::SparseMatrix<double>(static_cast<int>(ineq_rhs.size()), low.n_vars);
    low.conic.ineq.setFromTriplets(ineq_trip.begin(), ineq_trip.end());
    low.conic.ineq_rhs = Eigen::Map<Eigen::VectorXd>(ineq_rhs.data(), ineq_rhs.size());
    low.conic.cone = cone;
    return low;
}

}  // namespace

ConvexNodeResult solve_convex(const Misocp& prob, const std::vector<int>& choices,
                              const MisocpSettings& settings, const Eigen::VectorXd& warm_cont,
                              const Eigen::VectorXd& warm_bin) {
    prob.validate();
    Lowering low = lower(prob, choices);

    Eigen::VectorXd warm;
    if (warm_cont.size() == prob.n_cont) {
        warm = Eigen::VectorXd::Zero(low.n_vars);
        warm.head(prob.n_cont) = warm_cont;
        for (int b = 0; b < prob.n_bin; ++b) {
            if (low.bin_to_var[b] >= 0) {
                double v = warm_bin.size() == prob.n_bin ? warm_bin(b) : 0.5;
                warm(low.bin_to_var[b]) = std::clamp(v, 0.05, 0.95);
            }
        }
    }

    ConvexNodeResult out;

    // optimistic order: a converged main solve proves feasibility on its
    // own; the phase-1 certificate is only consulted when it fails
    ConicSettings quick = settings.conic;
    quick.max_iterations = std::min(quick.max_iterations, 25);
    auto res = solve_conic(low.conic, quick, warm);
    out.main_status = res.status;
    out.primal_res = res.primal_res;
    out.dual_res = res.dual_res;
    out.rel_gap = res.rel_gap;
    out.iterations = res.iterations;

    if (res.status != ConicStatus::OPTIMAL) {
        auto feas = conic_feasibility(low.conic, settings.conic);
        out.phase1_status = feas.status;
        out.phase1_shift = feas.shift;
        if (feas.status != ConicStatus::OPTIMAL) {
            return out;  // classification failed; treat as not solved
        }
        if (feas.shift > settings.feas_tol) {
            out.solved = true;  // certified infeasible
            out.feasible = false;
            return out;
        }
        // feasible: one more attempt at full iteration budget
        res = solve_conic(low.conic, settings.conic);
        out.main_status = res.status;
        out.iterations += res.iterations;
        if (res.status != ConicStatus::OPTIMAL) return out;
    } else {
        out.phase1_status = ConicStatus::OPTIMAL;
        out.phase1_shift = -1.0;  // implied by the converged main solve
    }

    out.solved = true;
    out.feasible = true;
    out.objective = res.objective + prob.constant;
    out.cont = res.x.head(prob.n_cont);
    out.binaries.resize(prob.n_bin);
    for (int b = 0; b < prob.n_bin; ++b) {
        out.binaries(b) = low.bin_to_var[b] >= 0 ? res.x(low.bin_to_var[b]) : low.bin_fixed[b];
    }
    return out;
}

namespace {

// rows owned by a binary, evaluated on the continuous block with the
// owner's z set to 0 (terms on other binaries disqualify the row);
// -1 unknown (no usable tagged rows), 0 violated, 1 satisfied
int satisfied_active_member(const Misocp& prob, const Eigen::VectorXd& cont, int bin, double tol);

}  // namespace

std::vector<int> canonical_group_choice(const Misocp& prob, const Eigen::VectorXd& cont,
                                        const std::vector<int>& fallback, double tol) {
    std::vector<int> out = fallback;
    for (size_t g = 0; g < prob.groups.size(); ++g) {
        for (size_t m = 0; m < prob.groups[g].size(); ++m) {
            int verdict = satisfied_active_member(prob, cont, prob.groups[g][m], tol);
            if (verdict == -1) break;  // untagged member, keep fallback
            if (verdict == 1) {
                out[g] = static_cast<int>(m);
                break;
            }
        }
    }
    return out;
}

namespace {

// per group: the smallest satisfied member index, -1 when none hold, -2
// when a member lacks tagged rows
std::vector<int> satisfied_members(const Misocp& prob, const Eigen::VectorXd& cont, double tol) {
    std::vector<int> out(prob.groups.size(), -1);
    for (size_t g = 0; g < prob.groups.size(); ++g) {
        for (size_t m = 0; m < prob.groups[g].size(); ++m) {
            int verdict = satisfied_active_member(prob, cont, prob.groups[g][m], tol);
            if (verdict == -1) {
                out[g] = -2;
                break;
            }
            if (verdict == 1) {
                out[g] = static_cast<int>(m);
                break;
            }
        }
    }
    return out;
}

}  // namespace

std::optional<std::vector<int>> satisfied_choice(const Misocp& prob, const Eigen::VectorXd& cont,
                                                 double tol) {
    std::vector<int> out = satisfied_members(prob, cont, tol);
    for (int m : out) {
        if (m < 0) return std::nullopt;
    }
    return out;
}

namespace {

int satisfied_active_member(const Misocp& prob, const Eigen::VectorXd& cont, int bin, double tol) {
    int seen = -1;
    for (const auto& row : prob.rows) {
        if (row.binary != bin || row.equality) continue;
        double acc = 0.0;
        bool usable = true;
        for (const auto& [col, v] : row.coeffs) {
            if (col < prob.n_cont) {
                acc += v * cont(col);
            } else if (col != prob.col_bin(bin)) {
                usable = false;
            }
        }
        if (!usable) continue;
        seen = std::max(seen, 0);
        if (acc > row.rhs + tol) return 0;
        seen = 1;
    }
    for (const auto& soc : prob.socs) {
        if (soc.binary != bin) continue;
        Eigen::VectorXd arg = soc.arg_off;
        bool usable = true;
        for (const auto& [r, col, v] : soc.arg) {
            if (col < prob.n_cont) {
                arg(r) += v * cont(col);
            } else {
                usable = false;
            }
        }
        double rhs = soc.rhs_off;
        for (const auto& [col, v] : soc.rhs_coeffs) {
            if (col < prob.n_cont) {
                rhs += v * cont(col);
            } else if (col != prob.col_bin(bin)) {
                usable = false;
            }
        }
        if (!usable) continue;
        seen = std::max(seen, 0);
        if (arg.norm() > rhs + tol) return 0;
        seen = 1;
    }
    return seen;
}

bool lex_smaller(const std::vector<int>& a, const std::vector<int>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::vector<int> round_binaries(const Eigen::VectorXd& values) {
    std::vector<int> out(values.size());
    for (int i = 0; i < values.size(); ++i) out[i] = values(i) > 0.5 ? 1 : 0;
    return out;
}

struct Node {
    std::vector<int> choices;
    double bound = 0.0;
    long seq = 0;
    Eigen::VectorXd relaxed_bin;
    Eigen::VectorXd relaxed_cont;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.seq > b.seq;
    }
};

}  // namespace

SolveResult solve_misocp(const Misocp& prob, const MisocpSettings& settings) {
    prob.validate();
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    SolveResult result;
    const int n_groups = static_cast<int>(prob.groups.size());

    auto choices_to_binaries = [&](const std::vector<int>& choices) {
        std::vector<int> bins(prob.n_bin, -1);
        auto fixed = fixed_binary_values(prob, choices);
        for (int b = 0; b < prob.n_bin; ++b) bins[b] = fixed[b] > 0.5 ? 1 : 0;
        return bins;
    };

    auto integral = [&](const Node& node) {
        for (int g = 0; g < n_groups; ++g) {
            if (node.choices[g] >= 0) continue;
            for (int b : prob.groups[g]) {
                double v = node.relaxed_bin(b);
                if (std::min(v, 1.0 - v) > settings.int_tol) return false;
            }
        }
        return true;
    };

    // incumbent
    bool have_incumbent = false;
    double inc_obj = std::numeric_limits<double>::infinity();
    std::vector<int> inc_bins;
    std::vector<int> inc_choices;
    Eigen::VectorXd inc_primal;
    const double tie_tol = 1e-9;

    auto offer_incumbent = [&](double obj, const std::vector<int>& choices,
                               const Eigen::VectorXd& cont, const Eigen::VectorXd& bins_relaxed) {
        std::vector<int> bins = round_binaries(bins_relaxed);
        bool better = !have_incumbent || obj < inc_obj - tie_tol;
        bool lex_tie = have_incumbent && std::abs(obj - inc_obj) <= tie_tol &&
                       lex_smaller(bins, inc_bins);
        if (better || lex_tie) {
            have_incumbent = true;
            inc_obj = std::min(inc_obj, obj);  // non-increasing over nodes
            inc_bins = bins;
            inc_choices = choices;
            inc_primal = cont;
        }
    };

    // derive group choices from an integral relaxation
    auto integral_choices = [&](const Node& node) {
        std::vector<int> out = node.choices;
        for (int g = 0; g < n_groups; ++g) {
            if (out[g] >= 0) continue;
            int active = -1;
            for (size_t m = 0; m < prob.groups[g].size(); ++m) {
                if (node.relaxed_bin(prob.groups[g][m]) < 0.5) {
                    active = static_cast<int>(m);
                    break;
                }
            }
            out[g] = std::max(active, 0);
        }
        return out;
    };

    std::priority_queue<Node, std::vector<Node>, NodeOrder> queue;
    long seq_counter = 0;

    // root relaxation
    Node root;
    root.choices.assign(n_groups, -1);
    auto root_res = solve_convex(prob, root.choices, settings);
    result.node_count++;
    if (!root_res.solved) {
        result.status = MiStatus::TIME_LIMIT;
        result.solve_time = elapsed();
        return result;
    }
    if (!root_res.feasible) {
        result.status = MiStatus::INFEASIBLE;
        result.solve_time = elapsed();
        return result;
    }
    root.bound = root_res.objective;
    root.relaxed_bin = root_res.binaries;
    root.relaxed_cont = root_res.cont;
    root.seq = seq_counter++;

    if (n_groups == 0) {
        result.status = MiStatus::OPTIMAL;
        result.objective = root_res.objective;
        result.primal = root_res.cont;
        result.solve_time = elapsed();
        return result;
    }

    // repair: a relaxed continuous point that already clears one face per
    // group is a feasible assignment at the relaxation objective, which
    // settles the node without branching
    auto binaries_of = [&](const std::vector<int>& choices) {
        Eigen::VectorXd bins = Eigen::VectorXd::Ones(prob.n_bin);
        for (size_t g = 0; g < prob.groups.size(); ++g) {
            bins(prob.groups[g][choices[g]]) = 0.0;
        }
        return bins;
    };
    auto try_repair = [&](const ConvexNodeResult& res) {
        auto repaired = satisfied_choice(prob, res.cont, settings.feas_tol);
        if (repaired) {
            offer_incumbent(res.objective, *repaired, res.cont, binaries_of(*repaired));
            return true;
        }
        return false;
    };

    bool root_settled = try_repair(root_res);

    if (!root_settled) {
        // rounding heuristic: activate the most-active face per group
        std::vector<int> guess(n_groups);
        for (int g = 0; g < n_groups; ++g) {
            int best = 0;
            double best_v = std::numeric_limits<double>::infinity();
            for (size_t m = 0; m < prob.groups[g].size(); ++m) {
                double v = root.relaxed_bin(prob.groups[g][m]);
                if (v < best_v) {
                    best_v = v;
                    best = static_cast<int>(m);
                }
            }
            guess[g] = best;
        }
        auto heur = solve_convex(prob, guess, settings);
        result.node_count++;
        if (heur.solved && heur.feasible) {
            offer_incumbent(heur.objective, guess, heur.cont, heur.binaries);
        }
    }

    if (root_settled) {
        // bound equals the incumbent objective; the tree is exhausted
    } else if (integral(root)) {
        auto choices = integral_choices(root);
        offer_incumbent(root.bound, choices, root_res.cont, root.relaxed_bin);
    } else {
        queue.push(root);
    }

    bool timed_out = false;
    while (!queue.empty()) {
        if (elapsed() > settings.time_limit) {
            timed_out = true;
            break;
        }
        Node node = queue.top();
        queue.pop();
        if (have_incumbent && node.bound >= inc_obj - tie_tol) continue;

        // branch on the most fractional member among the groups whose
        // disjunction the relaxed point actually violates (splitting a
        // cleared group would duplicate the node)
        std::vector<int> members = satisfied_members(prob, node.relaxed_cont, settings.feas_tol);
        int branch_group = -1;
        double branch_score = -1.0;
        for (int pass = 0; pass < 2 && branch_group < 0; ++pass) {
            for (int g = 0; g < n_groups; ++g) {
                if (node.choices[g] >= 0) continue;
                if (pass == 0 && members[g] != -1) continue;  // cleared or untagged
                double score = 0.0;
                for (int b : prob.groups[g]) {
                    double v = node.relaxed_bin(b);
                    score = std::max(score, std::min(v, 1.0 - v));
                }
                if (score > branch_score + 1e-15) {
                    branch_score = score;
                    branch_group = g;
                }
            }
        }
        if (branch_group < 0) continue;

        for (size_t m = 0; m < prob.groups[branch_group].size(); ++m) {
            if (elapsed() > settings.time_limit) {
                timed_out = true;
                break;
            }
            Node child;
            child.choices = node.choices;
            child.choices[branch_group] = static_cast<int>(m);
            auto res = solve_convex(prob, child.choices, settings, node.relaxed_cont,
                                    node.relaxed_bin);
            result.node_count++;
            if (!res.solved || !res.feasible) continue;
            child.bound = res.objective;
            child.relaxed_bin = res.binaries;
            child.relaxed_cont = res.cont;
            child.seq = seq_counter++;
            if (have_incumbent && child.bound >= inc_obj - tie_tol) continue;
            if (try_repair(res)) continue;  // settled at the child's bound
            if (integral(child)) {
                offer_incumbent(child.bound, integral_choices(child), res.cont, res.binaries);
            } else {
                queue.push(child);
            }
        }
        if (timed_out) break;
    }

    result.solve_time = elapsed();
    if (have_incumbent) {
        result.status = timed_out ? MiStatus::TIME_LIMIT : MiStatus::OPTIMAL;
        result.objective = inc_obj;
        result.primal = inc_primal;
        // same continuous optimum, canonical face selection for tie-broken
        // binaries (lexicographically smallest satisfiable assignment)
        result.group_choice =
            canonical_group_choice(prob, inc_primal, inc_choices, settings.feas_tol);
        bool all_fixed = !result.group_choice.empty();
        for (int c : result.group_choice) all_fixed = all_fixed && c >= 0;
        result.binaries = all_fixed ? choices_to_binaries(result.group_choice) : inc_bins;
    } else {
        result.status = timed_out ? MiStatus::TIME_LIMIT : MiStatus::INFEASIBLE;
    }
    return result;
}

}  // namespace ccmpc
