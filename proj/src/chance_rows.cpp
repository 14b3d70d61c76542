#include "ccmpc/chance_rows.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ccmpc {

double RiskAllocation::eps(int, int, int, int) const { return eps_per_row; }

double RiskAllocation::gamma_at(int, int, int, int) const { return gamma; }

void RiskAllocation::validate() const {
    if (!(eps_per_row > 0.0 && eps_per_row < 0.5)) {
        throw std::invalid_argument("RiskAllocation: per-row epsilon outside (0, 0.5)");
    }
    if (gamma <= 0.0) throw std::invalid_argument("RiskAllocation: non-positive quantile");
}

RiskAllocation allocate_risk(double epsilon, int horizon, int num_obstacles) {
    if (!(epsilon > 0.0 && epsilon < 0.5)) {
        throw std::invalid_argument("allocate_risk: epsilon must lie in (0, 0.5)");
    }
    if (horizon < 1 || num_obstacles < 1) {
        throw std::invalid_argument("allocate_risk: horizon and obstacle count must be >= 1");
    }
    RiskAllocation alloc;
    alloc.epsilon_total = epsilon;
    alloc.horizon = horizon;
    alloc.num_obstacles = num_obstacles;
    alloc.eps_per_row = epsilon / (static_cast<double>(horizon) * num_obstacles);
    if (alloc.eps_per_row >= 0.5) {
        throw std::invalid_argument("allocate_risk: eps/(TJ) >= 0.5, quantile would be <= 0");
    }
    alloc.eps_per_row = std::max(alloc.eps_per_row, 1e-6);
    alloc.gamma = inverse_normal_cdf(1.0 - alloc.eps_per_row);
    alloc.validate();
    return alloc;
}

void SocRow::validate() const {
    if (gamma <= 0.0) throw std::invalid_argument("SocRow: gamma must be > 0");
    if (big_m <= 0.0) throw std::invalid_argument("SocRow: big_m must be > 0");
    if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
        throw std::invalid_argument("SocRow: cov/mean dimension mismatch");
    }
    if (r1 < 0.0 || r2 < 0.0) throw std::invalid_argument("SocRow: negative robustification");
}

namespace {
Eigen::VectorXd homogeneous_check(const Eigen::VectorXd& x_hom, const SocRow& row) {
    if (x_hom.size() != row.mean.size()) {
        throw std::invalid_argument("row value: x~ dimension mismatch");
    }
    return x_hom;
}
}  // namespace

double nominal_row_value(const Eigen::VectorXd& x_hom, const SocRow& row) {
    homogeneous_check(x_hom, row);
    double quad = x_hom.dot(row.cov * x_hom);
    return row.gamma * std::sqrt(std::max(0.0, quad)) + x_hom.dot(row.mean);
}

double robust_row_value(const Eigen::VectorXd& x_hom, const SocRow& row) {
    homogeneous_check(x_hom, row);
    double frob_sqrt = row.frob_sqrt > 0.0 ? row.frob_sqrt : std::sqrt(row.cov.norm());
    return row.gamma * frob_sqrt * x_hom.norm() + x_hom.dot(row.mean);
}

double moment_robust_row_value(const Eigen::VectorXd& x_hom, const SocRow& row) {
    homogeneous_check(x_hom, row);
    double quad = x_hom.dot(row.cov * x_hom);
    return row.gamma * std::sqrt(std::max(0.0, (1.0 + row.r2) * quad)) + row.r1 * x_hom.norm() +
           x_hom.dot(row.mean);
}

double row_value(const Eigen::VectorXd& x_hom, const SocRow& row) {
    switch (row.kind) {
        case SocRowKind::NOMINAL: return nominal_row_value(x_hom, row);
        case SocRowKind::ROBUST: return robust_row_value(x_hom, row);
        case SocRowKind::MOMENT_ROBUST: return moment_robust_row_value(x_hom, row);
    }
    throw std::logic_error("row_value: unknown kind");
}

double state_radius_bound(const ConvexSet& state_set) {
    double acc = 1.0;  // homogeneous coordinate
    for (int i = 0; i < state_set.dim(); ++i) {
        double lo = state_set.lower(i), hi = state_set.upper(i);
        if (!std::isfinite(lo) || !std::isfinite(hi)) {
            throw std::invalid_argument(
                "state_radius_bound: state box must be bounded on coordinate " +
                std::to_string(i) + " to size the disjunction constant");
        }
        acc += std::max(lo * lo, hi * hi);
    }
    return std::sqrt(acc);
}

namespace {

// exact maximum of mean' x~ over the state box (x~ has the trailing 1)
double max_linear_over_box(const Eigen::VectorXd& mean, const ConvexSet& state_set) {
    double acc = mean(mean.size() - 1);
    for (int i = 0; i < state_set.dim(); ++i) {
        acc += std::max(mean(i) * state_set.lower(i), mean(i) * state_set.upper(i));
    }
    return acc;
}

}  // namespace

BuiltRows build_rows(const GmmPrediction& pred, const RiskAllocation& alloc, SocRowKind kind,
                     int tau, int t_end, const ConvexSet& state_set,
                     const std::vector<std::pair<int, int>>& mode_filter,
                     const ConcentrationConfig& moment_config, int moment_samples,
                     double moment_beta) {
    alloc.validate();
    if (tau < 0 || tau >= pred.num_steps()) {
        throw std::out_of_range("build_rows: planning step out of range");
    }
    const double radius = state_radius_bound(state_set);

    auto keep = [&mode_filter](int j, int k) {
        if (mode_filter.empty()) return true;
        for (const auto& [fj, fk] : mode_filter) {
            if (fj == j && fk == k) return true;
        }
        return false;
    };

    BuiltRows built;
    for (int t = tau + 1; t <= t_end; ++t) {
        for (int j = 0; j < pred.num_obstacles(); ++j) {
            if (!pred.has(tau, t, j)) {
                throw std::out_of_range("build_rows: prediction missing index t=" +
                                        std::to_string(t) + " j=" + std::to_string(j) +
                                        " at planning step " + std::to_string(tau));
            }
            for (int k = 0; k < pred.modes(tau, j); ++k) {
                if (!keep(j, k)) continue;
                BinaryGroup group;
                group.t = t;
                group.j = j;
                group.k = k;
                for (int i = 0; i < pred.faces_per(j); ++i) {
                    const Gaussian& moment = pred.moment(tau, t, j, i, k);
                    SocRow row;
                    row.kind = kind;
                    row.mean = moment.mean;
                    row.cov = moment.cov;
                    row.frob_sqrt = std::sqrt(moment.cov.norm());
                    row.gamma = alloc.gamma_at(t, j, i, k);
                    if (kind == SocRowKind::MOMENT_ROBUST) {
                        MomentEstimate est;
                        est.mean_hat = moment.mean;
                        est.cov_hat = moment.cov;
                        est.n_samples = std::max(2, moment_samples);
                        auto bounds = concentration_bounds(est, moment_beta, moment_config);
                        row.r1 = bounds.r1;
                        row.r2 = bounds.r2;
                    }
                    // worst row value over the state box: exact box maximum
                    // of the mean term, Frobenius bound on the spread term
                    double mean_bound = max_linear_over_box(row.mean, state_set);
                    double spread = row.gamma * row.frob_sqrt * radius;
                    if (kind == SocRowKind::MOMENT_ROBUST) {
                        spread = row.gamma * std::sqrt(1.0 + row.r2) * row.frob_sqrt * radius +
                                 row.r1 * radius;
                    }
                    row.big_m = 2.0 * (spread + std::max(mean_bound, 1e-3));
                    row.t = t;
                    row.j = j;
                    row.i = i;
                    row.k = k;
                    row.group = static_cast<int>(built.groups.size());
                    row.validate();
                    group.row_indices.push_back(static_cast<int>(built.rows.size()));
                    built.rows.push_back(std::move(row));
                }
                built.groups.push_back(std::move(group));
            }
        }
    }
    return built;
}

}  // namespace ccmpc
