#include "ccmpc/socp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace ccmpc {

int ConeSpec::total_rows() const {
    int acc = orthant;
    for (int d : soc_dims) acc += d;
    return acc;
}

int ConeSpec::degree() const { return orthant + static_cast<int>(soc_dims.size()); }

void ConeSpec::validate() const {
    if (orthant < 0) throw std::invalid_argument("ConeSpec: negative orthant size");
    for (int d : soc_dims) {
        if (d < 2) throw std::invalid_argument("ConeSpec: SOC dimension must be >= 2");
    }
}

void ConicProblem::validate() const {
    cone.validate();
    const int n = num_vars();
    if (quad.rows() > 0 && (quad.rows() != n || quad.cols() != n)) {
        throw std::invalid_argument("ConicProblem: P dimension mismatch");
    }
    if (eq.rows() != eq_rhs.size()) throw std::invalid_argument("ConicProblem: b size mismatch");
    if (eq.rows() > 0 && eq.cols() != n) throw std::invalid_argument("ConicProblem: A cols mismatch");
    if (ineq.rows() != ineq_rhs.size()) throw std::invalid_argument("ConicProblem: h size mismatch");
    if (ineq.rows() > 0 && ineq.cols() != n) {
        throw std::invalid_argument("ConicProblem: G cols mismatch");
    }
    if (cone.total_rows() != ineq.rows()) {
        throw std::invalid_argument("ConicProblem: cone rows != G rows");
    }
}

namespace {

// Block-wise cone operations over the inequality slack space.
class ConeOps {
public:
    explicit ConeOps(const ConeSpec& spec) : orthant_(spec.orthant) {
        int at = spec.orthant;
        for (int d : spec.soc_dims) {
            blocks_.emplace_back(at, d);
            at += d;
        }
        rows_ = at;
        degree_ = spec.degree();
    }

    int rows() const { return rows_; }
    int degree() const { return degree_; }

    double margin(const Eigen::VectorXd& v) const {
        double m = std::numeric_limits<double>::infinity();
        for (int i = 0; i < orthant_; ++i) m = std::min(m, v(i));
        for (const auto& [at, d] : blocks_) {
            m = std::min(m, v(at) - v.segment(at + 1, d - 1).norm());
        }
        return m;
    }

    Eigen::VectorXd identity() const {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(rows_);
        for (int i = 0; i < orthant_; ++i) e(i) = 1.0;
        for (const auto& [at, d] : blocks_) e(at) = 1.0;
        return e;
    }

    void shift_interior(Eigen::VectorXd& v) const {
        double m = margin(v);
        if (m <= 1e-10) v += (1.0 + std::abs(m)) * identity();
    }

    // sup { a in [0, cap] : v + a dv stays in the cone }
    double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double cap) const {
        auto ok = [&](double a) { return margin(v + a * dv) >= 0.0; };
        if (ok(cap)) return cap;
        double lo = 0.0, hi = cap;
        for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo + hi);
            if (ok(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return lo;
    }

    // Jordan product u o v
    Eigen::VectorXd prod(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
        Eigen::VectorXd out(rows_);
        for (int i = 0; i < orthant_; ++i) out(i) = u(i) * v(i);
        for (const auto& [at, d] : blocks_) {
            out(at) = u.segment(at, d).dot(v.segment(at, d));
            out.segment(at + 1, d - 1) =
                u(at) * v.segment(at + 1, d - 1) + v(at) * u.segment(at + 1, d - 1);
        }
        return out;
    }

    // solve lambda o g = d for g
    Eigen::VectorXd inv_prod(const Eigen::VectorXd& lambda, const Eigen::VectorXd& d) const {
        Eigen::VectorXd g(rows_);
        for (int i = 0; i < orthant_; ++i) g(i) = d(i) / lambda(i);
        for (const auto& [at, dim] : blocks_) {
            double l0 = lambda(at);
            auto l1 = lambda.segment(at + 1, dim - 1);
            double det = l0 * l0 - l1.squaredNorm();
            det = std::max(det, 1e-300);
            double g0 = (l0 * d(at) - l1.dot(d.segment(at + 1, dim - 1))) / det;
            g(at) = g0;
            g.segment(at + 1, dim - 1) = (d.segment(at + 1, dim - 1) - g0 * l1) / l0;
        }
        return g;
    }

    const std::vector<std::pair<int, int>>& soc_blocks() const { return blocks_; }
    int orthant() const { return orthant_; }

private:
    int orthant_ = 0;
    int rows_ = 0;
    int degree_ = 0;
    std::vector<std::pair<int, int>> blocks_;
};

// Nesterov-Todd scaling point: W symmetric PD with W z = W^{-1} s = lambda.
struct NtScaling {
    Eigen::VectorXd lp_w2;                 // s_i / z_i
    std::vector<Eigen::MatrixXd> soc_w;    // per block
    std::vector<Eigen::MatrixXd> soc_winv;
    std::vector<Eigen::MatrixXd> soc_w2;
    Eigen::VectorXd lambda;

    bool compute(const ConeOps& ops, const Eigen::VectorXd& s, const Eigen::VectorXd& z) {
        const int n_lp = ops.orthant();
        lp_w2.resize(n_lp);
        lambda.resize(ops.rows());
        for (int i = 0; i < n_lp; ++i) {
            if (s(i) <= 0.0 || z(i) <= 0.0) return false;
            lp_w2(i) = s(i) / z(i);
            lambda(i) = std::sqrt(s(i) * z(i));
        }
        soc_w.clear();
        soc_winv.clear();
        soc_w2.clear();
        for (const auto& [at, d] : ops.soc_blocks()) {
            auto sb = s.segment(at, d);
            auto zb = z.segment(at, d);
            double s_res = sb(0) * sb(0) - sb.tail(d - 1).squaredNorm();
            double z_res = zb(0) * zb(0) - zb.tail(d - 1).squaredNorm();
            if (s_res <= 0.0 || z_res <= 0.0) return false;
            double a = std::sqrt(s_res), b = std::sqrt(z_res);
            Eigen::VectorXd sbar = sb / a, zbar = zb / b;
            double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
            Eigen::VectorXd v(d);
            v(0) = (sbar(0) + zbar(0)) / (2.0 * gamma);
            v.tail(d - 1) = (sbar.tail(d - 1) - zbar.tail(d - 1)) / (2.0 * gamma);
            double eta = std::sqrt(a / b);  // (s'Js / z'Jz)^(1/4)

            // W = eta * [v0, v1'; v1, I + v1 v1'/(1+v0)], the PSD square
            // root of the quadratic representation eta^2 (2vv' - J)
            Eigen::MatrixXd w(d, d);
            w(0, 0) = v(0);
            w.block(0, 1, 1, d - 1) = v.tail(d - 1).transpose();
            w.block(1, 0, d - 1, 1) = v.tail(d - 1);
            w.block(1, 1, d - 1, d - 1) =
                Eigen::MatrixXd::Identity(d - 1, d - 1) +
                v.tail(d - 1) * v.tail(d - 1).transpose() / (1.0 + v(0));
            w *= eta;
            // inverse from the reflected point Jv
            Eigen::MatrixXd winv(d, d);
            winv(0, 0) = v(0);
            winv.block(0, 1, 1, d - 1) = -v.tail(d - 1).transpose();
            winv.block(1, 0, d - 1, 1) = -v.tail(d - 1);
            winv.block(1, 1, d - 1, d - 1) =
                Eigen::MatrixXd::Identity(d - 1, d - 1) +
                v.tail(d - 1) * v.tail(d - 1).transpose() / (1.0 + v(0));
            winv /= eta;

            soc_w.push_back(w);
            soc_winv.push_back(winv);
            soc_w2.push_back(w * w);
            lambda.segment(at, d) = w * zb;
        }
        return true;
    }

    Eigen::VectorXd apply_w(const ConeOps& ops, const Eigen::VectorXd& u) const {
        Eigen::VectorXd out(u.size());
        for (int i = 0; i < ops.orthant(); ++i) out(i) = std::sqrt(lp_w2(i)) * u(i);
        int blk = 0;
        for (const auto& [at, d] : ops.soc_blocks()) {
            out.segment(at, d) = soc_w[blk] * u.segment(at, d);
            ++blk;
        }
        return out;
    }

    Eigen::VectorXd apply_winv(const ConeOps& ops, const Eigen::VectorXd& u) const {
        Eigen::VectorXd out(u.size());
        for (int i = 0; i < ops.orthant(); ++i) out(i) = u(i) / std::sqrt(lp_w2(i));
        int blk = 0;
        for (const auto& [at, d] : ops.soc_blocks()) {
            out.segment(at, d) = soc_winv[blk] * u.segment(at, d);
            ++blk;
        }
        return out;
    }

    Eigen::VectorXd apply_w2(const ConeOps& ops, const Eigen::VectorXd& u) const {
        Eigen::VectorXd out(u.size());
        for (int i = 0; i < ops.orthant(); ++i) out(i) = lp_w2(i) * u(i);
        int blk = 0;
        for (const auto& [at, d] : ops.soc_blocks()) {
            out.segment(at, d) = soc_w2[blk] * u.segment(at, d);
            ++blk;
        }
        return out;
    }
};

struct KktSolver {
    const ConicProblem& prob;
    const ConeOps& ops;
    int n, p, m, dim;
    double reg;
    Eigen::SparseMatrix<double> gt, at;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    const NtScaling* scaling = nullptr;  // null means W = I
    int refine_steps;
    bool analyzed = false;

    KktSolver(const ConicProblem& problem, const ConeOps& cone_ops, const ConicSettings& settings)
        : prob(problem), ops(cone_ops) {
        n = prob.num_vars();
        p = static_cast<int>(prob.eq.rows());
        m = static_cast<int>(prob.ineq.rows());
        dim = n + p + m;
        reg = settings.static_reg;
        refine_steps = settings.refine_steps;
        gt = prob.ineq.transpose();
        at = prob.eq.transpose();
    }

    bool factor(const NtScaling* w) {
        scaling = w;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(prob.quad.nonZeros() + 2 * prob.eq.nonZeros() + 2 * prob.ineq.nonZeros() +
                     dim + 64 * ops.soc_blocks().size());
        for (int col = 0; col < prob.quad.outerSize(); ++col) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(prob.quad, col); it; ++it) {
                trip.emplace_back(it.row(), it.col(), it.value());
            }
        }
        for (int col = 0; col < prob.eq.outerSize(); ++col) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(prob.eq, col); it; ++it) {
                trip.emplace_back(n + it.row(), it.col(), it.value());
                trip.emplace_back(it.col(), n + it.row(), it.value());
            }
        }
        for (int col = 0; col < prob.ineq.outerSize(); ++col) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(prob.ineq, col); it; ++it) {
                trip.emplace_back(n + p + it.row(), it.col(), it.value());
                trip.emplace_back(it.col(), n + p + it.row(), it.value());
            }
        }
        for (int i = 0; i < n; ++i) trip.emplace_back(i, i, reg);
        for (int i = 0; i < p; ++i) trip.emplace_back(n + i, n + i, -reg);
        // -W^2 block; keep the identity-scaling pattern a subset of the
        // scaled pattern so the symbolic analysis can be reused
        if (scaling == nullptr) {
            for (int i = 0; i < ops.orthant(); ++i) {
                trip.emplace_back(n + p + i, n + p + i, -1.0 - reg);
            }
            for (const auto& [at_row, d] : ops.soc_blocks()) {
                for (int r = 0; r < d; ++r) {
                    for (int c = 0; c < d; ++c) {
                        trip.emplace_back(n + p + at_row + r, n + p + at_row + c,
                                          r == c ? -1.0 - reg : 0.0);
                    }
                }
            }
        } else {
            for (int i = 0; i < ops.orthant(); ++i) {
                trip.emplace_back(n + p + i, n + p + i, -scaling->lp_w2(i) - reg);
            }
            int blk = 0;
            for (const auto& [at_row, d] : ops.soc_blocks()) {
                const Eigen::MatrixXd& w2 = scaling->soc_w2[blk++];
                for (int r = 0; r < d; ++r) {
                    for (int c = 0; c < d; ++c) {
                        double val = -w2(r, c) - (r == c ? reg : 0.0);
                        trip.emplace_back(n + p + at_row + r, n + p + at_row + c, val);
                    }
                }
            }
        }
        Eigen::SparseMatrix<double> kkt(dim, dim);
        kkt.setFromTriplets(trip.begin(), trip.end());
        if (!analyzed) {
            ldlt.analyzePattern(kkt);
            analyzed = true;
        }
        ldlt.factorize(kkt);
        return ldlt.info() == Eigen::Success;
    }

    // unregularized operator for iterative refinement
    Eigen::VectorXd apply(const Eigen::VectorXd& u) const {
        Eigen::VectorXd out(dim);
        auto ux = u.head(n);
        auto uy = u.segment(n, p);
        auto uz = u.tail(m);
        Eigen::VectorXd ox = at * uy + gt * uz;
        if (prob.quad.rows() > 0) ox += prob.quad * ux;
        out.head(n) = ox;
        out.segment(n, p) = prob.eq * ux;
        Eigen::VectorXd w2uz =
            scaling ? scaling->apply_w2(ops, uz) : static_cast<Eigen::VectorXd>(uz);
        out.tail(m) = prob.ineq * ux - w2uz;
        return out;
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        Eigen::VectorXd u = ldlt.solve(rhs);
        for (int it = 0; it < refine_steps; ++it) {
            Eigen::VectorXd res = rhs - apply(u);
            u += ldlt.solve(res);
        }
        return u;
    }
};

ConicResult solve_equality_qp(const ConicProblem& prob, const ConicSettings& settings) {
    const int n = prob.num_vars();
    const int p = static_cast<int>(prob.eq.rows());
    std::vector<Eigen::Triplet<double>> trip;
    for (int col = 0; col < prob.quad.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(prob.quad, col); it; ++it) {
            trip.emplace_back(it.row(), it.col(), it.value());
        }
    }
    for (int col = 0; col < prob.eq.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(prob.eq, col); it; ++it) {
            trip.emplace_back(n + it.row(), it.col(), it.value());
            trip.emplace_back(it.col(), n + it.row(), it.value());
        }
    }
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, settings.static_reg);
    for (int i = 0; i < p; ++i) trip.emplace_back(n + i, n + i, -settings.static_reg);
    Eigen::SparseMatrix<double> kkt(n + p, n + p);
    kkt.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(kkt);

    ConicResult result;
    if (ldlt.info() != Eigen::Success) return result;
    Eigen::VectorXd rhs(n + p);
    rhs.head(n) = -prob.lin;
    rhs.tail(p) = prob.eq_rhs;
    Eigen::VectorXd u = ldlt.solve(rhs);
    for (int it = 0; it < 3; ++it) {
        Eigen::VectorXd res = rhs;
        res.head(n) -= prob.quad * u.head(n) + prob.eq.transpose() * u.tail(p);
        res.tail(p) -= prob.eq * u.head(n);
        u += ldlt.solve(res);
    }
    result.x = u.head(n);
    result.y = u.tail(p);
    result.z.resize(0);
    result.s.resize(0);
    result.objective = 0.5 * result.x.dot(prob.quad * result.x) + prob.lin.dot(result.x);
    result.primal_res = p > 0 ? (prob.eq * result.x - prob.eq_rhs).norm() : 0.0;
    result.status = result.primal_res < 1e-6 ? ConicStatus::OPTIMAL : ConicStatus::NUMERICAL_ERROR;
    return result;
}

}  // namespace

namespace {

// Per-row scaling of equalities and per-block scaling of cone rows (a
// uniform positive factor per SOC block preserves the cone). Returns the
// divisors so the caller can undo the scaling on s, z and y.
void equilibrate(ConicProblem& prob, Eigen::VectorXd& ineq_scale, Eigen::VectorXd& eq_scale) {
    const int m = static_cast<int>(prob.ineq.rows());
    const int p = static_cast<int>(prob.eq.rows());
    ineq_scale = Eigen::VectorXd::Ones(m);
    eq_scale = Eigen::VectorXd::Ones(p);

    Eigen::VectorXd row_max = Eigen::VectorXd::Zero(m);
    for (int col = 0; col < prob.ineq.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(prob.ineq, col); it; ++it) {
            row_max(it.row()) = std::max(row_max(it.row()), std::abs(it.value()));
        }
    }
    for (int i = 0; i < m; ++i) row_max(i) = std::max(row_max(i), std::abs(prob.ineq_rhs(i)));

    auto clamp_scale = [](double v) { return std::clamp(v, 1e-6, 1e12); };
    for (int i = 0; i < prob.cone.orthant; ++i) {
        ineq_scale(i) = row_max(i) > 0.0 ? clamp_scale(row_max(i)) : 1.0;
    }
    int at = prob.cone.orthant;
    for (int d : prob.cone.soc_dims) {
        double block = 0.0;
        for (int r = 0; r < d; ++r) block = std::max(block, row_max(at + r));
        double s = block > 0.0 ? clamp_scale(block) : 1.0;
        for (int r = 0; r < d; ++r) ineq_scale(at + r) = s;
        at += d;
    }

    for (int col = 0; col < prob.ineq.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(prob.ineq, col); it; ++it) {
            it.valueRef() /= ineq_scale(it.row());
        }
    }
    prob.ineq_rhs = prob.ineq_rhs.cwiseQuotient(ineq_scale);

    if (p > 0) {
        Eigen::VectorXd eq_max = Eigen::VectorXd::Zero(p);
        for (int col = 0; col < prob.eq.outerSize(); ++col) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(prob.eq, col); it; ++it) {
                eq_max(it.row()) = std::max(eq_max(it.row()), std::abs(it.value()));
            }
        }
        for (int i = 0; i < p; ++i) {
            eq_scale(i) = eq_max(i) > 0.0 ? clamp_scale(eq_max(i)) : 1.0;
        }
        for (int col = 0; col < prob.eq.outerSize(); ++col) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(prob.eq, col); it; ++it) {
                it.valueRef() /= eq_scale(it.row());
            }
        }
        prob.eq_rhs = prob.eq_rhs.cwiseQuotient(eq_scale);
    }
}

ConicResult solve_conic_core(const ConicProblem& problem, const ConicSettings& settings,
                             const Eigen::VectorXd& x_warm);

}  // namespace

ConicResult solve_conic(const ConicProblem& problem, const ConicSettings& settings,
                        const Eigen::VectorXd& x_warm) {
    problem.validate();
    if (problem.ineq.rows() == 0) return solve_equality_qp(problem, settings);

    ConicProblem scaled = problem;
    Eigen::VectorXd ineq_scale, eq_scale;
    equilibrate(scaled, ineq_scale, eq_scale);
    ConicResult res = solve_conic_core(scaled, settings, x_warm);
    if (res.s.size() == ineq_scale.size()) {
        res.s = res.s.cwiseProduct(ineq_scale);
        res.z = res.z.cwiseQuotient(ineq_scale);
    }
    if (res.y.size() == eq_scale.size()) res.y = res.y.cwiseQuotient(eq_scale);
    return res;
}

namespace {

ConicResult solve_conic_core(const ConicProblem& problem, const ConicSettings& settings,
                             const Eigen::VectorXd& x_warm) {
    const ConeOps ops(problem.cone);
    const int n = problem.num_vars();
    const int p = static_cast<int>(problem.eq.rows());
    const int m = static_cast<int>(problem.ineq.rows());

    KktSolver kkt(problem, ops, settings);

    // init: least-squares KKT solve with identity scaling, slacks shifted
    // into the cone; a warm start replaces the primal block
    ConicResult result;
    if (x_warm.size() == n) {
        result.x = x_warm;
        result.y = Eigen::VectorXd::Zero(p);
        result.s = problem.ineq_rhs - problem.ineq * x_warm;
        result.z = ops.identity();
        ops.shift_interior(result.s);
    } else {
        double saved_reg = kkt.reg;
        bool ok = kkt.factor(nullptr);
        while (!ok && kkt.reg < 1e-2) {
            kkt.reg *= 100.0;
            ok = kkt.factor(nullptr);
        }
        if (!ok) return result;
        kkt.reg = saved_reg;
        Eigen::VectorXd rhs(n + p + m);
        rhs.head(n) = -problem.lin;
        rhs.segment(n, p) = problem.eq_rhs;
        rhs.tail(m) = problem.ineq_rhs;
        Eigen::VectorXd u = kkt.solve(rhs);
        result.x = u.head(n);
        result.y = u.segment(n, p);
        result.z = u.tail(m);
        result.s = -result.z;
        ops.shift_interior(result.s);
        ops.shift_interior(result.z);
    }

    Eigen::VectorXd& x = result.x;
    Eigen::VectorXd& y = result.y;
    Eigen::VectorXd& z = result.z;
    Eigen::VectorXd& s = result.s;

    const double b_scale = std::max(1.0, problem.eq_rhs.size() ? problem.eq_rhs.norm() : 0.0);
    const double h_scale = std::max(1.0, problem.ineq_rhs.norm());
    const double q_scale = std::max(1.0, problem.lin.norm());

    double best_score = std::numeric_limits<double>::infinity();
    ConicResult best = result;
    best.status = ConicStatus::MAX_ITERATIONS;

    // when progress stalls just short of the target, a mildly relaxed
    // tolerance still certifies the iterate
    auto acceptable = [&settings](const ConicResult& r) {
        return r.primal_res <= 100.0 * settings.feas_tol &&
               r.dual_res <= 100.0 * settings.feas_tol &&
               (r.gap <= 100.0 * settings.abs_gap_tol || r.rel_gap <= 100.0 * settings.rel_gap_tol);
    };
    auto finish = [&acceptable](ConicResult r) {
        if (r.status != ConicStatus::OPTIMAL && acceptable(r)) r.status = ConicStatus::OPTIMAL;
        return r;
    };

    NtScaling scaling;
    for (int iter = 0; iter <= settings.max_iterations; ++iter) {
        Eigen::VectorXd px = problem.quad.rows() > 0
                                 ? static_cast<Eigen::VectorXd>(problem.quad * x)
                                 : Eigen::VectorXd::Zero(n);
        Eigen::VectorXd rx = px + problem.lin + kkt.at * y + kkt.gt * z;
        Eigen::VectorXd ry = p > 0 ? (problem.eq * x - problem.eq_rhs).eval() : Eigen::VectorXd();
        Eigen::VectorXd rz = problem.ineq * x + s - problem.ineq_rhs;

        const double gap = s.dot(z);
        const double pcost = 0.5 * x.dot(px) + problem.lin.dot(x);
        const double pres = std::max(p > 0 ? ry.norm() / b_scale : 0.0, rz.norm() / h_scale);
        const double dres = rx.norm() / q_scale;
        const double relgap = gap / std::max(1.0, std::abs(pcost));

        result.objective = pcost;
        result.gap = gap;
        result.rel_gap = relgap;
        result.primal_res = pres;
        result.dual_res = dres;
        result.iterations = iter;

        if (settings.verbose) {
            std::fprintf(stderr, "iter %3d  pcost % .6e  gap %.3e  pres %.3e  dres %.3e\n", iter,
                         pcost, gap, pres, dres);
        }

        double score = pres + dres + relgap;
        if (score < best_score) {
            best_score = score;
            best = result;
            best.status = ConicStatus::MAX_ITERATIONS;
        }

        if (pres <= settings.feas_tol && dres <= settings.feas_tol &&
            (gap <= settings.abs_gap_tol || relgap <= settings.rel_gap_tol)) {
            result.status = ConicStatus::OPTIMAL;
            return result;
        }
        if (iter == settings.max_iterations) break;

        if (!scaling.compute(ops, s, z)) {
            best.status = ConicStatus::NUMERICAL_ERROR;
            return finish(best);
        }
        {
            double saved_reg = kkt.reg;
            bool ok = kkt.factor(&scaling);
            while (!ok && kkt.reg < 1e-2) {
                kkt.reg *= 100.0;
                ok = kkt.factor(&scaling);
            }
            kkt.reg = saved_reg;
            if (!ok) {
                best.status = ConicStatus::NUMERICAL_ERROR;
                return finish(best);
            }
        }

        const double mu = gap / ops.degree();
        const Eigen::VectorXd& lambda = scaling.lambda;

        // predictor
        Eigen::VectorXd rhs(n + p + m);
        rhs.head(n) = -rx;
        if (p > 0) rhs.segment(n, p) = -ry;
        rhs.tail(m) = -rz + s;  // -rz - W(lambda \ (-lambda o lambda)) = -rz + W lambda
        Eigen::VectorXd u_aff = kkt.solve(rhs);
        Eigen::VectorXd dz_aff = u_aff.tail(m);
        Eigen::VectorXd ds_aff = -s - scaling.apply_w2(ops, dz_aff);

        double alpha_aff = std::min(ops.max_step(s, ds_aff, 1.2), ops.max_step(z, dz_aff, 1.2));
        alpha_aff = std::min(alpha_aff, 1.0);
        double gap_aff = (s + alpha_aff * ds_aff).dot(z + alpha_aff * dz_aff);
        double sigma = std::pow(std::clamp(gap_aff / gap, 0.0, 1.0), 3.0);

        // corrector with Mehrotra second-order term
        Eigen::VectorXd eta = scaling.apply_winv(ops, ds_aff);
        Eigen::VectorXd theta = scaling.apply_w(ops, dz_aff);
        Eigen::VectorXd d_lambda =
            -ops.prod(lambda, lambda) - ops.prod(eta, theta) + sigma * mu * ops.identity();
        Eigen::VectorXd lam_inv_d = ops.inv_prod(lambda, d_lambda);
        rhs.tail(m) = -rz - scaling.apply_w(ops, lam_inv_d);
        Eigen::VectorXd u = kkt.solve(rhs);
        Eigen::VectorXd dx = u.head(n);
        Eigen::VectorXd dy = u.segment(n, p);
        Eigen::VectorXd dz = u.tail(m);
        Eigen::VectorXd ds = scaling.apply_w(ops, lam_inv_d) - scaling.apply_w2(ops, dz);

        double alpha = std::min(ops.max_step(s, ds, 1.2), ops.max_step(z, dz, 1.2));
        alpha = std::min(1.0, 0.99 * alpha);
        // keep strictly interior
        bool interior = false;
        for (int guard = 0; guard < 40; ++guard) {
            if (ops.margin(s + alpha * ds) > 0.0 && ops.margin(z + alpha * dz) > 0.0) {
                interior = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!interior || alpha < 1e-13) return finish(best);  // step collapsed

        x += alpha * dx;
        if (p > 0) y += alpha * dy;
        z += alpha * dz;
        s += alpha * ds;
    }

    return finish(best);
}

}  // namespace

FeasibilityResult conic_feasibility(const ConicProblem& problem, const ConicSettings& settings) {
    problem.validate();
    FeasibilityResult out;
    if (problem.ineq.rows() == 0) {
        // only equalities: least squares decides
        ConicProblem qp = problem;
        qp.quad = Eigen::SparseMatrix<double>(problem.num_vars(), problem.num_vars());
        qp.quad.setIdentity();
        qp.lin = Eigen::VectorXd::Zero(problem.num_vars());
        auto res = solve_equality_qp(qp, settings);
        out.status = res.status;
        out.shift = res.status == ConicStatus::OPTIMAL ? 0.0 : 1.0;
        out.x = res.x;
        return out;
    }

    const int n = problem.num_vars();
    const int m = static_cast<int>(problem.ineq.rows());

    ConicProblem p1;
    p1.lin = Eigen::VectorXd::Zero(n + 1);
    p1.lin(n) = 1.0;
    p1.quad = Eigen::SparseMatrix<double>(n + 1, n + 1);

    if (problem.eq.rows() > 0) {
        Eigen::SparseMatrix<double> a(problem.eq.rows(), n + 1);
        std::vector<Eigen::Triplet<double>> trip;
        for (int col = 0; col < problem.eq.outerSize(); ++col) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(problem.eq, col); it; ++it) {
                trip.emplace_back(it.row(), it.col(), it.value());
            }
        }
        a.setFromTriplets(trip.begin(), trip.end());
        p1.eq = a;
        p1.eq_rhs = problem.eq_rhs;
    } else {
        p1.eq = Eigen::SparseMatrix<double>(0, n + 1);
        p1.eq_rhs = Eigen::VectorXd();
    }

    // rows: original orthant, then the t >= -1 bound, then SOC blocks;
    // every cone row gains -t along the cone identity
    const ConeOps ops(problem.cone);
    const int n_orth = problem.cone.orthant;
    Eigen::SparseMatrix<double> g(m + 1, n + 1);
    std::vector<Eigen::Triplet<double>> trip;
    for (int col = 0; col < problem.ineq.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(problem.ineq, col); it; ++it) {
            int row = it.row();
            int new_row = row < n_orth ? row : row + 1;
            trip.emplace_back(new_row, it.col(), it.value());
        }
    }
    for (int i = 0; i < n_orth; ++i) trip.emplace_back(i, n, -1.0);
    trip.emplace_back(n_orth, n, -1.0);  // -t <= 1
    int at = n_orth + 1;
    for (int d : problem.cone.soc_dims) {
        trip.emplace_back(at, n, -1.0);
        at += d;
    }
    g.setFromTriplets(trip.begin(), trip.end());
    p1.ineq = g;
    p1.ineq_rhs.resize(m + 1);
    p1.ineq_rhs.head(n_orth) = problem.ineq_rhs.head(n_orth);
    p1.ineq_rhs(n_orth) = 1.0;
    p1.ineq_rhs.tail(m - n_orth) = problem.ineq_rhs.tail(m - n_orth);
    p1.cone.orthant = n_orth + 1;
    p1.cone.soc_dims = problem.cone.soc_dims;

    auto res = solve_conic(p1, settings);
    out.status = res.status;
    if (res.x.size() == n + 1) {
        out.shift = res.x(n);
        out.x = res.x.head(n);
    }
    return out;
}

}  // namespace ccmpc
