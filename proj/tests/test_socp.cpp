#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "ccmpc/socp.hpp"

#include <doctest.h>

#include <cmath>

#include "ccmpc/gmm.hpp"

using namespace ccmpc;

namespace {

Eigen::SparseMatrix<double> dense_to_sparse(const Eigen::MatrixXd& m) {
    return m.sparseView(1.0, 1e-300);
}

ConicProblem empty_problem(int n) {
    ConicProblem p;
    p.quad = Eigen::SparseMatrix<double>(n, n);
    p.lin = Eigen::VectorXd::Zero(n);
    p.eq = Eigen::SparseMatrix<double>(0, n);
    p.eq_rhs = Eigen::VectorXd();
    p.ineq = Eigen::SparseMatrix<double>(0, n);
    p.ineq_rhs = Eigen::VectorXd();
    return p;
}

// feasibility margin of a primal point (>= 0 means inside every row)
double primal_margin(const ConicProblem& p, const Eigen::VectorXd& x) {
    Eigen::VectorXd s = p.ineq_rhs - p.ineq * x;
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < p.cone.orthant; ++i) m = std::min(m, s(i));
    int at = p.cone.orthant;
    for (int d : p.cone.soc_dims) {
        m = std::min(m, s(at) - s.segment(at + 1, d - 1).norm());
        at += d;
    }
    return m;
}

void check_kkt_certificate(const ConicProblem& p, const ConicResult& res, double tol = 1e-5) {
    REQUIRE(res.status == ConicStatus::OPTIMAL);
    CHECK(primal_margin(p, res.x) > -tol);
    if (p.eq.rows() > 0) CHECK((p.eq * res.x - p.eq_rhs).norm() < tol);
    Eigen::VectorXd grad = p.quad * res.x + p.lin + p.ineq.transpose() * res.z;
    if (p.eq.rows() > 0) grad += p.eq.transpose() * res.y;
    CHECK(grad.norm() < tol * std::max(1.0, p.lin.norm()));
    // multipliers in the dual cone
    double zm = std::numeric_limits<double>::infinity();
    for (int i = 0; i < p.cone.orthant; ++i) zm = std::min(zm, res.z(i));
    int at = p.cone.orthant;
    for (int d : p.cone.soc_dims) {
        zm = std::min(zm, res.z(at) - res.z.segment(at + 1, d - 1).norm());
        at += d;
    }
    CHECK(zm > -tol);
    CHECK(std::abs(res.s.dot(res.z)) < 1e-5 * std::max(1.0, std::abs(res.objective)));
}

}  // namespace

TEST_CASE("scalar QP with one bound") {
    // min x^2 s.t. x >= 1
    auto p = empty_problem(1);
    p.quad = dense_to_sparse(Eigen::MatrixXd::Constant(1, 1, 2.0));
    p.ineq = dense_to_sparse(Eigen::MatrixXd::Constant(1, 1, -1.0));
    p.ineq_rhs = Eigen::VectorXd::Constant(1, -1.0);
    p.cone.orthant = 1;
    auto res = solve_conic(p);
    REQUIRE(res.status == ConicStatus::OPTIMAL);
    CHECK(res.x(0) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(res.objective == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("unit ball support function") {
    // min c'x s.t. ||x|| <= 1, c = (-1, 0)
    auto p = empty_problem(2);
    p.lin << -1.0, 0.0;
    Eigen::MatrixXd g(3, 2);
    g << 0, 0, -1, 0, 0, -1;
    p.ineq = dense_to_sparse(g);
    p.ineq_rhs = Eigen::Vector3d(1.0, 0.0, 0.0);
    p.cone.soc_dims = {3};
    auto res = solve_conic(p);
    REQUIRE(res.status == ConicStatus::OPTIMAL);
    CHECK(res.x(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(res.x(1)) < 1e-6);
    CHECK(res.objective == doctest::Approx(-1.0).epsilon(1e-7));
}

TEST_CASE("pure LP") {
    // min x1 + 2 x2 s.t. x1 + x2 >= 1, x >= 0
    auto p = empty_problem(2);
    p.lin << 1.0, 2.0;
    Eigen::MatrixXd g(3, 2);
    g << -1, -1, -1, 0, 0, -1;
    p.ineq = dense_to_sparse(g);
    p.ineq_rhs = Eigen::Vector3d(-1.0, 0.0, 0.0);
    p.cone.orthant = 3;
    auto res = solve_conic(p);
    REQUIRE(res.status == ConicStatus::OPTIMAL);
    CHECK(res.x(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(res.x(1)) < 1e-6);
}

TEST_CASE("equality constrained QP") {
    // min ||x||^2 s.t. x1 + x2 = 2 -> x = (1,1)
    auto p = empty_problem(2);
    p.quad = dense_to_sparse(2.0 * Eigen::MatrixXd::Identity(2, 2));
    Eigen::MatrixXd a(1, 2);
    a << 1, 1;
    p.eq = dense_to_sparse(a);
    p.eq_rhs = Eigen::VectorXd::Constant(1, 2.0);
    auto res = solve_conic(p);
    REQUIRE(res.status == ConicStatus::OPTIMAL);
    CHECK((res.x - Eigen::Vector2d(1.0, 1.0)).norm() < 1e-7);
}

TEST_CASE("mixed QP with equalities, boxes and a cone") {
    // min (x1-3)^2 + x2^2 + x3^2 s.t. x1+x2+x3 = 1, |x| coords <= 2, ||(x2,x3)|| <= x1
    auto p = empty_problem(3);
    p.quad = dense_to_sparse(2.0 * Eigen::MatrixXd::Identity(3, 3));
    p.lin << -6.0, 0.0, 0.0;
    Eigen::MatrixXd a(1, 3);
    a << 1, 1, 1;
    p.eq = dense_to_sparse(a);
    p.eq_rhs = Eigen::VectorXd::Constant(1, 1.0);
    Eigen::MatrixXd g(6 + 3, 3);
    g.setZero();
    for (int i = 0; i < 3; ++i) {
        g(i, i) = 1.0;       // x_i <= 2
        g(3 + i, i) = -1.0;  // -x_i <= 2
    }
    g(6, 0) = -1.0;  // cone head: s0 = x1
    g(7, 1) = -1.0;
    g(8, 2) = -1.0;
    p.ineq = dense_to_sparse(g);
    p.ineq_rhs.resize(9);
    p.ineq_rhs << 2, 2, 2, 2, 2, 2, 0, 0, 0;
    p.cone.orthant = 6;
    p.cone.soc_dims = {3};
    auto res = solve_conic(p);
    check_kkt_certificate(p, res);
    // feasible set forces x1 >= ||(x2,x3)||; optimum pushes x1 toward 3
    CHECK(res.x(0) > 0.5);
}

TEST_CASE("random SOCPs carry valid KKT certificates") {
    Rng rng(101);
    for (int trial = 0; trial < 40; ++trial) {
        int n = 2 + static_cast<int>(rng.uniform() * 18);
        auto p = empty_problem(n);

        Eigen::MatrixXd root(n, n);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) root(r, c) = rng.normal();
        }
        Eigen::MatrixXd quad = root.transpose() * root / n + 0.1 * Eigen::MatrixXd::Identity(n, n);
        p.quad = dense_to_sparse(2.0 * quad);
        for (int i = 0; i < n; ++i) p.lin(i) = rng.normal();

        // box around a known interior point x0, plus one ball centered there
        Eigen::VectorXd x0(n);
        for (int i = 0; i < n; ++i) x0(i) = rng.uniform(-1, 1);
        int rows = 2 * n + (n + 1);
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(rows, n);
        Eigen::VectorXd h(rows);
        for (int i = 0; i < n; ++i) {
            g(i, i) = 1.0;
            h(i) = x0(i) + rng.uniform(0.5, 2.0);
            g(n + i, i) = -1.0;
            h(n + i) = -(x0(i) - rng.uniform(0.5, 2.0));
        }
        double radius = rng.uniform(1.0, 3.0);
        h(2 * n) = radius;
        for (int i = 0; i < n; ++i) {
            g(2 * n + 1 + i, i) = -1.0;
            h(2 * n + 1 + i) = -x0(i);
        }
        p.ineq = dense_to_sparse(g);
        p.ineq_rhs = h;
        p.cone.orthant = 2 * n;
        p.cone.soc_dims = {n + 1};

        auto res = solve_conic(p);
        check_kkt_certificate(p, res);
    }
}

TEST_CASE("solver optimum matches projected gradient with Dykstra projections") {
    // min 1/2 x'Px + q'x over box intersect ball: the projection onto each
    // set is exact, so a long projected-gradient run is an independent
    // first-order oracle.
    Rng rng(55);
    for (int trial = 0; trial < 8; ++trial) {
        int n = 2 + static_cast<int>(rng.uniform() * 6);
        Eigen::MatrixXd root(n, n);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) root(r, c) = rng.normal();
        }
        Eigen::MatrixXd quad = root.transpose() * root / n + 0.5 * Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd q(n);
        for (int i = 0; i < n; ++i) q(i) = 2.0 * rng.normal();

        Eigen::VectorXd center(n), lo(n), hi(n);
        for (int i = 0; i < n; ++i) {
            center(i) = rng.uniform(-1, 1);
            lo(i) = center(i) - rng.uniform(0.3, 1.5);
            hi(i) = center(i) + rng.uniform(0.3, 1.5);
        }
        double radius = rng.uniform(0.8, 2.0);

        auto p = empty_problem(n);
        p.quad = dense_to_sparse(quad);
        p.lin = q;
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2 * n + n + 1, n);
        Eigen::VectorXd h(2 * n + n + 1);
        for (int i = 0; i < n; ++i) {
            g(i, i) = 1.0;
            h(i) = hi(i);
            g(n + i, i) = -1.0;
            h(n + i) = -lo(i);
        }
        h(2 * n) = radius;
        for (int i = 0; i < n; ++i) {
            g(2 * n + 1 + i, i) = -1.0;
            h(2 * n + 1 + i) = -center(i);
        }
        p.ineq = dense_to_sparse(g);
        p.ineq_rhs = h;
        p.cone.orthant = 2 * n;
        p.cone.soc_dims = {n + 1};

        auto res = solve_conic(p);
        REQUIRE(res.status == ConicStatus::OPTIMAL);

        auto project = [&](Eigen::VectorXd v) {
            // Dykstra alternating projections onto box and ball
            Eigen::VectorXd pbox = Eigen::VectorXd::Zero(n), pball = Eigen::VectorXd::Zero(n);
            for (int it = 0; it < 200; ++it) {
                Eigen::VectorXd y = (v + pbox).cwiseMax(lo).cwiseMin(hi);
                pbox = v + pbox - y;
                Eigen::VectorXd w = y + pball - center;
                if (w.norm() > radius) w *= radius / w.norm();
                Eigen::VectorXd u = center + w;
                pball = y + pball - u;
                v = u;
            }
            return v;
        };
        double lips = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(quad).eigenvalues().maxCoeff();
        Eigen::VectorXd xk = project(center);
        for (int it = 0; it < 30000; ++it) {
            Eigen::VectorXd grad = quad * xk + q;
            xk = project(xk - grad / lips);
        }
        double f_oracle = 0.5 * xk.dot(quad * xk) + q.dot(xk);
        CHECK(res.objective <= f_oracle + 1e-4);
        CHECK(std::abs(res.objective - f_oracle) < 1e-4 * std::max(1.0, std::abs(f_oracle)));
    }
}

TEST_CASE("phase-1 feasibility classification") {
    // feasible with interior: x >= 1, x <= 3
    auto p = empty_problem(1);
    Eigen::MatrixXd g(2, 1);
    g << -1, 1;
    p.ineq = dense_to_sparse(g);
    p.ineq_rhs = Eigen::Vector2d(-1.0, 3.0);
    p.cone.orthant = 2;
    auto feas = conic_feasibility(p);
    REQUIRE(feas.status == ConicStatus::OPTIMAL);
    CHECK(feas.shift < -0.5);  // margin of the midpoint is 1
    CHECK(feas.feasible());
    CHECK(primal_margin(p, feas.x) > 0.0);

    // infeasible: x >= 2, x <= 1
    p.ineq_rhs = Eigen::Vector2d(-2.0, 1.0);
    auto inf = conic_feasibility(p);
    REQUIRE(inf.status == ConicStatus::OPTIMAL);
    CHECK(inf.shift > 0.4);
    CHECK(!inf.feasible());

    // infeasible cone pair: ||x|| <= 1 and x1 >= 2
    auto pc = empty_problem(2);
    Eigen::MatrixXd gc(4, 2);
    gc << -1, 0, 0, 0, -1, 0, 0, -1;
    pc.ineq = dense_to_sparse(gc);
    pc.ineq_rhs.resize(4);
    pc.ineq_rhs << -2.0, 1.0, 0.0, 0.0;
    pc.cone.orthant = 1;
    pc.cone.soc_dims = {3};
    auto infc = conic_feasibility(pc);
    REQUIRE(infc.status == ConicStatus::OPTIMAL);
    CHECK(infc.shift > 0.2);

    // equality-constrained feasibility with cones
    auto pe = empty_problem(2);
    Eigen::MatrixXd a(1, 2);
    a << 1, 1;
    pe.eq = dense_to_sparse(a);
    pe.eq_rhs = Eigen::VectorXd::Constant(1, 1.0);
    Eigen::MatrixXd ge(2, 2);
    ge << -1, 0, 0, -1;
    pe.ineq = dense_to_sparse(ge);
    pe.ineq_rhs = Eigen::Vector2d(0.0, 0.0);
    pe.cone.orthant = 2;
    auto fe = conic_feasibility(pe);
    CHECK(fe.feasible());
    CHECK((pe.eq * fe.x - pe.eq_rhs).norm() < 1e-6);
}

TEST_CASE("duality gap meets the relative tolerance") {
    Rng rng(202);
    for (int trial = 0; trial < 10; ++trial) {
        int n = 3 + static_cast<int>(rng.uniform() * 10);
        auto p = empty_problem(n);
        Eigen::MatrixXd root(n, n);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) root(r, c) = rng.normal();
        }
        p.quad = dense_to_sparse(root.transpose() * root / n +
                                 0.2 * Eigen::MatrixXd::Identity(n, n));
        for (int i = 0; i < n; ++i) p.lin(i) = rng.normal();
        Eigen::MatrixXd g(2 * n, n);
        g.setZero();
        Eigen::VectorXd h(2 * n);
        for (int i = 0; i < n; ++i) {
            g(i, i) = 1.0;
            h(i) = rng.uniform(0.5, 3.0);
            g(n + i, i) = -1.0;
            h(n + i) = rng.uniform(0.5, 3.0);
        }
        p.ineq = dense_to_sparse(g);
        p.ineq_rhs = h;
        p.cone.orthant = 2 * n;
        auto res = solve_conic(p);
        REQUIRE(res.status == ConicStatus::OPTIMAL);
        CHECK(res.rel_gap <= 1e-7);
    }
}
