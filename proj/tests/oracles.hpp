// Test-only reference implementations, independent of the library code paths
// they check.
#ifndef CCMPC_TEST_ORACLES_HPP
#define CCMPC_TEST_ORACLES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracles {

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Quantile by plain bisection on the erfc CDF.
inline double std_normal_quantile_bisect(double p, double tol = 1e-12) {
    double lo = -40.0, hi = 40.0;
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        if (std_normal_cdf(mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Adaptive Simpson quadrature.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-10, int depth = 40) {
    auto simpson = [&f](double lo, double hi) {
        double mid = 0.5 * (lo + hi);
        return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi));
    };
    std::function<double(double, double, double, int)> rec = [&](double lo, double hi, double whole,
                                                                 int d) -> double {
        double mid = 0.5 * (lo + hi);
        double left = simpson(lo, mid);
        double right = simpson(mid, hi);
        if (d <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
            return left + right + (left + right - whole) / 15.0;
        }
        return rec(lo, mid, left, d - 1) + rec(mid, hi, right, d - 1);
    };
    return rec(a, b, simpson(a, b), depth);
}

// Truncated power series for the matrix exponential and its first integral
// (used to rebuild ZOH discretizations from the continuous-time pair).
inline Eigen::MatrixXd expm_series(const Eigen::MatrixXd& m, int terms = 20) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(m.rows(), m.cols());
    Eigen::MatrixXd pow = Eigen::MatrixXd::Identity(m.rows(), m.cols());
    double fact = 1.0;
    for (int k = 1; k <= terms; ++k) {
        pow = pow * m;
        fact *= k;
        acc += pow / fact;
    }
    return acc;
}

// integral_0^dt exp(A s) ds via the series sum dt^{k+1} A^k / (k+1)!
inline Eigen::MatrixXd expm_integral_series(const Eigen::MatrixXd& a, double dt, int terms = 20) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(a.rows(), a.cols());
    Eigen::MatrixXd pow = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    double fact = 1.0;
    double dt_pow = dt;
    for (int k = 0; k <= terms; ++k) {
        acc += pow * (dt_pow / (fact * (k + 1)));
        pow = pow * a;
        fact *= (k + 1);
        dt_pow *= dt;
    }
    return acc;
}

// Central finite-difference Jacobian of a vector map.
inline Eigen::MatrixXd central_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x0, double h = 1e-6) {
    Eigen::VectorXd f0 = f(x0);
    Eigen::MatrixXd jac(f0.size(), x0.size());
    for (int j = 0; j < x0.size(); ++j) {
        Eigen::VectorXd xp = x0, xm = x0;
        xp(j) += h;
        xm(j) -= h;
        jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return jac;
}

}  // namespace oracles

#endif
