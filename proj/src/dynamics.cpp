#include "ccmpc/dynamics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ccmpc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ConvexSet ConvexSet::unbounded(int dim) {
    ConvexSet s;
    s.lower = Eigen::VectorXd::Constant(dim, -kInf);
    s.upper = Eigen::VectorXd::Constant(dim, kInf);
    return s;
}

void ConvexSet::validate() const {
    if (lower.size() != upper.size()) throw std::invalid_argument("ConvexSet: box size mismatch");
    for (int i = 0; i < lower.size(); ++i) {
        if (lower(i) > upper(i)) {
            throw std::invalid_argument("ConvexSet: lower > upper at coordinate " +
                                        std::to_string(i));
        }
    }
    for (const auto& hp : halfplanes) {
        if (hp.normal.size() != lower.size()) {
            throw std::invalid_argument("ConvexSet: half-plane dimension mismatch");
        }
    }
}

bool ConvexSet::contains(const Eigen::VectorXd& x, double tol) const {
    if (x.size() != lower.size()) throw std::invalid_argument("ConvexSet::contains: bad dimension");
    for (int i = 0; i < x.size(); ++i) {
        if (x(i) < lower(i) - tol || x(i) > upper(i) + tol) return false;
    }
    for (const auto& hp : halfplanes) {
        if (hp.normal.dot(x) > hp.offset + tol) return false;
    }
    return true;
}

int LtvSystem::state_dim() const {
    if (a_mats.empty()) throw std::logic_error("LtvSystem: empty");
    return static_cast<int>(a_mats.front().rows());
}

int LtvSystem::input_dim() const {
    if (b_mats.empty()) throw std::logic_error("LtvSystem: empty");
    return static_cast<int>(b_mats.front().cols());
}

void LtvSystem::validate() const {
    if (horizon < 1) throw std::invalid_argument("LtvSystem: horizon must be >= 1");
    if (static_cast<int>(a_mats.size()) != horizon || static_cast<int>(b_mats.size()) != horizon) {
        throw std::invalid_argument("LtvSystem: matrix list length must equal horizon");
    }
    if (!affine.empty() && static_cast<int>(affine.size()) != horizon) {
        throw std::invalid_argument("LtvSystem: affine list length must equal horizon");
    }
    const int nx = state_dim();
    const int nu = input_dim();
    for (int t = 0; t < horizon; ++t) {
        if (a_mats[t].rows() != nx || a_mats[t].cols() != nx) {
            throw std::invalid_argument("LtvSystem: A dimension mismatch at t=" + std::to_string(t));
        }
        if (b_mats[t].rows() != nx || b_mats[t].cols() != nu) {
            throw std::invalid_argument("LtvSystem: B dimension mismatch at t=" + std::to_string(t));
        }
        if (!affine.empty() && affine[t].size() != nx) {
            throw std::invalid_argument("LtvSystem: affine dimension mismatch at t=" +
                                        std::to_string(t));
        }
    }
}

Eigen::VectorXd LtvSystem::step(int t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    if (t < 0 || t >= horizon) throw std::out_of_range("LtvSystem::step: t out of range");
    Eigen::VectorXd next = a_mats[t] * x + b_mats[t] * u;
    if (!affine.empty()) next += affine[t];
    return next;
}

LtvSystem zoh_double_integrator(double dt, int horizon) {
    if (!(dt > 0.0)) throw std::invalid_argument("zoh_double_integrator: dt must be > 0");
    if (horizon < 1) throw std::invalid_argument("zoh_double_integrator: horizon must be >= 1");
    Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
    a(0, 2) = dt;
    a(1, 3) = dt;
    Eigen::Matrix<double, 4, 2> b;
    b << 0.5 * dt * dt, 0.0,
         0.0, 0.5 * dt * dt,
         dt, 0.0,
         0.0, dt;
    LtvSystem sys;
    sys.horizon = horizon;
    sys.a_mats.assign(horizon, a);
    sys.b_mats.assign(horizon, b);
    sys.state_set = ConvexSet::unbounded(4);
    sys.input_set = ConvexSet::unbounded(2);
    sys.validate();
    return sys;
}

LaneChangeSets lane_change_sets() {
    LaneChangeSets sets;

    sets.input.lower = Eigen::Vector2d(-10.0, -5.0);
    sets.input.upper = Eigen::Vector2d(3.0, 5.0);
    // |u1 - t_i| + 1.3 u2 <= 0, t = (-5.56, 5.56), two rows per absolute value
    for (double ti : {-5.56, 5.56}) {
        for (double sign : {1.0, -1.0}) {
            ConvexSet::Halfplane hp;
            hp.normal = Eigen::Vector2d(sign, 1.3);
            hp.offset = sign * ti;
            sets.input.halfplanes.push_back(hp);
        }
    }

    sets.state = ConvexSet::unbounded(4);
    sets.state.lower(2) = 0.0;
    sets.state.upper(2) = 22.2;
    sets.state.lower(3) = -5.56;
    sets.state.upper(3) = 5.56;
    // |v1 - c_i| + 2.0 v2 <= 0, c = (0, 22.2)
    for (double ci : {0.0, 22.2}) {
        for (double sign : {1.0, -1.0}) {
            ConvexSet::Halfplane hp;
            hp.normal = Eigen::Vector4d(0.0, 0.0, sign, 2.0);
            hp.offset = sign * ci;
            sets.state.halfplanes.push_back(hp);
        }
    }

    sets.state.validate();
    sets.input.validate();
    return sets;
}

void BicycleParams::validate() const {
    if (!(rear_length > 0.0 && rear_length < length)) {
        throw std::invalid_argument("BicycleParams: need 0 < l_r < L");
    }
    if (v_min > v_max || accel_min > accel_max || steer_max <= 0.0) {
        throw std::invalid_argument("BicycleParams: bounds out of order");
    }
}

Eigen::Vector4d bicycle_rhs(const Eigen::Vector4d& x, const Eigen::Vector2d& u,
                            const BicycleParams& params) {
    const double psi = x(2), v = x(3);
    const double rho = params.rear_length / params.length;
    const double gamma = std::atan(rho * std::tan(u(1)));
    Eigen::Vector4d dx;
    dx << v * std::cos(psi + gamma),
          v * std::sin(psi + gamma),
          v / params.length * std::cos(gamma) * std::tan(u(1)),
          u(0);
    return dx;
}

LaneChangeSets bicycle_sets(const BicycleParams& params) {
    LaneChangeSets sets;
    sets.state = ConvexSet::unbounded(4);
    sets.state.lower(3) = params.v_min;
    sets.state.upper(3) = params.v_max;
    sets.input.lower = Eigen::Vector2d(params.accel_min, -params.steer_max);
    sets.input.upper = Eigen::Vector2d(params.accel_max, params.steer_max);
    return sets;
}

LtvSystem linearize_bicycle(const std::vector<Eigen::Vector4d>& nominal_states,
                            const std::vector<Eigen::Vector2d>& nominal_inputs, double dt,
                            const BicycleParams& params) {
    params.validate();
    if (!(dt >= 0.0)) throw std::invalid_argument("linearize_bicycle: dt must be >= 0");
    if (nominal_states.size() != nominal_inputs.size() + 1) {
        throw std::invalid_argument("linearize_bicycle: need horizon+1 states and horizon inputs");
    }
    const int horizon = static_cast<int>(nominal_inputs.size());
    if (horizon < 1) throw std::invalid_argument("linearize_bicycle: empty horizon");

    LtvSystem sys;
    sys.horizon = horizon;
    const double rho = params.rear_length / params.length;
    const double steer_limit = 89.0 * M_PI / 180.0;

    for (int t = 0; t < horizon; ++t) {
        const Eigen::Vector4d& xs = nominal_states[t];
        const Eigen::Vector2d& us = nominal_inputs[t];
        if (std::abs(us(1)) >= steer_limit) {
            throw std::invalid_argument("linearize_bicycle: steering too close to tan singularity");
        }
        const double psi = xs(2), v = xs(3);
        const double tan_u2 = std::tan(us(1));
        const double gamma = std::atan(rho * tan_u2);
        const double cos_pg = std::cos(psi + gamma), sin_pg = std::sin(psi + gamma);
        const double sec2 = 1.0 + tan_u2 * tan_u2;
        const double dgamma = rho * sec2 / (1.0 + rho * rho * tan_u2 * tan_u2);

        Eigen::Matrix4d fx = Eigen::Matrix4d::Zero();
        fx(0, 2) = -v * sin_pg;
        fx(0, 3) = cos_pg;
        fx(1, 2) = v * cos_pg;
        fx(1, 3) = sin_pg;
        fx(2, 3) = std::cos(gamma) * tan_u2 / params.length;

        Eigen::Matrix<double, 4, 2> fu = Eigen::Matrix<double, 4, 2>::Zero();
        fu(0, 1) = -v * sin_pg * dgamma;
        fu(1, 1) = v * cos_pg * dgamma;
        fu(2, 1) = v / params.length * (-std::sin(gamma) * dgamma * tan_u2 + std::cos(gamma) * sec2);
        fu(3, 0) = 1.0;

        Eigen::Matrix4d a = Eigen::Matrix4d::Identity() + dt * fx;
        Eigen::Matrix<double, 4, 2> b = dt * fu;
        Eigen::Vector4d next_nominal = xs + dt * bicycle_rhs(xs, us, params);
        Eigen::Vector4d c = next_nominal - a * xs - b * us;

        sys.a_mats.push_back(a);
        sys.b_mats.push_back(b);
        sys.affine.push_back(c);
    }

    auto sets = bicycle_sets(params);
    sys.state_set = sets.state;
    sys.input_set = sets.input;
    sys.validate();
    return sys;
}

}  // namespace ccmpc
