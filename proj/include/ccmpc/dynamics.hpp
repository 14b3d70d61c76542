#ifndef CCMPC_DYNAMICS_HPP
#define CCMPC_DYNAMICS_HPP

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace ccmpc {

/// Intersection of a coordinate box and half-planes a'x <= c.
struct ConvexSet {
    Eigen::VectorXd lower;  // per-coordinate, -inf allowed
    Eigen::VectorXd upper;  // per-coordinate, +inf allowed
    struct Halfplane {
        Eigen::VectorXd normal;
        double offset;  // normal' x <= offset
    };
    std::vector<Halfplane> halfplanes;

    int dim() const { return static_cast<int>(lower.size()); }
    static ConvexSet unbounded(int dim);
    void validate() const;
    bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
};

/// Time-indexed linear(ized) dynamics x_{t+1} = A_t x_t + B_t u_t + c_t
/// with time-invariant state and input sets.
struct LtvSystem {
    int horizon = 0;
    std::vector<Eigen::MatrixXd> a_mats;
    std::vector<Eigen::MatrixXd> b_mats;
    std::vector<Eigen::VectorXd> affine;  // empty means zero offsets
    ConvexSet state_set;
    ConvexSet input_set;

    int state_dim() const;
    int input_dim() const;
    void validate() const;
    Eigen::VectorXd step(int t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
};

/// Exact zero-order-hold discretization of the planar double integrator,
/// replicated over the horizon. State (p1, p2, v1, v2), input (u1, u2).
LtvSystem zoh_double_integrator(double dt, int horizon = 1);

/// Velocity/acceleration boxes and the coupled |.| rows of the lane-change
/// setup, expanded into linear half-planes. Positions stay unbounded here;
/// lane boundaries come from the scenario configuration.
struct LaneChangeSets {
    ConvexSet state;
    ConvexSet input;
};
LaneChangeSets lane_change_sets();

struct BicycleParams {
    double length = 1.0;       // L
    double rear_length = 0.5;  // l_r
    double v_min = 0.0, v_max = 10.0;
    double accel_min = -4.0, accel_max = 7.0;
    double steer_max = 35.0 * M_PI / 180.0;  // symmetric bound, radians
    void validate() const;
};

/// Continuous-time kinematic bicycle right-hand side.
/// State (p_x, p_y, psi, v), input (accel, steer).
Eigen::Vector4d bicycle_rhs(const Eigen::Vector4d& x, const Eigen::Vector2d& u,
                            const BicycleParams& params);

/// State/input sets implied by the bicycle bounds (positions unbounded).
LaneChangeSets bicycle_sets(const BicycleParams& params);

/// LTV linearization of the forward-Euler discretized bicycle around a
/// nominal trajectory (horizon+1 states, horizon inputs). The affine
/// residual makes the LTV rollout reproduce the nominal states exactly at
/// the nominal inputs. Throws near the steering singularity (|u2| >= 89 deg).
LtvSystem linearize_bicycle(const std::vector<Eigen::Vector4d>& nominal_states,
                            const std::vector<Eigen::Vector2d>& nominal_inputs, double dt,
                            const BicycleParams& params);

}  // namespace ccmpc

#endif
