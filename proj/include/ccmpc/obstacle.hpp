#ifndef CCMPC_OBSTACLE_HPP
#define CCMPC_OBSTACLE_HPP

#include "ccmpc/gmm.hpp"

#include <Eigen/Dense>

#include <map>
#include <vector>

namespace ccmpc {

/// Polytopic obstacle footprint. Rectangles (face_count = 4) use the two
/// half extents; other face counts are regular polygons with circumradius
/// half_extents(0).
struct PolytopeObstacle {
    Eigen::Vector2d half_extents{1.0, 1.0};  // (length/2, width/2)
    int face_count = 4;
    int id = 0;
    void validate() const;
};

/// One face of an obstacle as seen by the planner: delta is an
/// (n_x+1)-vector with the outward unit normal on the position coordinates,
/// zeros on the remaining state coordinates and the offset as last entry.
/// The safe side is delta' * [x; 1] <= 0.
struct FaceParam {
    Eigen::VectorXd delta;
    double value(const Eigen::VectorXd& state) const;
};

struct Pose {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
};

/// Faces of the obstacle at the given pose, padded to state dimension
/// state_dim (positions are coordinates 0 and 1). A point is outside the
/// polytope iff some face value is <= 0. 'inflate' grows the footprint by
/// a margin so the controlled vehicle can be treated as a point.
std::vector<FaceParam> pose_to_faces(const Pose& pose, const PolytopeObstacle& obstacle,
                                     int state_dim, double inflate = 0.0);

/// Exact point-in-polytope test used as the geometric complement of the
/// face disjunction.
bool point_in_polytope(const Eigen::Vector2d& point, const Pose& pose,
                       const PolytopeObstacle& obstacle, double inflate = 0.0);

/// Per-(planning step, future time, obstacle, face, mode) Gaussian moments
/// of the face parameters, with mode weights and parent links across
/// planning steps (mode k at step tau+1 descends from parents[k] at tau).
struct GmmPrediction {
    struct ObstacleStep {
        Eigen::VectorXd weights;                                   // K modes
        std::vector<int> parents;                                  // K entries
        // faces[t - (tau+1)][k][i]
        std::vector<std::vector<std::vector<Gaussian>>> faces;
    };

    int state_dim = 0;
    int horizon = 0;                 // closed-loop horizon T
    std::vector<PolytopeObstacle> obstacles;
    // steps[tau][j]; predictions at step tau cover t in (tau, last_t(tau)]
    std::vector<std::vector<ObstacleStep>> steps;

    int num_obstacles() const { return static_cast<int>(obstacles.size()); }
    int num_steps() const { return static_cast<int>(steps.size()); }
    int modes(int tau, int j) const;
    int faces_per(int j) const { return obstacles.at(j).face_count; }
    int last_t(int tau, int j) const;
    bool has(int tau, int t, int j) const;
    const Gaussian& moment(int tau, int t, int j, int i, int k) const;
    double weight(int tau, int j, int k) const;
    int parent(int tau, int j, int k) const;
    void validate() const;
};

/// Mode-labeled pose samples for one obstacle at every future time of one
/// planning step: samples[t - (tau+1)][k] is a list of poses.
struct LabeledPoseSamples {
    int tau = 0;
    int obstacle = 0;
    std::vector<std::vector<std::vector<Pose>>> samples;
    Eigen::VectorXd weights;  // optional; group fractions when empty
    std::vector<int> parents;
};

/// Estimate per-face Gaussian moments from pose samples (push-forward
/// through pose_to_faces, then per-mode sample moments).
GmmPrediction fit_prediction(const std::vector<LabeledPoseSamples>& groups,
                             const std::vector<PolytopeObstacle>& obstacles, int state_dim,
                             int horizon, double inflate = 0.0);

/// Covariance shrinkage and mean shift between consecutive planning steps
/// for the prediction of time t (Frobenius-root difference and Euclidean
/// mean distance).
struct PropagationStat {
    int t = 0, tau = 0, j = 0, i = 0, k = 0;  // k indexes modes at tau+1
    double g = 0.0;
    double h = 0.0;
};
std::vector<PropagationStat> propagation_stats(const GmmPrediction& pred, int t, int tau);

/// Per-index epsilon allocation for the mean-shift bound check
/// (Gamma^t = Psi^{-1}(1 - eps^t)).
struct AssumptionCheckEntry {
    PropagationStat stat;
    double gamma = 0.0;
    double bound = 0.0;  // gamma * g
    bool pass = false;
};
struct AssumptionReport {
    std::vector<AssumptionCheckEntry> entries;
    bool all_pass = true;
    int violations = 0;
};

/// Verify h^t(tau) <= Gamma^t * g^t(tau) for every available index pair of
/// consecutive planning steps. eps_per_row is the per-row risk level.
AssumptionReport check_assumption3(const GmmPrediction& pred, double eps_per_row,
                                   double tol = 1e-9);

}  // namespace ccmpc

#endif
