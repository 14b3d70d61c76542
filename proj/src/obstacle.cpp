#include "ccmpc/obstacle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ccmpc {

void PolytopeObstacle::validate() const {
    if (face_count < 3) throw std::invalid_argument("PolytopeObstacle: need at least 3 faces");
    if (!(half_extents.minCoeff() > 0.0)) {
        throw std::invalid_argument("PolytopeObstacle: extents must be positive");
    }
}

double FaceParam::value(const Eigen::VectorXd& state) const {
    if (state.size() + 1 != delta.size()) {
        throw std::invalid_argument("FaceParam::value: state dimension mismatch");
    }
    return delta.head(state.size()).dot(state) + delta(delta.size() - 1);
}

namespace {

// Outward normals and face distances in the obstacle body frame.
void body_faces(const PolytopeObstacle& obstacle, double inflate,
                std::vector<Eigen::Vector2d>& normals, std::vector<double>& dists) {
    normals.clear();
    dists.clear();
    if (obstacle.face_count == 4) {
        normals = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
        dists = {obstacle.half_extents(0) + inflate, obstacle.half_extents(1) + inflate,
                 obstacle.half_extents(0) + inflate, obstacle.half_extents(1) + inflate};
        return;
    }
    // regular polygon, apothem from the circumradius
    const double radius = obstacle.half_extents(0) + inflate;
    const double apothem = radius * std::cos(M_PI / obstacle.face_count);
    for (int i = 0; i < obstacle.face_count; ++i) {
        double ang = 2.0 * M_PI * (i + 0.5) / obstacle.face_count;
        normals.emplace_back(std::cos(ang), std::sin(ang));
        dists.push_back(apothem);
    }
}

}  // namespace

std::vector<FaceParam> pose_to_faces(const Pose& pose, const PolytopeObstacle& obstacle,
                                     int state_dim, double inflate) {
    obstacle.validate();
    if (state_dim < 2) throw std::invalid_argument("pose_to_faces: state_dim must be >= 2");
    if (!std::isfinite(pose.x) || !std::isfinite(pose.y) || !std::isfinite(pose.heading)) {
        throw std::invalid_argument("pose_to_faces: non-finite pose");
    }

    std::vector<Eigen::Vector2d> normals;
    std::vector<double> dists;
    body_faces(obstacle, inflate, normals, dists);

    Eigen::Rotation2D<double> rot(pose.heading);
    Eigen::Vector2d center(pose.x, pose.y);

    std::vector<FaceParam> faces;
    faces.reserve(normals.size());
    for (size_t i = 0; i < normals.size(); ++i) {
        Eigen::Vector2d n = rot * normals[i];
        // outside beyond face i:  n' p >= n' c + dist  <=>  -n' p + n' c + dist <= 0
        FaceParam f;
        f.delta = Eigen::VectorXd::Zero(state_dim + 1);
        f.delta(0) = -n(0);
        f.delta(1) = -n(1);
        f.delta(state_dim) = n.dot(center) + dists[i];
        faces.push_back(std::move(f));
    }
    return faces;
}

bool point_in_polytope(const Eigen::Vector2d& point, const Pose& pose,
                       const PolytopeObstacle& obstacle, double inflate) {
    std::vector<Eigen::Vector2d> normals;
    std::vector<double> dists;
    body_faces(obstacle, inflate, normals, dists);
    Eigen::Rotation2D<double> rot(-pose.heading);
    Eigen::Vector2d local = rot * (point - Eigen::Vector2d(pose.x, pose.y));
    for (size_t i = 0; i < normals.size(); ++i) {
        if (normals[i].dot(local) > dists[i]) return false;
    }
    return true;
}

int GmmPrediction::modes(int tau, int j) const {
    return static_cast<int>(steps.at(tau).at(j).weights.size());
}

int GmmPrediction::last_t(int tau, int j) const {
    return tau + static_cast<int>(steps.at(tau).at(j).faces.size());
}

bool GmmPrediction::has(int tau, int t, int j) const {
    if (tau < 0 || tau >= num_steps()) return false;
    if (j < 0 || j >= static_cast<int>(steps[tau].size())) return false;
    return t >= tau + 1 && t <= last_t(tau, j);
}

const Gaussian& GmmPrediction::moment(int tau, int t, int j, int i, int k) const {
    if (!has(tau, t, j)) {
        throw std::out_of_range("GmmPrediction::moment: no prediction for tau=" +
                                std::to_string(tau) + " t=" + std::to_string(t) +
                                " j=" + std::to_string(j));
    }
    return steps[tau][j].faces.at(t - tau - 1).at(k).at(i);
}

double GmmPrediction::weight(int tau, int j, int k) const { return steps.at(tau).at(j).weights(k); }

int GmmPrediction::parent(int tau, int j, int k) const { return steps.at(tau).at(j).parents.at(k); }

void GmmPrediction::validate() const {
    if (state_dim < 2) throw std::invalid_argument("GmmPrediction: state_dim must be >= 2");
    for (int tau = 0; tau < num_steps(); ++tau) {
        if (static_cast<int>(steps[tau].size()) != num_obstacles()) {
            throw std::invalid_argument("GmmPrediction: obstacle count mismatch at tau=" +
                                        std::to_string(tau));
        }
        for (int j = 0; j < num_obstacles(); ++j) {
            const auto& step = steps[tau][j];
            const int k_modes = static_cast<int>(step.weights.size());
            if (k_modes < 1) throw std::invalid_argument("GmmPrediction: no modes");
            if (std::abs(step.weights.sum() - 1.0) > 1e-9 || step.weights.minCoeff() < 0.0) {
                throw std::invalid_argument("GmmPrediction: weights must be a probability vector");
            }
            if (static_cast<int>(step.parents.size()) != k_modes) {
                throw std::invalid_argument("GmmPrediction: parents length mismatch");
            }
            if (tau > 0 && k_modes > modes(tau - 1, j)) {
                throw std::invalid_argument(
                    "GmmPrediction: mode count increased at tau=" + std::to_string(tau) +
                    " (prediction modes must not increase over planning steps)");
            }
            for (const auto& per_t : step.faces) {
                if (static_cast<int>(per_t.size()) != k_modes) {
                    throw std::invalid_argument("GmmPrediction: per-mode list mismatch");
                }
                for (const auto& per_k : per_t) {
                    if (static_cast<int>(per_k.size()) != obstacles[j].face_count) {
                        throw std::invalid_argument("GmmPrediction: face count mismatch");
                    }
                    for (const auto& g : per_k) {
                        if (g.dim() != state_dim + 1) {
                            throw std::invalid_argument("GmmPrediction: face moment dimension");
                        }
                    }
                }
            }
        }
    }
}

GmmPrediction fit_prediction(const std::vector<LabeledPoseSamples>& groups,
                             const std::vector<PolytopeObstacle>& obstacles, int state_dim,
                             int horizon, double inflate) {
    if (groups.empty()) throw std::invalid_argument("fit_prediction: no sample groups");
    int max_tau = 0;
    for (const auto& g : groups) max_tau = std::max(max_tau, g.tau);

    GmmPrediction pred;
    pred.state_dim = state_dim;
    pred.horizon = horizon;
    pred.obstacles = obstacles;
    pred.steps.assign(max_tau + 1,
                      std::vector<GmmPrediction::ObstacleStep>(obstacles.size()));

    for (const auto& group : groups) {
        if (group.obstacle < 0 || group.obstacle >= static_cast<int>(obstacles.size())) {
            throw std::invalid_argument("fit_prediction: bad obstacle index");
        }
        auto& step = pred.steps[group.tau][group.obstacle];
        const auto& obstacle = obstacles[group.obstacle];
        const int n_faces = obstacle.face_count;
        if (group.samples.empty()) throw std::invalid_argument("fit_prediction: empty time list");
        const int k_modes = static_cast<int>(group.samples.front().size());

        step.faces.clear();
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(k_modes);
        for (const auto& per_t : group.samples) {
            if (static_cast<int>(per_t.size()) != k_modes) {
                throw std::invalid_argument("fit_prediction: inconsistent mode count over time");
            }
            std::vector<std::vector<Gaussian>> t_entry(k_modes);
            for (int k = 0; k < k_modes; ++k) {
                const auto& poses = per_t[k];
                if (poses.size() < 2) {
                    throw std::invalid_argument("fit_prediction: group (tau=" +
                                                std::to_string(group.tau) + ", mode=" +
                                                std::to_string(k) + ") needs at least 2 samples");
                }
                // push poses through the face map, estimate per-face moments
                std::vector<std::vector<Eigen::VectorXd>> per_face(n_faces);
                for (const auto& pose : poses) {
                    auto faces = pose_to_faces(pose, obstacle, state_dim, inflate);
                    for (int i = 0; i < n_faces; ++i) per_face[i].push_back(faces[i].delta);
                }
                t_entry[k].resize(n_faces);
                for (int i = 0; i < n_faces; ++i) {
                    const auto& xs = per_face[i];
                    Eigen::VectorXd mean = Eigen::VectorXd::Zero(state_dim + 1);
                    for (const auto& v : xs) mean += v;
                    mean /= static_cast<double>(xs.size());
                    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(state_dim + 1, state_dim + 1);
                    for (const auto& v : xs) cov += (v - mean) * (v - mean).transpose();
                    cov /= static_cast<double>(xs.size() - 1);
                    t_entry[k][i] = Gaussian(mean, make_psd(cov, 1e-6));
                }
            }
            step.faces.push_back(std::move(t_entry));
            for (int k = 0; k < k_modes; ++k) counts(k) += per_t[k].size();
        }

        if (group.weights.size() == k_modes) {
            step.weights = group.weights;
        } else {
            step.weights = counts / counts.sum();
        }
        step.parents = group.parents;
        if (static_cast<int>(step.parents.size()) != k_modes) {
            step.parents.resize(k_modes);
            for (int k = 0; k < k_modes; ++k) step.parents[k] = k;
        }
    }
    pred.validate();
    return pred;
}

std::vector<PropagationStat> propagation_stats(const GmmPrediction& pred, int t, int tau) {
    if (tau + 1 >= pred.num_steps()) {
        throw std::out_of_range("propagation_stats: no prediction at planning step tau+1");
    }
    std::vector<PropagationStat> stats;
    for (int j = 0; j < pred.num_obstacles(); ++j) {
        if (!pred.has(tau, t, j) || !pred.has(tau + 1, t, j)) {
            throw std::out_of_range("propagation_stats: missing prediction index t=" +
                                    std::to_string(t) + " tau=" + std::to_string(tau));
        }
        for (int k = 0; k < pred.modes(tau + 1, j); ++k) {
            const int kp = pred.parent(tau + 1, j, k);
            for (int i = 0; i < pred.faces_per(j); ++i) {
                const Gaussian& old_g = pred.moment(tau, t, j, i, kp);
                const Gaussian& new_g = pred.moment(tau + 1, t, j, i, k);
                PropagationStat s;
                s.t = t;
                s.tau = tau;
                s.j = j;
                s.i = i;
                s.k = k;
                s.g = std::sqrt(old_g.cov.norm()) - std::sqrt(new_g.cov.norm());
                s.h = (old_g.mean - new_g.mean).norm();
                stats.push_back(s);
            }
        }
    }
    return stats;
}

AssumptionReport check_assumption3(const GmmPrediction& pred, double eps_per_row, double tol) {
    if (!(eps_per_row > 0.0 && eps_per_row < 0.5)) {
        throw std::invalid_argument("check_assumption3: eps_per_row must lie in (0, 0.5)");
    }
    const double gamma = inverse_normal_cdf(1.0 - eps_per_row);
    AssumptionReport report;
    for (int tau = 0; tau + 1 < pred.num_steps(); ++tau) {
        for (int j = 0; j < pred.num_obstacles(); ++j) {
            // indices missing at tau+1 (end of horizon) are skipped, not extrapolated
            const int t_hi = std::min(pred.last_t(tau, j), pred.last_t(tau + 1, j));
            for (int t = tau + 2; t <= t_hi; ++t) {
                for (int k = 0; k < pred.modes(tau + 1, j); ++k) {
                    const int kp = pred.parent(tau + 1, j, k);
                    for (int i = 0; i < pred.faces_per(j); ++i) {
                        const Gaussian& old_g = pred.moment(tau, t, j, i, kp);
                        const Gaussian& new_g = pred.moment(tau + 1, t, j, i, k);
                        AssumptionCheckEntry entry;
                        entry.stat = {t, tau, j, i, k,
                                      std::sqrt(old_g.cov.norm()) - std::sqrt(new_g.cov.norm()),
                                      (old_g.mean - new_g.mean).norm()};
                        entry.gamma = gamma;
                        entry.bound = gamma * entry.stat.g;
                        entry.pass = entry.stat.h <= entry.bound + tol;
                        if (!entry.pass) {
                            report.all_pass = false;
                            report.violations++;
                        }
                        report.entries.push_back(entry);
                    }
                }
            }
        }
    }
    return report;
}

}  // namespace ccmpc
