#ifndef COVERTPHYS_PLANT_HPP
#define COVERTPHYS_PLANT_HPP

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "covertphys/common.hpp"

namespace covertphys {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

/// Time-invariant discrete linear stochastic system
///   x' = A x + B u + G w,  w ~ N(0, Q)
///   z  = H x + v,          v ~ N(0, R)
struct LinearSystemModel {
    MatrixXd A;  // n x n
    MatrixXd B;  // n x p
    MatrixXd G;  // n x r
    MatrixXd H;  // q x n
    MatrixXd Q;  // r x r
    MatrixXd R;  // q x q
    double dt = 0.0;
    std::vector<int> state_angle_indices;  // wrapped to (-pi, pi]
    std::vector<int> meas_angle_indices;

    int n() const { return static_cast<int>(A.rows()); }
    int p() const { return static_cast<int>(B.cols()); }
    int r() const { return static_cast<int>(G.cols()); }
    int q() const { return static_cast<int>(H.rows()); }

    void validate() const {
        if (dt <= 0.0) throw ConfigError("model.dt must be > 0");
        if (A.rows() != A.cols()) throw ConfigError("model.A must be square");
        if (B.rows() != A.rows()) throw ConfigError("model.B row count mismatch");
        if (G.rows() != A.rows()) throw ConfigError("model.G row count mismatch");
        if (H.cols() != A.rows()) throw ConfigError("model.H column count mismatch");
        if (Q.rows() != G.cols() || Q.cols() != G.cols())
            throw ConfigError("model.Q must be r x r");
        if (R.rows() != H.rows() || R.cols() != H.rows())
            throw ConfigError("model.R must be q x q");
        check_psd(Q, "Q", false);
        check_psd(R, "R", true);
    }

    MatrixXd process_noise_cov() const { return G * Q * G.transpose(); }

private:
    static void check_psd(const MatrixXd& M, const std::string& name, bool strict) {
        if (!M.isApprox(M.transpose(), 1e-9))
            throw ConfigError("model." + name + " must be symmetric");
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
        double mineig = M.size() ? es.eigenvalues().minCoeff() : 0.0;
        if (mineig < -1e-12)
            throw ConfigError("model." + name + " must be positive semi-definite");
        if (strict && mineig <= 0.0)
            throw ConfigError("model." + name + " must be positive definite");
    }
};

struct PlantState {
    VectorXd x;
    double t = 0.0;
};

/// Sample N(0, C) for symmetric PSD C (eigendecomposition square root, so
/// rank-deficient covariances are fine).
inline VectorXd sample_gaussian(const MatrixXd& C, Rng& rng) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(C);
    VectorXd z(C.rows());
    for (int i = 0; i < z.size(); ++i) z[i] = rng.gaussian();
    VectorXd scale = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * scale.asDiagonal() * z;
}

inline void check_finite(const VectorXd& v, const std::string& what) {
    for (int i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]))
            throw NumericError("non-finite value in " + what + " component " +
                               std::to_string(i));
}

inline PlantState step_linear(const LinearSystemModel& model, const PlantState& state,
                              const VectorXd& u, Rng& rng) {
    if (state.x.size() != model.n())
        throw ConfigError("step_linear: state dimension mismatch");
    if (u.size() != model.p()) throw ConfigError("step_linear: input dimension mismatch");
    PlantState next;
    next.x = model.A * state.x + model.B * u;
    if (model.Q.size() > 0 && !model.Q.isZero(0.0))
        next.x += model.G * sample_gaussian(model.Q, rng);
    for (int idx : model.state_angle_indices) next.x[idx] = wrap_angle(next.x[idx]);
    next.t = state.t + model.dt;
    check_finite(next.x, "state");
    return next;
}

inline VectorXd measure(const LinearSystemModel& model, const PlantState& state, Rng& rng) {
    if (state.x.size() != model.n())
        throw ConfigError("measure: state dimension mismatch");
    VectorXd z = model.H * state.x;
    if (model.R.size() > 0 && !model.R.isZero(0.0)) z += sample_gaussian(model.R, rng);
    for (int idx : model.meas_angle_indices) z[idx] = wrap_angle(z[idx]);
    check_finite(z, "measurement");
    return z;
}

// ---------------------------------------------------------------------------
// Two-link planar arm

struct ArmGeometry {
    double l1 = 0.135;  // m
    double l2 = 0.147;  // m
    double step_quantum = deg2rad(1.8);  // smallest joint motion (rad)

    void validate() const {
        if (l1 <= 0.0 || l2 <= 0.0) throw ConfigError("arm link lengths must be > 0");
        if (step_quantum <= 0.0) throw ConfigError("arm step_quantum must be > 0");
    }
};

/// Elbow joint and end-effector XY from the two joint angles.
inline std::pair<Vector2d, Vector2d> arm_forward_kinematics(const ArmGeometry& geom,
                                                            double theta1, double theta2) {
    if (!std::isfinite(theta1) || !std::isfinite(theta2))
        throw NumericError("arm_forward_kinematics: non-finite joint angle");
    Vector2d joint(geom.l1 * std::cos(theta1), geom.l1 * std::sin(theta1));
    Vector2d effector = joint + Vector2d(geom.l2 * std::cos(theta1 + theta2),
                                         geom.l2 * std::sin(theta1 + theta2));
    return {joint, effector};
}

/// Round to the nearest stepper-motor step.
inline double quantize_to_step(double angle, double quantum) {
    return quantum * std::round(angle / quantum);
}

// ---------------------------------------------------------------------------
// Quadrotor: per-axis double integrator, state [x y z psi vx vy vz psidot].
// Position loops use full reference feedforward with velocity-error damping;
// the yaw loop damps the absolute (gyro) rate, so a ramped yaw reference is
// tracked with a steady lag of kd_yaw * rate / kp_yaw.

struct DroneParams {
    double kp = 6.0;        // 1/s^2
    double kd = 4.0;        // 1/s
    double kp_yaw = 900.0;  // 1/s^2
    double kd_yaw = 60.0;   // 1/s
    double hover_alt = 0.5;      // m
    double circle_radius = 1.0;  // m
    double circle_period = 10.0; // s

    void validate(double dt) const {
        if (kp <= 0 || kd <= 0 || kp_yaw <= 0 || kd_yaw <= 0)
            throw ConfigError("drone gains must be > 0");
        if (hover_alt <= 0 || circle_radius <= 0 || circle_period <= 0)
            throw ConfigError("drone scenario geometry must be > 0");
        if (axis_spectral_radius(kp, kd, dt) >= 1.0)
            throw ConfigError("drone position loop unstable at dt=" + std::to_string(dt));
        if (axis_spectral_radius(kp_yaw, kd_yaw, dt) >= 1.0)
            throw ConfigError("drone yaw loop unstable at dt=" + std::to_string(dt));
    }

    static double axis_spectral_radius(double kp, double kd, double dt) {
        Eigen::Matrix2d Acl;
        Acl << 1.0, dt, -kp * dt, 1.0 - kd * dt;
        return Acl.eigenvalues().cwiseAbs().maxCoeff();
    }
};

/// Reference for one control step: position + yaw, with trajectory
/// derivatives for feedforward.
struct DroneSetpoint {
    Eigen::Vector3d pos = Eigen::Vector3d::Zero();
    Eigen::Vector3d vel = Eigen::Vector3d::Zero();
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    double yaw = 0.0;
};

/// Open-loop drone model (inputs are commanded accelerations). Process noise
/// enters the velocity states; measurements are pose (x y z psi).
inline LinearSystemModel drone_model(const Eigen::Vector4d& q_diag,
                                     const Eigen::Vector4d& r_diag, double dt) {
    LinearSystemModel m;
    m.dt = dt;
    m.A = MatrixXd::Identity(8, 8);
    m.A.block(0, 4, 4, 4) = dt * MatrixXd::Identity(4, 4);
    m.B = MatrixXd::Zero(8, 4);
    m.B.block(4, 0, 4, 4) = dt * MatrixXd::Identity(4, 4);
    m.G = MatrixXd::Zero(8, 4);
    m.G.block(4, 0, 4, 4) = MatrixXd::Identity(4, 4);
    m.H = MatrixXd::Zero(4, 8);
    m.H.block(0, 0, 4, 4) = MatrixXd::Identity(4, 4);
    m.Q = q_diag.asDiagonal();
    m.R = r_diag.asDiagonal();
    m.state_angle_indices = {3};
    m.meas_angle_indices = {3};
    m.validate();
    return m;
}

/// PD + feedforward control law; shared by the true plant and the defender's
/// closed-loop model so that baseline innovations stay white.
inline Eigen::Vector4d drone_control(const DroneParams& p, const VectorXd& x,
                                     const DroneSetpoint& sp) {
    Eigen::Vector4d u;
    for (int i = 0; i < 3; ++i)
        u[i] = sp.acc[i] + p.kp * (sp.pos[i] - x[i]) + p.kd * (sp.vel[i] - x[4 + i]);
    u[3] = p.kp_yaw * ang_diff(sp.yaw, x[3]) - p.kd_yaw * x[7];
    return u;
}

inline PlantState drone_step(const DroneParams& p, const LinearSystemModel& model,
                             const PlantState& state, const DroneSetpoint& sp, Rng& rng) {
    return step_linear(model, state, drone_control(p, state.x, sp), rng);
}

/// Closed-loop matrices A_cl = A - B K for the defender's Kalman filter. The
/// reference enters through drone_control, which the filter re-evaluates at
/// its own mean, so only the state-feedback part is folded in here.
inline MatrixXd drone_closed_loop_A(const DroneParams& p, const LinearSystemModel& m) {
    MatrixXd K = MatrixXd::Zero(4, 8);
    for (int i = 0; i < 3; ++i) {
        K(i, i) = p.kp;
        K(i, 4 + i) = p.kd;
    }
    K(3, 3) = p.kp_yaw;
    K(3, 7) = p.kd_yaw;
    return m.A - m.B * K;
}

}  // namespace covertphys

#endif
