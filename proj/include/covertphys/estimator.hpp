#ifndef COVERTPHYS_ESTIMATOR_HPP
#define COVERTPHYS_ESTIMATOR_HPP

#include <Eigen/Dense>
#include <functional>
#include <utility>

#include "covertphys/common.hpp"
#include "covertphys/plant.hpp"

namespace covertphys {

struct GaussianBelief {
    VectorXd mean;
    MatrixXd cov;
    double t = 0.0;
};

struct Innovation {
    VectorXd r;  // z - H mean (angle rows wrapped)
    MatrixXd S;  // H cov H^T + R
    double t = 0.0;

    double nis() const { return r.dot(S.ldlt().solve(r)); }
};

/// Symmetrize and clamp small negative eigenvalues (tolerance -1e-9).
inline MatrixXd make_psd(const MatrixXd& M) {
    MatrixXd sym = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
    double mineig = es.eigenvalues().minCoeff();
    if (mineig >= 0.0) return sym;
    if (mineig < -1e-9)
        throw NumericError("covariance lost positive semi-definiteness (min eig " +
                           std::to_string(mineig) + ")");
    VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
}

inline GaussianBelief kf_predict(const GaussianBelief& belief, const LinearSystemModel& model,
                                 const VectorXd& u) {
    if (belief.mean.size() != model.n())
        throw ConfigError("kf_predict: belief dimension mismatch");
    if (u.size() != model.p()) throw ConfigError("kf_predict: input dimension mismatch");
    GaussianBelief out;
    out.mean = model.A * belief.mean + model.B * u;
    for (int idx : model.state_angle_indices) out.mean[idx] = wrap_angle(out.mean[idx]);
    out.cov = make_psd(model.A * belief.cov * model.A.transpose() + model.process_noise_cov());
    out.t = belief.t + model.dt;
    return out;
}

inline std::pair<GaussianBelief, Innovation> kf_update(const GaussianBelief& belief,
                                                       const LinearSystemModel& model,
                                                       const VectorXd& z) {
    if (z.size() != model.q()) throw ConfigError("kf_update: measurement dimension mismatch");
    Innovation innov;
    innov.t = belief.t;
    innov.r = z - model.H * belief.mean;
    for (int idx : model.meas_angle_indices) innov.r[idx] = wrap_angle(innov.r[idx]);
    innov.S = model.H * belief.cov * model.H.transpose() + model.R;

    Eigen::FullPivLU<MatrixXd> lu(innov.S);
    if (!lu.isInvertible())
        throw NumericError("kf_update: singular innovation covariance (check R)");
    MatrixXd K = belief.cov * model.H.transpose() * lu.inverse();

    GaussianBelief post;
    post.t = belief.t;
    post.mean = belief.mean + K * innov.r;
    for (int idx : model.state_angle_indices) post.mean[idx] = wrap_angle(post.mean[idx]);
    post.cov = make_psd(belief.cov - K * model.H * belief.cov);
    return {post, innov};
}

/// Numerically linearize a step function x' = f(x, u) about (x_eq, u_eq) via
/// central differences. G, Q, R, dt and angle bookkeeping come from the
/// caller's prototype model.
inline LinearSystemModel linearize(
    const std::function<VectorXd(const VectorXd&, const VectorXd&)>& f,
    const VectorXd& x_eq, const VectorXd& u_eq, const LinearSystemModel& proto) {
    const double h = 1e-5;
    const int n = static_cast<int>(x_eq.size());
    const int p = static_cast<int>(u_eq.size());
    LinearSystemModel out = proto;
    out.A = MatrixXd(n, n);
    out.B = MatrixXd(n, p);
    for (int j = 0; j < n; ++j) {
        VectorXd xp = x_eq, xm = x_eq;
        xp[j] += h;
        xm[j] -= h;
        out.A.col(j) = (f(xp, u_eq) - f(xm, u_eq)) / (2.0 * h);
    }
    for (int j = 0; j < p; ++j) {
        VectorXd up = u_eq, um = u_eq;
        up[j] += h;
        um[j] -= h;
        out.B.col(j) = (f(x_eq, up) - f(x_eq, um)) / (2.0 * h);
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (!std::isfinite(out.A(i, j)))
                throw NumericError("linearize: non-finite Jacobian entry A(" +
                                   std::to_string(i) + "," + std::to_string(j) + ")");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j)
            if (!std::isfinite(out.B(i, j)))
                throw NumericError("linearize: non-finite Jacobian entry B(" +
                                   std::to_string(i) + "," + std::to_string(j) + ")");
    return out;
}

}  // namespace covertphys

#endif
