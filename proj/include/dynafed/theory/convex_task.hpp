#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/numerics/rng.hpp"

namespace dynafed {

enum class ConvexKind { Quadratic, Logistic };

inline std::string to_string(ConvexKind k) { return k == ConvexKind::Quadratic ? "quadratic" : "logistic"; }

/// Strongly convex federated task with a known minimizer and a surrogate
/// "synthetic" objective whose gradients are biased relative to the global one.
///
/// Quadratic clients: L_m(w) = 1/2 w'A_m w - b_m'w; stochastic gradients add
/// N(0, noise_std^2) per coordinate. Surrogate: 1/2 w'A_syn w - b_syn'w.
/// Logistic clients: mean log(1 + exp(-y x'w)) + reg/2 |w|^2 over (X_m, y_m);
/// a stochastic gradient uses one uniformly drawn sample. Surrogate: same form
/// on (X_syn, y_syn).
class ConvexTask {
public:
    using Vec = Eigen::VectorXd;
    using Mat = Eigen::MatrixXd;

    ConvexKind kind = ConvexKind::Quadratic;
    std::vector<double> weights;  // alpha_m

    // quadratic
    std::vector<Mat> A;
    std::vector<Vec> b;
    double noise_std = 0.0;
    Mat A_syn;
    Vec b_syn;

    // logistic
    std::vector<Mat> X;
    std::vector<Vec> y;  // +-1
    double reg = 0.0;
    Mat X_syn;
    Vec y_syn;

    Vec w_star;
    double loss_star = 0.0;
    double mu = 0.0;
    double L_smooth = 0.0;

    std::size_t dim() const { return static_cast<std::size_t>(w_star.size()); }
    std::size_t num_clients() const { return weights.size(); }

    double client_loss(std::size_t m, const Vec& w) const {
        if (kind == ConvexKind::Quadratic) return 0.5 * w.dot(A[m] * w) - b[m].dot(w);
        return logistic_loss(X[m], y[m], w);
    }

    Vec client_grad(std::size_t m, const Vec& w) const {
        if (kind == ConvexKind::Quadratic) return A[m] * w - b[m];
        return logistic_grad(X[m], y[m], w);
    }

    Vec stochastic_client_grad(std::size_t m, const Vec& w, Rng& rng) const {
        if (kind == ConvexKind::Quadratic) return add_noise(client_grad(m, w), rng);
        return sample_grad(X[m], y[m], w, rng);
    }

    double loss(const Vec& w) const {
        double s = 0.0;
        for (std::size_t m = 0; m < num_clients(); ++m) s += weights[m] * client_loss(m, w);
        return s;
    }

    Vec grad(const Vec& w) const {
        Vec g = Vec::Zero(w.size());
        for (std::size_t m = 0; m < num_clients(); ++m) g += weights[m] * client_grad(m, w);
        return g;
    }

    Mat hessian(const Vec& w) const {
        Mat H = Mat::Zero(w.size(), w.size());
        for (std::size_t m = 0; m < num_clients(); ++m) {
            if (kind == ConvexKind::Quadratic) {
                H += weights[m] * A[m];
            } else {
                H += weights[m] * logistic_hessian(X[m], y[m], w);
            }
        }
        return H;
    }

    Vec syn_grad(const Vec& w) const {
        if (kind == ConvexKind::Quadratic) return A_syn * w - b_syn;
        return logistic_grad(X_syn, y_syn, w);
    }

    Vec stochastic_syn_grad(const Vec& w, Rng& rng) const {
        if (kind == ConvexKind::Quadratic) return add_noise(syn_grad(w), rng);
        return sample_grad(X_syn, y_syn, w, rng);
    }

    /// L(w) - L(w*). For the quadratic case this is 1/2 (w - w*)'A(w - w*), which
    /// avoids cancellation near the optimum.
    double suboptimality(const Vec& w) const {
        if (kind == ConvexKind::Quadratic) {
            const Vec e = w - w_star;
            return 0.5 * e.dot(hessian(w) * e);
        }
        return loss(w) - loss_star;
    }

private:
    Vec add_noise(Vec g, Rng& rng) const {
        if (noise_std > 0.0)
            for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += noise_std * rng.normal();
        return g;
    }

    static double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
    static double sigmoid(double z) {
        if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
        const double e = std::exp(z);
        return e / (1.0 + e);
    }

    double logistic_loss(const Mat& Xm, const Vec& ym, const Vec& w) const {
        const Vec z = Xm * w;
        double s = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) s += softplus(-ym[i] * z[i]);
        return s / static_cast<double>(z.size()) + 0.5 * reg * w.squaredNorm();
    }

    Vec logistic_grad(const Mat& Xm, const Vec& ym, const Vec& w) const {
        const Vec z = Xm * w;
        Vec coef(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) coef[i] = -ym[i] * sigmoid(-ym[i] * z[i]);
        return Xm.transpose() * coef / static_cast<double>(z.size()) + reg * w;
    }

    Mat logistic_hessian(const Mat& Xm, const Vec& ym, const Vec& w) const {
        const Vec z = Xm * w;
        Vec d(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double p = sigmoid(ym[i] * z[i]);
            d[i] = p * (1.0 - p);
        }
        Mat H = Xm.transpose() * d.asDiagonal() * Xm / static_cast<double>(z.size());
        H.diagonal().array() += reg;
        return H;
    }

    Vec sample_grad(const Mat& Xm, const Vec& ym, const Vec& w, Rng& rng) const {
        const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(Xm.rows())));
        const double z = Xm.row(i).dot(w);
        return (-ym[i] * sigmoid(-ym[i] * z)) * Xm.row(i).transpose() + reg * w;
    }
};

namespace detail {

inline Eigen::MatrixXd random_orthogonal(std::size_t d, Rng& rng) {
    Eigen::MatrixXd G(d, d);
    for (Eigen::Index i = 0; i < G.rows(); ++i)
        for (Eigen::Index j = 0; j < G.cols(); ++j) G(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    return qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
}

inline std::vector<double> uniform_weights(std::size_t M) { return std::vector<double>(M, 1.0 / double(M)); }

}  // namespace detail

struct QuadraticTaskConfig {
    std::size_t dim = 20;
    std::size_t clients = 4;
    double mu = 1.0;
    double condition = 50.0;     // L_smooth / mu
    double heterogeneity = 0.3;  // spread of client minimizers around w*
    double noise_std = 1.0;
    double bias_norm = 0.01;     // spectral norm of A_syn - A
};

/// Global curvature has eigenvalues spaced evenly in [mu, condition * mu].
/// Clients share the eigenbasis with jittered eigenvalues (jitter averages to
/// zero) and have distinct minimizers, so local steps drift apart.
inline ConvexTask make_quadratic_task(const QuadraticTaskConfig& cfg, Rng rng) {
    if (cfg.dim < 1 || cfg.clients < 1) throw ConfigError("quadratic task needs dim, clients >= 1");
    if (!(cfg.mu > 0.0) || !(cfg.condition >= 1.0)) throw ConfigError("quadratic task needs mu > 0 and condition >= 1");
    if (!(cfg.bias_norm >= 0.0 && cfg.bias_norm < cfg.mu)) throw ConfigError("bias_norm must lie in [0, mu)");
    const auto d = static_cast<Eigen::Index>(cfg.dim);
    const std::size_t M = cfg.clients;

    ConvexTask task;
    task.kind = ConvexKind::Quadratic;
    task.weights = detail::uniform_weights(M);
    task.noise_std = cfg.noise_std;

    Rng basis_rng = rng.split("basis");
    const Eigen::MatrixXd Q = detail::random_orthogonal(cfg.dim, basis_rng);
    Eigen::VectorXd lambda(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double frac = d == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(d - 1);
        lambda[i] = cfg.mu * (1.0 + (cfg.condition - 1.0) * frac);
    }

    Rng jitter_rng = rng.split("jitter");
    std::vector<Eigen::VectorXd> jitter(M, Eigen::VectorXd::Zero(d));
    if (M > 1) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        for (auto& j : jitter) {
            for (Eigen::Index i = 0; i < d; ++i) j[i] = jitter_rng.uniform(-0.3, 0.3);
            mean += j / static_cast<double>(M);
        }
        for (auto& j : jitter) j -= mean;
    }
    Rng offset_rng = rng.split("offsets");
    Eigen::VectorXd center(d);
    for (Eigen::Index i = 0; i < d; ++i) center[i] = offset_rng.normal();
    for (std::size_t m = 0; m < M; ++m) {
        const Eigen::VectorXd lam = lambda.array() * (1.0 + jitter[m].array());
        task.A.push_back(Q * lam.asDiagonal() * Q.transpose());
        Eigen::VectorXd z(d);
        for (Eigen::Index i = 0; i < d; ++i) z[i] = center[i] + cfg.heterogeneity * offset_rng.normal();
        task.b.push_back(task.A.back() * z);
    }

    const Eigen::MatrixXd H = task.hessian(Eigen::VectorXd::Zero(d));
    Eigen::VectorXd bbar = Eigen::VectorXd::Zero(d);
    for (std::size_t m = 0; m < M; ++m) bbar += task.weights[m] * task.b[m];
    task.w_star = H.ldlt().solve(bbar);
    task.loss_star = task.loss(task.w_star);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
    task.mu = eig.eigenvalues().minCoeff();
    task.L_smooth = eig.eigenvalues().maxCoeff();

    // Surrogate with the same minimizer and curvature error of norm bias_norm.
    Rng bias_rng = rng.split("bias");
    Eigen::MatrixXd E(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) E(i, j) = bias_rng.normal();
    E = 0.5 * (E + E.transpose()).eval();
    const double enorm = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(E).eigenvalues().cwiseAbs().maxCoeff();
    if (enorm > 0.0) E *= cfg.bias_norm / enorm;
    task.A_syn = H + E;
    task.b_syn = task.A_syn * task.w_star;
    return task;
}

struct LogisticTaskConfig {
    std::size_t dim = 10;
    std::size_t clients = 4;
    std::size_t samples_per_client = 200;
    double reg = 0.1;
    double heterogeneity = 1.0;  // per-client shift of the feature mean
    double syn_fraction = 0.2;   // share of pooled samples forming the surrogate set
};

/// Labels follow a logistic model with a shared true weight; client features
/// are shifted by client-specific means. w* is found by Newton's method.
inline ConvexTask make_logistic_task(const LogisticTaskConfig& cfg, Rng rng) {
    if (cfg.dim < 1 || cfg.clients < 1 || cfg.samples_per_client < 1) throw ConfigError("logistic task sizes must be >= 1");
    if (!(cfg.reg > 0.0)) throw ConfigError("logistic task needs reg > 0 for strong convexity");
    if (!(cfg.syn_fraction > 0.0 && cfg.syn_fraction <= 1.0)) throw ConfigError("syn_fraction must be in (0, 1]");
    const auto d = static_cast<Eigen::Index>(cfg.dim);
    const auto n = static_cast<Eigen::Index>(cfg.samples_per_client);

    ConvexTask task;
    task.kind = ConvexKind::Logistic;
    task.reg = cfg.reg;
    task.weights = detail::uniform_weights(cfg.clients);

    Eigen::VectorXd truth(d);
    for (Eigen::Index i = 0; i < d; ++i) truth[i] = rng.normal();
    Eigen::MatrixXd pooled(n * static_cast<Eigen::Index>(cfg.clients), d);
    Eigen::VectorXd pooled_y(pooled.rows());
    for (std::size_t m = 0; m < cfg.clients; ++m) {
        Eigen::VectorXd shift(d);
        for (Eigen::Index i = 0; i < d; ++i) shift[i] = cfg.heterogeneity * rng.normal();
        Eigen::MatrixXd Xm(n, d);
        Eigen::VectorXd ym(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index i = 0; i < d; ++i) Xm(r, i) = shift[i] + rng.normal();
            const double p = 1.0 / (1.0 + std::exp(-Xm.row(r).dot(truth)));
            ym[r] = rng.uniform() < p ? 1.0 : -1.0;
            pooled.row(static_cast<Eigen::Index>(m) * n + r) = Xm.row(r);
            pooled_y[static_cast<Eigen::Index>(m) * n + r] = ym[r];
        }
        task.X.push_back(std::move(Xm));
        task.y.push_back(std::move(ym));
    }

    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.syn_fraction * double(pooled.rows())));
    const auto pick = rng.sample_without_replacement(static_cast<std::size_t>(pooled.rows()), k);
    task.X_syn.resize(static_cast<Eigen::Index>(k), d);
    task.y_syn.resize(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
        task.X_syn.row(static_cast<Eigen::Index>(i)) = pooled.row(static_cast<Eigen::Index>(pick[i]));
        task.y_syn[static_cast<Eigen::Index>(i)] = pooled_y[static_cast<Eigen::Index>(pick[i])];
    }

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    for (int it = 0; it < 100; ++it) {
        const Eigen::VectorXd g = task.grad(w);
        if (g.norm() < 1e-14) break;
        w -= task.hessian(w).ldlt().solve(g);
    }
    task.w_star = w;
    task.loss_star = task.loss(w);
    task.mu = cfg.reg;
    // Logistic curvature is at most 1/4 per sample.
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t m = 0; m < cfg.clients; ++m)
        S += task.weights[m] * task.X[m].transpose() * task.X[m] / static_cast<double>(n);
    task.L_smooth = cfg.reg + 0.25 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().maxCoeff();
    return task;
}

}  // namespace dynafed
