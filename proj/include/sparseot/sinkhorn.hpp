#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sparseot/cost.hpp"
#include "sparseot/point_cloud.hpp"

namespace sparseot {

/// Discrete optimal dual vectors of the entropy-regularized problem,
/// gauge-fixed so that the X-weighted mean of f is zero.
struct DualPotentials {
    Eigen::VectorXd f;
    Eigen::VectorXd g;
    double epsilon = 0.0;
    int iterations = 0;
    double marginal_error = 0.0;          // L-inf marginal violation at exit
    std::vector<double> objective_trace;  // dual objective after each iteration

    bool converged(double tolerance) const { return marginal_error <= tolerance; }
};

struct SolveConfig {
    double epsilon = 0.0;           // > 0: use directly; otherwise apply the fraction rule
    double epsilon_fraction = 0.1;  // fraction of the mean cost
    double tolerance = 1e-6;        // L-inf marginal violation
    int max_iterations = 10000;

    void validate() const {
        if (!(tolerance > 0.0)) throw std::invalid_argument("SolveConfig: tolerance must be > 0");
        if (max_iterations < 1) throw std::invalid_argument("SolveConfig: max_iterations must be >= 1");
        if (epsilon <= 0.0 && !(epsilon_fraction > 0.0 && epsilon_fraction <= 1.0))
            throw std::invalid_argument("SolveConfig: epsilon_fraction must lie in (0, 1]");
    }
};

/// epsilon = fraction * mean(C).
inline double epsilon_from_cost(const Eigen::MatrixXd& C, double fraction) {
    if (C.size() == 0) throw std::invalid_argument("epsilon_from_cost: empty cost matrix");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("epsilon_from_cost: fraction must lie in (0, 1]");
    if (!C.allFinite()) throw std::invalid_argument("epsilon_from_cost: non-finite cost");
    const double mean = C.mean();
    if (mean <= 0.0)
        throw std::runtime_error("epsilon_from_cost: degenerate (all-zero) cost matrix");
    return fraction * mean;
}

namespace detail {

inline Eigen::VectorXd lse_rows(const Eigen::MatrixXd& A) {
    Eigen::VectorXd mx = A.rowwise().maxCoeff();
    Eigen::VectorXd out =
        ((A.colwise() - mx).array().exp().rowwise().sum()).log().matrix() + mx;
    return out;
}

}  // namespace detail

/// Log-domain Sinkhorn on a precomputed cost matrix.
inline DualPotentials solve_dual(const Eigen::MatrixXd& C, const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b, const SolveConfig& config) {
    config.validate();
    const Eigen::Index n = C.rows(), m = C.cols();
    if (a.size() != n || b.size() != m)
        throw std::invalid_argument("solve_dual: weight/cost shape mismatch");
    const double eps =
        config.epsilon > 0.0 ? config.epsilon : epsilon_from_cost(C, config.epsilon_fraction);

    const Eigen::VectorXd loga = a.array().log();
    const Eigen::VectorXd logb = b.array().log();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m);

    DualPotentials result;
    result.epsilon = eps;
    result.objective_trace.reserve(64);

    Eigen::MatrixXd A(n, m);
    double err = std::numeric_limits<double>::infinity();
    int it = 0;
    while (it < config.max_iterations) {
        ++it;
        // f_i <- -eps * lse_j(log b_j + (g_j - C_ij)/eps)
        A = (-C).rowwise() + g.transpose();
        A /= eps;
        A.rowwise() += logb.transpose();
        f = -eps * detail::lse_rows(A);

        // g_j <- -eps * lse_i(log a_i + (f_i - C_ij)/eps)
        A = (-C).colwise() + f;
        A /= eps;
        A.colwise() += loga;
        g = -eps * detail::lse_rows(A.transpose());

        if (!f.allFinite() || !g.allFinite())
            throw std::runtime_error("solve_dual: numeric failure (non-finite potential)");

        // after the g-update the KL term of the dual vanishes
        result.objective_trace.push_back(a.dot(f) + b.dot(g));

        // marginals of the implied coupling P_ij = a_i b_j exp((f_i+g_j-C_ij)/eps)
        A = ((-C).colwise() + f).rowwise() + g.transpose();
        A /= eps;
        A.colwise() += loga;
        A.rowwise() += logb.transpose();
        const Eigen::MatrixXd P = A.array().exp();
        const double row_err = (P.rowwise().sum() - a).cwiseAbs().maxCoeff();
        const double col_err = (P.colwise().sum().transpose() - b).cwiseAbs().maxCoeff();
        err = std::max(row_err, col_err);
        if (err <= config.tolerance) break;
    }

    // gauge fixing: potentials are defined up to an additive split
    const double shift = a.dot(f);
    f.array() -= shift;
    g.array() += shift;

    result.f = std::move(f);
    result.g = std::move(g);
    result.iterations = it;
    result.marginal_error = err;
    return result;
}

inline DualPotentials solve_dual(const PointCloud& X, const PointCloud& Y,
                                 const CostModel& cost, const SolveConfig& config) {
    const Eigen::MatrixXd C = cost_matrix(X, Y, cost);
    return solve_dual(C, X.weights, Y.weights, config);
}

/// Implied coupling at given potentials (diagnostics / tests only).
inline Eigen::MatrixXd implied_coupling(const Eigen::MatrixXd& C, const Eigen::VectorXd& a,
                                        const Eigen::VectorXd& b, const DualPotentials& pot) {
    Eigen::MatrixXd A = ((-C).colwise() + pot.f).rowwise() + pot.g.transpose();
    A /= pot.epsilon;
    A.colwise() += a.array().log().matrix();
    A.rowwise() += b.array().log().matrix().transpose();
    return A.array().exp();
}

}  // namespace sparseot
