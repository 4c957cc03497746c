#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "sparseot/cost.hpp"
#include "sparseot/point_cloud.hpp"
#include "sparseot/sinkhorn.hpp"

namespace sparseot {

/// One metric row of an experiment cell.
struct MetricRow {
    double nmse = 0.0;
    double support_error = 0.0;
    double sinkhorn_div = 0.0;
    double rbo = 0.0;
    double mean_sparsity = 0.0;
};

/// Normalized MSE: (1/(n d)) sum_i ||T*(x_i) - T(x_i)||^2.
inline double nmse(const Eigen::MatrixXd& true_images, const Eigen::MatrixXd& est_images) {
    if (true_images.rows() != est_images.rows() || true_images.cols() != est_images.cols())
        throw std::invalid_argument("nmse: shape mismatch");
    const double nd = static_cast<double>(true_images.rows() * true_images.cols());
    return (true_images - est_images).squaredNorm() / nd;
}

/// Mean over samples of the off-support displacement energy fraction
/// sum_{t > s} delta_t^2 / sum_t delta_t^2.  Rows with zero displacement are
/// skipped; an all-zero batch has no defined value.
inline double support_error(const Eigen::MatrixXd& displacements, int s) {
    const Eigen::Index n = displacements.rows(), d = displacements.cols();
    if (s < 0 || s > d) throw std::invalid_argument("support_error: s out of range");
    double acc = 0.0;
    Eigen::Index counted = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double total = displacements.row(i).squaredNorm();
        if (total == 0.0) continue;
        const double off = displacements.row(i).tail(d - s).squaredNorm();
        acc += off / total;
        ++counted;
    }
    if (counted == 0)
        throw std::runtime_error("support_error: all displacements are zero (undefined metric)");
    return acc / static_cast<double>(counted);
}

/// Dual-objective Sinkhorn value; debias = true subtracts the self-terms
/// S(X,Y) - S(X,X)/2 - S(Y,Y)/2.
inline double sinkhorn_divergence(const PointCloud& X, const PointCloud& Y,
                                  const CostModel& cost, double epsilon, bool debias,
                                  double tolerance = 1e-6, int max_iterations = 10000) {
    SolveConfig cfg;
    cfg.epsilon = epsilon;
    cfg.tolerance = tolerance;
    cfg.max_iterations = max_iterations;
    auto raw = [&](const PointCloud& A, const PointCloud& B) {
        const DualPotentials pot = solve_dual(A, B, cost, cfg);
        return A.weights.dot(pot.f) + B.weights.dot(pot.g);
    };
    const double sxy = raw(X, Y);
    if (!debias) return sxy;
    return sxy - 0.5 * raw(X, X) - 0.5 * raw(Y, Y);
}

/// Truncated rank-biased overlap at depth L = |a| = |b|:
/// (1-p) sum_{dep=1}^{L} p^{dep-1} * |prefix_a(dep) ∩ prefix_b(dep)| / dep.
inline double rbo(const std::vector<int>& ranking_a, const std::vector<int>& ranking_b,
                  double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("rbo: p must lie in (0, 1)");
    if (ranking_a.size() != ranking_b.size())
        throw std::invalid_argument("rbo: rankings must have equal length");
    const size_t L = ranking_a.size();
    std::unordered_set<int> ua(ranking_a.begin(), ranking_a.end());
    std::unordered_set<int> ub(ranking_b.begin(), ranking_b.end());
    if (ua.size() != L || ub.size() != L)
        throw std::invalid_argument("rbo: rankings must contain unique ids");

    std::unordered_set<int> seen_a, seen_b;
    double overlap = 0.0, acc = 0.0, weight = 1.0;  // weight = p^{dep-1}
    for (size_t dep = 1; dep <= L; ++dep) {
        const int xa = ranking_a[dep - 1];
        const int xb = ranking_b[dep - 1];
        if (xa == xb) {
            overlap += 1.0;
        } else {
            if (seen_b.count(xa)) overlap += 1.0;
            if (seen_a.count(xb)) overlap += 1.0;
        }
        seen_a.insert(xa);
        seen_b.insert(xb);
        acc += weight * overlap / static_cast<double>(dep);
        weight *= p;
    }
    return (1.0 - p) * acc;
}

}  // namespace sparseot
