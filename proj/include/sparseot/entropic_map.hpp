#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sparseot/cost.hpp"
#include "sparseot/point_cloud.hpp"
#include "sparseot/sinkhorn.hpp"

namespace sparseot {

enum class MapDirection { Forward, Reverse };

/// Gibbs distribution over the target atoms for a given query point.
struct GibbsWeights {
    Eigen::VectorXd values;  // on the simplex
};

struct DisplacementReport {
    Eigen::VectorXd input;
    Eigen::VectorXd output;
    Eigen::VectorXd displacement;  // output - input
    std::vector<int> active_set;   // coordinates with |displacement| > threshold
    double sparsity = 0.0;         // fraction of inactive coordinates
};

/// A solved transport map: cost, target cloud and the dual potential over the
/// target atoms.  Forward maps use g* and target Y; reverse maps use f* and
/// target X.
struct FittedMap {
    CostModel cost;
    PointCloud target;
    Eigen::VectorXd potential;  // one entry per target atom
    double epsilon = 0.0;
    MapDirection direction = MapDirection::Forward;

    static FittedMap fit(const CostModel& cost, const PointCloud& X, const PointCloud& Y,
                         const DualPotentials& pot,
                         MapDirection dir = MapDirection::Forward) {
        FittedMap map;
        map.cost = cost;
        map.epsilon = pot.epsilon;
        map.direction = dir;
        if (dir == MapDirection::Forward) {
            map.target = Y;
            map.potential = pot.g;
        } else {
            map.target = X;
            map.potential = pot.f;
        }
        return map;
    }
};

namespace detail {

// u_j = h(x - y_j) - potential_j for every target atom.
inline Eigen::VectorXd score_vector(const FittedMap& map, const Eigen::VectorXd& x) {
    if (x.size() != map.target.dim())
        throw std::invalid_argument("FittedMap: query dimension mismatch");
    check_finite(x, "FittedMap query");
    const Eigen::Index m = map.target.size();
    Eigen::VectorXd u(m);
    Eigen::VectorXd z(x.size());
    for (Eigen::Index j = 0; j < m; ++j) {
        z = x - map.target.points.row(j).transpose();
        u[j] = h_value(map.cost, z) - map.potential[j];
    }
    return u;
}

}  // namespace detail

/// Extended dual potential f_eps(x) = lse_eps([h(x - y_j) - g*_j]_j), with
/// lse_eps(u) = -eps log sum_j b_j exp(-u_j/eps), max-subtracted.
inline double extend_potential(const FittedMap& map, const Eigen::VectorXd& x) {
    const Eigen::VectorXd u = detail::score_vector(map, x);
    const Eigen::VectorXd logw = map.target.weights.array().log();
    Eigen::VectorXd e = logw - u / map.epsilon;
    const double mx = e.maxCoeff();
    return -map.epsilon * (std::log((e.array() - mx).exp().sum()) + mx);
}

/// x-varying Gibbs distribution p_j(x) over the target atoms.
inline GibbsWeights gibbs_weights(const FittedMap& map, const Eigen::VectorXd& x) {
    const Eigen::VectorXd u = detail::score_vector(map, x);
    const Eigen::VectorXd logw = map.target.weights.array().log();
    Eigen::VectorXd e = logw - u / map.epsilon;
    const double mx = e.maxCoeff();
    Eigen::VectorXd p = (e.array() - mx).exp();
    p /= p.sum();
    return GibbsWeights{std::move(p)};
}

/// Gradient of the extended potential: sum_j p_j(x) grad_h(x - y_j).
inline Eigen::VectorXd grad_f_eps(const FittedMap& map, const Eigen::VectorXd& x) {
    const GibbsWeights p = gibbs_weights(map, x);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd z(x.size());
    for (Eigen::Index j = 0; j < map.target.size(); ++j) {
        z = x - map.target.points.row(j).transpose();
        acc += p.values[j] * grad_h(map.cost, z);
    }
    return acc;
}

/// Weighted Bregman centroid of the divergence generated by h:
/// prox_tau(sum_j p_j (z_j + grad_tau(z_j))).
inline Eigen::VectorXd bregman_centroid(const CostModel& cost,
                                        const std::vector<Eigen::VectorXd>& points,
                                        const Eigen::VectorXd& weights) {
    if (points.empty()) throw std::invalid_argument("bregman_centroid: no points");
    if (weights.size() != static_cast<Eigen::Index>(points.size()))
        throw std::invalid_argument("bregman_centroid: weight count mismatch");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(points.front().size());
    for (size_t j = 0; j < points.size(); ++j)
        acc += weights[static_cast<Eigen::Index>(j)] * grad_h(cost, points[j]);
    return prox_tau(cost, acc);
}

/// Entropic transport in prox form: T(x) = x - prox_tau(grad_f_eps(x)).
/// The displacement x - T(x) is the Bregman centroid of the x - y_j under
/// the Gibbs weights.
inline DisplacementReport transport(const FittedMap& map, const Eigen::VectorXd& x,
                                    double active_threshold = 1e-8) {
    const GibbsWeights p = gibbs_weights(map, x);
    // arg = sum_j p_j grad_h(x - y_j), the Gibbs average of Bregman gradients
    Eigen::VectorXd arg = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd z(x.size());
    for (Eigen::Index j = 0; j < map.target.size(); ++j) {
        z = x - map.target.points.row(j).transpose();
        arg += p.values[j] * grad_h(map.cost, z);
    }
    DisplacementReport report;
    report.input = x;
    report.output = x - prox_tau(map.cost, arg);
    report.displacement = report.output - report.input;
    for (Eigen::Index t = 0; t < x.size(); ++t)
        if (std::abs(report.displacement[t]) > active_threshold)
            report.active_set.push_back(static_cast<int>(t));
    report.sparsity =
        1.0 - static_cast<double>(report.active_set.size()) / static_cast<double>(x.size());
    return report;
}

/// One step of descent in the Bregman geometry of h:
/// x+ = prox_tau((1-lambda) grad_h(x) + lambda grad_h(T(x))).
inline Eigen::VectorXd bregman_descent_step(const FittedMap& map, const Eigen::VectorXd& x,
                                            double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw std::invalid_argument("bregman_descent_step: lambda must lie in [0, 1]");
    if (lambda == 0.0) return x;
    const Eigen::VectorXd target_point = x - prox_tau(map.cost, grad_f_eps(map, x));
    return prox_tau(map.cost,
                    (1.0 - lambda) * grad_h(map.cost, x) + lambda * grad_h(map.cost, target_point));
}

/// Plain potential-gradient step x - lambda grad f_eps(x).
inline Eigen::VectorXd wc_gradient_step(const FittedMap& map, const Eigen::VectorXd& x,
                                        double lambda) {
    if (lambda == 0.0) return x;
    return x - lambda * grad_f_eps(map, x);
}

}  // namespace sparseot
