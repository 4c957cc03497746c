#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>

namespace sparseot {

/// An empirical measure: n points in R^d with probability weights.
/// Weights default to uniform 1/n.
struct PointCloud {
    Eigen::MatrixXd points;   // n x d
    Eigen::VectorXd weights;  // n, strictly positive, sums to 1

    PointCloud() = default;

    explicit PointCloud(Eigen::MatrixXd pts)
        : points(std::move(pts)),
          weights(Eigen::VectorXd::Constant(points.rows(), 1.0 / static_cast<double>(points.rows()))) {
        validate();
    }

    PointCloud(Eigen::MatrixXd pts, Eigen::VectorXd w)
        : points(std::move(pts)), weights(std::move(w)) {
        validate();
    }

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }

    void validate() const {
        if (points.rows() == 0) throw std::invalid_argument("PointCloud: empty point set");
        if (!points.allFinite()) throw std::invalid_argument("PointCloud: non-finite coordinate");
        if (weights.size() != points.rows())
            throw std::invalid_argument("PointCloud: weight/point count mismatch");
        if ((weights.array() <= 0.0).any())
            throw std::invalid_argument("PointCloud: weights must be strictly positive");
        if (std::abs(weights.sum() - 1.0) > 1e-12)
            throw std::invalid_argument("PointCloud: weights must sum to 1");
    }
};

}  // namespace sparseot
