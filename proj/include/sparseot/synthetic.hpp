#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>

#include "sparseot/point_cloud.hpp"

namespace sparseot {

enum class SparsityPattern { Constant, Adaptive };

struct SyntheticSpec {
    int n = 0;
    int d = 0;
    int s = 0;
    SparsityPattern pattern = SparsityPattern::Constant;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 1 || d < 1) throw std::invalid_argument("SyntheticSpec: n, d must be >= 1");
        if (pattern == SparsityPattern::Constant) {
            if (s < 1 || s > d) throw std::invalid_argument("SyntheticSpec: need 1 <= s <= d");
        } else {
            if (s < 1 || 2 * s > d)
                throw std::invalid_argument("SyntheticSpec: adaptive pattern needs 1 <= s <= d/2");
        }
    }
};

/// n i.i.d. uniform-[0,1]^d points, uniform weights.  mt19937_64 with the
/// top-53-bit mapping, so output is identical across platforms.
inline PointCloud sample_uniform_cube(int n, int d, std::uint64_t seed) {
    if (n < 1 || d < 1) throw std::invalid_argument("sample_uniform_cube: n, d must be >= 1");
    std::mt19937_64 eng(seed);
    Eigen::MatrixXd pts(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            pts(i, j) = static_cast<double>(eng() >> 11) * 0x1.0p-53;
    return PointCloud(std::move(pts));
}

/// Constant-pattern ground truth: exponentiate exactly the first s coordinates.
inline Eigen::VectorXd apply_constant_map(const Eigen::VectorXd& x, int s) {
    if (s < 1 || s > x.size()) throw std::invalid_argument("apply_constant_map: s out of range");
    Eigen::VectorXd y = x;
    y.head(s) = x.head(s).array().exp();
    return y;
}

/// Adaptive ground truth: exponentiate whichever of the two leading
/// s-coordinate groups has the larger squared norm (ties go to group 2).
inline Eigen::VectorXd apply_adaptive_map(const Eigen::VectorXd& x, int s) {
    if (s < 1 || 2 * s > x.size())
        throw std::invalid_argument("apply_adaptive_map: need 1 <= s <= d/2");
    const double n1 = x.head(s).squaredNorm();
    const double n2 = x.segment(s, s).squaredNorm();
    Eigen::VectorXd y = x;
    if (n1 > n2)
        y.head(s) = x.head(s).array().exp();
    else
        y.segment(s, s) = x.segment(s, s).array().exp();
    return y;
}

struct Benchmark {
    PointCloud source;
    PointCloud target;
    SyntheticSpec spec;

    /// Ground-truth map, usable on arbitrary points.
    Eigen::VectorXd truth(const Eigen::VectorXd& x) const {
        return spec.pattern == SparsityPattern::Constant ? apply_constant_map(x, spec.s)
                                                         : apply_adaptive_map(x, spec.s);
    }

    Eigen::MatrixXd truth_images(const Eigen::MatrixXd& xs) const {
        Eigen::MatrixXd out(xs.rows(), xs.cols());
        for (Eigen::Index i = 0; i < xs.rows(); ++i)
            out.row(i) = truth(xs.row(i).transpose()).transpose();
        return out;
    }
};

/// Source = n samples of mu; target = the ground-truth map applied to an
/// independent fresh batch.  Sub-seeds are seed^1 and seed^2.
inline Benchmark make_benchmark(const SyntheticSpec& spec) {
    spec.validate();
    Benchmark bench;
    bench.spec = spec;
    bench.source = sample_uniform_cube(spec.n, spec.d, spec.seed ^ 1ULL);
    PointCloud fresh = sample_uniform_cube(spec.n, spec.d, spec.seed ^ 2ULL);
    Eigen::MatrixXd mapped(spec.n, spec.d);
    for (int i = 0; i < spec.n; ++i)
        mapped.row(i) = bench.truth(fresh.points.row(i).transpose()).transpose();
    bench.target = PointCloud(std::move(mapped));
    return bench;
}

}  // namespace sparseot
