#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sparseot/point_cloud.hpp"

namespace sparseot {

enum class CostFamily { SqEuclidean, ElasticL1, ElasticSTVS, ElasticKSupport };

/// Translation-invariant elastic-type ground cost h(z) = 1/2 ||z||^2 + tau(z).
/// tau is selected by `family` and scaled by `gamma`; `k` only matters for
/// the k-support family, where tau(z) = (gamma/2) * ksup_norm(z, k)^2.
struct CostModel {
    CostFamily family = CostFamily::SqEuclidean;
    double gamma = 0.0;
    int k = 1;

    CostModel() = default;
    CostModel(CostFamily fam, double g, int kk = 1) : family(fam), gamma(g), k(kk) {
        if (!(gamma >= 0.0)) throw std::invalid_argument("CostModel: gamma must be >= 0");
        if (family == CostFamily::ElasticKSupport && k < 1)
            throw std::invalid_argument("CostModel: k must be >= 1");
    }
};

namespace detail {

inline void check_finite(const Eigen::VectorXd& z, const char* what) {
    if (!z.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Magnitudes sorted in decreasing order; stable so that ties keep input order.
inline std::vector<int> sorted_abs_order(const Eigen::VectorXd& z) {
    std::vector<int> idx(static_cast<size_t>(z.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return std::abs(z[a]) > std::abs(z[b]); });
    return idx;
}

// Split index r in {0,...,k-1} for the sorted-magnitude evaluation of the
// k-overlap norm: the top k-r-1 entries form the l2 block, the tail from
// position k-r (1-based) forms the averaged l1 block.  The sandwich condition
//   |z|_{k-r-1} > T/(r+1) >= |z|_{k-r},   T = sum of the tail,
// has a unique solution; |z|_0 is treated as +inf.
inline int ksup_split(const Eigen::VectorXd& abs_sorted, int k) {
    const int d = static_cast<int>(abs_sorted.size());
    double tail = 0.0;
    for (int i = k - 1; i < d; ++i) tail += abs_sorted[i];
    for (int r = 0; r < k; ++r) {
        // tail covers 1-based positions k-r .. d
        const double mean_tail = tail / static_cast<double>(r + 1);
        const double upper = (k - r - 2 >= 0) ? abs_sorted[k - r - 2]
                                              : std::numeric_limits<double>::infinity();
        const double lower = abs_sorted[k - r - 1];
        if (upper > mean_tail && mean_tail >= lower) return r;
        if (r + 1 < k) tail += abs_sorted[k - r - 2];
    }
    return k - 1;  // unreachable in exact arithmetic
}

}  // namespace detail

/// k-overlap (k-support) norm via the sorted l2/l1 split closed form.
inline double k_support_norm(const Eigen::VectorXd& z, int k) {
    const int d = static_cast<int>(z.size());
    if (k < 1 || k > d) throw std::invalid_argument("k_support_norm: k out of range");
    detail::check_finite(z, "k_support_norm");
    Eigen::VectorXd a = z.cwiseAbs();
    std::sort(a.data(), a.data() + a.size(), std::greater<double>());
    const int r = detail::ksup_split(a, k);
    double tail = 0.0;
    for (int i = k - r - 1; i < d; ++i) tail += a[i];
    double sq = tail * tail / static_cast<double>(r + 1);
    for (int i = 0; i < k - r - 1; ++i) sq += a[i] * a[i];
    return std::sqrt(sq);
}

namespace detail {

// STVS penalty per coordinate, gamma > 0.  sigma acts on |z| so the penalty
// is even, nonnegative and zero only at z = 0.
inline double stvs_term(double z, double gamma) {
    const double s = std::asinh(std::abs(z) / (2.0 * gamma));
    return s + 0.5 - 0.5 * std::exp(-2.0 * s);
}

inline double stvs_derivative(double z, double gamma) {
    if (z == 0.0) return 0.0;  // sign(0) = 0 at the kink
    const double s = std::asinh(std::abs(z) / (2.0 * gamma));
    const double g2 = gamma * gamma;
    return sign(z) * g2 * (1.0 + std::exp(-2.0 * s)) /
           std::sqrt(4.0 * g2 + z * z);
}

}  // namespace detail

/// Value of the regularizer tau alone (h minus the quadratic part).
inline double tau_value(const CostModel& cost, const Eigen::VectorXd& z) {
    detail::check_finite(z, "tau_value");
    if (cost.gamma == 0.0 || cost.family == CostFamily::SqEuclidean) return 0.0;
    switch (cost.family) {
        case CostFamily::ElasticL1:
            return cost.gamma * z.lpNorm<1>();
        case CostFamily::ElasticSTVS: {
            double acc = 0.0;
            for (Eigen::Index t = 0; t < z.size(); ++t)
                acc += detail::stvs_term(z[t], cost.gamma);
            return cost.gamma * cost.gamma * acc;
        }
        case CostFamily::ElasticKSupport: {
            if (cost.k > z.size())
                throw std::invalid_argument("tau_value: k exceeds dimension");
            const double nv = k_support_norm(z, cost.k);
            return 0.5 * cost.gamma * nv * nv;
        }
        default:
            return 0.0;
    }
}

/// h(z) = 1/2 ||z||^2 + tau(z).
inline double h_value(const CostModel& cost, const Eigen::VectorXd& z) {
    return 0.5 * z.squaredNorm() + tau_value(cost, z);
}

/// Gradient of tau, with the sign(0) = 0 convention at kinks.
inline Eigen::VectorXd grad_tau(const CostModel& cost, const Eigen::VectorXd& z) {
    detail::check_finite(z, "grad_tau");
    const Eigen::Index d = z.size();
    if (cost.gamma == 0.0 || cost.family == CostFamily::SqEuclidean)
        return Eigen::VectorXd::Zero(d);
    Eigen::VectorXd g(d);
    switch (cost.family) {
        case CostFamily::ElasticL1:
            for (Eigen::Index t = 0; t < d; ++t) g[t] = cost.gamma * detail::sign(z[t]);
            return g;
        case CostFamily::ElasticSTVS:
            for (Eigen::Index t = 0; t < d; ++t) g[t] = detail::stvs_derivative(z[t], cost.gamma);
            return g;
        case CostFamily::ElasticKSupport: {
            if (cost.k > d) throw std::invalid_argument("grad_tau: k exceeds dimension");
            const auto order = detail::sorted_abs_order(z);
            Eigen::VectorXd abs_sorted(d);
            for (Eigen::Index i = 0; i < d; ++i) abs_sorted[i] = std::abs(z[order[static_cast<size_t>(i)]]);
            const int r = detail::ksup_split(abs_sorted, cost.k);
            double tail = 0.0;
            for (Eigen::Index i = cost.k - r - 1; i < d; ++i) tail += abs_sorted[i];
            const double shared = tail / static_cast<double>(r + 1);
            for (Eigen::Index i = 0; i < d; ++i) {
                const int t = order[static_cast<size_t>(i)];
                g[t] = (i < cost.k - r - 1) ? cost.gamma * z[t]
                                            : cost.gamma * detail::sign(z[t]) * shared;
            }
            return g;
        }
        default:
            return Eigen::VectorXd::Zero(d);
    }
}

/// Gradient of h: z + grad tau(z).
inline Eigen::VectorXd grad_h(const CostModel& cost, const Eigen::VectorXd& z) {
    return z + grad_tau(cost, z);
}

namespace detail {

// prox of (gamma/2) ||.||_ovk^2.  Candidate structure: given a split index r
// and a support cutoff l (1-based, last nonzero position in sorted order),
// the top k-r-1 entries shrink by 1/(1+gamma), the l1 block shrinks by a
// shared amount t = gamma*W/((r+1) + gamma*m), the rest is zeroed.
inline Eigen::VectorXd prox_ksup(const Eigen::VectorXd& w, double gamma, int k) {
    const int d = static_cast<int>(w.size());
    const auto order = sorted_abs_order(w);
    Eigen::VectorXd a(d);
    for (int i = 0; i < d; ++i) a[i] = std::abs(w[order[static_cast<size_t>(i)]]);
    Eigen::VectorXd prefix(d + 1);
    prefix[0] = 0.0;
    for (int i = 0; i < d; ++i) prefix[i + 1] = prefix[i] + a[i];

    auto build = [&](int r, int l) {
        // sorted-domain magnitudes of the candidate
        Eigen::VectorXd q = Eigen::VectorXd::Zero(d);
        const int first = k - r - 1;  // 0-based start of the l1 block
        const int m = l - first;      // block size
        const double W = prefix[l] - prefix[first];
        const double shrink = gamma * W / (static_cast<double>(r + 1) + gamma * m);
        for (int i = 0; i < first; ++i) q[i] = a[i] / (1.0 + gamma);
        for (int i = first; i < l; ++i) q[i] = std::max(0.0, a[i] - shrink);
        return q;
    };
    auto objective = [&](const Eigen::VectorXd& q) {
        double fit = 0.0;
        for (int i = 0; i < d; ++i) {
            const double diff = q[i] - a[i];
            fit += diff * diff;
        }
        const double nv = k_support_norm(q, k);
        return 0.5 * fit + 0.5 * gamma * nv * nv;
    };

    // Search the unique (r, l) satisfying the optimality sandwich; fall back
    // to objective comparison across all candidates near ties.
    Eigen::VectorXd best;
    double best_obj = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int r = 0; r < k; ++r) {
        const int first = k - r - 1;
        for (int l = k; l <= d; ++l) {
            const int m = l - first;
            const double W = prefix[l] - prefix[first];
            const double denom = static_cast<double>(r + 1) + gamma * m;
            const double shared = W / denom;           // value of S/(r+1)
            const double shrink = gamma * shared;      // per-entry shrink in the block
            const double upper = (first - 1 >= 0) ? a[first - 1] / (1.0 + gamma)
                                                  : std::numeric_limits<double>::infinity();
            const bool cond_r = upper >= shared && a[first] - shrink <= shared + 1e-15;
            const bool cond_lo = a[l - 1] - shrink > 0.0;
            const bool cond_hi = (l == d) || (a[l] - shrink <= 1e-15);
            if (cond_r && cond_lo && cond_hi) {
                Eigen::VectorXd q = build(r, l);
                const double obj = objective(q);
                if (obj < best_obj) {
                    best_obj = obj;
                    best = std::move(q);
                    found = true;
                }
            }
        }
    }
    if (!found) {
        // degenerate input (e.g. w = 0): exhaustive candidate scan
        for (int r = 0; r < k; ++r)
            for (int l = k; l <= d; ++l) {
                Eigen::VectorXd q = build(r, l);
                const double obj = objective(q);
                if (obj < best_obj) {
                    best_obj = obj;
                    best = std::move(q);
                }
            }
    }

    Eigen::VectorXd out(d);
    for (int i = 0; i < d; ++i) {
        const int t = order[static_cast<size_t>(i)];
        out[t] = sign(w[t]) * best[i];
    }
    return out;
}

}  // namespace detail

/// prox_tau(w) = argmin_z 1/2 ||z - w||^2 + tau(z).
inline Eigen::VectorXd prox_tau(const CostModel& cost, const Eigen::VectorXd& w) {
    detail::check_finite(w, "prox_tau");
    const Eigen::Index d = w.size();
    if (cost.gamma == 0.0 || cost.family == CostFamily::SqEuclidean) return w;
    Eigen::VectorXd out(d);
    switch (cost.family) {
        case CostFamily::ElasticL1:
            for (Eigen::Index t = 0; t < d; ++t) {
                const double aw = std::abs(w[t]);
                out[t] = (aw <= cost.gamma) ? 0.0 : (1.0 - cost.gamma / aw) * w[t];
            }
            return out;
        case CostFamily::ElasticSTVS:
            for (Eigen::Index t = 0; t < d; ++t) {
                const double aw = std::abs(w[t]);
                out[t] = (aw <= cost.gamma) ? 0.0
                                            : (1.0 - cost.gamma * cost.gamma / (w[t] * w[t])) * w[t];
            }
            return out;
        case CostFamily::ElasticKSupport:
            if (cost.k > d) throw std::invalid_argument("prox_tau: k exceeds dimension");
            return detail::prox_ksup(w, cost.gamma, cost.k);
        default:
            return w;
    }
}

/// Pairwise ground-cost matrix C_ij = h(x_i - y_j).
inline Eigen::MatrixXd cost_matrix(const PointCloud& X, const PointCloud& Y,
                                   const CostModel& cost) {
    if (X.dim() != Y.dim())
        throw std::invalid_argument("cost_matrix: dimension mismatch");
    const Eigen::Index n = X.size(), m = Y.size();
    Eigen::MatrixXd C(n, m);
    if (cost.family == CostFamily::SqEuclidean || cost.gamma == 0.0) {
        const Eigen::VectorXd xs = X.points.rowwise().squaredNorm();
        const Eigen::VectorXd ys = Y.points.rowwise().squaredNorm();
        C.noalias() = -X.points * Y.points.transpose();
        C.colwise() += 0.5 * xs;
        C.rowwise() += 0.5 * ys.transpose();
        C = C.cwiseMax(0.0);
        return C;
    }
    Eigen::VectorXd z(X.dim());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
            z = X.points.row(i) - Y.points.row(j);
            C(i, j) = h_value(cost, z);
        }
    return C;
}

}  // namespace sparseot
