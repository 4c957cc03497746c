#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "sparseot/entropic_map.hpp"
#include "sparseot/synthetic.hpp"

using namespace sparseot;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

FittedMap fit_fixture(const CostModel& cost, const PointCloud& X, const PointCloud& Y,
                      double epsilon = 0.0, double tol = 1e-8) {
    SolveConfig cfg;
    cfg.epsilon = epsilon;
    cfg.tolerance = tol;
    const DualPotentials pot = solve_dual(X, Y, cost, cfg);
    return FittedMap::fit(cost, X, Y, pot);
}

FittedMap synthetic_map(const CostModel& cost, int n = 24, int d = 3, double epsilon = 0.0) {
    const PointCloud X = sample_uniform_cube(n, d, 100);
    const PointCloud Y = sample_uniform_cube(n, d, 101);
    return fit_fixture(cost, X, Y, epsilon);
}

FittedMap single_target_map(const CostModel& cost, const VectorXd& y, double epsilon,
                            double potential) {
    FittedMap map;
    map.cost = cost;
    map.epsilon = epsilon;
    MatrixXd pts(1, y.size());
    pts.row(0) = y.transpose();
    map.target = PointCloud(pts);
    map.potential = VectorXd::Constant(1, potential);
    return map;
}

}  // namespace

TEST_CASE("extend_potential reductions") {
    const VectorXd y = (VectorXd(2) << 0.3, -0.2).finished();
    const CostModel cost(CostFamily::ElasticL1, 0.5);
    const FittedMap map = single_target_map(cost, y, 0.7, 1.25);
    const VectorXd x = (VectorXd(2) << 1.0, 2.0).finished();
    // lse of a singleton
    CHECK(extend_potential(map, x) == Catch::Approx(h_value(cost, x - y) - 1.25).epsilon(1e-12));
    // x on the unique atom: h(0) = 0
    CHECK(extend_potential(map, y) == Catch::Approx(-1.25).epsilon(1e-12));
}

TEST_CASE("extend_potential flattens to the weighted mean for large epsilon") {
    const CostModel cost(CostFamily::SqEuclidean, 0.0);
    const FittedMap map = synthetic_map(cost, 16, 3, 1e6);
    oracle::rng(61);
    const VectorXd x = oracle::random_vector(3, 0.0, 1.0);
    double mean = 0.0;
    for (Eigen::Index j = 0; j < map.target.size(); ++j) {
        const VectorXd z = x - map.target.points.row(j).transpose();
        mean += map.target.weights[j] * (h_value(cost, z) - map.potential[j]);
    }
    CHECK(std::abs(extend_potential(map, x) - mean) < 1e-3);
}

TEST_CASE("gibbs_weights softmax arithmetic") {
    const CostModel cost(CostFamily::SqEuclidean, 0.0);
    SECTION("equal scores give the uniform distribution") {
        const FittedMap map = synthetic_map(cost, 8, 2);
        // craft a potential that exactly cancels the cost at some x
        FittedMap flat = map;
        const VectorXd x = (VectorXd(2) << 0.5, 0.5).finished();
        for (Eigen::Index j = 0; j < flat.target.size(); ++j) {
            const VectorXd z = x - flat.target.points.row(j).transpose();
            flat.potential[j] = h_value(cost, z);
        }
        const GibbsWeights p = gibbs_weights(flat, x);
        CHECK((p.values.array() - 1.0 / 8.0).abs().maxCoeff() < 1e-14);
    }
    SECTION("two atoms, score gap eps*log 3 gives (3/4, 1/4)") {
        const double eps = 0.37;
        FittedMap map;
        map.cost = cost;
        map.epsilon = eps;
        MatrixXd pts(2, 1);
        pts << 0.0, 1.0;
        map.target = PointCloud(pts);
        // u_j = h(x - y_j) - pot_j; choose potentials so u_1 - u_0 = eps log 3 at x = 0
        map.potential = VectorXd::Zero(2);
        map.potential[1] = h_value(cost, (VectorXd(1) << -1.0).finished()) - eps * std::log(3.0);
        const GibbsWeights p = gibbs_weights(map, VectorXd::Zero(1));
        CHECK(p.values[0] == Catch::Approx(0.75).epsilon(1e-12));
        CHECK(p.values[1] == Catch::Approx(0.25).epsilon(1e-12));
    }
    SECTION("small epsilon concentrates on the argmin") {
        FittedMap map;
        map.cost = cost;
        MatrixXd pts(3, 1);
        pts << 0.0, 0.5, 2.0;
        map.target = PointCloud(pts);
        map.potential = VectorXd::Zero(3);
        const VectorXd x = (VectorXd(1) << 0.1).finished();
        // gap between best and second-best scores
        const double gap = h_value(cost, (VectorXd(1) << 0.1 - 0.5).finished()) -
                           h_value(cost, (VectorXd(1) << 0.1).finished());
        map.epsilon = 1e-9 * gap;
        const GibbsWeights p = gibbs_weights(map, x);
        CHECK(p.values.maxCoeff() >= 1.0 - 1e-9);
        CHECK(p.values[0] == p.values.maxCoeff());
    }
}

TEST_CASE("gibbs_weights stay on the simplex and ignore constant potential shifts") {
    const CostModel cost(CostFamily::ElasticSTVS, 0.4);
    const FittedMap map = synthetic_map(cost);
    oracle::rng(67);
    for (int i = 0; i < 20; ++i) {
        const VectorXd x = oracle::random_vector(3, -0.5, 1.5);
        const GibbsWeights p = gibbs_weights(map, x);
        CHECK((p.values.array() >= 0.0).all());
        CHECK(std::abs(p.values.sum() - 1.0) <= 1e-12);
        FittedMap shifted = map;
        shifted.potential.array() += 4.2;
        CHECK((gibbs_weights(shifted, x).values - p.values).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("grad_f_eps closed forms and finite differences") {
    SECTION("SqEuclidean: x minus the Gibbs barycenter") {
        const CostModel cost(CostFamily::SqEuclidean, 0.0);
        const FittedMap map = synthetic_map(cost);
        oracle::rng(71);
        const VectorXd x = oracle::random_vector(3, 0.0, 1.0);
        const GibbsWeights p = gibbs_weights(map, x);
        const VectorXd bary = map.target.points.transpose() * p.values;
        CHECK((grad_f_eps(map, x) - (x - bary)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("single target: grad h(x - y)") {
        const CostModel cost(CostFamily::ElasticL1, 0.3);
        const VectorXd y = (VectorXd(3) << 0.1, 0.2, 0.3).finished();
        const FittedMap map = single_target_map(cost, y, 0.5, 0.0);
        const VectorXd x = (VectorXd(3) << 1.0, -1.0, 2.0).finished();
        CHECK((grad_f_eps(map, x) - grad_h(cost, x - y)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("finite differences of extend_potential") {
        oracle::rng(73);
        for (auto family : {CostFamily::SqEuclidean, CostFamily::ElasticL1,
                            CostFamily::ElasticSTVS, CostFamily::ElasticKSupport}) {
            const CostModel cost(family, 0.2, 2);
            const FittedMap map = synthetic_map(cost);
            auto f = [&](const VectorXd& x) { return extend_potential(map, x); };
            int checked = 0;
            while (checked < 50) {
                const VectorXd x = oracle::random_vector(3, -0.4, 1.4);
                // keep the FD stencil away from kink coordinates
                double kink_gap = 1.0;
                for (Eigen::Index j = 0; j < map.target.size(); ++j)
                    kink_gap = std::min(kink_gap, (x - map.target.points.row(j).transpose())
                                                      .cwiseAbs()
                                                      .minCoeff());
                if (kink_gap < 1e-4) continue;
                ++checked;
                const VectorXd g = grad_f_eps(map, x);
                const VectorXd fd = oracle::fd_gradient(f, x, 1e-5);
                REQUIRE((g - fd).norm() / std::max(1e-10, fd.norm()) < 1e-4);
            }
        }
    }
}

TEST_CASE("transport reductions") {
    SECTION("SqEuclidean output is the Gibbs barycenter, inside the hull") {
        const CostModel cost(CostFamily::SqEuclidean, 0.0);
        const FittedMap map = synthetic_map(cost);
        oracle::rng(79);
        for (int i = 0; i < 20; ++i) {
            const VectorXd x = oracle::random_vector(3, -1.0, 2.0);
            const DisplacementReport rep = transport(map, x);
            const VectorXd bary = map.target.points.transpose() * gibbs_weights(map, x).values;
            CHECK((rep.output - bary).cwiseAbs().maxCoeff() < 1e-12);
            for (Eigen::Index t = 0; t < 3; ++t) {
                CHECK(rep.output[t] >= map.target.points.col(t).minCoeff() - 1e-12);
                CHECK(rep.output[t] <= map.target.points.col(t).maxCoeff() + 1e-12);
            }
            CHECK((rep.displacement - (rep.output - rep.input)).isZero());
        }
    }
    SECTION("gamma = 0 elastic costs match SqEuclidean") {
        const PointCloud X = sample_uniform_cube(24, 3, 100);
        const PointCloud Y = sample_uniform_cube(24, 3, 101);
        const FittedMap base = fit_fixture(CostModel(CostFamily::SqEuclidean, 0.0), X, Y);
        oracle::rng(83);
        for (auto family : {CostFamily::ElasticL1, CostFamily::ElasticSTVS,
                            CostFamily::ElasticKSupport}) {
            const FittedMap map = fit_fixture(CostModel(family, 0.0, 2), X, Y);
            for (int i = 0; i < 10; ++i) {
                const VectorXd x = oracle::random_vector(3, 0.0, 1.0);
                CHECK((transport(map, x).output - transport(base, x).output)
                          .cwiseAbs()
                          .maxCoeff() < 1e-10);
            }
        }
    }
    SECTION("growing gamma censors more coordinates on average") {
        const PointCloud X = sample_uniform_cube(32, 4, 100);
        const PointCloud Y = sample_uniform_cube(32, 4, 101);
        const FittedMap loose = fit_fixture(CostModel(CostFamily::ElasticL1, 1e-3), X, Y);
        const FittedMap tight = fit_fixture(CostModel(CostFamily::ElasticL1, 2.0), X, Y);
        oracle::rng(89);
        double loose_sparsity = 0.0, tight_sparsity = 0.0;
        for (int i = 0; i < 40; ++i) {
            const VectorXd x = oracle::random_vector(4, 0.0, 1.0);
            loose_sparsity += transport(loose, x).sparsity;
            tight_sparsity += transport(tight, x).sparsity;
        }
        CHECK(loose_sparsity < 0.1 * 40);  // nearly-quadratic cost moves most coordinates
        CHECK(tight_sparsity > loose_sparsity + 1.0);
    }
}

TEST_CASE("boundary queries fall back to the Gibbs barycenter (elastic l1)") {
    const PointCloud X = sample_uniform_cube(16, 2, 100);
    const PointCloud Y = sample_uniform_cube(16, 2, 101);
    const FittedMap map = fit_fixture(CostModel(CostFamily::ElasticL1, 0.4), X, Y);
    oracle::rng(97);
    for (int i = 0; i < 10; ++i) {
        VectorXd x(2);
        x[0] = 1.5 + oracle::uniform(0.0, 1.0);   // above max target coordinate
        x[1] = -0.5 - oracle::uniform(0.0, 1.0);  // below min target coordinate
        const DisplacementReport rep = transport(map, x);
        const VectorXd bary = map.target.points.transpose() * gibbs_weights(map, x).values;
        CHECK((rep.output - bary).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("gamma to zero continuity of the transport map") {
    const PointCloud X = sample_uniform_cube(16, 3, 100);
    const PointCloud Y = sample_uniform_cube(16, 3, 101);
    const Eigen::MatrixXd C = cost_matrix(X, Y, CostModel(CostFamily::SqEuclidean, 0.0));
    const double eps = 0.1 * C.mean();
    const FittedMap base = fit_fixture(CostModel(CostFamily::SqEuclidean, 0.0), X, Y, eps);
    oracle::rng(101);
    std::vector<VectorXd> queries;
    for (int i = 0; i < 100; ++i) queries.push_back(oracle::random_vector(3, 0.0, 1.0));
    for (auto family : {CostFamily::ElasticL1, CostFamily::ElasticSTVS,
                        CostFamily::ElasticKSupport}) {
        const FittedMap map = fit_fixture(CostModel(family, 1e-12, 2), X, Y, eps);
        double sup = 0.0;
        for (const auto& x : queries)
            sup = std::max(sup, (transport(map, x).output - transport(base, x).output).norm());
        CHECK(sup <= 1e-8);
    }
}

TEST_CASE("bregman_centroid") {
    SECTION("single point is a fixed point") {
        for (auto family : {CostFamily::ElasticL1, CostFamily::ElasticSTVS,
                            CostFamily::ElasticKSupport}) {
            const CostModel cost(family, 0.5, 2);
            const VectorXd z = (VectorXd(3) << 0.7, -1.2, 0.4).finished();
            CHECK((bregman_centroid(cost, {z}, VectorXd::Ones(1)) - z).cwiseAbs().maxCoeff() <
                  1e-12);
        }
    }
    SECTION("SqEuclidean centroid is the weighted mean") {
        const CostModel cost(CostFamily::SqEuclidean, 0.0);
        const VectorXd a = (VectorXd(2) << 1.0, 2.0).finished();
        const VectorXd b = (VectorXd(2) << -3.0, 4.0).finished();
        const VectorXd w = (VectorXd(2) << 0.25, 0.75).finished();
        CHECK((bregman_centroid(cost, {a, b}, w) - (0.25 * a + 0.75 * b)).isZero());
    }
    SECTION("elastic l1 centroid matches a grid search over the Bregman objective") {
        const CostModel cost(CostFamily::ElasticL1, 0.6);
        auto d_h = [&](double z, double zj) {
            // D_h(z, z_j) with the sign(0)=0 subgradient selection
            const VectorXd vz = (VectorXd(1) << z).finished();
            const VectorXd vj = (VectorXd(1) << zj).finished();
            return h_value(cost, vz) - h_value(cost, vj) - grad_h(cost, vj)[0] * (z - zj);
        };
        oracle::rng(103);
        for (int i = 0; i < 10; ++i) {
            const double z1 = oracle::uniform(0.1, 2.0);
            const double z2 = -oracle::uniform(0.1, 2.0);
            const double p = oracle::uniform(0.1, 0.9);
            auto objective = [&](double z) { return p * d_h(z, z1) + (1.0 - p) * d_h(z, z2); };
            double best = 0.0, best_val = objective(0.0);
            for (int gi = 0; gi <= 40000; ++gi) {
                const double z = -3.0 + 6.0 * gi / 40000.0;
                const double v = objective(z);
                if (v < best_val) {
                    best_val = v;
                    best = z;
                }
            }
            const VectorXd centroid = bregman_centroid(
                cost, {(VectorXd(1) << z1).finished(), (VectorXd(1) << z2).finished()},
                (VectorXd(2) << p, 1.0 - p).finished());
            CHECK(std::abs(centroid[0] - best) < 1e-4);
        }
    }
}

TEST_CASE("transport agrees with the centroid form") {
    oracle::rng(107);
    for (auto family : {CostFamily::ElasticL1, CostFamily::ElasticSTVS,
                        CostFamily::ElasticKSupport}) {
        const CostModel cost(family, 0.4, 2);
        const FittedMap map = synthetic_map(cost);
        for (int i = 0; i < 10; ++i) {
            const VectorXd x = oracle::random_vector(3, -0.2, 1.2);
            const GibbsWeights p = gibbs_weights(map, x);
            std::vector<VectorXd> diffs;
            for (Eigen::Index j = 0; j < map.target.size(); ++j)
                diffs.push_back(x - map.target.points.row(j).transpose());
            const VectorXd centroid = bregman_centroid(map.cost, diffs, p.values);
            CHECK((transport(map, x).output - (x - centroid)).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("descent steps") {
    const CostModel l1(CostFamily::ElasticL1, 0.4);
    const FittedMap map = synthetic_map(l1);
    const VectorXd x = (VectorXd(3) << 0.9, 0.1, 0.5).finished();
    SECTION("lambda = 0 leaves x unchanged") {
        CHECK(bregman_descent_step(map, x, 0.0) == x);
        CHECK(wc_gradient_step(map, x, 0.0) == x);
    }
    SECTION("lambda = 1 jumps to the transport image") {
        CHECK((bregman_descent_step(map, x, 1.0) - transport(map, x).output)
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }
    SECTION("SqEuclidean: both rules coincide for any lambda") {
        const FittedMap sq = synthetic_map(CostModel(CostFamily::SqEuclidean, 0.0));
        for (double lambda : {0.25, 0.5, 0.9}) {
            const VectorXd a = bregman_descent_step(sq, x, lambda);
            const VectorXd b = wc_gradient_step(sq, x, lambda);
            CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((a - (x - lambda * grad_f_eps(sq, x))).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    SECTION("elastic l1: the two rules diverge") {
        const VectorXd a = bregman_descent_step(map, x, 0.25);
        const VectorXd b = wc_gradient_step(map, x, 0.25);
        CHECK((a - b).cwiseAbs().maxCoeff() > 0.0);
    }
    SECTION("lambda outside [0,1] is rejected") {
        CHECK_THROWS_AS(bregman_descent_step(map, x, 1.5), std::invalid_argument);
    }
}

TEST_CASE("m = 1 target: lambda = 1 descent is idempotent") {
    const CostModel cost(CostFamily::ElasticL1, 0.3);
    const VectorXd y = (VectorXd(2) << 0.4, 0.6).finished();
    const FittedMap map = single_target_map(cost, y, 0.5, 0.0);
    const VectorXd x = (VectorXd(2) << 2.0, -1.0).finished();
    const VectorXd x1 = bregman_descent_step(map, x, 1.0);
    const VectorXd x2 = bregman_descent_step(map, x1, 1.0);
    CHECK((x1 - y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((x2 - x1).cwiseAbs().maxCoeff() < 1e-12);
}
