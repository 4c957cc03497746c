#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sparseot/cost.hpp"
#include "sparseot/entropic_map.hpp"
#include "sparseot/io.hpp"
#include "sparseot/metrics.hpp"
#include "sparseot/sinkhorn.hpp"
#include "sparseot/synthetic.hpp"

namespace sparseot {

struct ExperimentConfig {
    SparsityPattern pattern = SparsityPattern::Constant;
    int n = 1000;
    int s = 5;
    std::vector<int> dims;
    std::vector<std::uint64_t> seeds;
    std::vector<CostFamily> families;
    std::vector<double> gammas;  // ignored for SqEuclidean rows
    int k = 2;
    double epsilon_fraction = 0.1;
    double tolerance = 1e-6;
    int max_iterations = 10000;
    bool compute_divergence = true;
    double active_threshold = 1e-8;

    static std::vector<double> default_gamma_grid() {
        // 6 log-spaced values over [1e-3, 1e1]
        std::vector<double> g;
        for (int i = 0; i < 6; ++i) g.push_back(std::pow(10.0, -3.0 + 4.0 * i / 5.0));
        return g;
    }

    void validate() const {
        if (n < 1 || s < 1) throw std::invalid_argument("ExperimentConfig: n, s must be >= 1");
        if (dims.empty()) throw std::invalid_argument("ExperimentConfig: empty dimension grid");
        if (seeds.empty()) throw std::invalid_argument("ExperimentConfig: empty seed grid");
        if (families.empty()) throw std::invalid_argument("ExperimentConfig: no cost families");
        for (double g : gammas)
            if (!(g >= 0.0)) throw std::invalid_argument("ExperimentConfig: negative gamma");
        if (!(epsilon_fraction > 0.0 && epsilon_fraction <= 1.0))
            throw std::invalid_argument("ExperimentConfig: epsilon_fraction must lie in (0, 1]");
    }
};

struct ExperimentRecord {
    std::string pattern;
    int n = 0, d = 0, s = 0;
    std::uint64_t seed = 0;
    std::string cost;
    double gamma = 0.0;
    int k = 0;
    double epsilon = 0.0;
    int iterations = 0;
    double marginal_error = 0.0;
    double nmse_train = 0.0;
    double nmse_fresh = 0.0;
    double support_error = 0.0;
    double mean_sparsity = 0.0;
    double sinkhorn_div = 0.0;
    std::string error;
    double wall_time_ms = 0.0;  // kept out of the deterministic CSV

    /// Resume key: one cell per (config, seed, gamma).
    std::string key() const {
        std::ostringstream os;
        os << pattern << ',' << n << ',' << d << ',' << s << ',' << seed << ',' << cost << ','
           << format_double(gamma);
        return os.str();
    }
};

inline const char* experiment_csv_header() {
    return "pattern,n,d,s,seed,cost,gamma,k,epsilon,iterations,marginal_error,"
           "nmse_train,nmse_fresh,support_error,mean_sparsity,sinkhorn_div,error";
}

inline std::string to_csv_row(const ExperimentRecord& r) {
    std::ostringstream os;
    os << r.pattern << ',' << r.n << ',' << r.d << ',' << r.s << ',' << r.seed << ',' << r.cost
       << ',' << format_double(r.gamma) << ',' << r.k << ',' << format_double(r.epsilon) << ','
       << r.iterations << ',' << format_double(r.marginal_error) << ','
       << format_double(r.nmse_train) << ',' << format_double(r.nmse_fresh) << ','
       << format_double(r.support_error) << ',' << format_double(r.mean_sparsity) << ','
       << format_double(r.sinkhorn_div) << ',' << r.error;
    return os.str();
}

/// Transport a batch of query points; returns images and accumulates sparsity.
inline Eigen::MatrixXd transport_batch(const FittedMap& map, const Eigen::MatrixXd& queries,
                                       double threshold, double* mean_sparsity = nullptr) {
    Eigen::MatrixXd out(queries.rows(), queries.cols());
    double sp = 0.0;
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const DisplacementReport rep = transport(map, queries.row(i).transpose(), threshold);
        out.row(i) = rep.output.transpose();
        sp += rep.sparsity;
    }
    if (mean_sparsity) *mean_sparsity = sp / static_cast<double>(queries.rows());
    return out;
}

/// Fit one (cost, gamma) cell on a benchmark and evaluate all metrics.
inline ExperimentRecord run_cell(const Benchmark& bench, const ExperimentConfig& cfg,
                                 CostFamily family, double gamma) {
    ExperimentRecord rec;
    rec.pattern = bench.spec.pattern == SparsityPattern::Constant ? "constant" : "adaptive";
    rec.n = bench.spec.n;
    rec.d = bench.spec.d;
    rec.s = bench.spec.s;
    rec.seed = bench.spec.seed;
    rec.cost = detail::family_name(family);
    rec.gamma = family == CostFamily::SqEuclidean ? 0.0 : gamma;
    rec.k = family == CostFamily::ElasticKSupport ? cfg.k : 0;

    const auto t0 = std::chrono::steady_clock::now();
    try {
        const CostModel cost(family, rec.gamma, cfg.k);
        SolveConfig scfg;
        scfg.epsilon_fraction = cfg.epsilon_fraction;
        scfg.tolerance = cfg.tolerance;
        scfg.max_iterations = cfg.max_iterations;
        const Eigen::MatrixXd C = cost_matrix(bench.source, bench.target, cost);
        scfg.epsilon = epsilon_from_cost(C, cfg.epsilon_fraction);
        const DualPotentials pot = solve_dual(C, bench.source.weights, bench.target.weights, scfg);
        const FittedMap map = FittedMap::fit(cost, bench.source, bench.target, pot);

        rec.epsilon = pot.epsilon;
        rec.iterations = pot.iterations;
        rec.marginal_error = pot.marginal_error;

        // train-side metrics on the source samples
        double train_sparsity = 0.0;
        const Eigen::MatrixXd est_train =
            transport_batch(map, bench.source.points, cfg.active_threshold, &train_sparsity);
        const Eigen::MatrixXd true_train = bench.truth_images(bench.source.points);
        rec.nmse_train = nmse(true_train, est_train);
        rec.mean_sparsity = train_sparsity;

        // support error: off-support means outside the coordinates the ground
        // truth can ever displace (first s, or first 2s for the adaptive map)
        const int s_eff = bench.spec.pattern == SparsityPattern::Constant ? bench.spec.s
                                                                          : 2 * bench.spec.s;
        const Eigen::MatrixXd displacements = est_train - bench.source.points;
        try {
            rec.support_error = support_error(displacements, s_eff);
        } catch (const std::runtime_error&) {
            rec.support_error = 0.0;  // fully censored map: nothing off support
        }

        // held-out metrics on fresh queries
        const PointCloud fresh =
            sample_uniform_cube(bench.spec.n, bench.spec.d, bench.spec.seed ^ 3ULL);
        const Eigen::MatrixXd est_fresh =
            transport_batch(map, fresh.points, cfg.active_threshold);
        rec.nmse_fresh = nmse(bench.truth_images(fresh.points), est_fresh);

        if (cfg.compute_divergence) {
            // l2^2 Sinkhorn divergence between transported fresh points and
            // the target measure, eps = 10% of the target self-cost mean
            const CostModel l2(CostFamily::SqEuclidean, 0.0);
            const Eigen::MatrixXd Ct = cost_matrix(bench.target, bench.target, l2);
            const double eps_div = 0.1 * Ct.mean();
            rec.sinkhorn_div = sinkhorn_divergence(PointCloud(est_fresh), bench.target, l2,
                                                   eps_div, /*debias=*/true, cfg.tolerance,
                                                   cfg.max_iterations);
        } else {
            rec.sinkhorn_div = 0.0;
        }
    } catch (const std::exception& e) {
        rec.error = e.what();
        // keep the row; commas would break the CSV
        for (char& c : rec.error)
            if (c == ',' || c == '\n') c = ';';
    }
    rec.wall_time_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
    return rec;
}

/// Run the full grid.  `skip_keys` holds resume keys of completed cells;
/// `emit` is called once per record in deterministic order.
inline void run_sweep(const ExperimentConfig& config, const std::set<std::string>& skip_keys,
                      const std::function<void(const ExperimentRecord&)>& emit) {
    config.validate();
    const std::vector<double> gammas =
        config.gammas.empty() ? ExperimentConfig::default_gamma_grid() : config.gammas;
    for (int d : config.dims) {
        for (std::uint64_t seed : config.seeds) {
            SyntheticSpec spec{config.n, d, config.s, config.pattern, seed};
            Benchmark bench;
            bool bench_ready = false;
            for (CostFamily family : config.families) {
                if (family == CostFamily::ElasticKSupport && config.k > d) continue;
                const std::vector<double> cell_gammas =
                    family == CostFamily::SqEuclidean ? std::vector<double>{0.0} : gammas;
                for (double gamma : cell_gammas) {
                    ExperimentRecord probe;
                    probe.pattern =
                        config.pattern == SparsityPattern::Constant ? "constant" : "adaptive";
                    probe.n = config.n;
                    probe.d = d;
                    probe.s = config.s;
                    probe.seed = seed;
                    probe.cost = detail::family_name(family);
                    probe.gamma = family == CostFamily::SqEuclidean ? 0.0 : gamma;
                    if (skip_keys.count(probe.key())) continue;
                    if (!bench_ready) {
                        bench = make_benchmark(spec);
                        bench_ready = true;
                    }
                    emit(run_cell(bench, config, family, gamma));
                }
            }
        }
    }
}

struct BestGammaRow {
    std::string pattern;
    int n = 0, d = 0, s = 0;
    std::string cost;
    double gamma = 0.0;
    double nmse_train = 0.0;  // mean over seeds at the selected gamma
};

/// Lowest mean train-NMSE gamma per (d, cost).
inline std::vector<BestGammaRow> best_gamma_summary(const std::vector<ExperimentRecord>& records) {
    // aggregate mean NMSE over seeds per (d, cost, gamma)
    struct Agg {
        double sum = 0.0;
        int count = 0;
    };
    std::map<std::string, Agg> agg;
    std::map<std::string, ExperimentRecord> sample;
    for (const auto& r : records) {
        if (!r.error.empty()) continue;
        std::ostringstream os;
        os << r.d << '|' << r.cost << '|' << format_double(r.gamma);
        agg[os.str()].sum += r.nmse_train;
        agg[os.str()].count += 1;
        sample.emplace(os.str(), r);
    }
    std::map<std::pair<int, std::string>, BestGammaRow> best;
    for (const auto& [key, a] : agg) {
        const ExperimentRecord& r = sample.at(key);
        const double mean_nmse = a.sum / a.count;
        const auto bkey = std::make_pair(r.d, r.cost);
        auto it = best.find(bkey);
        if (it == best.end() || mean_nmse < it->second.nmse_train) {
            BestGammaRow row;
            row.pattern = r.pattern;
            row.n = r.n;
            row.d = r.d;
            row.s = r.s;
            row.cost = r.cost;
            row.gamma = r.gamma;
            row.nmse_train = mean_nmse;
            best[bkey] = row;
        }
    }
    std::vector<BestGammaRow> out;
    for (const auto& [k, v] : best) out.push_back(v);
    return out;
}

}  // namespace sparseot
