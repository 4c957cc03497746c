// sparseot: estimate feature-sparse entropic transport maps between point
// clouds and run reproducible synthetic experiments.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sparseot/sparseot.hpp"

namespace {

using namespace sparseot;

CostModel cost_from_flags(const std::string& family, double gamma, int k) {
    return CostModel(detail::family_from_name(family), gamma, k);
}

SparsityPattern pattern_from_name(const std::string& name) {
    if (name == "constant") return SparsityPattern::Constant;
    if (name == "adaptive") return SparsityPattern::Adaptive;
    throw CLI::ValidationError("--pattern", "expected 'constant' or 'adaptive'");
}

int run_synth(const std::string& pattern, int n, int d, int s, std::uint64_t seed,
              const std::string& output) {
    SyntheticSpec spec{n, d, s, pattern_from_name(pattern), seed};
    const Benchmark bench = make_benchmark(spec);
    write_cloud_csv(output + "_source.csv", bench.source);
    write_cloud_csv(output + "_target.csv", bench.target);
    write_cloud_csv(output + "_truth.csv", PointCloud(bench.truth_images(bench.source.points)));
    std::cout << "wrote " << output << "_{source,target,truth}.csv (n=" << n << ", d=" << d
              << ", s=" << s << ")\n";
    return 0;
}

int run_fit(const std::string& source_path, const std::string& target_path,
            const std::string& family, double gamma, int k, double epsilon,
            double epsilon_fraction, double tol, int max_iter, const std::string& output) {
    const PointCloud X = read_cloud_csv(source_path);
    const PointCloud Y = read_cloud_csv(target_path);
    if (X.dim() != Y.dim()) {
        std::cerr << "error: source dimension " << X.dim() << " != target dimension " << Y.dim()
                  << "\n";
        return 2;
    }
    const CostModel cost = cost_from_flags(family, gamma, k);
    SolveConfig cfg;
    cfg.epsilon = epsilon;
    cfg.epsilon_fraction = epsilon_fraction;
    cfg.tolerance = tol;
    cfg.max_iterations = max_iter;
    const DualPotentials pot = solve_dual(X, Y, cost, cfg);
    const FittedMap map = FittedMap::fit(cost, X, Y, pot);
    save_map(output, map, pot.iterations, pot.marginal_error);
    std::cout << "fit: eps=" << pot.epsilon << " iterations=" << pot.iterations
              << " marginal_error=" << pot.marginal_error << "\n";
    if (!pot.converged(cfg.tolerance)) {
        std::cerr << "warning: solver did not reach tolerance " << cfg.tolerance << "\n";
    }
    return 0;
}

int run_transport(const std::string& artifact_path, const std::string& query_path,
                  double threshold, const std::string& output) {
    const LoadedMap loaded = load_map(artifact_path);
    const PointCloud queries = read_cloud_csv(query_path);
    if (queries.dim() != loaded.map.target.dim()) {
        std::cerr << "error: query dimension " << queries.dim() << " != map dimension "
                  << loaded.map.target.dim() << "\n";
        return 2;
    }
    std::ofstream out(output);
    if (!out) throw std::runtime_error("cannot write " + output);
    const Eigen::Index d = queries.dim();
    for (Eigen::Index j = 0; j < d; ++j) out << "in_" << j << ',';
    for (Eigen::Index j = 0; j < d; ++j) out << "out_" << j << ',';
    out << "sparsity,active_set_size\n";
    for (Eigen::Index i = 0; i < queries.size(); ++i) {
        const DisplacementReport rep =
            transport(loaded.map, queries.points.row(i).transpose(), threshold);
        for (Eigen::Index j = 0; j < d; ++j) out << format_double(rep.input[j]) << ',';
        for (Eigen::Index j = 0; j < d; ++j) out << format_double(rep.output[j]) << ',';
        out << format_double(rep.sparsity) << ',' << rep.active_set.size() << '\n';
    }
    std::cout << "transported " << queries.size() << " points -> " << output << "\n";
    return 0;
}

int run_flow(const std::string& artifact_path, const std::string& query_path, double lambda,
             int steps, const std::string& mode, const std::string& output) {
    if (steps < 1) throw CLI::ValidationError("--steps", "must be >= 1");
    if (mode != "bregman" && mode != "plain")
        throw CLI::ValidationError("--mode", "expected 'bregman' or 'plain'");
    const LoadedMap loaded = load_map(artifact_path);
    const PointCloud queries = read_cloud_csv(query_path);
    if (queries.dim() != loaded.map.target.dim()) {
        std::cerr << "error: query dimension mismatch\n";
        return 2;
    }
    std::ofstream out(output);
    if (!out) throw std::runtime_error("cannot write " + output);
    out << "point,step";
    for (Eigen::Index j = 0; j < queries.dim(); ++j) out << ",x_" << j;
    out << '\n';
    for (Eigen::Index i = 0; i < queries.size(); ++i) {
        Eigen::VectorXd x = queries.points.row(i).transpose();
        for (int step = 0; step <= steps; ++step) {
            out << i << ',' << step;
            for (Eigen::Index j = 0; j < x.size(); ++j) out << ',' << format_double(x[j]);
            out << '\n';
            if (step == steps) break;
            x = mode == "bregman" ? bregman_descent_step(loaded.map, x, lambda)
                                  : wc_gradient_step(loaded.map, x, lambda);
        }
    }
    std::cout << "flow (" << mode << ", lambda=" << lambda << ", steps=" << steps << ") -> "
              << output << "\n";
    return 0;
}

std::set<std::string> existing_keys(const std::string& path) {
    std::set<std::string> keys;
    std::ifstream in(path);
    if (!in) return keys;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        // key = first 7 columns
        size_t pos = 0;
        int commas = 0;
        while (pos < line.size() && commas < 7) {
            if (line[pos] == ',') ++commas;
            ++pos;
        }
        if (commas == 7) keys.insert(line.substr(0, pos - 1));
    }
    return keys;
}

int run_sweep(const ExperimentConfig& config, const std::string& output) {
    const std::set<std::string> skip = existing_keys(output);
    const bool resuming = !skip.empty();

    std::ofstream out;
    if (resuming) {
        out.open(output, std::ios::app);
    } else {
        out.open(output);
        out << experiment_csv_header() << '\n';
    }
    if (!out) throw std::runtime_error("cannot write " + output);
    std::ofstream timing(output + ".timing.csv", resuming ? std::ios::app : std::ios::out);
    if (!resuming) timing << "key,wall_time_ms\n";

    // config echo for provenance
    nlohmann::json echo;
    echo["pattern"] = config.pattern == SparsityPattern::Constant ? "constant" : "adaptive";
    echo["n"] = config.n;
    echo["s"] = config.s;
    echo["dims"] = config.dims;
    echo["seeds"] = config.seeds;
    std::vector<std::string> fams;
    for (auto f : config.families) fams.emplace_back(detail::family_name(f));
    echo["costs"] = fams;
    echo["gammas"] = config.gammas.empty() ? ExperimentConfig::default_gamma_grid() : config.gammas;
    echo["k"] = config.k;
    echo["epsilon_fraction"] = config.epsilon_fraction;
    echo["tolerance"] = config.tolerance;
    echo["max_iterations"] = config.max_iterations;
    {
        std::ofstream cfg_out(output + ".config.json");
        cfg_out << echo.dump(1) << '\n';
    }

    std::vector<ExperimentRecord> records;
    sparseot::run_sweep(config, skip, [&](const ExperimentRecord& rec) {
        out << to_csv_row(rec) << '\n';
        out.flush();
        timing << rec.key() << ',' << format_double(rec.wall_time_ms) << '\n';
        records.push_back(rec);
        std::cout << rec.key() << " nmse_train=" << rec.nmse_train
                  << (rec.error.empty() ? "" : " ERROR: " + rec.error) << "\n";
    });

    // best-gamma-per-(d, cost) summary over this run's records
    const auto best = best_gamma_summary(records);
    std::filesystem::path p(output);
    const std::string summary = (p.parent_path() / (p.stem().string() + "_best.csv")).string();
    std::ofstream bout(summary);
    bout << "pattern,n,s,d,cost,gamma,nmse_train\n";
    for (const auto& row : best)
        bout << row.pattern << ',' << row.n << ',' << row.s << ',' << row.d << ',' << row.cost
             << ',' << format_double(row.gamma) << ',' << format_double(row.nmse_train) << '\n';
    std::cout << "wrote " << output << " and " << summary << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feature-sparse entropic transport maps"};
    app.require_subcommand(1);

    // shared cost/solver flags
    std::string family = "sqeuclid";
    double gamma = 0.0;
    int k = 2;
    double epsilon = 0.0;
    double epsilon_fraction = 0.1;
    double tol = 1e-6;
    int max_iter = 10000;
    std::uint64_t seed = 0;
    std::string output;

    auto* synth = app.add_subcommand("synth", "emit a synthetic benchmark as CSV clouds");
    std::string pattern = "constant";
    int n = 1000, d = 10, s = 2;
    synth->add_option("--pattern", pattern, "constant|adaptive");
    synth->add_option("--n", n, "sample count");
    synth->add_option("--d", d, "dimension");
    synth->add_option("--s", s, "sparsity size");
    synth->add_option("--seed", seed, "RNG seed");
    synth->add_option("--output", output, "output path prefix")->required();

    auto* fit = app.add_subcommand("fit", "solve dual potentials and persist a map artifact");
    std::string source_path, target_path;
    fit->add_option("--source", source_path, "source cloud CSV")->required();
    fit->add_option("--target", target_path, "target cloud CSV")->required();
    fit->add_option("--cost", family, "sqeuclid|l1|stvs|ksup");
    fit->add_option("--gamma", gamma, "regularization strength");
    fit->add_option("--k", k, "k for the k-support cost");
    fit->add_option("--epsilon", epsilon, "entropic regularization (overrides the fraction rule)");
    fit->add_option("--epsilon-fraction", epsilon_fraction, "epsilon as fraction of mean cost");
    fit->add_option("--tol", tol, "marginal L-inf tolerance");
    fit->add_option("--max-iter", max_iter, "Sinkhorn iteration budget");
    fit->add_option("--output", output, "artifact path")->required();

    auto* tr = app.add_subcommand("transport", "apply a fitted map to a query cloud");
    std::string artifact_path, query_path;
    double threshold = 1e-8;
    tr->add_option("--artifact", artifact_path, "map artifact")->required();
    tr->add_option("--query", query_path, "query cloud CSV")->required();
    tr->add_option("--threshold", threshold, "active-coordinate threshold");
    tr->add_option("--output", output, "displacement CSV")->required();

    auto* flow = app.add_subcommand("flow", "iterate descent steps and emit trajectories");
    double lambda = 0.25;
    int steps = 6;
    std::string mode = "bregman";
    flow->add_option("--artifact", artifact_path, "map artifact")->required();
    flow->add_option("--query", query_path, "query cloud CSV")->required();
    flow->add_option("--lambda", lambda, "step size in [0, 1]")->check(CLI::Range(0.0, 1.0));
    flow->add_option("--steps", steps, "number of steps");
    flow->add_option("--mode", mode, "bregman|plain");
    flow->add_option("--output", output, "trajectory CSV")->required();

    auto* sweep = app.add_subcommand("sweep", "run a (cost, gamma, d, seed) metric grid");
    std::vector<int> dims{10};
    std::vector<std::uint64_t> seeds{0};
    std::vector<std::string> costs{"sqeuclid", "l1", "stvs"};
    std::vector<double> gammas;
    bool no_divergence = false;
    sweep->add_option("--pattern", pattern, "constant|adaptive");
    sweep->add_option("--n", n, "sample count");
    sweep->add_option("--s", s, "sparsity size");
    sweep->add_option("--d", dims, "dimension grid");
    sweep->add_option("--seed", seeds, "seed grid");
    sweep->add_option("--cost", costs, "cost families");
    sweep->add_option("--gamma", gammas, "gamma grid (default: 6 log points in [1e-3, 10])");
    sweep->add_option("--k", k, "k for the k-support cost");
    sweep->add_option("--epsilon-fraction", epsilon_fraction, "epsilon as fraction of mean cost");
    sweep->add_option("--tol", tol, "marginal L-inf tolerance");
    sweep->add_option("--max-iter", max_iter, "Sinkhorn iteration budget");
    sweep->add_flag("--no-divergence", no_divergence, "skip the Sinkhorn-divergence column");
    sweep->add_option("--output", output, "metric CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_synth(pattern, n, d, s, seed, output);
        if (fit->parsed())
            return run_fit(source_path, target_path, family, gamma, k, epsilon, epsilon_fraction,
                           tol, max_iter, output);
        if (tr->parsed()) return run_transport(artifact_path, query_path, threshold, output);
        if (flow->parsed()) return run_flow(artifact_path, query_path, lambda, steps, mode, output);
        if (sweep->parsed()) {
            ExperimentConfig config;
            config.pattern = pattern_from_name(pattern);
            config.n = n;
            config.s = s;
            config.dims = dims;
            config.seeds = seeds;
            for (const auto& c : costs)
                config.families.push_back(sparseot::detail::family_from_name(c));
            config.gammas = gammas;
            config.k = k;
            config.epsilon_fraction = epsilon_fraction;
            config.tolerance = tol;
            config.max_iterations = max_iter;
            config.compute_divergence = !no_divergence;
            // k-support prox cost grows fast with d
            for (int dd : config.dims)
                if (dd > 512)
                    for (auto f : config.families)
                        if (f == sparseot::CostFamily::ElasticKSupport)
                            throw CLI::ValidationError("--cost",
                                                       "ksup is limited to d <= 512 in sweeps");
            return run_sweep(config, output);
        }
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
