#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparseot/entropic_map.hpp"
#include "sparseot/point_cloud.hpp"

namespace sparseot {

/// Shortest round-trip-safe decimal rendering of a double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Point-cloud CSV: one point per row, d numeric columns, optional header.
inline PointCloud read_cloud_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open point-cloud file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                size_t pos = 0;
                row.push_back(std::stod(cell, &pos));
                if (pos == 0) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (first) {  // header row
                first = false;
                continue;
            }
            throw std::runtime_error("malformed CSV row in " + path + ": " + line);
        }
        first = false;
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("ragged CSV rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("no points in " + path);
    Eigen::MatrixXd pts(rows.size(), rows.front().size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j)
            pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return PointCloud(std::move(pts));
}

inline void write_cloud_csv(const std::string& path, const PointCloud& cloud) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write point-cloud file: " + path);
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        for (Eigen::Index j = 0; j < cloud.dim(); ++j) {
            if (j) out << ',';
            out << format_double(cloud.points(i, j));
        }
        out << '\n';
    }
}

namespace detail {

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline const char* family_name(CostFamily f) {
    switch (f) {
        case CostFamily::SqEuclidean: return "sqeuclid";
        case CostFamily::ElasticL1: return "l1";
        case CostFamily::ElasticSTVS: return "stvs";
        case CostFamily::ElasticKSupport: return "ksup";
    }
    return "sqeuclid";
}

inline CostFamily family_from_name(const std::string& name) {
    if (name == "sqeuclid") return CostFamily::SqEuclidean;
    if (name == "l1") return CostFamily::ElasticL1;
    if (name == "stvs") return CostFamily::ElasticSTVS;
    if (name == "ksup") return CostFamily::ElasticKSupport;
    throw std::invalid_argument("unknown cost family: " + name);
}

}  // namespace detail

/// Self-describing on-disk form of a FittedMap, integrity-checked by an
/// FNV-1a digest over the payload.
inline void save_map(const std::string& path, const FittedMap& map,
                     int iterations, double marginal_error) {
    nlohmann::json payload;
    payload["format"] = "sparseot-map/1";
    payload["cost"] = {{"family", detail::family_name(map.cost.family)},
                       {"gamma", map.cost.gamma},
                       {"k", map.cost.k}};
    payload["epsilon"] = map.epsilon;
    payload["direction"] = map.direction == MapDirection::Forward ? "forward" : "reverse";
    payload["solve"] = {{"iterations", iterations}, {"marginal_error", marginal_error}};
    payload["potential"] = std::vector<double>(map.potential.data(),
                                               map.potential.data() + map.potential.size());
    nlohmann::json pts = nlohmann::json::array();
    for (Eigen::Index i = 0; i < map.target.size(); ++i) {
        std::vector<double> row(map.target.dim());
        for (Eigen::Index j = 0; j < map.target.dim(); ++j) row[static_cast<size_t>(j)] = map.target.points(i, j);
        pts.push_back(row);
    }
    payload["target_points"] = std::move(pts);
    payload["target_weights"] = std::vector<double>(
        map.target.weights.data(), map.target.weights.data() + map.target.weights.size());

    nlohmann::json doc;
    doc["payload"] = payload;
    doc["checksum"] = detail::fnv1a64(payload.dump());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write artifact: " + path);
    out << doc.dump(1) << '\n';
}

struct LoadedMap {
    FittedMap map;
    int iterations = 0;
    double marginal_error = 0.0;
};

inline LoadedMap load_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open artifact: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw std::runtime_error("unparseable artifact " + path + ": " + e.what());
    }
    if (!doc.contains("payload") || !doc.contains("checksum"))
        throw std::runtime_error("artifact missing payload/checksum: " + path);
    const nlohmann::json& payload = doc["payload"];
    if (detail::fnv1a64(payload.dump()) != doc["checksum"].get<std::uint64_t>())
        throw std::runtime_error("artifact checksum mismatch (corrupted file): " + path);
    if (payload.at("format").get<std::string>() != "sparseot-map/1")
        throw std::runtime_error("unsupported artifact format in " + path);

    LoadedMap loaded;
    FittedMap& map = loaded.map;
    map.cost = CostModel(detail::family_from_name(payload.at("cost").at("family")),
                         payload.at("cost").at("gamma").get<double>(),
                         payload.at("cost").at("k").get<int>());
    map.epsilon = payload.at("epsilon").get<double>();
    map.direction = payload.at("direction").get<std::string>() == "forward"
                        ? MapDirection::Forward
                        : MapDirection::Reverse;
    const auto pot = payload.at("potential").get<std::vector<double>>();
    map.potential = Eigen::Map<const Eigen::VectorXd>(pot.data(),
                                                      static_cast<Eigen::Index>(pot.size()));
    const auto& pts = payload.at("target_points");
    const auto w = payload.at("target_weights").get<std::vector<double>>();
    if (pts.empty()) throw std::runtime_error("artifact has empty target cloud: " + path);
    Eigen::MatrixXd m(pts.size(), pts[0].size());
    for (size_t i = 0; i < pts.size(); ++i) {
        const auto row = pts[i].get<std::vector<double>>();
        for (size_t j = 0; j < row.size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    map.target = PointCloud(std::move(m),
                            Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())));
    loaded.iterations = payload.at("solve").at("iterations").get<int>();
    loaded.marginal_error = payload.at("solve").at("marginal_error").get<double>();
    return loaded;
}

}  // namespace sparseot
