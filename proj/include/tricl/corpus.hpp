#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "tricl/modalities.hpp"

namespace tricl::modal {

// Line-delimited JSON corpus: one sample per line carrying all three views
// (tokens with spans, nodes/edges, points).
inline nlohmann::json sample_to_json(const MoleculeSample& s) {
    nlohmann::json j;
    j["v"] = 1;
    j["tokens"] = s.tokens.ids;
    j["spans"] = s.tokens.span;
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : s.graph.nodes) nodes.push_back({n.label, n.tag});
    j["nodes"] = std::move(nodes);
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : s.graph.edges) edges.push_back({e.u, e.v, e.type});
    j["edges"] = std::move(edges);
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : s.voxels.points) points.push_back({p.pos[0], p.pos[1], p.pos[2], p.channel});
    j["points"] = std::move(points);
    j["grid"] = {{"G", s.voxels.grid_size}, {"C", s.voxels.channels}, {"res", s.voxels.resolution}};
    return j;
}

inline MoleculeSample sample_from_json(const nlohmann::json& j) {
    TRICL_CHECK(j.value("v", 0) == 1, "corpus: unsupported sample version");
    MoleculeSample s;
    s.tokens.ids = j.at("tokens").get<std::vector<int>>();
    s.tokens.span = j.at("spans").get<std::vector<int>>();
    for (const auto& n : j.at("nodes")) s.graph.nodes.push_back({n.at(0).get<int>(), n.at(1).get<int>()});
    for (const auto& e : j.at("edges"))
        s.graph.edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<int>()});
    s.voxels.grid_size = j.at("grid").at("G").get<std::size_t>();
    s.voxels.channels = j.at("grid").at("C").get<std::size_t>();
    s.voxels.resolution = j.at("grid").at("res").get<double>();
    for (const auto& p : j.at("points"))
        s.voxels.points.push_back(
            {{p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()}, p.at(3).get<int>()});
    s.tokens.validate();
    s.graph.validate();
    return s;
}

inline void dump_corpus(const std::string& path, const std::vector<MoleculeSample>& samples) {
    std::ofstream out(path);
    TRICL_CHECK(out.good(), "dump_corpus: cannot open " << path);
    for (const auto& s : samples) out << sample_to_json(s).dump() << "\n";
    TRICL_CHECK(out.good(), "dump_corpus: write failed");
}

inline std::vector<MoleculeSample> load_corpus(const std::string& path) {
    std::ifstream in(path);
    TRICL_CHECK(in.good(), "load_corpus: cannot open " << path);
    std::vector<MoleculeSample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(sample_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error("load_corpus: " + path + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace tricl::modal
