#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "car/common.hpp"

namespace car {

/// Sidecar written next to every pipeline artifact as `<artifact>.manifest.json`.
/// Only file names (never directories) are recorded so that identical runs in
/// different directories produce identical manifests.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::uint64_t seed = 0;
    std::string corpus_hash;  // content hash of the dataset this lineage was built from
    std::vector<std::pair<std::string, std::string>> inputs;   // (file name, content hash)
    std::vector<std::pair<std::string, std::string>> outputs;  // (file name, content hash)
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();

    std::string config_hash() const { return hex64(fnv1a64(config.dump())); }

    void add_input(const std::string& path) { inputs.emplace_back(file_name(path), file_hash(path)); }
    void add_output(const std::string& path) { outputs.emplace_back(file_name(path), file_hash(path)); }

    static std::string file_name(const std::string& path) { return std::filesystem::path(path).filename().string(); }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["tool"] = "car";
        j["version"] = kVersion;
        j["command"] = command;
        j["config"] = config;
        j["config_hash"] = config_hash();
        j["seed"] = seed;
        j["corpus_hash"] = corpus_hash;
        auto list = [](const auto& items) {
            auto arr = nlohmann::ordered_json::array();
            for (const auto& [name, hash] : items) arr.push_back({{"file", name}, {"hash", hash}});
            return arr;
        };
        j["inputs"] = list(inputs);
        j["outputs"] = list(outputs);
        for (const auto& [k, v] : extra.items()) j[k] = v;
        return j;
    }
};

inline std::string manifest_path(const std::string& artifact) { return artifact + ".manifest.json"; }

inline void write_manifest(const std::string& artifact, const RunManifest& m) {
    write_file(manifest_path(artifact), m.to_json().dump(2) + "\n");
}

/// Corpus hash recorded in an artifact's sidecar, if the sidecar exists.
inline std::optional<std::string> recorded_corpus_hash(const std::string& artifact) {
    const auto path = manifest_path(artifact);
    if (!std::filesystem::exists(path)) return std::nullopt;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error("'" + path + "': " + e.what());
    }
    const auto it = j.find("corpus_hash");
    if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) return std::nullopt;
    return it->get<std::string>();
}

/// Rejects artifacts whose sidecars name a different corpus than `expected`.
/// Artifacts without a sidecar are accepted, so externally produced files can
/// be dropped into the chain.
inline void check_lineage(const std::vector<std::string>& artifacts, const std::string& expected) {
    for (const auto& a : artifacts) {
        const auto h = recorded_corpus_hash(a);
        if (h && *h != expected)
            throw data_error("'" + a + "' was built from corpus " + *h + ", expected " + expected +
                             " (artifacts come from different datasets)");
    }
}

/// Common corpus hash of a set of artifacts, or empty if none records one.
inline std::string shared_corpus_hash(const std::vector<std::string>& artifacts) {
    std::string found;
    for (const auto& a : artifacts) {
        const auto h = recorded_corpus_hash(a);
        if (!h) continue;
        if (found.empty()) found = *h;
        else if (found != *h)
            throw data_error("'" + a + "' was built from corpus " + *h + " but another input from corpus " + found);
    }
    return found;
}

}  // namespace car
