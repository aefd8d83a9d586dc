#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "car/common.hpp"

namespace car {

/// One instruction/input/output triple. `id` is the 0-based load position.
struct InstructionPair {
    std::size_t id = 0;
    std::string instruction;
    std::string input;
    std::string output;

    bool operator==(const InstructionPair&) const = default;
};

struct Dataset {
    std::vector<InstructionPair> pairs;
    std::string source_path;

    std::size_t size() const { return pairs.size(); }
    const InstructionPair& operator[](std::size_t id) const { return pairs.at(id); }
};

/// Instruction, input and output joined by single spaces. Blank parts are
/// skipped and whitespace runs collapse to one space, so the result has no
/// double spaces and no leading or trailing whitespace.
inline std::string concat_text(const InstructionPair& pair) {
    std::string out;
    for (const std::string* part : {&pair.instruction, &pair.input, &pair.output}) {
        bool pending_space = !out.empty();
        bool in_token = false;
        for (char32_t c : utf8_decode(*part)) {
            if (is_unicode_space(c)) {
                if (in_token) pending_space = true;
                in_token = false;
                continue;
            }
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            in_token = true;
            utf8_append(out, c);
        }
    }
    return out;
}

namespace detail {

inline std::string field_or_empty(const nlohmann::json& obj, const char* key, std::size_t index) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return {};
    if (!it->is_string())
        throw data_error("entry " + std::to_string(index) + ": field '" + key + "' is not a string");
    return it->get<std::string>();
}

inline InstructionPair pair_from_json(const nlohmann::json& obj, std::size_t index) {
    if (!obj.is_object()) throw data_error("entry " + std::to_string(index) + " is not an object");
    InstructionPair p;
    p.id = index;
    p.instruction = field_or_empty(obj, "instruction", index);
    p.input = field_or_empty(obj, "input", index);
    p.output = field_or_empty(obj, "output", index);
    return p;
}

inline nlohmann::ordered_json pair_to_json(const InstructionPair& p) {
    return nlohmann::ordered_json{{"instruction", p.instruction}, {"input", p.input}, {"output", p.output}};
}

inline nlohmann::json parse_json(const std::string& text, const std::string& origin) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error("malformed JSON in '" + origin + "' at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

}  // namespace detail

/// Parses Alpaca-style JSON text. Empty instructions are rejected with the
/// full list of offending indices.
inline Dataset parse_dataset(const std::string& text, const std::string& origin = "<memory>") {
    const auto doc = detail::parse_json(text, origin);
    if (!doc.is_array()) throw data_error("'" + origin + "': top level must be an array of objects");

    Dataset ds;
    ds.source_path = origin;
    ds.pairs.reserve(doc.size());
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        ds.pairs.push_back(detail::pair_from_json(doc[i], i));
        if (is_blank(ds.pairs.back().instruction)) bad.push_back(i);
    }
    if (!bad.empty()) {
        std::string list;
        for (std::size_t i = 0; i < bad.size(); ++i) list += (i ? "," : "") + std::to_string(bad[i]);
        throw data_error("'" + origin + "': empty instruction at indices [" + list + "]");
    }
    return ds;
}

inline Dataset load_dataset(const std::string& path) { return parse_dataset(read_file(path), path); }

inline void check_id(const Dataset& dataset, std::size_t id) {
    if (id >= dataset.size())
        throw data_error("unknown pair id " + std::to_string(id) + " (dataset has " + std::to_string(dataset.size()) + " pairs)");
}

/// Drops repeated ids and later pairs whose concat_text equals an earlier
/// (lower-id) one. Output is sorted ascending.
inline std::vector<std::size_t> dedupe_pairs(std::vector<std::size_t> ids, const Dataset& dataset) {
    for (auto id : ids) check_id(dataset, id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    std::unordered_map<std::string, std::size_t> seen;
    std::vector<std::size_t> out;
    out.reserve(ids.size());
    for (auto id : ids) {
        if (seen.emplace(concat_text(dataset[id]), id).second) out.push_back(id);
    }
    return out;
}

inline std::string dump_pairs(const Dataset& dataset, const std::vector<std::size_t>& ids) {
    auto arr = nlohmann::ordered_json::array();
    for (auto id : ids) {
        check_id(dataset, id);
        arr.push_back(detail::pair_to_json(dataset[id]));
    }
    return arr.dump(2) + "\n";
}

/// Writes the given pairs, in the given order, as Alpaca JSON.
inline void write_dataset(const Dataset& dataset, const std::vector<std::size_t>& ids, const std::string& path) {
    write_file(path, dump_pairs(dataset, ids));
}

inline std::vector<std::size_t> all_ids(const Dataset& dataset) {
    std::vector<std::size_t> ids(dataset.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    return ids;
}

}  // namespace car
