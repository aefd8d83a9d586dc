#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "car/common.hpp"
#include "car/dataset.hpp"

namespace car {

/// n x d real matrix; row i is the vector of pair id i.
struct EmbeddingMatrix {
    RowMatrix data;

    std::size_t n() const { return static_cast<std::size_t>(data.rows()); }
    std::size_t d() const { return static_cast<std::size_t>(data.cols()); }

    bool operator==(const EmbeddingMatrix& other) const {
        return data.rows() == other.data.rows() && data.cols() == other.data.cols() && data == other.data;
    }
};

inline void check_finite(const RowMatrix& m, const char* what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (!std::isfinite(m(i, j)))
                throw data_error(std::string(what) + ": non-finite value at row " + std::to_string(i) + ", column " +
                                 std::to_string(j));
}

enum class EmbedBackend { hash, file, remote };

struct EmbedderSpec {
    EmbedBackend backend = EmbedBackend::hash;
    std::size_t dim = 384;
    std::uint64_t seed = 0;
    std::string path;       // file backend
    std::string endpoint;   // remote backend, e.g. http://host:port/embed
    std::size_t batch_size = 64;
    std::size_t max_in_flight = 4;
    double timeout_seconds = 30.0;
    int retries = 3;
    bool instruction_only = false;

    void validate() const {
        if (dim < 2) throw std::invalid_argument("embedding dim must be >= 2");
        if (backend == EmbedBackend::file && path.empty()) throw std::invalid_argument("file backend needs a path");
        if (backend == EmbedBackend::remote && endpoint.empty())
            throw std::invalid_argument("remote backend needs an endpoint");
        if (batch_size == 0 || max_in_flight == 0) throw std::invalid_argument("batch size and in-flight limit must be positive");
        if (retries < 0) throw std::invalid_argument("retries must be >= 0");
    }
};

inline const char* backend_name(EmbedBackend b) {
    switch (b) {
        case EmbedBackend::hash: return "hash";
        case EmbedBackend::file: return "file";
        case EmbedBackend::remote: return "remote";
    }
    return "?";
}

inline EmbedBackend parse_backend(const std::string& s) {
    if (s == "hash") return EmbedBackend::hash;
    if (s == "file") return EmbedBackend::file;
    if (s == "remote") return EmbedBackend::remote;
    throw std::invalid_argument("unknown embedding backend '" + s + "'");
}

// ---------------------------------------------------------------------------
// Feature hashing
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> lower_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char32_t c : utf8_decode(text)) {
        if (is_unicode_space(c)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else {
            utf8_append(current, to_lower(c));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

inline void hash_feature(std::string_view feature, std::uint64_t seed, std::vector<double>& acc) {
    const std::uint64_t h = mix64(fnv1a64(feature) ^ mix64(seed));
    const auto bucket = static_cast<std::size_t>(h % acc.size());
    acc[bucket] += (h >> 63) ? -1.0 : 1.0;
}

}  // namespace detail

/// Signed feature hashing of lowercased unigrams and adjacent bigrams,
/// L2-normalized. Empty or all-whitespace text gives the zero vector.
inline std::vector<double> hash_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
    if (dim < 2) throw std::invalid_argument("hash_embed: dim must be >= 2");
    std::vector<double> v(dim, 0.0);
    const auto tokens = detail::lower_tokens(text);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        detail::hash_feature("1\x1f" + tokens[i], seed, v);
        if (i + 1 < tokens.size()) detail::hash_feature("2\x1f" + tokens[i] + "\x1f" + tokens[i + 1], seed, v);
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
    }
    return v;
}

/// Backend that turns texts into fixed-dimension vectors. Implementations
/// must be safe to call concurrently and return rows in input order.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    virtual RowMatrix embed(const std::vector<std::string>& texts) const = 0;

    std::vector<double> embed_one(const std::string& text) const {
        RowMatrix m = embed({text});
        return std::vector<double>(m.data(), m.data() + m.cols());
    }
};

class HashEmbedder final : public Embedder {
public:
    HashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
        if (dim < 2) throw std::invalid_argument("HashEmbedder: dim must be >= 2");
    }

    std::size_t dim() const override { return dim_; }
    std::uint64_t seed() const { return seed_; }

    RowMatrix embed(const std::vector<std::string>& texts) const override {
        RowMatrix out(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(dim_));
        for (std::size_t i = 0; i < texts.size(); ++i) {
            const auto v = hash_embed(texts[i], dim_, seed_);
            for (std::size_t j = 0; j < dim_; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
        }
        return out;
    }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Corpus embedding and the EMB1 file format
// ---------------------------------------------------------------------------

inline std::string embedding_text(const InstructionPair& pair, bool instruction_only) {
    if (instruction_only) {
        InstructionPair only;
        only.instruction = pair.instruction;
        return concat_text(only);
    }
    return concat_text(pair);
}

inline std::vector<std::string> corpus_texts(const Dataset& dataset, bool instruction_only = false) {
    std::vector<std::string> texts;
    texts.reserve(dataset.size());
    for (const auto& p : dataset.pairs) texts.push_back(embedding_text(p, instruction_only));
    return texts;
}

inline EmbeddingMatrix embed_corpus(const Dataset& dataset, const Embedder& embedder, bool instruction_only = false) {
    EmbeddingMatrix m{embedder.embed(corpus_texts(dataset, instruction_only))};
    if (m.n() != dataset.size() || (m.n() > 0 && m.d() != embedder.dim()))
        throw data_error("embedder returned a " + std::to_string(m.n()) + "x" + std::to_string(m.d()) +
                         " matrix for " + std::to_string(dataset.size()) + " pairs");
    check_finite(m.data, "embedding");
    return m;
}

inline void save_embeddings(const EmbeddingMatrix& m, const std::string& path) {
    std::ostringstream out;
    binio::put_magic(out, "EMB1");
    binio::put_u32(out, static_cast<std::uint32_t>(m.n()));
    binio::put_u32(out, static_cast<std::uint32_t>(m.d()));
    binio::put_matrix(out, m.data);
    write_file(path, out.str());
}

inline EmbeddingMatrix read_embeddings(std::istream& in) {
    binio::expect_magic(in, "EMB1");
    const auto n = binio::get_u32(in, "EMB1 row count");
    const auto d = binio::get_u32(in, "EMB1 dimension");
    EmbeddingMatrix m{binio::get_matrix(in, n, d, "EMB1")};
    binio::expect_eof(in, "EMB1");
    check_finite(m.data, "embedding file");
    return m;
}

inline EmbeddingMatrix load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open '" + path + "'");
    try {
        return read_embeddings(in);
    } catch (const Error& e) {
        throw Error(e.kind(), "'" + path + "': " + e.what());
    }
}

/// File backend: precomputed vectors that must line up with the dataset.
inline EmbeddingMatrix load_corpus_embeddings(const std::string& path, const Dataset& dataset, std::size_t expected_dim) {
    auto m = load_embeddings(path);
    if (m.n() != dataset.size())
        throw data_error("'" + path + "' has " + std::to_string(m.n()) + " rows but the dataset has " +
                         std::to_string(dataset.size()) + " pairs");
    if (m.d() != expected_dim)
        throw data_error("'" + path + "' has dimension " + std::to_string(m.d()) + ", expected " +
                         std::to_string(expected_dim));
    return m;
}

}  // namespace car
