#pragma once

// HTTP backends for embedding and judging. Kept apart from the core headers
// so only code that talks to services pulls in the HTTP client.

#include <cstdlib>
#include <functional>
#include <memory>
#include <string>
#include <vector>

// Eigen first: resolv.h, pulled in by httplib, defines a `_res` macro that
// collides with Eigen parameter names.
#include "car/common.hpp"
#include "car/embedding.hpp"
#include "car/evaluation.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace car {

struct HttpEndpoint {
    std::string base;  // scheme://host[:port]
    std::string path;  // starts with '/'
};

inline HttpEndpoint parse_endpoint(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw std::invalid_argument("endpoint must look like http://host:port/path: '" + url + "'");
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

struct HttpOptions {
    double timeout_seconds = 30.0;
    int retries = 3;
    std::string api_key_env;
};

namespace detail {

/// POSTs a JSON body and returns the parsed JSON reply, retrying transport
/// failures, non-200 statuses and unparseable bodies.
inline nlohmann::json post_json(const HttpEndpoint& ep, const nlohmann::json& body, const HttpOptions& opts,
                                const std::string& what, const std::function<void(const nlohmann::json&)>& validate) {
    httplib::Client client(ep.base);
    const auto secs = static_cast<time_t>(opts.timeout_seconds);
    const auto usecs = static_cast<time_t>((opts.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!opts.api_key_env.empty()) {
        if (const char* key = std::getenv(opts.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string payload = body.dump();
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= opts.retries; ++attempt) {
        auto res = client.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            auto reply = nlohmann::json::parse(res->body);
            if (validate) validate(reply);
            return reply;
        } catch (const std::exception& e) {
            last_error = std::string("bad reply: ") + e.what();
        }
    }
    throw remote_error(what + " failed after " + std::to_string(opts.retries + 1) + " attempts: " + last_error);
}

}  // namespace detail

/// POST {"texts": [...]} -> {"embeddings": [[...], ...]}, batched, with up to
/// `max_in_flight` concurrent requests. Rows come back in input order.
class RemoteEmbedder final : public Embedder {
public:
    explicit RemoteEmbedder(const EmbedderSpec& spec) : spec_(spec), endpoint_(parse_endpoint(spec.endpoint)) {
        spec_.validate();
    }

    std::size_t dim() const override { return spec_.dim; }

    RowMatrix embed(const std::vector<std::string>& texts) const override {
        RowMatrix out(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(spec_.dim));
        const std::size_t batches = (texts.size() + spec_.batch_size - 1) / spec_.batch_size;
        HttpOptions opts{spec_.timeout_seconds, spec_.retries, "EMBED_API_KEY"};
        parallel_for(batches, spec_.max_in_flight, [&](std::size_t b) {
            const std::size_t begin = b * spec_.batch_size;
            const std::size_t end = std::min(texts.size(), begin + spec_.batch_size);
            nlohmann::json body{{"texts", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                                                   texts.begin() + static_cast<std::ptrdiff_t>(end))}};
            const std::size_t expected = end - begin;
            auto validate = [&](const nlohmann::json& reply) {
                const auto& rows = reply.at("embeddings");
                if (!rows.is_array() || rows.size() != expected)
                    throw std::runtime_error("expected " + std::to_string(expected) + " embeddings");
                for (const auto& row : rows) {
                    if (!row.is_array() || row.size() != spec_.dim)
                        throw std::runtime_error("expected vectors of dimension " + std::to_string(spec_.dim));
                    for (const auto& v : row)
                        if (!v.is_number() || !std::isfinite(v.get<double>())) throw std::runtime_error("non-finite embedding value");
                }
            };
            const auto reply = detail::post_json(endpoint_, body, opts, "embedding batch " + std::to_string(b), validate);
            const auto& rows = reply.at("embeddings");
            for (std::size_t i = 0; i < expected; ++i)
                for (std::size_t j = 0; j < spec_.dim; ++j)
                    out(static_cast<Eigen::Index>(begin + i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
        });
        return out;
    }

private:
    EmbedderSpec spec_;
    HttpEndpoint endpoint_;
};

/// POST {"prompt": "..."} -> {"text": "..."}. Retries are left to run_eval.
class RemoteJudge final : public JudgeClient {
public:
    RemoteJudge(const std::string& endpoint, double timeout_seconds)
        : endpoint_(parse_endpoint(endpoint)), opts_{timeout_seconds, 0, "JUDGE_API_KEY"} {}

    std::string complete(const JudgeRequest& request) override {
        auto validate = [](const nlohmann::json& reply) {
            if (!reply.at("text").is_string()) throw std::runtime_error("'text' is not a string");
        };
        const auto reply = detail::post_json(endpoint_, nlohmann::json{{"prompt", request.prompt}}, opts_,
                                             "judge call", validate);
        return reply.at("text").get<std::string>();
    }

private:
    HttpEndpoint endpoint_;
    HttpOptions opts_;
};

/// Text embedder for a spec; the file backend only serves whole corpora.
inline std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
    spec.validate();
    switch (spec.backend) {
        case EmbedBackend::hash: return std::make_unique<HashEmbedder>(spec.dim, spec.seed);
        case EmbedBackend::remote: return std::make_unique<RemoteEmbedder>(spec);
        case EmbedBackend::file: break;
    }
    throw std::invalid_argument("the file embedding backend cannot embed arbitrary text");
}

inline EmbeddingMatrix embed_corpus(const Dataset& dataset, const EmbedderSpec& spec) {
    spec.validate();
    if (spec.backend == EmbedBackend::file) return load_corpus_embeddings(spec.path, dataset, spec.dim);
    return embed_corpus(dataset, *make_embedder(spec), spec.instruction_only);
}

}  // namespace car
