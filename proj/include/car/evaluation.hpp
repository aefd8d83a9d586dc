#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "car/common.hpp"
#include "car/prompts.hpp"

namespace car {

/// Which presented response a judge preferred in a single call.
enum class JudgeVerdict { A, B, TIE };

/// Candidate-vs-baseline result after both presentation orders.
enum class MatchOutcome { WIN, LOSE, TIE };

inline const char* to_string(JudgeVerdict v) {
    switch (v) {
        case JudgeVerdict::A: return "A";
        case JudgeVerdict::B: return "B";
        case JudgeVerdict::TIE: return "TIE";
    }
    return "?";
}

inline const char* to_string(MatchOutcome o) {
    switch (o) {
        case MatchOutcome::WIN: return "WIN";
        case MatchOutcome::LOSE: return "LOSE";
        case MatchOutcome::TIE: return "TIE";
    }
    return "?";
}

inline JudgeVerdict parse_verdict_name(const std::string& s) {
    if (s == "A") return JudgeVerdict::A;
    if (s == "B") return JudgeVerdict::B;
    if (s == "TIE" || s == "C") return JudgeVerdict::TIE;
    throw data_error("unknown verdict '" + s + "'");
}

/// Exchanges A and B; used to express a swapped-order verdict relative to
/// the candidate.
inline JudgeVerdict reorient(JudgeVerdict v) {
    if (v == JudgeVerdict::A) return JudgeVerdict::B;
    if (v == JudgeVerdict::B) return JudgeVerdict::A;
    return JudgeVerdict::TIE;
}

inline MatchOutcome flip(MatchOutcome o) {
    if (o == MatchOutcome::WIN) return MatchOutcome::LOSE;
    if (o == MatchOutcome::LOSE) return MatchOutcome::WIN;
    return MatchOutcome::TIE;
}

/// Both arguments are candidate-relative (A = candidate). Two wins, or a win
/// and a tie, is a WIN; symmetric for LOSE; anything else is a TIE.
inline MatchOutcome combine_swapped(JudgeVerdict first, JudgeVerdict second) {
    auto value = [](JudgeVerdict v) { return v == JudgeVerdict::A ? 1 : (v == JudgeVerdict::B ? -1 : 0); };
    const int total = value(first) + value(second);
    if (total > 0) return MatchOutcome::WIN;
    if (total < 0) return MatchOutcome::LOSE;
    return MatchOutcome::TIE;
}

struct MetricsReport {
    std::size_t n_all = 0;
    std::size_t n_win = 0;
    std::size_t n_lose = 0;
    std::size_t n_tie = 0;
    std::size_t n_skipped = 0;
    double ws = 0.0;  // 1 + (win - lose) / all
    double wr = 0.0;  // win / all
    double qs = 0.0;  // (win + tie) / all
};

inline MetricsReport metrics_from_counts(std::size_t win, std::size_t tie, std::size_t lose) {
    MetricsReport r;
    r.n_win = win;
    r.n_tie = tie;
    r.n_lose = lose;
    r.n_all = win + tie + lose;
    if (r.n_all == 0) throw data_error("compute_metrics: no outcomes");
    const double all = static_cast<double>(r.n_all);
    r.ws = 1.0 + (static_cast<double>(win) - static_cast<double>(lose)) / all;
    r.wr = static_cast<double>(win) / all;
    r.qs = static_cast<double>(win + tie) / all;
    return r;
}

inline MetricsReport compute_metrics(std::span<const MatchOutcome> outcomes) {
    std::size_t win = 0, tie = 0, lose = 0;
    for (auto o : outcomes) {
        if (o == MatchOutcome::WIN) ++win;
        else if (o == MatchOutcome::LOSE) ++lose;
        else ++tie;
    }
    return metrics_from_counts(win, tie, lose);
}

// ---------------------------------------------------------------------------
// Reply parsing
// ---------------------------------------------------------------------------

/// First line must hold exactly two reals "s1 s2": A if s1 > s2, B if s1 < s2, TIE if equal.
inline JudgeVerdict parse_verdict_scores(std::string_view reply) {
    const auto eol = reply.find('\n');
    std::string line(reply.substr(0, eol));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream is(line);
    is.imbue(std::locale::classic());
    double s1 = 0, s2 = 0;
    if (!(is >> s1 >> s2) || !(is >> std::ws).eof() || !std::isfinite(s1) || !std::isfinite(s2))
        throw data_error("judge reply: first line is not two scores: '" + line + "'");
    if (s1 > s2) return JudgeVerdict::A;
    if (s1 < s2) return JudgeVerdict::B;
    return JudgeVerdict::TIE;
}

/// The last of "[[A]]", "[[B]]", "[[C]]" in the reply decides; C is a tie.
inline JudgeVerdict parse_verdict_bracket(std::string_view reply) {
    std::optional<JudgeVerdict> verdict;
    std::size_t best = 0;
    const std::pair<std::string_view, JudgeVerdict> tokens[] = {
        {"[[A]]", JudgeVerdict::A}, {"[[B]]", JudgeVerdict::B}, {"[[C]]", JudgeVerdict::TIE}};
    for (const auto& [token, v] : tokens) {
        const auto pos = reply.rfind(token);
        if (pos != std::string_view::npos && (!verdict || pos > best)) {
            best = pos;
            verdict = v;
        }
    }
    if (!verdict) throw data_error("judge reply: no [[A]], [[B]] or [[C]] verdict found");
    return *verdict;
}

enum class PromptFormat { scores, bracket };

inline PromptFormat parse_prompt_format(const std::string& s) {
    if (s == "scores") return PromptFormat::scores;
    if (s == "bracket") return PromptFormat::bracket;
    throw std::invalid_argument("unknown prompt format '" + s + "' (expected scores|bracket)");
}

inline const char* to_string(PromptFormat f) { return f == PromptFormat::scores ? "scores" : "bracket"; }

inline JudgeVerdict parse_verdict(PromptFormat format, std::string_view reply) {
    return format == PromptFormat::scores ? parse_verdict_scores(reply) : parse_verdict_bracket(reply);
}

/// Single-pass placeholder substitution; text inserted for one placeholder is
/// never rescanned.
inline std::string substitute(std::string_view tmpl, const std::vector<std::pair<std::string_view, std::string>>& values) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        bool matched = false;
        if (tmpl[i] == '{') {
            for (const auto& [key, value] : values) {
                if (tmpl.substr(i, key.size()) == key) {
                    out += value;
                    i += key.size();
                    matched = true;
                    break;
                }
            }
        }
        if (!matched) out.push_back(tmpl[i++]);
    }
    return out;
}

inline std::string render_prompt(PromptFormat format, const std::string& instruction, const std::string& response_1,
                                 const std::string& response_2) {
    if (format == PromptFormat::scores) {
        return substitute(prompts::kScoreTemplate,
                          {{"{Instruction}", instruction}, {"{Response 1}", response_1}, {"{Response 2}", response_2}});
    }
    return substitute(prompts::kBracketTemplate, {{"{Instruction pair 1}", instruction + "\n\n" + response_1},
                                                  {"{Instruction pair 2}", instruction + "\n\n" + response_2}});
}

// ---------------------------------------------------------------------------
// Judges
// ---------------------------------------------------------------------------

struct JudgeRequest {
    std::size_t sample_id = 0;
    int pass = 1;  // 1: candidate shown first; 2: baseline shown first
    PromptFormat format = PromptFormat::scores;
    std::string instruction;
    std::string response_1;
    std::string response_2;
    std::string prompt;
};

/// Returns the raw reply text for one rendered prompt. Must be thread-safe.
class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    virtual std::string complete(const JudgeRequest& request) = 0;
};

inline std::string format_reply(PromptFormat format, JudgeVerdict v) {
    if (format == PromptFormat::scores) {
        switch (v) {
            case JudgeVerdict::A: return "8 6\nAssistant 1 gave the more complete answer.";
            case JudgeVerdict::B: return "6 8\nAssistant 2 gave the more complete answer.";
            case JudgeVerdict::TIE: return "7 7\nBoth answers are comparable.";
        }
    }
    switch (v) {
        case JudgeVerdict::A: return "Assistant A is more complete. [[A]]";
        case JudgeVerdict::B: return "Assistant B is more complete. [[B]]";
        case JudgeVerdict::TIE: return "Both are comparable. [[C]]";
    }
    return {};
}

/// Deterministic mock: the longer presented response wins, equal length ties.
class LongerResponseJudge final : public JudgeClient {
public:
    std::string complete(const JudgeRequest& r) override {
        const auto l1 = utf8_decode(r.response_1).size();
        const auto l2 = utf8_decode(r.response_2).size();
        const JudgeVerdict v = l1 > l2 ? JudgeVerdict::A : (l1 < l2 ? JudgeVerdict::B : JudgeVerdict::TIE);
        return format_reply(r.format, v);
    }
};

/// Deterministic mock driven by a table of raw per-call entries keyed by
/// (sample_id, pass). An entry of "A", "B" or "TIE" is formatted as a reply in
/// the request's format; "FAIL" raises a remote error; anything else is
/// returned verbatim as the reply text. Missing entries raise a remote error.
class ScriptedJudge final : public JudgeClient {
public:
    using Script = std::map<std::pair<std::size_t, int>, std::string>;

    explicit ScriptedJudge(Script script) : script_(std::move(script)) {}

    /// JSON array of {"sample_id": n, "pass1": "...", "pass2": "..."}.
    static ScriptedJudge from_json(const nlohmann::json& doc) {
        if (!doc.is_array()) throw data_error("judge script must be a JSON array");
        Script script;
        for (const auto& item : doc) {
            const auto id = item.at("sample_id").get<std::size_t>();
            if (item.contains("pass1")) script[{id, 1}] = item.at("pass1").get<std::string>();
            if (item.contains("pass2")) script[{id, 2}] = item.at("pass2").get<std::string>();
        }
        return ScriptedJudge(std::move(script));
    }

    std::string complete(const JudgeRequest& r) override {
        // The table is never written after construction, so concurrent lookups are safe.
        const auto it = script_.find({r.sample_id, r.pass});
        if (it == script_.end())
            throw remote_error("scripted judge: no entry for sample " + std::to_string(r.sample_id) + " pass " +
                               std::to_string(r.pass));
        const std::string& entry = it->second;
        if (entry == "FAIL") throw remote_error("scripted judge failure");
        if (entry == "A" || entry == "B" || entry == "TIE") return format_reply(r.format, parse_verdict_name(entry));
        return entry;
    }

private:
    Script script_;
};

// ---------------------------------------------------------------------------
// Evaluation run
// ---------------------------------------------------------------------------

struct EvalSample {
    std::string instruction;
    std::string candidate;
    std::string baseline;
};

struct EvalOptions {
    PromptFormat format = PromptFormat::scores;
    std::size_t concurrency = 4;
    int retries = 2;
};

struct SampleLog {
    std::size_t sample_id = 0;
    std::optional<JudgeVerdict> pass1;  // raw, candidate presented as A
    std::optional<JudgeVerdict> pass2;  // raw, baseline presented as A
    std::optional<MatchOutcome> outcome;
    std::string error;
};

struct EvalResult {
    MetricsReport metrics;
    std::vector<SampleLog> samples;
};

namespace detail {

inline JudgeVerdict judge_with_retries(JudgeClient& judge, const JudgeRequest& request, int retries) {
    std::string last_error;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        try {
            return parse_verdict(request.format, judge.complete(request));
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    throw remote_error("sample " + std::to_string(request.sample_id) + " pass " + std::to_string(request.pass) +
                       " failed after " + std::to_string(retries + 1) + " attempts: " + last_error);
}

}  // namespace detail

/// Judges every sample in both presentation orders, re-orients the swapped
/// verdict, combines the pair and aggregates. Samples whose calls fail after
/// all retries are marked skipped and excluded from n_all.
inline EvalResult run_eval(const std::vector<EvalSample>& samples, JudgeClient& judge, const EvalOptions& options = {}) {
    EvalResult result;
    result.samples.resize(samples.size());
    std::vector<JudgeRequest> requests(samples.size() * 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        result.samples[i].sample_id = i;
        for (int pass = 1; pass <= 2; ++pass) {
            auto& r = requests[2 * i + static_cast<std::size_t>(pass - 1)];
            r.sample_id = i;
            r.pass = pass;
            r.format = options.format;
            r.instruction = s.instruction;
            r.response_1 = pass == 1 ? s.candidate : s.baseline;
            r.response_2 = pass == 1 ? s.baseline : s.candidate;
            r.prompt = render_prompt(options.format, r.instruction, r.response_1, r.response_2);
        }
    }

    std::vector<std::optional<JudgeVerdict>> verdicts(requests.size());
    std::vector<std::string> errors(requests.size());
    parallel_for(requests.size(), options.concurrency, [&](std::size_t k) {
        try {
            verdicts[k] = detail::judge_with_retries(judge, requests[k], options.retries);
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    });

    std::vector<MatchOutcome> outcomes;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto& log = result.samples[i];
        log.pass1 = verdicts[2 * i];
        log.pass2 = verdicts[2 * i + 1];
        if (log.pass1 && log.pass2) {
            log.outcome = combine_swapped(*log.pass1, reorient(*log.pass2));
            outcomes.push_back(*log.outcome);
        } else {
            log.error = !errors[2 * i].empty() ? errors[2 * i] : errors[2 * i + 1];
            ++result.metrics.n_skipped;
        }
    }
    if (outcomes.empty())
        throw remote_error("run_eval: every sample was skipped (" + std::to_string(samples.size()) + " samples)");
    const auto skipped = result.metrics.n_skipped;
    result.metrics = compute_metrics(outcomes);
    result.metrics.n_skipped = skipped;
    return result;
}

inline std::string eval_log_csv(const EvalResult& result) {
    std::string out = "sample_id,verdict_pass1,verdict_pass2,outcome\n";
    for (const auto& s : result.samples) {
        out += std::to_string(s.sample_id) + "," + (s.pass1 ? to_string(*s.pass1) : "ERROR") + "," +
               (s.pass2 ? to_string(*s.pass2) : "ERROR") + "," + (s.outcome ? to_string(*s.outcome) : "SKIPPED") + "\n";
    }
    return out;
}

inline nlohmann::ordered_json metrics_json(const MetricsReport& m) {
    return nlohmann::ordered_json{{"n_all", m.n_all}, {"n_win", m.n_win}, {"n_lose", m.n_lose}, {"n_tie", m.n_tie},
                                  {"n_skipped", m.n_skipped}, {"ws", m.ws}, {"wr", m.wr}, {"qs", m.qs}};
}

/// JSON array of {"instruction", "response_candidate", "response_baseline"}.
inline std::vector<EvalSample> parse_eval_samples(const std::string& text, const std::string& origin = "<memory>") {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error("malformed JSON in '" + origin + "' at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    if (!doc.is_array()) throw data_error("'" + origin + "': test set must be a JSON array");
    std::vector<EvalSample> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& item = doc[i];
        try {
            out.push_back({item.at("instruction").get<std::string>(), item.at("response_candidate").get<std::string>(),
                           item.at("response_baseline").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw data_error("'" + origin + "': entry " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace car
