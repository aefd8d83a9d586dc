#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "car/common.hpp"

namespace car {

/// Calibration constants for the linear cost estimator. Currency is whatever
/// unit the rates are given in.
struct CostConfig {
    double api_price_per_1k_tokens = 0.00075;
    double avg_tokens_per_pair = 325.0;
    double gpu_hour_rate = 7.3335;
    double full_train_hours = 100.0;
    double local_selection_hours = 0.0027;

    void validate() const {
        for (double v : {api_price_per_1k_tokens, avg_tokens_per_pair, gpu_hour_rate, full_train_hours, local_selection_hours})
            if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("cost constants must be finite and non-negative");
    }
};

enum class SelectionMode { none, api, local };

inline SelectionMode parse_selection_mode(const std::string& s) {
    if (s == "none") return SelectionMode::none;
    if (s == "api") return SelectionMode::api;
    if (s == "local") return SelectionMode::local;
    throw std::invalid_argument("unknown selection mode '" + s + "' (expected none|api|local)");
}

/// api: n_pairs * tokens_per_pair / 1000 * price; local: hours * rate.
inline double selection_cost(std::size_t n_pairs, SelectionMode mode, const CostConfig& cfg) {
    cfg.validate();
    switch (mode) {
        case SelectionMode::none: return 0.0;
        case SelectionMode::api:
            return static_cast<double>(n_pairs) * cfg.avg_tokens_per_pair / 1000.0 * cfg.api_price_per_1k_tokens;
        case SelectionMode::local: return cfg.local_selection_hours * cfg.gpu_hour_rate;
    }
    return 0.0;
}

/// Training on a fraction of the corpus scales the full-run GPU time linearly.
inline double training_cost(double subset_fraction, const CostConfig& cfg) {
    cfg.validate();
    if (!(subset_fraction > 0.0 && subset_fraction <= 1.0))
        throw std::invalid_argument("training_cost: subset fraction must be in (0, 1]");
    return cfg.full_train_hours * subset_fraction * cfg.gpu_hour_rate;
}

inline double round_cents(double v) { return std::round(v * 100.0) / 100.0; }

struct CostRow {
    std::string label;
    double amount = 0.0;  // rounded to cents
};

/// Selection, Training and Total rows; Total is the sum of the rounded parts.
inline std::vector<CostRow> cost_table(std::size_t n_pairs, SelectionMode mode, double subset_fraction, const CostConfig& cfg) {
    const double sel = round_cents(selection_cost(n_pairs, mode, cfg));
    const double train = round_cents(training_cost(subset_fraction, cfg));
    return {{"Selection", sel}, {"Training", train}, {"Total", round_cents(sel + train)}};
}

inline std::string cost_table_csv(const std::vector<CostRow>& rows) {
    std::string out = "item,cost\n";
    for (const auto& r : rows) out += r.label + "," + format_fixed(r.amount, 2) + "\n";
    return out;
}

inline std::string cost_table_text(const std::vector<CostRow>& rows) {
    std::size_t label_w = 4, amount_w = 4;
    std::vector<std::string> amounts;
    for (const auto& r : rows) {
        amounts.push_back(format_fixed(r.amount, 2));
        label_w = std::max(label_w, r.label.size());
        amount_w = std::max(amount_w, amounts.back().size());
    }
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(label_w)) << "Item" << "  " << std::right
       << std::setw(static_cast<int>(amount_w)) << "Cost" << "\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
        os << std::left << std::setw(static_cast<int>(label_w)) << rows[i].label << "  " << std::right
           << std::setw(static_cast<int>(amount_w)) << amounts[i] << "\n";
    return os.str();
}

}  // namespace car
