#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "bookrec/types.hpp"

namespace bookrec {

// ---------------------------------------------------------------------------
// Error metrics over aligned truth/prediction pairs
// ---------------------------------------------------------------------------

struct PairedSeries {
    std::vector<double> truth;
    std::vector<double> predicted;

    void validate() const {
        if (truth.size() != predicted.size())
            throw ValidationError("paired series: length mismatch (" +
                                  std::to_string(truth.size()) + " vs " +
                                  std::to_string(predicted.size()) + ")");
        if (truth.empty()) throw ValidationError("paired series: empty");
    }
};

inline double mae(const PairedSeries& s) {
    s.validate();
    double sum = 0.0;
    for (std::size_t i = 0; i < s.truth.size(); ++i) sum += std::fabs(s.truth[i] - s.predicted[i]);
    return sum / static_cast<double>(s.truth.size());
}

/// Errors on a zero truth value instead of skipping it: silently changing n
/// would corrupt cross-model comparisons.
inline double mape(const PairedSeries& s) {
    s.validate();
    double sum = 0.0;
    for (std::size_t i = 0; i < s.truth.size(); ++i) {
        if (s.truth[i] == 0.0)
            throw ValidationError("mape: truth value at position " + std::to_string(i) +
                                  " is zero");
        sum += std::fabs(s.truth[i] - s.predicted[i]) / std::fabs(s.truth[i]);
    }
    return sum / static_cast<double>(s.truth.size());
}

inline double rmse(const PairedSeries& s) {
    s.validate();
    double sum = 0.0;
    for (std::size_t i = 0; i < s.truth.size(); ++i) {
        const double d = s.truth[i] - s.predicted[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(s.truth.size()));
}

// ---------------------------------------------------------------------------
// NDCG
// ---------------------------------------------------------------------------

struct RankedItem {
    std::string item_id;
    double true_rating = 0.0;
    double predicted_score = 0.0;
};

struct RankedEvalSet {
    std::vector<RankedItem> items;

    void validate() const {
        if (items.empty()) throw ValidationError("ranked eval set: empty");
        for (std::size_t i = 0; i < items.size(); ++i)
            for (std::size_t j = i + 1; j < items.size(); ++j)
                if (items[i].item_id == items[j].item_id)
                    throw ValidationError("ranked eval set: duplicate item_id " +
                                          items[i].item_id);
    }
};

/// Exponential gain (2^r - 1) is the pinned default; linear is available
/// because NDCG values are not comparable across gain conventions.
enum class NdcgGain { exponential, linear };

namespace detail {

inline double ndcg_gain(double rating, NdcgGain gain) {
    return gain == NdcgGain::exponential ? std::exp2(rating) - 1.0 : rating;
}

inline double dcg_at_k(const std::vector<const RankedItem*>& order, std::size_t k, NdcgGain gain) {
    double dcg = 0.0;
    const std::size_t depth = std::min(k, order.size());
    for (std::size_t pos = 0; pos < depth; ++pos)
        dcg += ndcg_gain(order[pos]->true_rating, gain) / std::log2(static_cast<double>(pos) + 2.0);
    return dcg;
}

} // namespace detail

/// Ranks by predicted score descending (ties by item_id ascending); the ideal
/// ranking sorts by true rating with the same tie rule. IDCG of 0 yields 0.
inline double ndcg_at_k(const RankedEvalSet& set, std::size_t k,
                        NdcgGain gain = NdcgGain::exponential) {
    if (k < 1) throw ValidationError("ndcg_at_k: k must be >= 1");
    set.validate();

    std::vector<const RankedItem*> actual, ideal;
    actual.reserve(set.items.size());
    for (const auto& it : set.items) actual.push_back(&it);
    ideal = actual;
    std::sort(actual.begin(), actual.end(), [](const RankedItem* a, const RankedItem* b) {
        if (a->predicted_score != b->predicted_score) return a->predicted_score > b->predicted_score;
        return a->item_id < b->item_id;
    });
    std::sort(ideal.begin(), ideal.end(), [](const RankedItem* a, const RankedItem* b) {
        if (a->true_rating != b->true_rating) return a->true_rating > b->true_rating;
        return a->item_id < b->item_id;
    });

    const double idcg = detail::dcg_at_k(ideal, k, gain);
    if (idcg == 0.0) return 0.0;
    return detail::dcg_at_k(actual, k, gain) / idcg;
}

// ---------------------------------------------------------------------------
// Annotator ranking score
// ---------------------------------------------------------------------------

/// Rank-position counts per source for one book, with the position weights.
struct RankTally {
    std::vector<double> weights;                            // strictly decreasing, best first
    std::map<std::string, std::vector<std::int64_t>> freq;  // source -> count per position
    std::int64_t annotators = 0;

    void validate() const {
        if (weights.empty()) throw ValidationError("rank tally: no weights");
        for (std::size_t i = 1; i < weights.size(); ++i)
            if (!(weights[i] < weights[i - 1]))
                throw ValidationError("rank tally: weights must be strictly decreasing");
        for (const auto& [source, counts] : freq)
            if (counts.size() != weights.size())
                throw ValidationError("rank tally: freq vector for '" + source +
                                      "' has wrong length");
        for (std::size_t i = 0; i < weights.size(); ++i) {
            std::int64_t col = 0;
            for (const auto& [source, counts] : freq) col += counts[i];
            if (col != annotators)
                throw ValidationError("rank tally: position " + std::to_string(i + 1) +
                                      " counts sum to " + std::to_string(col) + ", expected " +
                                      std::to_string(annotators));
        }
    }
};

/// Score(source) = (1/N) * sum_i freq_i(source) * w_i.
inline double summary_score(const RankTally& tally, const std::string& source) {
    tally.validate();
    auto it = tally.freq.find(source);
    if (it == tally.freq.end())
        throw ValidationError("rank tally: unknown source '" + source + "'");
    double sum = 0.0;
    for (std::size_t i = 0; i < tally.weights.size(); ++i)
        sum += static_cast<double>(it->second[i]) * tally.weights[i];
    return sum / static_cast<double>(tally.annotators);
}

/// Default weights r, r-1, ..., 1 for r candidate sources.
inline std::vector<double> default_rank_weights(std::size_t candidates) {
    std::vector<double> w(candidates);
    for (std::size_t i = 0; i < candidates; ++i) w[i] = static_cast<double>(candidates - i);
    return w;
}

/// Per-book tallies; every annotation of a book must rank the same candidate
/// set or the book is named in the error.
inline std::map<std::string, RankTally>
tally_from_annotations(const std::vector<AnnotationRecord>& annotations,
                       const std::vector<double>& weights) {
    std::map<std::string, RankTally> out;
    std::map<std::string, std::set<std::string>> candidates;
    for (const auto& a : annotations) {
        a.validate();
        if (a.ranking.size() != weights.size())
            throw ValidationError("annotation by " + a.annotator_id + " for book " + a.book_id +
                                  ": ranks " + std::to_string(a.ranking.size()) +
                                  " sources, expected " + std::to_string(weights.size()));
        std::set<std::string> set(a.ranking.begin(), a.ranking.end());
        auto [it, inserted] = candidates.emplace(a.book_id, set);
        if (!inserted && it->second != set)
            throw ValidationError("book " + a.book_id +
                                  ": annotations rank inconsistent candidate sets");
        RankTally& tally = out[a.book_id];
        if (tally.freq.empty()) {
            tally.weights = weights;
            for (const auto& s : set) tally.freq[s].assign(weights.size(), 0);
        }
        for (std::size_t pos = 0; pos < a.ranking.size(); ++pos)
            ++tally.freq[a.ranking[pos]][pos];
        ++tally.annotators;
    }
    for (auto& [book, tally] : out) tally.validate();
    return out;
}

/// Mean of per-book scores for one source over a set of books.
inline double pooled_score(const std::map<std::string, RankTally>& tallies,
                           const std::vector<std::string>& book_ids, const std::string& source) {
    if (book_ids.empty()) throw ValidationError("pooled_score: no books");
    double sum = 0.0;
    for (const auto& id : book_ids) {
        auto it = tallies.find(id);
        if (it == tallies.end())
            throw ValidationError("pooled_score: no tally for book " + id);
        sum += summary_score(it->second, source);
    }
    return sum / static_cast<double>(book_ids.size());
}

// ---------------------------------------------------------------------------
// Relative change
// ---------------------------------------------------------------------------

/// (before - after) / before as a percentage; positive means a decrease.
inline double relative_change(double before, double after) {
    if (before == 0.0) throw ValidationError("relative_change: before is zero");
    return (before - after) / before * 100.0;
}

/// Two-decimal arrow rendering used in report tables, e.g. "↓35.34%".
inline std::string format_relative_change(double pct) {
    char buf[64];
    if (pct > 0.0)
        std::snprintf(buf, sizeof(buf), "↓%.2f%%", pct);
    else if (pct < 0.0)
        std::snprintf(buf, sizeof(buf), "↑%.2f%%", -pct);
    else
        std::snprintf(buf, sizeof(buf), "0.00%%");
    return buf;
}

} // namespace bookrec
