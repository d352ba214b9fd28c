#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "bookrec/types.hpp"

namespace bookrec {

/// Sparse user x item rating matrix with dense indices. Immutable once built;
/// safe to share across concurrent readers.
class RatingMatrix {
public:
    struct Entry {
        std::size_t user = 0;
        std::size_t item = 0;
        double rating = 0.0;
    };

    RatingMatrix() = default;

    RatingMatrix(const std::vector<RatingRecord>& records, Scale scale) : scale_(scale) {
        entries_.reserve(records.size());
        double sum = 0.0;
        for (const auto& r : records) {
            r.validate(scale);
            std::size_t u = intern(r.user_id, user_index_, user_ids_);
            std::size_t i = intern(r.book_id, item_index_, item_ids_);
            entries_.push_back({u, i, r.rating});
            sum += r.rating;
        }
        by_user_.resize(user_ids_.size());
        by_item_.resize(item_ids_.size());
        for (const auto& e : entries_) {
            by_user_[e.user].push_back({e.item, e.rating});
            by_item_[e.item].push_back({e.user, e.rating});
        }
        for (auto& row : by_user_) std::sort(row.begin(), row.end());
        for (auto& col : by_item_) std::sort(col.begin(), col.end());
        for (const auto& row : by_user_)
            for (std::size_t k = 1; k < row.size(); ++k)
                if (row[k].first == row[k - 1].first)
                    throw ValidationError("rating matrix: duplicate (user, item) pair");
        global_mean_ = entries_.empty() ? 0.0 : sum / static_cast<double>(entries_.size());

        user_means_.resize(user_ids_.size());
        for (std::size_t u = 0; u < by_user_.size(); ++u) {
            double s = 0.0;
            for (auto& [i, r] : by_user_[u]) s += r;
            user_means_[u] = by_user_[u].empty() ? global_mean_
                                                 : s / static_cast<double>(by_user_[u].size());
        }
        item_means_.resize(item_ids_.size());
        for (std::size_t i = 0; i < by_item_.size(); ++i) {
            double s = 0.0;
            for (auto& [u, r] : by_item_[i]) s += r;
            item_means_[i] = by_item_[i].empty() ? global_mean_
                                                 : s / static_cast<double>(by_item_[i].size());
        }
    }

    std::size_t n_users() const { return user_ids_.size(); }
    std::size_t n_items() const { return item_ids_.size(); }
    std::size_t n_ratings() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    const std::vector<Entry>& entries() const { return entries_; }
    const Scale& scale() const { return scale_; }
    double global_mean() const { return global_mean_; }

    std::optional<std::size_t> user_index(const UserId& id) const { return find(user_index_, id); }
    std::optional<std::size_t> item_index(const BookId& id) const { return find(item_index_, id); }
    const UserId& user_id(std::size_t u) const { return user_ids_[u]; }
    const BookId& item_id(std::size_t i) const { return item_ids_[i]; }

    /// (item index, rating) sorted by item index.
    const std::vector<std::pair<std::size_t, double>>& user_ratings(std::size_t u) const {
        return by_user_[u];
    }
    /// (user index, rating) sorted by user index.
    const std::vector<std::pair<std::size_t, double>>& item_ratings(std::size_t i) const {
        return by_item_[i];
    }

    std::optional<double> rating(std::size_t u, std::size_t i) const {
        const auto& row = by_user_[u];
        auto it = std::lower_bound(row.begin(), row.end(),
                                   std::make_pair(i, -std::numeric_limits<double>::infinity()));
        if (it != row.end() && it->first == i) return it->second;
        return std::nullopt;
    }

    std::optional<double> rating(const UserId& user, const BookId& item) const {
        auto u = user_index(user);
        auto i = item_index(item);
        if (!u || !i) return std::nullopt;
        return rating(*u, *i);
    }

    double user_mean(std::size_t u) const { return user_means_[u]; }
    double item_mean(std::size_t i) const { return item_means_[i]; }

private:
    static std::size_t intern(const std::string& id,
                              std::unordered_map<std::string, std::size_t>& index,
                              std::vector<std::string>& ids) {
        auto [it, inserted] = index.emplace(id, ids.size());
        if (inserted) ids.push_back(id);
        return it->second;
    }

    static std::optional<std::size_t> find(const std::unordered_map<std::string, std::size_t>& m,
                                           const std::string& id) {
        auto it = m.find(id);
        if (it == m.end()) return std::nullopt;
        return it->second;
    }

    Scale scale_;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> user_index_, item_index_;
    std::vector<std::string> user_ids_, item_ids_;
    std::vector<std::vector<std::pair<std::size_t, double>>> by_user_, by_item_;
    std::vector<double> user_means_, item_means_;
    double global_mean_ = 0.0;
};

} // namespace bookrec
