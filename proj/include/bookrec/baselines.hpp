#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "bookrec/corpus.hpp"
#include "bookrec/rating_matrix.hpp"

namespace bookrec {

/// Prediction plus whether the cold-entity fallback chain produced it.
struct PredictionQ {
    double value = 0.0;
    bool fallback = false;
};

namespace detail {

/// Cold-entity chain: item mean, then user mean, then global mean, depending
/// on what exists. 1-shot users are nearly cold, so every model needs this.
inline PredictionQ fallback_predict(double global_mean, std::optional<double> item_mean,
                                    std::optional<double> user_mean) {
    if (item_mean) return {*item_mean, true};
    if (user_mean) return {*user_mean, true};
    return {global_mean, true};
}

} // namespace detail

// ---------------------------------------------------------------------------
// FunkSVD: biased SGD matrix factorization
// ---------------------------------------------------------------------------

struct FunkSvdParams {
    int factors = 100;
    double learning_rate = 0.005;
    double regularization = 0.02;
    int epochs = 20;
    std::uint64_t seed = 0;
};

struct FactorModel {
    FunkSvdParams params;
    Scale scale;
    double global_mean = 0.0;
    std::vector<std::string> user_ids, item_ids;
    std::vector<double> user_factors, item_factors; // row-major, n * factors
    std::vector<double> user_bias, item_bias;
    std::vector<double> user_means, item_means; // training-matrix means, for fallbacks

    std::optional<std::size_t> user_index(const UserId& id) const { return find(user_map_, id); }
    std::optional<std::size_t> item_index(const BookId& id) const { return find(item_map_, id); }

    void rebuild_index() {
        user_map_.clear();
        item_map_.clear();
        for (std::size_t u = 0; u < user_ids.size(); ++u) user_map_[user_ids[u]] = u;
        for (std::size_t i = 0; i < item_ids.size(); ++i) item_map_[item_ids[i]] = i;
    }

    double raw_score(std::size_t u, std::size_t i) const {
        const std::size_t f = static_cast<std::size_t>(params.factors);
        double dot = 0.0;
        for (std::size_t x = 0; x < f; ++x)
            dot += user_factors[u * f + x] * item_factors[i * f + x];
        return global_mean + user_bias[u] + item_bias[i] + dot;
    }

private:
    static std::optional<std::size_t> find(const std::unordered_map<std::string, std::size_t>& m,
                                           const std::string& id) {
        auto it = m.find(id);
        if (it == m.end()) return std::nullopt;
        return it->second;
    }
    std::unordered_map<std::string, std::size_t> user_map_, item_map_;
};

inline FactorModel funksvd_train(const RatingMatrix& matrix, FunkSvdParams params) {
    if (matrix.empty()) throw ValidationError("funksvd: cannot train on an empty matrix");
    if (params.factors < 1) throw ValidationError("funksvd: factors must be >= 1");
    if (params.learning_rate <= 0.0 || params.regularization <= 0.0)
        throw ValidationError("funksvd: learning rate and regularization must be positive");

    FactorModel m;
    m.params = params;
    m.scale = matrix.scale();
    m.global_mean = matrix.global_mean();
    const std::size_t nu = matrix.n_users(), ni = matrix.n_items();
    const std::size_t f = static_cast<std::size_t>(params.factors);
    m.user_ids.reserve(nu);
    for (std::size_t u = 0; u < nu; ++u) m.user_ids.push_back(matrix.user_id(u));
    m.item_ids.reserve(ni);
    for (std::size_t i = 0; i < ni; ++i) m.item_ids.push_back(matrix.item_id(i));
    m.user_bias.assign(nu, 0.0);
    m.item_bias.assign(ni, 0.0);
    m.user_factors.resize(nu * f);
    m.item_factors.resize(ni * f);
    std::mt19937_64 rng(params.seed);
    for (auto& v : m.user_factors) v = (stable_unit(rng) - 0.5) * 0.1;
    for (auto& v : m.item_factors) v = (stable_unit(rng) - 0.5) * 0.1;
    m.user_means.resize(nu);
    for (std::size_t u = 0; u < nu; ++u) m.user_means[u] = matrix.user_mean(u);
    m.item_means.resize(ni);
    for (std::size_t i = 0; i < ni; ++i) m.item_means[i] = matrix.item_mean(i);

    const double lr = params.learning_rate, reg = params.regularization;
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        for (const auto& e : matrix.entries()) {
            double* pu = &m.user_factors[e.user * f];
            double* qi = &m.item_factors[e.item * f];
            double dot = 0.0;
            for (std::size_t x = 0; x < f; ++x) dot += pu[x] * qi[x];
            const double err =
                e.rating - (m.global_mean + m.user_bias[e.user] + m.item_bias[e.item] + dot);
            m.user_bias[e.user] += lr * (err - reg * m.user_bias[e.user]);
            m.item_bias[e.item] += lr * (err - reg * m.item_bias[e.item]);
            for (std::size_t x = 0; x < f; ++x) {
                const double pux = pu[x];
                pu[x] += lr * (err * qi[x] - reg * pux);
                qi[x] += lr * (err * pux - reg * qi[x]);
            }
        }
    }
    m.rebuild_index();
    return m;
}

/// Regularized squared-error objective; training must not increase it.
inline double funksvd_objective(const FactorModel& m, const RatingMatrix& matrix) {
    const std::size_t f = static_cast<std::size_t>(m.params.factors);
    double sse = 0.0;
    for (const auto& e : matrix.entries()) {
        const double err = e.rating - m.raw_score(e.user, e.item);
        sse += err * err;
    }
    double penalty = 0.0;
    for (double b : m.user_bias) penalty += b * b;
    for (double b : m.item_bias) penalty += b * b;
    for (double v : m.user_factors) penalty += v * v;
    for (double v : m.item_factors) penalty += v * v;
    (void)f;
    return sse + m.params.regularization * penalty;
}

inline PredictionQ funksvd_predict(const FactorModel& m, const UserId& user, const BookId& item) {
    auto u = m.user_index(user);
    auto i = m.item_index(item);
    if (u && i) return {m.scale.clamp(m.raw_score(*u, *i)), false};
    return detail::fallback_predict(
        m.global_mean, i ? std::optional<double>(m.item_means[*i]) : std::nullopt,
        u ? std::optional<double>(m.user_means[*u]) : std::nullopt);
}

// ---------------------------------------------------------------------------
// KNN with means (user based, Pearson over co-rated items)
// ---------------------------------------------------------------------------

struct KnnParams {
    std::size_t k = 40;
    std::size_t min_support = 1; // minimum co-rated items for a usable similarity
};

namespace detail {

inline std::size_t pearson_over_corated(const RatingMatrix& m, std::size_t a, std::size_t b,
                                        double& sim_out) {
    const auto& ra = m.user_ratings(a);
    const auto& rb = m.user_ratings(b);
    double sx = 0, sy = 0;
    std::vector<std::pair<double, double>> common;
    std::size_t ia = 0, ib = 0;
    while (ia < ra.size() && ib < rb.size()) {
        if (ra[ia].first < rb[ib].first) ++ia;
        else if (rb[ib].first < ra[ia].first) ++ib;
        else {
            common.push_back({ra[ia].second, rb[ib].second});
            sx += ra[ia].second;
            sy += rb[ib].second;
            ++ia;
            ++ib;
        }
    }
    sim_out = 0.0;
    if (common.empty()) return 0;
    const double mx = sx / static_cast<double>(common.size());
    const double my = sy / static_cast<double>(common.size());
    double num = 0, dx = 0, dy = 0;
    for (auto& [x, y] : common) {
        num += (x - mx) * (y - my);
        dx += (x - mx) * (x - mx);
        dy += (y - my) * (y - my);
    }
    const double den = std::sqrt(dx * dy);
    if (den > 0.0) sim_out = num / den;
    return common.size();
}

} // namespace detail

inline PredictionQ knn_means_predict(const RatingMatrix& m, const UserId& user, const BookId& item,
                                     KnnParams params = {}) {
    if (params.k < 1) throw ValidationError("knn: k must be >= 1");
    auto uo = m.user_index(user);
    auto io = m.item_index(item);
    if (!uo || !io)
        return detail::fallback_predict(
            m.global_mean(), io ? std::optional<double>(m.item_mean(*io)) : std::nullopt,
            uo ? std::optional<double>(m.user_mean(*uo)) : std::nullopt);
    const std::size_t u = *uo, i = *io;

    struct Neighbor {
        double sim;
        std::size_t user;
        double rating;
    };
    std::vector<Neighbor> neighbors;
    for (const auto& [v, r] : m.item_ratings(i)) {
        if (v == u) continue;
        double sim = 0.0;
        std::size_t support = detail::pearson_over_corated(m, u, v, sim);
        if (support < params.min_support) continue;
        neighbors.push_back({sim, v, r});
    }
    // most similar first; user index breaks ties deterministically
    std::sort(neighbors.begin(), neighbors.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.user < b.user;
    });
    if (neighbors.size() > params.k) neighbors.resize(params.k);

    double num = 0.0, den = 0.0;
    for (const auto& n : neighbors) {
        num += n.sim * (n.rating - m.user_mean(n.user));
        den += std::fabs(n.sim);
    }
    if (den == 0.0)
        return detail::fallback_predict(m.global_mean(),
                                        m.item_ratings(i).empty()
                                            ? std::nullopt
                                            : std::optional<double>(m.item_mean(i)),
                                        std::optional<double>(m.user_mean(u)));
    return {m.scale().clamp(m.user_mean(u) + num / den), false};
}

// ---------------------------------------------------------------------------
// Weighted SlopeOne
// ---------------------------------------------------------------------------

inline PredictionQ slopeone_predict(const RatingMatrix& m, const UserId& user, const BookId& item) {
    auto uo = m.user_index(user);
    auto io = m.item_index(item);
    if (!uo || !io)
        return detail::fallback_predict(
            m.global_mean(), io ? std::optional<double>(m.item_mean(*io)) : std::nullopt,
            uo ? std::optional<double>(m.user_mean(*uo)) : std::nullopt);
    const std::size_t u = *uo, i = *io;

    double acc = 0.0;
    double weight = 0.0;
    for (const auto& [j, r_uj] : m.user_ratings(u)) {
        if (j == i) continue;
        // co-raters of items i and j
        const auto& ci = m.item_ratings(i);
        const auto& cj = m.item_ratings(j);
        std::size_t a = 0, b = 0;
        std::size_t count = 0;
        double dev_sum = 0.0;
        while (a < ci.size() && b < cj.size()) {
            if (ci[a].first < cj[b].first) ++a;
            else if (cj[b].first < ci[a].first) ++b;
            else {
                dev_sum += ci[a].second - cj[b].second;
                ++count;
                ++a;
                ++b;
            }
        }
        if (count == 0) continue;
        const double dev = dev_sum / static_cast<double>(count);
        acc += static_cast<double>(count) * (r_uj + dev);
        weight += static_cast<double>(count);
    }
    if (weight == 0.0)
        return detail::fallback_predict(m.global_mean(),
                                        m.item_ratings(i).empty()
                                            ? std::nullopt
                                            : std::optional<double>(m.item_mean(i)),
                                        std::optional<double>(m.user_mean(u)));
    return {m.scale().clamp(acc / weight), false};
}

// ---------------------------------------------------------------------------
// CoClustering
// ---------------------------------------------------------------------------

struct CoClusterParams {
    std::size_t user_clusters = 3;
    std::size_t item_clusters = 3;
    int iterations = 20;
    std::uint64_t seed = 0;
};

struct CoClusterModel {
    CoClusterParams params;
    Scale scale;
    double global_mean = 0.0;
    std::vector<std::string> user_ids, item_ids;
    std::vector<std::size_t> user_cluster, item_cluster;
    std::vector<double> cocluster_mean;    // user_clusters * item_clusters
    std::vector<double> user_cluster_mean; // per user cluster
    std::vector<double> item_cluster_mean; // per item cluster
    std::vector<double> user_means, item_means;

    std::optional<std::size_t> user_index(const UserId& id) const { return find(user_map_, id); }
    std::optional<std::size_t> item_index(const BookId& id) const { return find(item_map_, id); }

    void rebuild_index() {
        user_map_.clear();
        item_map_.clear();
        for (std::size_t u = 0; u < user_ids.size(); ++u) user_map_[user_ids[u]] = u;
        for (std::size_t i = 0; i < item_ids.size(); ++i) item_map_[item_ids[i]] = i;
    }

private:
    static std::optional<std::size_t> find(const std::unordered_map<std::string, std::size_t>& m,
                                           const std::string& id) {
        auto it = m.find(id);
        if (it == m.end()) return std::nullopt;
        return it->second;
    }
    std::unordered_map<std::string, std::size_t> user_map_, item_map_;
};

namespace detail {

struct CoClusterStats {
    std::vector<double> coc, ucm, icm;
};

inline CoClusterStats cocluster_stats(const RatingMatrix& m,
                                      const std::vector<std::size_t>& uc,
                                      const std::vector<std::size_t>& ic, std::size_t k,
                                      std::size_t l) {
    std::vector<double> coc_sum(k * l, 0.0), ucm_sum(k, 0.0), icm_sum(l, 0.0);
    std::vector<std::size_t> coc_n(k * l, 0), ucm_n(k, 0), icm_n(l, 0);
    for (const auto& e : m.entries()) {
        const std::size_t g = uc[e.user], h = ic[e.item];
        coc_sum[g * l + h] += e.rating;
        ++coc_n[g * l + h];
        ucm_sum[g] += e.rating;
        ++ucm_n[g];
        icm_sum[h] += e.rating;
        ++icm_n[h];
    }
    CoClusterStats s;
    s.coc.resize(k * l);
    for (std::size_t x = 0; x < k * l; ++x)
        s.coc[x] = coc_n[x] ? coc_sum[x] / static_cast<double>(coc_n[x]) : m.global_mean();
    s.ucm.resize(k);
    for (std::size_t g = 0; g < k; ++g)
        s.ucm[g] = ucm_n[g] ? ucm_sum[g] / static_cast<double>(ucm_n[g]) : m.global_mean();
    s.icm.resize(l);
    for (std::size_t h = 0; h < l; ++h)
        s.icm[h] = icm_n[h] ? icm_sum[h] / static_cast<double>(icm_n[h]) : m.global_mean();
    return s;
}

} // namespace detail

/// Alternating reassignment of user and item clusters minimizing squared
/// error, capped at `iterations` with early stop once assignments are stable.
inline CoClusterModel cocluster_train(const RatingMatrix& matrix, CoClusterParams params) {
    if (matrix.empty()) throw ValidationError("cocluster: cannot train on an empty matrix");
    if (params.user_clusters < 1 || params.item_clusters < 1)
        throw ValidationError("cocluster: cluster counts must be >= 1");

    const std::size_t nu = matrix.n_users(), ni = matrix.n_items();
    const std::size_t k = params.user_clusters, l = params.item_clusters;
    std::mt19937_64 rng(params.seed);
    std::vector<std::size_t> uc(nu), ic(ni);
    for (auto& g : uc) g = static_cast<std::size_t>(stable_below(rng, k));
    for (auto& h : ic) h = static_cast<std::size_t>(stable_below(rng, l));

    for (int iter = 0; iter < params.iterations; ++iter) {
        auto stats = detail::cocluster_stats(matrix, uc, ic, k, l);
        bool changed = false;

        for (std::size_t u = 0; u < nu; ++u) {
            const double mu = matrix.user_mean(u);
            double best_err = std::numeric_limits<double>::infinity();
            std::size_t best_g = uc[u];
            for (std::size_t g = 0; g < k; ++g) {
                double err = 0.0;
                for (const auto& [i, r] : matrix.user_ratings(u)) {
                    const std::size_t h = ic[i];
                    const double est = stats.coc[g * l + h] + (mu - stats.ucm[g]) +
                                       (matrix.item_mean(i) - stats.icm[h]);
                    err += (r - est) * (r - est);
                }
                if (err < best_err) {
                    best_err = err;
                    best_g = g;
                }
            }
            if (best_g != uc[u]) {
                uc[u] = best_g;
                changed = true;
            }
        }

        for (std::size_t i = 0; i < ni; ++i) {
            const double mi = matrix.item_mean(i);
            double best_err = std::numeric_limits<double>::infinity();
            std::size_t best_h = ic[i];
            for (std::size_t h = 0; h < l; ++h) {
                double err = 0.0;
                for (const auto& [u, r] : matrix.item_ratings(i)) {
                    const std::size_t g = uc[u];
                    const double est = stats.coc[g * l + h] +
                                       (matrix.user_mean(u) - stats.ucm[g]) + (mi - stats.icm[h]);
                    err += (r - est) * (r - est);
                }
                if (err < best_err) {
                    best_err = err;
                    best_h = h;
                }
            }
            if (best_h != ic[i]) {
                ic[i] = best_h;
                changed = true;
            }
        }
        if (!changed) break;
    }

    CoClusterModel m;
    m.params = params;
    m.scale = matrix.scale();
    m.global_mean = matrix.global_mean();
    m.user_cluster = std::move(uc);
    m.item_cluster = std::move(ic);
    auto stats = detail::cocluster_stats(matrix, m.user_cluster, m.item_cluster, k, l);
    m.cocluster_mean = std::move(stats.coc);
    m.user_cluster_mean = std::move(stats.ucm);
    m.item_cluster_mean = std::move(stats.icm);
    m.user_ids.reserve(nu);
    for (std::size_t u = 0; u < nu; ++u) m.user_ids.push_back(matrix.user_id(u));
    m.item_ids.reserve(ni);
    for (std::size_t i = 0; i < ni; ++i) m.item_ids.push_back(matrix.item_id(i));
    m.user_means.resize(nu);
    for (std::size_t u = 0; u < nu; ++u) m.user_means[u] = matrix.user_mean(u);
    m.item_means.resize(ni);
    for (std::size_t i = 0; i < ni; ++i) m.item_means[i] = matrix.item_mean(i);
    m.rebuild_index();
    return m;
}

inline PredictionQ cocluster_predict(const CoClusterModel& m, const UserId& user,
                                     const BookId& item) {
    auto u = m.user_index(user);
    auto i = m.item_index(item);
    if (!u || !i)
        return detail::fallback_predict(
            m.global_mean, i ? std::optional<double>(m.item_means[*i]) : std::nullopt,
            u ? std::optional<double>(m.user_means[*u]) : std::nullopt);
    const std::size_t g = m.user_cluster[*u], h = m.item_cluster[*i];
    const std::size_t l = m.params.item_clusters;
    const double est = m.cocluster_mean[g * l + h] + (m.user_means[*u] - m.user_cluster_mean[g]) +
                       (m.item_means[*i] - m.item_cluster_mean[h]);
    return {m.scale.clamp(est), false};
}

// ---------------------------------------------------------------------------
// Model snapshots
// ---------------------------------------------------------------------------

inline nlohmann::json factor_model_to_json(const FactorModel& m) {
    return nlohmann::json{{"format_version", 1},
                          {"kind", "funksvd"},
                          {"factors", m.params.factors},
                          {"learning_rate", m.params.learning_rate},
                          {"regularization", m.params.regularization},
                          {"epochs", m.params.epochs},
                          {"seed", m.params.seed},
                          {"scale", {m.scale.min, m.scale.max}},
                          {"global_mean", m.global_mean},
                          {"user_ids", m.user_ids},
                          {"item_ids", m.item_ids},
                          {"user_factors", m.user_factors},
                          {"item_factors", m.item_factors},
                          {"user_bias", m.user_bias},
                          {"item_bias", m.item_bias},
                          {"user_means", m.user_means},
                          {"item_means", m.item_means}};
}

inline FactorModel factor_model_from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1)
        throw ValidationError("factor model snapshot: unsupported format_version");
    if (j.at("kind").get<std::string>() != "funksvd")
        throw ValidationError("factor model snapshot: wrong kind");
    FactorModel m;
    m.params.factors = j.at("factors").get<int>();
    m.params.learning_rate = j.at("learning_rate").get<double>();
    m.params.regularization = j.at("regularization").get<double>();
    m.params.epochs = j.at("epochs").get<int>();
    m.params.seed = j.at("seed").get<std::uint64_t>();
    m.scale = Scale{j.at("scale").at(0).get<double>(), j.at("scale").at(1).get<double>()};
    m.global_mean = j.at("global_mean").get<double>();
    m.user_ids = j.at("user_ids").get<std::vector<std::string>>();
    m.item_ids = j.at("item_ids").get<std::vector<std::string>>();
    m.user_factors = j.at("user_factors").get<std::vector<double>>();
    m.item_factors = j.at("item_factors").get<std::vector<double>>();
    m.user_bias = j.at("user_bias").get<std::vector<double>>();
    m.item_bias = j.at("item_bias").get<std::vector<double>>();
    m.user_means = j.at("user_means").get<std::vector<double>>();
    m.item_means = j.at("item_means").get<std::vector<double>>();
    m.rebuild_index();
    return m;
}

inline nlohmann::json cocluster_model_to_json(const CoClusterModel& m) {
    return nlohmann::json{{"format_version", 1},
                          {"kind", "cocluster"},
                          {"user_clusters", m.params.user_clusters},
                          {"item_clusters", m.params.item_clusters},
                          {"iterations", m.params.iterations},
                          {"seed", m.params.seed},
                          {"scale", {m.scale.min, m.scale.max}},
                          {"global_mean", m.global_mean},
                          {"user_ids", m.user_ids},
                          {"item_ids", m.item_ids},
                          {"user_cluster", m.user_cluster},
                          {"item_cluster", m.item_cluster},
                          {"cocluster_mean", m.cocluster_mean},
                          {"user_cluster_mean", m.user_cluster_mean},
                          {"item_cluster_mean", m.item_cluster_mean},
                          {"user_means", m.user_means},
                          {"item_means", m.item_means}};
}

inline CoClusterModel cocluster_model_from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1)
        throw ValidationError("cocluster snapshot: unsupported format_version");
    if (j.at("kind").get<std::string>() != "cocluster")
        throw ValidationError("cocluster snapshot: wrong kind");
    CoClusterModel m;
    m.params.user_clusters = j.at("user_clusters").get<std::size_t>();
    m.params.item_clusters = j.at("item_clusters").get<std::size_t>();
    m.params.iterations = j.at("iterations").get<int>();
    m.params.seed = j.at("seed").get<std::uint64_t>();
    m.scale = Scale{j.at("scale").at(0).get<double>(), j.at("scale").at(1).get<double>()};
    m.global_mean = j.at("global_mean").get<double>();
    m.user_ids = j.at("user_ids").get<std::vector<std::string>>();
    m.item_ids = j.at("item_ids").get<std::vector<std::string>>();
    m.user_cluster = j.at("user_cluster").get<std::vector<std::size_t>>();
    m.item_cluster = j.at("item_cluster").get<std::vector<std::size_t>>();
    m.cocluster_mean = j.at("cocluster_mean").get<std::vector<double>>();
    m.user_cluster_mean = j.at("user_cluster_mean").get<std::vector<double>>();
    m.item_cluster_mean = j.at("item_cluster_mean").get<std::vector<double>>();
    m.user_means = j.at("user_means").get<std::vector<double>>();
    m.item_means = j.at("item_means").get<std::vector<double>>();
    m.rebuild_index();
    return m;
}

// ---------------------------------------------------------------------------
// Per-plan evaluation with the leakage guard
// ---------------------------------------------------------------------------

enum class BaselineKind { funksvd, knn_means, slope_one, cocluster };

inline std::string to_string(BaselineKind k) {
    switch (k) {
    case BaselineKind::funksvd: return "funksvd";
    case BaselineKind::knn_means: return "knn_means";
    case BaselineKind::slope_one: return "slope_one";
    case BaselineKind::cocluster: return "cocluster";
    }
    throw Error("unreachable baseline kind");
}

inline BaselineKind baseline_kind_from_string(const std::string& s) {
    if (s == "funksvd") return BaselineKind::funksvd;
    if (s == "knn_means") return BaselineKind::knn_means;
    if (s == "slope_one") return BaselineKind::slope_one;
    if (s == "cocluster") return BaselineKind::cocluster;
    throw ConfigError("unknown baseline model '" + s + "'");
}

struct BaselineParams {
    FunkSvdParams funksvd;
    KnnParams knn;
    CoClusterParams cocluster;
};

/// Trained model handle; KNN and SlopeOne answer queries straight from the
/// training matrix, which must outlive the handle.
struct TrainedBaseline {
    BaselineKind kind = BaselineKind::funksvd;
    const RatingMatrix* matrix = nullptr;
    KnnParams knn_params;
    std::optional<FactorModel> factor;
    std::optional<CoClusterModel> cocluster;

    PredictionQ predict(const UserId& user, const BookId& item) const {
        switch (kind) {
        case BaselineKind::funksvd: return funksvd_predict(*factor, user, item);
        case BaselineKind::knn_means: return knn_means_predict(*matrix, user, item, knn_params);
        case BaselineKind::slope_one: return slopeone_predict(*matrix, user, item);
        case BaselineKind::cocluster: return cocluster_predict(*cocluster, user, item);
        }
        throw Error("unreachable baseline kind");
    }
};

inline TrainedBaseline train_baseline(BaselineKind kind, const RatingMatrix& matrix,
                                      const BaselineParams& params) {
    TrainedBaseline t;
    t.kind = kind;
    t.matrix = &matrix;
    t.knn_params = params.knn;
    if (kind == BaselineKind::funksvd) t.factor = funksvd_train(matrix, params.funksvd);
    if (kind == BaselineKind::cocluster) t.cocluster = cocluster_train(matrix, params.cocluster);
    return t;
}

struct EvalPair {
    std::string item_id;
    double truth = 0.0;
    double predicted = 0.0;
    bool fallback = false;
};

/// Checks the split-plan protocol against the training matrix, then predicts
/// every eval record. Truth values come from the untruncated dataset.
inline std::vector<EvalPair> predict_for_split(const TrainedBaseline& model, const SplitPlan& plan,
                                               const RatingDataset& full) {
    plan.validate();
    const RatingMatrix& train = *model.matrix;
    for (const auto& id : plan.eval_ids)
        if (train.rating(plan.group_key, id))
            throw LeakageError("eval rating (" + plan.group_key + ", " + id +
                               ") found in the training matrix");
    for (const auto& id : plan.prompt_ids)
        if (!train.rating(plan.group_key, id))
            throw ProtocolError("prompt rating (" + plan.group_key + ", " + id +
                                ") missing from the training matrix");
    std::vector<EvalPair> out;
    out.reserve(plan.eval_ids.size());
    for (const auto& id : plan.eval_ids) {
        auto truth = full.find(plan.group_key, id);
        if (!truth)
            throw ValidationError("no ground-truth rating for (" + plan.group_key + ", " + id +
                                  ")");
        PredictionQ p = model.predict(plan.group_key, id);
        out.push_back({id, *truth, p.value, p.fallback});
    }
    return out;
}

inline std::vector<EvalPair> fit_predict_for_split(BaselineKind kind, const SplitPlan& plan,
                                                   const RatingMatrix& train,
                                                   const RatingDataset& full,
                                                   const BaselineParams& params) {
    TrainedBaseline model = train_baseline(kind, train, params);
    return predict_for_split(model, plan, full);
}

} // namespace bookrec
