#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "bookrec/metrics.hpp"
#include "bookrec/report.hpp"

using namespace bookrec;

namespace {

// Naive reference implementations, kept independent of the library path.

double ref_mae(const std::vector<double>& y, const std::vector<double>& p) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::fabs(y[i] - p[i]);
    return s / double(y.size());
}

double ref_mape(const std::vector<double>& y, const std::vector<double>& p) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::fabs(y[i] - p[i]) / std::fabs(y[i]);
    return s / double(y.size());
}

double ref_rmse(const std::vector<double>& y, const std::vector<double>& p) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - p[i]) * (y[i] - p[i]);
    return std::sqrt(s / double(y.size()));
}

// Brute-force NDCG: explicit DCG/IDCG summation over fully sorted copies.
double ref_ndcg(std::vector<RankedItem> items, std::size_t k) {
    auto by_pred = [](const RankedItem& a, const RankedItem& b) {
        if (a.predicted_score != b.predicted_score) return a.predicted_score > b.predicted_score;
        return a.item_id < b.item_id;
    };
    auto by_truth = [](const RankedItem& a, const RankedItem& b) {
        if (a.true_rating != b.true_rating) return a.true_rating > b.true_rating;
        return a.item_id < b.item_id;
    };
    std::vector<RankedItem> actual = items, ideal = items;
    std::sort(actual.begin(), actual.end(), by_pred);
    std::sort(ideal.begin(), ideal.end(), by_truth);
    auto dcg = [&](const std::vector<RankedItem>& order) {
        double d = 0;
        for (std::size_t pos = 0; pos < std::min(k, order.size()); ++pos)
            d += (std::pow(2.0, order[pos].true_rating) - 1.0) / std::log2(double(pos) + 2.0);
        return d;
    };
    double idcg = dcg(ideal);
    return idcg == 0.0 ? 0.0 : dcg(actual) / idcg;
}

} // namespace

TEST_CASE("mae hand values") {
    CHECK(mae({{3, 4}, {3, 4}}) == 0.0);
    CHECK(mae({{4, 2}, {3, 4}}) == Catch::Approx(1.5).margin(1e-15));
}

TEST_CASE("mape hand values and zero-truth domain error") {
    CHECK(mape({{4, 5}, {4, 5}}) == 0.0);
    CHECK(mape({{4, 5}, {3, 4}}) == Catch::Approx(0.225).margin(1e-15));
    CHECK_THROWS_AS(mape({{4, 0}, {3, 4}}), ValidationError);
}

TEST_CASE("rmse hand values") {
    CHECK(rmse({{4, 2}, {4, 2}}) == 0.0);
    CHECK(rmse({{4, 2}, {3, 4}}) == Catch::Approx(std::sqrt(2.5)).margin(1e-15));
}

TEST_CASE("error metrics: length mismatch and empty rejected") {
    CHECK_THROWS_AS(mae({{1, 2}, {1}}), ValidationError);
    CHECK_THROWS_AS(rmse({{}, {}}), ValidationError);
}

TEST_CASE("error metrics match the naive reference on random series") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t n = 1 + rng() % 100;
        std::vector<double> y(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = 0.5 + stable_unit(rng) * 9.5; // keep truth away from zero for MAPE
            p[i] = stable_unit(rng) * 10.0;
        }
        PairedSeries s{y, p};
        CHECK(mae(s) == Catch::Approx(ref_mae(y, p)).margin(1e-12));
        CHECK(mape(s) == Catch::Approx(ref_mape(y, p)).margin(1e-12));
        CHECK(rmse(s) == Catch::Approx(ref_rmse(y, p)).margin(1e-12));
        CHECK(mae(s) <= rmse(s) + 1e-15);

        // permutation invariance
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t i = n; i > 1; --i)
            std::swap(perm[i - 1], perm[stable_below(rng, i)]);
        std::vector<double> y2(n), p2(n);
        for (std::size_t i = 0; i < n; ++i) {
            y2[i] = y[perm[i]];
            p2[i] = p[perm[i]];
        }
        PairedSeries shuffled{y2, p2};
        CHECK(mae(shuffled) == Catch::Approx(mae(s)).margin(1e-12));
        CHECK(rmse(shuffled) == Catch::Approx(rmse(s)).margin(1e-12));
    }
}

TEST_CASE("ndcg: perfect ranking scores exactly 1") {
    RankedEvalSet set{{{"a", 5, 0.9}, {"b", 4, 0.8}, {"c", 1, 0.1}}};
    CHECK(ndcg_at_k(set, 3) == 1.0);
    CHECK(ndcg_at_k(set, 10) == 1.0);
}

TEST_CASE("ndcg: hand example (b, a, c)") {
    // gains 31, 15, 1; DCG = 15 + 31/log2(3) + 0.5; IDCG = 31 + 15/log2(3) + 0.5
    RankedEvalSet set{{{"a", 5, 0.5}, {"b", 4, 0.9}, {"c", 1, 0.1}}};
    const double dcg = 15.0 + 31.0 / std::log2(3.0) + 0.5;
    const double idcg = 31.0 + 15.0 / std::log2(3.0) + 0.5;
    CHECK(ndcg_at_k(set, 3) == Catch::Approx(dcg / idcg).margin(1e-12));
    CHECK(ndcg_at_k(set, 3) == Catch::Approx(0.8558).margin(5e-4));
}

TEST_CASE("ndcg: k >= n equals full-list ndcg, truncation changes it") {
    RankedEvalSet set{{{"a", 5, 0.1}, {"b", 3, 0.9}, {"c", 2, 0.5}, {"d", 1, 0.7}}};
    CHECK(ndcg_at_k(set, 4) == ndcg_at_k(set, 100));
    CHECK(ndcg_at_k(set, 4) == ref_ndcg(set.items, 4));
}

TEST_CASE("ndcg: matches brute-force oracle on random sets") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t n = 1 + stable_below(rng, 8);
        RankedEvalSet set;
        for (std::size_t i = 0; i < n; ++i)
            set.items.push_back({"i" + std::to_string(i), double(stable_below(rng, 6)),
                                 stable_unit(rng)});
        std::size_t k = 1 + stable_below(rng, 10);
        CHECK(ndcg_at_k(set, k) == Catch::Approx(ref_ndcg(set.items, k)).margin(1e-12));
        CHECK(ndcg_at_k(set, k) >= 0.0);
        CHECK(ndcg_at_k(set, k) <= 1.0 + 1e-12);
    }
}

TEST_CASE("ndcg: invariant under strictly monotone transforms of predictions") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 2 + stable_below(rng, 7);
        RankedEvalSet set;
        for (std::size_t i = 0; i < n; ++i)
            set.items.push_back({"i" + std::to_string(i), double(stable_below(rng, 6)),
                                 stable_unit(rng)});
        double base = ndcg_at_k(set, 5);
        // rank-preserving remap: sort unique scores, assign increasing values
        RankedEvalSet mapped = set;
        std::vector<double> scores;
        for (auto& it : set.items) scores.push_back(it.predicted_score);
        std::sort(scores.begin(), scores.end());
        scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
        std::vector<double> remap(scores.size());
        double acc = -3.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            acc += 0.01 + stable_unit(rng) * 5.0;
            remap[i] = acc;
        }
        for (auto& it : mapped.items) {
            auto pos = std::lower_bound(scores.begin(), scores.end(), it.predicted_score) -
                       scores.begin();
            it.predicted_score = remap[std::size_t(pos)];
        }
        CHECK(ndcg_at_k(mapped, 5) == base);
    }
}

TEST_CASE("ndcg: idcg zero is defined as zero") {
    RankedEvalSet set{{{"a", 0, 0.3}, {"b", 0, 0.6}}};
    CHECK(ndcg_at_k(set, 2) == 0.0);
}

TEST_CASE("ndcg: duplicate items rejected") {
    RankedEvalSet set{{{"a", 1, 0.3}, {"a", 2, 0.6}}};
    CHECK_THROWS_AS(ndcg_at_k(set, 2), ValidationError);
}

TEST_CASE("summary score worked example: weights (3,2,1), freq (10,2,3), N=15") {
    RankTally tally;
    tally.weights = {3, 2, 1};
    tally.annotators = 15;
    tally.freq["modelX"] = {10, 2, 3};
    tally.freq["other1"] = {3, 9, 3};
    tally.freq["other2"] = {2, 4, 9};
    const double score = summary_score(tally, "modelX");
    CHECK(score == Catch::Approx(37.0 / 15.0).margin(1e-12));
    CHECK(score_cell(score) == "2.47");
}

TEST_CASE("summary score: always-first source scores w1; degenerate weights rejected") {
    RankTally tally;
    tally.weights = {3, 2, 1};
    tally.annotators = 5;
    tally.freq["best"] = {5, 0, 0};
    tally.freq["mid"] = {0, 5, 0};
    tally.freq["last"] = {0, 0, 5};
    CHECK(summary_score(tally, "best") == 3.0);

    RankTally flat = tally;
    flat.weights = {1, 1, 1};
    CHECK_THROWS_AS(summary_score(flat, "best"), ValidationError);
}

TEST_CASE("summary score: inconsistent freq columns rejected") {
    RankTally tally;
    tally.weights = {2, 1};
    tally.annotators = 3;
    tally.freq["a"] = {2, 1};
    tally.freq["b"] = {0, 2}; // position 1 sums to 2, not 3
    CHECK_THROWS_AS(summary_score(tally, "a"), ValidationError);
}

TEST_CASE("tally_from_annotations: single annotator and symmetry") {
    std::vector<AnnotationRecord> annots{{"a1", "b1", {"human", "modelA", "modelB"}}};
    auto tallies = tally_from_annotations(annots, {3, 2, 1});
    CHECK(summary_score(tallies.at("b1"), "human") == 3.0);
    CHECK(summary_score(tallies.at("b1"), "modelA") == 2.0);
    CHECK(summary_score(tallies.at("b1"), "modelB") == 1.0);

    std::vector<AnnotationRecord> opposite{{"a1", "b2", {"x", "y"}}, {"a2", "b2", {"y", "x"}}};
    auto t2 = tally_from_annotations(opposite, {2, 1});
    CHECK(summary_score(t2.at("b2"), "x") == 1.5);
    CHECK(summary_score(t2.at("b2"), "y") == 1.5);
}

TEST_CASE("tally_from_annotations: inconsistent candidate sets name the book") {
    std::vector<AnnotationRecord> annots{{"a1", "bookZ", {"x", "y"}}, {"a2", "bookZ", {"x", "z"}}};
    CHECK_THROWS_WITH(tally_from_annotations(annots, {2, 1}),
                      Catch::Matchers::ContainsSubstring("bookZ"));
}

TEST_CASE("score conservation: totals equal sum of weights") {
    std::mt19937_64 rng(5);
    std::vector<std::string> sources{"s1", "s2", "s3", "s4"};
    std::vector<AnnotationRecord> annots;
    for (int a = 0; a < 9; ++a) {
        auto perm = sources;
        for (std::size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[stable_below(rng, i)]);
        annots.push_back({"annot" + std::to_string(a), "book", perm});
    }
    auto weights = default_rank_weights(4);
    auto tallies = tally_from_annotations(annots, weights);
    double total = 0;
    for (const auto& s : sources) total += summary_score(tallies.at("book"), s);
    CHECK(total == Catch::Approx(4 + 3 + 2 + 1).margin(1e-12));
}

TEST_CASE("relative change reproduces the published arithmetic") {
    CHECK(format_relative_change(relative_change(0.682, 0.441)) == "↓35.34%");
    CHECK(format_relative_change(relative_change(0.886, 0.538)) == "↓39.28%");
    CHECK(format_relative_change(relative_change(0.5, 0.5)) == "0.00%");
    CHECK(format_relative_change(relative_change(0.5, 0.6)) == "↑20.00%");
    CHECK_THROWS_AS(relative_change(0.0, 1.0), ValidationError);
}
