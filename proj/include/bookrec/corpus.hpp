#pragma once

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "bookrec/csv.hpp"
#include "bookrec/types.hpp"

namespace bookrec {

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct RatingDataset {
    std::vector<RatingRecord> records;
    Scale scale;

    std::optional<double> find(const UserId& user, const BookId& book) const {
        auto it = index_.find(user + '\x1f' + book);
        if (it == index_.end()) return std::nullopt;
        return records[it->second].rating;
    }

    void rebuild_index() {
        index_.clear();
        index_.reserve(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            auto key = records[i].user_id + '\x1f' + records[i].book_id;
            if (!index_.emplace(std::move(key), i).second)
                throw ValidationError("duplicate rating for (" + records[i].user_id + ", " +
                                      records[i].book_id + ")");
        }
    }

private:
    std::unordered_map<std::string, std::size_t> index_;
};

struct BookDataset {
    std::vector<BookRecord> records;

    const BookRecord* by_id(const BookId& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &records[it->second];
    }

    void rebuild_index() {
        index_.clear();
        index_.reserve(records.size());
        for (std::size_t i = 0; i < records.size(); ++i)
            if (!index_.emplace(records[i].book_id, i).second)
                throw ValidationError("duplicate book_id: " + records[i].book_id);
    }

private:
    std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Field name -> column name in the source file. GoodBooks and Douban dumps
/// order and name their columns differently, so the mapping is configuration.
using ColumnMap = std::map<std::string, std::string>;

namespace detail {

inline double parse_decimal(const std::string& field, const std::string& origin, std::size_t line) {
    const std::string t = trim(field);
    if (t.empty())
        throw ValidationError(origin + ": line " + std::to_string(line) + ": empty numeric field");
    const char* begin = t.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + t.size())
        throw ValidationError(origin + ": line " + std::to_string(line) +
                              ": malformed number '" + field + "'");
    return v;
}

inline std::int64_t parse_integer(const std::string& field, const std::string& origin,
                                  std::size_t line) {
    const std::string t = trim(field);
    if (t.empty())
        throw ValidationError(origin + ": line " + std::to_string(line) + ": empty integer field");
    const char* begin = t.c_str();
    char* end = nullptr;
    long long v = std::strtoll(begin, &end, 10);
    if (end != begin + t.size())
        throw ValidationError(origin + ": line " + std::to_string(line) +
                              ": malformed integer '" + field + "'");
    return v;
}

inline const std::string& mapped_column(const ColumnMap& map, const std::string& field) {
    auto it = map.find(field);
    if (it == map.end())
        throw ConfigError("column map is missing an entry for field '" + field + "'");
    return it->second;
}

} // namespace detail

inline ColumnMap default_rating_columns() {
    return {{"user_id", "user_id"}, {"book_id", "book_id"}, {"rating", "rating"}};
}

inline ColumnMap default_book_columns() {
    return {{"book_id", "book_id"},
            {"title", "title"},
            {"author", "author"},
            {"avg_rating", "avg_rating"},
            {"num_ratings", "num_ratings"}};
}

inline RatingDataset load_ratings(const std::string& path, const ColumnMap& columns,
                                  Scale scale, std::vector<std::string>* warnings = nullptr) {
    CsvTable table = read_csv(path);
    RatingDataset ds;
    ds.scale = scale;
    if (table.header.empty() && table.rows.empty()) {
        if (warnings) warnings->push_back(path + ": empty ratings file, loaded 0 records");
        return ds;
    }
    std::size_t c_user = table.column_index(detail::mapped_column(columns, "user_id"));
    std::size_t c_book = table.column_index(detail::mapped_column(columns, "book_id"));
    std::size_t c_rating = table.column_index(detail::mapped_column(columns, "rating"));
    ds.records.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        if (row.size() != table.header.size())
            throw ValidationError(path + ": line " + std::to_string(line) + ": expected " +
                                  std::to_string(table.header.size()) + " fields, got " +
                                  std::to_string(row.size()));
        RatingRecord rec;
        rec.user_id = row[c_user];
        rec.book_id = row[c_book];
        rec.rating = detail::parse_decimal(row[c_rating], path, line);
        rec.validate(scale);
        ds.records.push_back(std::move(rec));
    }
    if (ds.records.empty() && warnings)
        warnings->push_back(path + ": empty ratings file, loaded 0 records");
    ds.rebuild_index(); // rejects duplicate (user, book) pairs
    return ds;
}

inline BookDataset load_books(const std::string& path, const ColumnMap& columns,
                              std::vector<std::string>* warnings = nullptr) {
    CsvTable table = read_csv(path);
    BookDataset ds;
    if (table.header.empty() && table.rows.empty()) {
        if (warnings) warnings->push_back(path + ": empty books file, loaded 0 records");
        return ds;
    }
    std::size_t c_id = table.column_index(detail::mapped_column(columns, "book_id"));
    std::size_t c_title = table.column_index(detail::mapped_column(columns, "title"));
    std::size_t c_author = table.column_index(detail::mapped_column(columns, "author"));
    std::size_t c_avg = table.column_index(detail::mapped_column(columns, "avg_rating"));
    std::size_t c_num = table.column_index(detail::mapped_column(columns, "num_ratings"));
    ds.records.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        if (row.size() != table.header.size())
            throw ValidationError(path + ": line " + std::to_string(line) + ": expected " +
                                  std::to_string(table.header.size()) + " fields, got " +
                                  std::to_string(row.size()));
        BookRecord rec;
        rec.book_id = row[c_id];
        rec.title = row[c_title];
        rec.author = row[c_author];
        rec.avg_rating = detail::parse_decimal(row[c_avg], path, line);
        rec.num_ratings = detail::parse_integer(row[c_num], path, line);
        rec.validate();
        ds.records.push_back(std::move(rec));
    }
    if (ds.records.empty() && warnings)
        warnings->push_back(path + ": empty books file, loaded 0 records");
    ds.rebuild_index();
    return ds;
}

// Canonical writers; a written dataset re-loads to identical records.
inline void save_ratings(const std::string& path, const RatingDataset& ds) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(ds.records.size());
    for (const auto& r : ds.records)
        rows.push_back({r.user_id, r.book_id, format_double(r.rating)});
    write_csv(path, {"user_id", "book_id", "rating"}, rows);
}

inline void save_books(const std::string& path, const BookDataset& ds) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(ds.records.size());
    for (const auto& b : ds.records)
        rows.push_back({b.book_id, b.title, b.author, format_double(b.avg_rating),
                        std::to_string(b.num_ratings)});
    write_csv(path, {"book_id", "title", "author", "avg_rating", "num_ratings"}, rows);
}

// ---------------------------------------------------------------------------
// Line-delimited summary and annotation files
// ---------------------------------------------------------------------------

inline std::vector<SummaryRecord> load_summaries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open summaries file: " + path);
    std::vector<SummaryRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + ": line " + std::to_string(line_no) + ": " + e.what());
        }
        SummaryRecord rec;
        rec.book_id = j.at("book_id").get<std::string>();
        rec.genre = genre_from_string(j.at("genre").get<std::string>());
        rec.source = j.at("source").get<std::string>();
        rec.text = j.at("text").get<std::string>();
        if (j.contains("char_count"))
            rec.char_count = j.at("char_count").get<std::int64_t>();
        else
            rec.char_count = static_cast<std::int64_t>(utf8_length(rec.text));
        rec.validate();
        out.push_back(std::move(rec));
    }
    return out;
}

inline void save_summaries(const std::string& path, const std::vector<SummaryRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write summaries file: " + path);
    for (const auto& r : records) {
        nlohmann::json j{{"book_id", r.book_id},
                         {"genre", to_string(r.genre)},
                         {"source", r.source},
                         {"text", r.text},
                         {"char_count", r.char_count}};
        out << j.dump() << '\n';
    }
}

inline std::vector<AnnotationRecord> load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open annotations file: " + path);
    std::vector<AnnotationRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + ": line " + std::to_string(line_no) + ": " + e.what());
        }
        AnnotationRecord rec;
        rec.annotator_id = j.at("annotator_id").get<std::string>();
        rec.book_id = j.at("book_id").get<std::string>();
        rec.ranking = j.at("ranking").get<std::vector<std::string>>();
        rec.validate();
        out.push_back(std::move(rec));
    }
    return out;
}

inline void save_annotations(const std::string& path, const std::vector<AnnotationRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write annotations file: " + path);
    for (const auto& r : records) {
        nlohmann::json j{{"annotator_id", r.annotator_id},
                         {"book_id", r.book_id},
                         {"ranking", r.ranking}};
        out << j.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Filtering and grouping
// ---------------------------------------------------------------------------

/// Books with strictly more than `min_ratings` ratings, input order preserved.
inline BookDataset filter_popular_books(const BookDataset& books, std::int64_t min_ratings) {
    if (min_ratings < 0) throw ValidationError("min_ratings must be >= 0");
    BookDataset out;
    for (const auto& b : books.records)
        if (b.num_ratings > min_ratings) out.records.push_back(b);
    out.rebuild_index();
    return out;
}

/// Groups sorted by key so downstream iteration is independent of file order.
inline std::vector<std::pair<std::string, std::vector<BookRecord>>>
group_books_by_author(const BookDataset& books) {
    std::map<std::string, std::vector<BookRecord>> groups;
    for (const auto& b : books.records) groups[b.author].push_back(b);
    return {groups.begin(), groups.end()};
}

inline std::vector<std::pair<std::string, std::vector<RatingRecord>>>
group_ratings_by_user(const RatingDataset& ratings) {
    std::map<std::string, std::vector<RatingRecord>> groups;
    for (const auto& r : ratings.records) groups[r.user_id].push_back(r);
    return {groups.begin(), groups.end()};
}

// ---------------------------------------------------------------------------
// Split plans
// ---------------------------------------------------------------------------

/// Prompt-set size for the book rating task. Exact rational arithmetic: the
/// floor of 1/3 * 6 must be 2, which naive double math gets wrong.
enum class AuthorShot { zero, one_third, two_thirds };

inline std::string to_string(AuthorShot s) {
    switch (s) {
    case AuthorShot::zero: return "0";
    case AuthorShot::one_third: return "1/3";
    case AuthorShot::two_thirds: return "2/3";
    }
    throw Error("unreachable shot");
}

inline AuthorShot author_shot_from_string(const std::string& s) {
    if (s == "0" || s == "zero") return AuthorShot::zero;
    if (s == "1/3") return AuthorShot::one_third;
    if (s == "2/3") return AuthorShot::two_thirds;
    throw ConfigError("invalid book-rating shot fraction '" + s + "' (expected 0, 1/3 or 2/3)");
}

inline SplitPlan make_author_split(const std::string& author,
                                   const std::vector<BookRecord>& author_books,
                                   AuthorShot shot, std::uint64_t seed) {
    const std::size_t n = author_books.size();
    SplitPlan plan;
    plan.task_kind = TaskKind::book_rating;
    plan.group_key = author;
    plan.seed = seed;

    std::size_t prompt_count = 0;
    if (shot != AuthorShot::zero) {
        if (n < 2)
            throw IneligibleError("author '" + author + "' has " + std::to_string(n) +
                                  " book(s); few-shot needs at least 2");
        const std::size_t num = (shot == AuthorShot::one_third) ? 1 : 2;
        prompt_count = std::max<std::size_t>(1, n * num / 3);
    }

    std::vector<std::size_t> picks = stable_sample(n, prompt_count, seed);
    std::vector<bool> in_prompt(n, false);
    for (std::size_t i : picks) {
        plan.prompt_ids.push_back(author_books[i].book_id);
        in_prompt[i] = true;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!in_prompt[i]) plan.eval_ids.push_back(author_books[i].book_id);
    plan.validate();
    return plan;
}

inline SplitPlan make_user_split(const std::string& user,
                                 const std::vector<RatingRecord>& history,
                                 std::size_t k, std::uint64_t seed) {
    if (k < 1) throw ValidationError("make_user_split: k must be >= 1");
    const std::size_t n = history.size();
    if (n <= k)
        throw IneligibleError("user '" + user + "' has " + std::to_string(n) +
                              " rating(s); " + std::to_string(k) + "-shot needs more than " +
                              std::to_string(k));
    SplitPlan plan;
    plan.task_kind = TaskKind::user_pref;
    plan.group_key = user;
    plan.seed = seed;

    std::vector<std::size_t> picks = stable_sample(n, k, seed);
    std::vector<bool> in_prompt(n, false);
    for (std::size_t i : picks) {
        plan.prompt_ids.push_back(history[i].book_id);
        in_prompt[i] = true;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!in_prompt[i]) plan.eval_ids.push_back(history[i].book_id);
    plan.validate();
    return plan;
}

// Split-plan persistence (one JSON object per line).

inline void save_split_plans(const std::string& path, const std::vector<SplitPlan>& plans) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write split plans: " + path);
    for (const auto& p : plans) {
        nlohmann::json j{{"task_kind", to_string(p.task_kind)},
                         {"group_key", p.group_key},
                         {"prompt_ids", p.prompt_ids},
                         {"eval_ids", p.eval_ids},
                         {"seed", p.seed}};
        out << j.dump() << '\n';
    }
}

inline std::vector<SplitPlan> load_split_plans(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open split plans: " + path);
    std::vector<SplitPlan> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + ": line " + std::to_string(line_no) + ": " + e.what());
        }
        SplitPlan p;
        p.task_kind = task_kind_from_string(j.at("task_kind").get<std::string>());
        p.group_key = j.at("group_key").get<std::string>();
        p.prompt_ids = j.at("prompt_ids").get<std::vector<std::string>>();
        p.eval_ids = j.at("eval_ids").get<std::vector<std::string>>();
        p.seed = j.at("seed").get<std::uint64_t>();
        p.validate();
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace bookrec
