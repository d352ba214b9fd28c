#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bookrec/common.hpp"

namespace bookrec {

// Opaque identifiers. Kept as strings end to end; only RatingMatrix assigns
// dense indices.
using BookId = std::string;
using UserId = std::string;

struct BookRecord {
    BookId book_id;
    std::string title;
    std::string author;
    double avg_rating = 0.0;      // always on [0, 10]
    std::int64_t num_ratings = 0;

    void validate() const {
        if (title.empty() || author.empty())
            throw ValidationError("book " + book_id + ": title and author must be non-empty");
        if (!(avg_rating >= 0.0 && avg_rating <= 10.0))
            throw ValidationError("book " + book_id + ": avg_rating " + format_double(avg_rating) +
                                  " outside [0,10]");
        if (num_ratings < 0)
            throw ValidationError("book " + book_id + ": num_ratings must be >= 0");
    }
};

struct RatingRecord {
    UserId user_id;
    BookId book_id;
    double rating = 0.0; // on the dataset's declared scale

    void validate(const Scale& scale) const {
        if (!scale.contains(rating))
            throw ValidationError("rating (" + user_id + ", " + book_id + "): " +
                                  format_double(rating) + " outside scale [" +
                                  format_double(scale.min) + ", " + format_double(scale.max) + "]");
    }

    bool operator==(const RatingRecord&) const = default;
};

enum class Genre { novels, essays, poems, dramas };

inline std::string to_string(Genre g) {
    switch (g) {
    case Genre::novels: return "novels";
    case Genre::essays: return "essays";
    case Genre::poems: return "poems";
    case Genre::dramas: return "dramas";
    }
    throw Error("unreachable genre");
}

inline Genre genre_from_string(const std::string& s) {
    if (s == "novels") return Genre::novels;
    if (s == "essays") return Genre::essays;
    if (s == "poems") return Genre::poems;
    if (s == "dramas") return Genre::dramas;
    throw ValidationError("unknown genre '" + s + "' (expected novels|essays|poems|dramas)");
}

struct SummaryRecord {
    BookId book_id;
    Genre genre = Genre::novels;
    std::string source; // e.g. "human" or a model name
    std::string text;
    std::int64_t char_count = 0;

    void validate() const {
        auto actual = static_cast<std::int64_t>(utf8_length(text));
        if (char_count != actual)
            throw ValidationError("summary for " + book_id + " (" + source + "): char_count " +
                                  std::to_string(char_count) + " != actual length " +
                                  std::to_string(actual));
    }
};

struct AnnotationRecord {
    std::string annotator_id;
    BookId book_id;
    std::vector<std::string> ranking; // source labels, best first

    void validate() const {
        if (ranking.empty())
            throw ValidationError("annotation by " + annotator_id + " for " + book_id +
                                  ": empty ranking");
        for (std::size_t i = 0; i < ranking.size(); ++i)
            for (std::size_t j = i + 1; j < ranking.size(); ++j)
                if (ranking[i] == ranking[j])
                    throw ValidationError("annotation by " + annotator_id + " for " + book_id +
                                          ": duplicate source '" + ranking[i] + "'");
    }
};

enum class TaskKind { book_rating, user_pref, summary };

inline std::string to_string(TaskKind k) {
    switch (k) {
    case TaskKind::book_rating: return "book_rating";
    case TaskKind::user_pref: return "user_pref";
    case TaskKind::summary: return "summary";
    }
    throw Error("unreachable task kind");
}

inline TaskKind task_kind_from_string(const std::string& s) {
    if (s == "book_rating") return TaskKind::book_rating;
    if (s == "user_pref") return TaskKind::user_pref;
    if (s == "summary") return TaskKind::summary;
    throw ValidationError("unknown task kind '" + s + "'");
}

/// Deterministic partition of one group's records into a prompt (few-shot)
/// set and an evaluation set.
struct SplitPlan {
    TaskKind task_kind = TaskKind::book_rating;
    std::string group_key; // author or user id
    std::vector<std::string> prompt_ids;
    std::vector<std::string> eval_ids;
    std::uint64_t seed = 0;

    void validate() const {
        if (eval_ids.empty())
            throw ValidationError("split plan for " + group_key + ": eval set empty");
        for (const auto& p : prompt_ids)
            for (const auto& e : eval_ids)
                if (p == e)
                    throw ValidationError("split plan for " + group_key +
                                          ": id in both prompt and eval: " + p);
    }
};

} // namespace bookrec
