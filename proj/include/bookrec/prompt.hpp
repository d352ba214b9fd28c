#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bookrec/types.hpp"

namespace bookrec {

// ---------------------------------------------------------------------------
// Prompt data model
// ---------------------------------------------------------------------------

struct Exemplar {
    std::string title;
    double value = 0.0; // rating or score on the task's scale
};

/// The four-part prompt. `task_description` still contains the literal
/// placeholder "{exemplars}" when exemplars are present; render() is the only
/// place that expands it, which keeps every exemplar in the text exactly once.
struct PromptSpec {
    std::string role_injection;
    std::string task_description;
    std::string task_boundary;
    std::string output_format;
    std::vector<Exemplar> exemplars;
    std::optional<std::int64_t> char_limit;

    void validate(const Scale& scale) const {
        if (role_injection.empty() || task_description.empty() || task_boundary.empty() ||
            output_format.empty())
            throw ValidationError("prompt spec: all four parts must be non-empty");
        for (const auto& ex : exemplars)
            if (!scale.contains(ex.value))
                throw ValidationError("prompt spec: exemplar '" + ex.title + "' rating " +
                                      format_double(ex.value) + " outside scale [" +
                                      format_double(scale.min) + ", " + format_double(scale.max) +
                                      "]");
        if (char_limit && *char_limit <= 0)
            throw ValidationError("prompt spec: char_limit must be positive");

        std::size_t holes = 0;
        for (std::size_t pos = 0;
             (pos = task_description.find("{exemplars}", pos)) != std::string::npos;
             pos += 11)
            ++holes;
        if (!exemplars.empty() && holes != 1)
            throw ValidationError("prompt spec: task description must contain {exemplars} "
                                  "exactly once when exemplars are present");
        if (exemplars.empty() && holes != 0)
            throw ValidationError("prompt spec: stray {exemplars} placeholder in zero-shot prompt");
    }
};

struct RenderedPrompt {
    std::string text;
    std::int64_t token_estimate = 0;
};

// ---------------------------------------------------------------------------
// Token estimation and budget
// ---------------------------------------------------------------------------

/// ceil(code points / 4). Deterministic and provider-independent; the real
/// tokenizer lives behind the provider API and cannot be pinned here.
inline std::int64_t estimate_tokens(std::string_view text) {
    return static_cast<std::int64_t>((utf8_length(text) + 3) / 4);
}

using TokenEstimator = std::function<std::int64_t(std::string_view)>;

constexpr std::int64_t kDefaultTokenBudget = 4096;

/// Throws BudgetError carrying the overshoot when the prompt estimate plus
/// the reserved response tokens exceed the budget. This is the only gate on
/// prompt size; builders never truncate.
inline void check_budget(const RenderedPrompt& prompt, std::int64_t response_reserve,
                         std::int64_t budget = kDefaultTokenBudget) {
    if (response_reserve < 0) throw ValidationError("response_reserve must be >= 0");
    const std::int64_t total = prompt.token_estimate + response_reserve;
    if (total > budget)
        throw BudgetError(total - budget,
                          "prompt over token budget: estimate " +
                              std::to_string(prompt.token_estimate) + " + reserve " +
                              std::to_string(response_reserve) + " exceeds " +
                              std::to_string(budget) + " by " + std::to_string(total - budget));
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

/// One task's template. Placeholders use {name} syntax; the per-task
/// placeholder sets are documented in the shipped template files.
struct PromptTemplate {
    std::string role;
    std::string task;
    std::string boundary;
    std::string format;
    std::string exemplar_header; // prepended to the exemplar block when non-empty
    std::string length_clause;   // boundary insert for restricted-size summaries
};

struct TemplateSet {
    PromptTemplate book_rating;
    PromptTemplate user_pref;
    PromptTemplate summary;

    static TemplateSet builtin();
    static TemplateSet load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;
};

namespace detail {

inline std::string template_to_text(const PromptTemplate& t) {
    std::ostringstream out;
    out << "@role\n" << t.role << "\n@task\n" << t.task << "\n@boundary\n" << t.boundary
        << "\n@format\n" << t.format << "\n";
    if (!t.exemplar_header.empty()) out << "@exemplar_header\n" << t.exemplar_header << "\n";
    if (!t.length_clause.empty()) out << "@length_clause\n" << t.length_clause << "\n";
    return out.str();
}

inline PromptTemplate template_from_text(const std::string& text, const std::string& origin) {
    PromptTemplate t;
    std::string* section = nullptr;
    std::istringstream in(text);
    std::string line;
    auto pick = [&](const std::string& name) -> std::string* {
        if (name == "@role") return &t.role;
        if (name == "@task") return &t.task;
        if (name == "@boundary") return &t.boundary;
        if (name == "@format") return &t.format;
        if (name == "@exemplar_header") return &t.exemplar_header;
        if (name == "@length_clause") return &t.length_clause;
        throw ValidationError(origin + ": unknown template section '" + name + "'");
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] == '@') {
            section = pick(line);
            continue;
        }
        if (!section) {
            if (trim_view(line).empty()) continue;
            throw ValidationError(origin + ": content before first @section marker");
        }
        if (!section->empty()) *section += '\n';
        *section += line;
    }
    if (t.role.empty() || t.task.empty() || t.boundary.empty() || t.format.empty())
        throw ValidationError(origin + ": template must define @role, @task, @boundary, @format");
    return t;
}

} // namespace detail

inline TemplateSet TemplateSet::builtin() {
    TemplateSet s;

    s.book_rating.role = "Assume you are a professional book rating expert.";
    s.book_rating.task =
        "Please rate the book \"{title}\" written by {author}. The rating measures how much "
        "the book is worth recommending to readers: it is a value between {scale_min} and "
        "{scale_max}, and a higher score means the book is more recommended.{exemplar_block}";
    s.book_rating.boundary =
        "Do not explain the rating and do not output any text besides the rating itself.";
    s.book_rating.format =
        "Output only the rating as a number with two decimal places between {scale_min} and "
        "{scale_max}.";
    s.book_rating.exemplar_header =
        "For reference, here are known ratings of other books written by {author}:";

    s.user_pref.role =
        "Assume you are a professional book recommendation expert who models reader "
        "preferences.";
    s.user_pref.task =
        "A reader has rated books they read as follows.{exemplar_block}\n\n"
        "Based on these known preferences, predict the rating this reader would give to each "
        "of the following books:\n{eval_titles}";
    s.user_pref.boundary =
        "Do not explain the predictions and do not output anything besides the list of "
        "scores.";
    s.user_pref.format =
        "Output only a Python-style list of exactly {eval_count} numbers between {scale_min} "
        "and {scale_max}, each with two decimal places, ordered exactly like the numbered "
        "book list above, for example [4.00, 3.50].";
    s.user_pref.exemplar_header = "The reader's known ratings are:";

    s.summary.role =
        "Assume you are a professional book editor who writes book summaries that attract "
        "readers.";
    s.summary.task =
        "Write a summary of the book \"{title}\" written by {author}. The summary should "
        "capture the key content of the book and arouse readers' interest in reading it.";
    s.summary.boundary = "{length_clause}Do not output anything besides the summary text itself.";
    s.summary.format = "Output only the summary as plain text.";
    s.summary.length_clause = "The summary must contain at most {char_limit} characters. ";

    return s;
}

inline TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    auto read_file = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw IoError("cannot open template file: " + p.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    TemplateSet s;
    s.book_rating =
        detail::template_from_text(read_file(dir / "book_rating.tmpl"), "book_rating.tmpl");
    s.user_pref = detail::template_from_text(read_file(dir / "user_pref.tmpl"), "user_pref.tmpl");
    s.summary = detail::template_from_text(read_file(dir / "summary.tmpl"), "summary.tmpl");
    return s;
}

inline void TemplateSet::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    auto write_file = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write template file: " + p.string());
        out << text;
    };
    write_file(dir / "book_rating.tmpl", detail::template_to_text(book_rating));
    write_file(dir / "user_pref.tmpl", detail::template_to_text(user_pref));
    write_file(dir / "summary.tmpl", detail::template_to_text(summary));
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Pure: identical PromptSpec yields byte-identical text. The four parts
/// appear in fixed order separated by blank lines.
inline RenderedPrompt render(const PromptSpec& spec,
                             const TokenEstimator& estimator = estimate_tokens) {
    std::string task = spec.task_description;
    if (!spec.exemplars.empty()) {
        std::string lines;
        for (std::size_t i = 0; i < spec.exemplars.size(); ++i) {
            if (i) lines += '\n';
            lines += '"' + spec.exemplars[i].title + "\": " +
                     format_two_decimals(spec.exemplars[i].value);
        }
        task = replace_all(std::move(task), "{exemplars}", lines);
    }
    RenderedPrompt out;
    out.text = spec.role_injection + "\n\n" + task + "\n\n" + spec.task_boundary + "\n\n" +
               spec.output_format;
    out.token_estimate = estimator(out.text);
    return out;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

inline PromptSpec build_book_rating_prompt(const BookRecord& book,
                                           const std::vector<BookRecord>& exemplar_books,
                                           Scale scale,
                                           const PromptTemplate& tmpl = TemplateSet::builtin().book_rating) {
    for (const auto& ex : exemplar_books)
        if (ex.author != book.author)
            throw ProtocolError("exemplar '" + ex.title + "' by " + ex.author +
                                " does not match target author " + book.author);

    auto fill = [&](std::string text) {
        text = replace_all(std::move(text), "{title}", book.title);
        text = replace_all(std::move(text), "{author}", book.author);
        text = replace_all(std::move(text), "{scale_min}", format_double(scale.min));
        text = replace_all(std::move(text), "{scale_max}", format_double(scale.max));
        return text;
    };

    PromptSpec spec;
    spec.role_injection = fill(tmpl.role);
    std::string block;
    if (!exemplar_books.empty()) block = "\n\n" + fill(tmpl.exemplar_header) + "\n{exemplars}";
    spec.task_description = replace_all(fill(tmpl.task), "{exemplar_block}", block);
    spec.task_boundary = fill(tmpl.boundary);
    spec.output_format = fill(tmpl.format);
    for (const auto& ex : exemplar_books) spec.exemplars.push_back({ex.title, ex.avg_rating});
    spec.validate(scale);
    return spec;
}

inline PromptSpec build_user_pref_prompt(const std::vector<Exemplar>& prompt_items,
                                         const std::vector<std::string>& eval_titles,
                                         Scale scale,
                                         const PromptTemplate& tmpl = TemplateSet::builtin().user_pref) {
    if (eval_titles.empty()) throw ProtocolError("user preference prompt: eval titles empty");
    if (prompt_items.empty())
        throw ProtocolError("user preference prompt: at least one rated exemplar is required");
    for (std::size_t i = 0; i < eval_titles.size(); ++i)
        for (std::size_t j = i + 1; j < eval_titles.size(); ++j)
            if (eval_titles[i] == eval_titles[j])
                throw ProtocolError("duplicate eval title: " + eval_titles[i]);

    std::string eval_list;
    for (std::size_t i = 0; i < eval_titles.size(); ++i) {
        if (i) eval_list += '\n';
        eval_list += std::to_string(i + 1) + ". \"" + eval_titles[i] + '"';
    }

    auto fill = [&](std::string text) {
        text = replace_all(std::move(text), "{scale_min}", format_double(scale.min));
        text = replace_all(std::move(text), "{scale_max}", format_double(scale.max));
        text = replace_all(std::move(text), "{eval_count}", std::to_string(eval_titles.size()));
        return text;
    };

    PromptSpec spec;
    spec.role_injection = fill(tmpl.role);
    std::string task = fill(tmpl.task);
    task = replace_all(std::move(task), "{exemplar_block}",
                       "\n\n" + fill(tmpl.exemplar_header) + "\n{exemplars}");
    spec.task_description = replace_all(std::move(task), "{eval_titles}", eval_list);
    spec.task_boundary = fill(tmpl.boundary);
    spec.output_format = fill(tmpl.format);
    spec.exemplars = prompt_items;
    spec.validate(scale);
    return spec;
}

inline PromptSpec build_summary_prompt(const BookRecord& book,
                                       std::optional<std::int64_t> char_limit,
                                       const PromptTemplate& tmpl = TemplateSet::builtin().summary) {
    if (char_limit && *char_limit <= 0)
        throw ValidationError("summary prompt: char_limit must be positive when present");

    auto fill = [&](std::string text) {
        text = replace_all(std::move(text), "{title}", book.title);
        text = replace_all(std::move(text), "{author}", book.author);
        return text;
    };

    PromptSpec spec;
    spec.role_injection = fill(tmpl.role);
    spec.task_description = fill(tmpl.task);
    std::string clause;
    if (char_limit)
        clause = replace_all(fill(tmpl.length_clause), "{char_limit}", std::to_string(*char_limit));
    spec.task_boundary = replace_all(fill(tmpl.boundary), "{length_clause}", clause);
    spec.output_format = fill(tmpl.format);
    spec.char_limit = char_limit;
    spec.validate(Scale{0.0, 10.0});
    return spec;
}

} // namespace bookrec
