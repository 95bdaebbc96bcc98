#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "text.hpp"
#include "xml.hpp"

namespace ctmatch {

enum class gender { all, male, female };

inline std::string_view to_string(gender g)
{
    switch (g) {
    case gender::male: return "Male";
    case gender::female: return "Female";
    case gender::all: break;
    }
    return "All";
}

/// Unknown or empty values normalize to gender::all.
inline gender parse_gender(std::string_view s)
{
    auto v = to_lower(trim(s));
    if (v == "male") {
        return gender::male;
    }
    if (v == "female") {
        return gender::female;
    }
    return gender::all;
}

struct clinical_trial {
    std::string nct_id;
    std::string brief_title;
    std::string official_title;
    std::string summary;
    std::string description;
    std::vector<std::string> conditions;
    std::string criteria_text;
    std::optional<double> min_age;
    std::optional<double> max_age;
    gender eligible_gender = gender::all;
};

struct criteria_lists {
    std::vector<std::string> inclusion;
    std::vector<std::string> exclusion;
};

/// Element paths, relative to the document root, for each trial field.
struct field_names {
    std::string nct_id = "id_info/nct_id";
    std::string brief_title = "brief_title";
    std::string official_title = "official_title";
    std::string summary = "brief_summary";
    std::string description = "detailed_description";
    std::string condition = "condition";
    std::string criteria = "eligibility/criteria/textblock";
    std::string min_age = "eligibility/minimum_age";
    std::string max_age = "eligibility/maximum_age";
    std::string gender = "eligibility/gender";
};

/// Converts "18 Years", "6 Months", "2 Weeks", "10 Days" to fractional years.
/// "N/A", empty strings and unknown units yield nullopt.
inline std::optional<double> parse_age(std::string_view s)
{
    auto fields = split_fields(trim(s));
    if (fields.empty() || fields.size() > 2) {
        return std::nullopt;
    }
    double value = 0;
    if (!parse_double(fields[0], value) || value < 0) {
        return std::nullopt;
    }
    auto unit = fields.size() == 2 ? to_lower(fields[1]) : std::string("years");
    if (unit.ends_with('s')) {
        unit.pop_back();
    }
    if (unit == "year") {
        return value;
    }
    if (unit == "month") {
        return value / 12.0;
    }
    if (unit == "week") {
        return value * 7.0 / 365.25;
    }
    if (unit == "day") {
        return value / 365.25;
    }
    return std::nullopt;
}

namespace detail {

    inline std::string first_text(const xml::element& root, const std::string& path)
    {
        auto hits = root.select(path);
        if (hits.empty()) {
            return {};
        }
        return std::string(trim(hits.front()->deep_text()));
    }

    inline std::string_view strip_item_prefix(std::string_view s)
    {
        static const std::regex enumeration(R"(^(\(?[0-9]{1,3}[.)]|\(?[A-Za-z][.)])(\s+|$))");
        for (;;) {
            s = trim(s);
            if (s.empty()) {
                return s;
            }
            if (s[0] == '-' || s[0] == '*') {
                s.remove_prefix(1);
                continue;
            }
            if (s.starts_with("\xE2\x80\xA2")) {  // U+2022 bullet
                s.remove_prefix(3);
                continue;
            }
            std::match_results<std::string_view::const_iterator> m;
            if (std::regex_search(s.begin(), s.end(), m, enumeration)) {
                s.remove_prefix(static_cast<std::size_t>(m.length(0)));
                continue;
            }
            return s;
        }
    }

    inline const std::regex& inclusion_header()
    {
        static const std::regex re(R"(inclusion\s+criteria\s*:?)", std::regex::icase);
        return re;
    }

    inline const std::regex& exclusion_header()
    {
        static const std::regex re(R"(exclusion\s+criteria\s*:?)", std::regex::icase);
        return re;
    }

    inline bool is_header_only(std::string_view s)
    {
        std::string line(s);
        return std::regex_match(line, inclusion_header()) || std::regex_match(line, exclusion_header());
    }

    /// Inline bullet: glyph with whitespace on both sides, not between two digits
    /// (so "18 - 65 years" stays intact).
    inline bool is_inline_bullet(std::string_view line, std::size_t i, std::size_t glyph_len)
    {
        if (i == 0 || !is_space(line[i - 1])) {
            return false;
        }
        std::size_t after = i + glyph_len;
        if (after < line.size() && !is_space(line[after])) {
            return false;
        }
        std::size_t p = i;
        while (p > 0 && is_space(line[p - 1])) {
            --p;
        }
        std::size_t n = after;
        while (n < line.size() && is_space(line[n])) {
            ++n;
        }
        bool digit_before = p > 0 && line[p - 1] >= '0' && line[p - 1] <= '9';
        bool digit_after = n < line.size() && line[n] >= '0' && line[n] <= '9';
        return !(digit_before && digit_after);
    }

    inline std::vector<std::string> itemize(std::string_view region)
    {
        std::vector<std::string> out;
        auto emit = [&](std::string_view piece) {
            auto item = strip_item_prefix(piece);
            if (item.size() >= 3 && !is_header_only(item)) {
                out.emplace_back(item);
            }
        };
        for (auto line : split_lines(region)) {
            std::size_t start = 0;
            for (std::size_t i = 0; i < line.size(); ++i) {
                std::size_t glyph = 0;
                if (line[i] == '-' || line[i] == '*') {
                    glyph = 1;
                } else if (line.substr(i).starts_with("\xE2\x80\xA2")) {
                    glyph = 3;
                }
                if (glyph > 0 && is_inline_bullet(line, i, glyph)) {
                    emit(line.substr(start, i - start));
                    start = i;
                    i += glyph - 1;
                }
            }
            emit(line.substr(start));
        }
        return out;
    }

}  // namespace detail

/// Splits an eligibility block into inclusion and exclusion criteria.
///
/// The first case-insensitive "inclusion criteria" and "exclusion criteria"
/// headers delimit the two regions; each region is itemized on line breaks and
/// inline bullets, with bullet glyphs and enumerators stripped. Items shorter
/// than 3 characters are dropped. Text without either header yields two empty
/// lists. Every emitted item is a substring of the input.
inline criteria_lists split_criteria(std::string_view text)
{
    criteria_lists out;
    std::match_results<std::string_view::const_iterator> inc;
    std::match_results<std::string_view::const_iterator> exc;
    bool has_inc = std::regex_search(text.begin(), text.end(), inc, detail::inclusion_header());
    bool has_exc = std::regex_search(text.begin(), text.end(), exc, detail::exclusion_header());
    auto pos = [&](const auto& m) { return static_cast<std::size_t>(m.position(0)); };
    auto end = [&](const auto& m) { return static_cast<std::size_t>(m.position(0) + m.length(0)); };

    if (has_inc) {
        std::size_t stop = (has_exc && pos(exc) >= end(inc)) ? pos(exc) : text.size();
        out.inclusion = detail::itemize(text.substr(end(inc), stop - end(inc)));
    }
    if (has_exc) {
        std::size_t stop = (has_inc && pos(inc) >= end(exc)) ? pos(inc) : text.size();
        out.exclusion = detail::itemize(text.substr(end(exc), stop - end(exc)));
    }
    return out;
}

/// Builds a trial from a parsed document root.
inline clinical_trial trial_from_element(const xml::element& root, const field_names& fields = {})
{
    clinical_trial t;
    t.nct_id = detail::first_text(root, fields.nct_id);
    if (t.nct_id.empty()) {
        throw data_error("trial document without " + fields.nct_id);
    }
    t.brief_title = detail::first_text(root, fields.brief_title);
    t.official_title = detail::first_text(root, fields.official_title);
    t.summary = detail::first_text(root, fields.summary);
    t.description = detail::first_text(root, fields.description);
    for (const auto* c : root.select(fields.condition)) {
        auto text = c->deep_text();
        auto v = trim(text);
        if (!v.empty()) {
            t.conditions.emplace_back(v);
        }
    }
    t.criteria_text = detail::first_text(root, fields.criteria);
    t.min_age = parse_age(detail::first_text(root, fields.min_age));
    t.max_age = parse_age(detail::first_text(root, fields.max_age));
    t.eligible_gender = parse_gender(detail::first_text(root, fields.gender));
    if (t.min_age && t.max_age && *t.min_age > *t.max_age) {
        throw data_error(t.nct_id + ": minimum age exceeds maximum age");
    }
    return t;
}

inline clinical_trial parse_trial(std::string_view xml_document, const field_names& fields = {})
{
    return trial_from_element(xml::parse(xml_document), fields);
}

/// Loads every trial under `path`: a directory is walked recursively for *.xml
/// files in sorted path order; a regular file is read as concatenated documents.
inline std::vector<clinical_trial> load_corpus(const std::filesystem::path& path,
                                               const field_names& fields = {})
{
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::recursive_directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".xml") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
    } else if (fs::is_regular_file(path)) {
        files.push_back(path);
    } else {
        throw config_error("corpus not found: " + path.string());
    }

    std::vector<clinical_trial> out;
    std::set<std::string> seen;
    for (const auto& file : files) {
        auto content = read_file(file);
        try {
            for (const auto& root : xml::parse_many(content)) {
                auto t = trial_from_element(root, fields);
                if (!seen.insert(t.nct_id).second) {
                    throw data_error("duplicate nct_id " + t.nct_id);
                }
                out.push_back(std::move(t));
            }
        } catch (const data_error& e) {
            throw data_error(file.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace ctmatch
