#pragma once

#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "annotate.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "index.hpp"
#include "lifestyle.hpp"
#include "text.hpp"
#include "xml.hpp"

namespace ctmatch {

struct topic_record {
    std::string topic_id;
    std::string text;
    friend bool operator==(const topic_record&, const topic_record&) = default;
};

struct demographics {
    std::optional<double> age_years;
    std::optional<gender> sex;  ///< male or female only
    std::optional<bool> smoker;
    std::optional<bool> drinker;
};

struct patient_topic {
    std::string topic_id;
    std::string text;
    demographics profile;
    keyword_set keywords;
};

/// Reads TREC topic XML (`<topic number="..">text</topic>`) or TSV
/// (`id<TAB>text`). The format is picked from the first non-blank byte.
inline std::vector<topic_record> parse_topics(std::string_view content)
{
    std::vector<topic_record> out;
    std::set<std::string> seen;
    auto body = trim(content);
    if (body.empty()) {
        return out;
    }
    if (body.front() == '<') {
        auto root = xml::parse(content);
        std::vector<const xml::element*> topics;
        if (root.name == "topic") {
            topics.push_back(&root);
        } else {
            for (const auto& c : root.children) {
                if (c.name == "topic") {
                    topics.push_back(&c);
                }
            }
        }
        for (std::size_t i = 0; i < topics.size(); ++i) {
            auto id = std::string(trim(topics[i]->attribute("number")));
            if (id.empty()) {
                throw format_error("topic without number attribute", i + 1);
            }
            if (!seen.insert(id).second) {
                throw format_error("duplicate topic id " + id, i + 1);
            }
            out.push_back({id, std::string(trim(topics[i]->deep_text()))});
        }
        return out;
    }
    auto lines = split_lines(content);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) {
            continue;
        }
        auto tab = lines[n].find('\t');
        if (tab == std::string_view::npos) {
            throw format_error("expected id<TAB>text", n + 1);
        }
        auto id = std::string(trim(lines[n].substr(0, tab)));
        if (id.empty()) {
            throw format_error("empty topic id", n + 1);
        }
        if (!seen.insert(id).second) {
            throw format_error("duplicate topic id " + id, n + 1);
        }
        out.push_back({id, std::string(trim(lines[n].substr(tab + 1)))});
    }
    return out;
}

inline std::vector<topic_record> load_topics(const std::filesystem::path& path)
{
    return parse_topics(read_file(path));
}

namespace detail {

    inline std::optional<double> age_from_unit(double value, std::string unit)
    {
        unit = to_lower(unit);
        double years = value;
        if (unit.starts_with("mo")) {
            years = value / 12.0;
        } else if (unit.starts_with("w")) {
            years = value * 7.0 / 365.25;
        } else if (unit.starts_with("d")) {
            years = value / 365.25;
        }
        if (years < 0.0 || years > 120.0) {
            return std::nullopt;
        }
        return years;
    }

}  // namespace detail

/// Age from "<n> year(s)/yo/y/o/month/week/day" next to a cue word ("old",
/// "man", "infant", ...) or from "age(d) <n>"; the earliest acceptable match
/// wins. Gender by majority of gendered words; ties leave it unset.
inline demographics extract_demographics(std::string_view text, const trigger_lexicon& triggers)
{
    demographics d;
    static const std::regex unit_age(
        R"(\b(\d{1,3}(?:\.\d+)?)[\s-]*(years?|yrs?|months?|weeks?|days?|yo|y/o)\b(?:[\s-]*(old|of age|man|woman|male|female|boy|girl|gentleman|lady|infant|baby|toddler|child|patient|person)\b)?)",
        std::regex::icase);
    static const std::regex aged(R"(\bage[d]?\s*:?\s*(\d{1,3}(?:\.\d+)?)\b)", std::regex::icase);

    std::string s(text);
    std::optional<std::pair<std::ptrdiff_t, double>> best;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), unit_age); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        auto unit = to_lower(m[2].str());
        if (!m[3].matched && unit != "yo" && unit != "y/o") {
            continue;
        }
        double v = 0;
        if (!parse_double(m[1].str(), v)) {
            continue;
        }
        if (auto years = detail::age_from_unit(v, unit)) {
            best = std::pair{m.position(0), *years};
            break;
        }
    }
    for (auto it = std::sregex_iterator(s.begin(), s.end(), aged); it != std::sregex_iterator(); ++it) {
        double v = 0;
        if (parse_double((*it)[1].str(), v) && v <= 120.0) {
            if (!best || it->position(0) < best->first) {
                best = std::pair{it->position(0), v};
            }
            break;
        }
    }
    if (best) {
        d.age_years = best->second;
    }

    static const std::set<std::string> male{"man", "male", "he", "him", "his", "boy", "gentleman", "mr"};
    static const std::set<std::string> female{"woman", "female", "she", "her", "hers", "girl", "lady", "mrs", "ms"};
    int m_count = 0;
    int f_count = 0;
    for (const auto& w : split_words(text)) {
        m_count += male.count(w.text) > 0 ? 1 : 0;
        f_count += female.count(w.text) > 0 ? 1 : 0;
    }
    if (m_count > f_count) {
        d.sex = gender::male;
    } else if (f_count > m_count) {
        d.sex = gender::female;
    }

    d.smoker = habit_status(text, habit::smoking, triggers);
    d.drinker = habit_status(text, habit::drinking, triggers);
    return d;
}

/// Demographics plus the keyword set from every mention of the description.
inline patient_topic analyze_topic(const topic_record& rec, const annotator& ann)
{
    patient_topic t;
    t.topic_id = rec.topic_id;
    t.text = rec.text;
    t.profile = extract_demographics(rec.text, ann.triggers);
    t.keywords = build_keyword_set(ann.mentions(rec.text), {});
    return t;
}

/// Tokenized description followed by enrichment tokens for the enabled sections.
inline token_stream build_query(const patient_topic& topic, const enrichment_flags& flags,
                                const stopword_set& stopwords)
{
    auto out = tokenize(topic.text, stopwords);
    if (flags.any()) {
        auto extra = emit_enrichment_tokens(topic.keywords, flags);
        out.insert(out.end(), extra.begin(), extra.end());
    }
    return out;
}

}  // namespace ctmatch
