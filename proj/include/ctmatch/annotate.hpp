#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace ctmatch {

enum class entity_type { disease, drug };
enum class temporality { current, historical };
enum class experiencer { patient, family };

/// Entity section: current medical condition, past medical condition,
/// family medical history.
enum class section { cmc, pmc, fmh };

inline constexpr std::array all_sections{section::cmc, section::pmc, section::fmh};

inline std::string_view to_string(section s)
{
    switch (s) {
    case section::pmc: return "pmc";
    case section::fmh: return "fmh";
    case section::cmc: break;
    }
    return "cmc";
}

inline std::string_view to_string(entity_type t)
{
    return t == entity_type::drug ? "drug" : "disease";
}

struct mention {
    std::string surface;
    std::size_t begin = 0;  ///< byte offset in the source sentence
    std::size_t end = 0;
    entity_type type = entity_type::disease;
    bool negated = false;
    temporality time = temporality::current;
    experiencer who = experiencer::patient;

    /// Lowercase words of the surface joined by single spaces.
    std::string phrase() const { return join(word_texts(surface), " "); }

    friend bool operator==(const mention&, const mention&) = default;
};

/// Phrase lookup over lowercase word sequences with leftmost-longest matching.
template<class Payload>
class phrase_matcher {
public:
    struct hit {
        std::size_t first = 0;  ///< word index range [first, last)
        std::size_t last = 0;
        const Payload* payload = nullptr;
    };

    /// Returns false if the phrase has no words.
    bool add(std::string_view phrase, Payload payload)
    {
        auto words = word_texts(phrase);
        if (words.empty()) {
            return false;
        }
        max_len_ = std::max(max_len_, words.size());
        table_.insert_or_assign(join(words, " "), std::move(payload));
        return true;
    }

    Payload* find(std::string_view phrase)
    {
        auto it = table_.find(join(word_texts(phrase), " "));
        return it == table_.end() ? nullptr : &it->second;
    }

    std::vector<hit> match(const std::vector<word>& words) const
    {
        std::vector<hit> out;
        std::size_t i = 0;
        std::string key;
        while (i < words.size()) {
            std::size_t longest = std::min(max_len_, words.size() - i);
            bool found = false;
            for (std::size_t len = longest; len > 0; --len) {
                key.clear();
                for (std::size_t k = 0; k < len; ++k) {
                    if (k > 0) {
                        key.push_back(' ');
                    }
                    key += words[i + k].text;
                }
                auto it = table_.find(key);
                if (it != table_.end()) {
                    out.push_back({i, i + len, &it->second});
                    i += len;
                    found = true;
                    break;
                }
            }
            if (!found) {
                ++i;
            }
        }
        return out;
    }

    std::size_t size() const noexcept { return table_.size(); }
    bool empty() const noexcept { return table_.empty(); }

private:
    std::unordered_map<std::string, Payload> table_;
    std::size_t max_len_ = 0;
};

/// Dictionary of disease and drug phrases.
class gazetteer {
public:
    struct entry {
        std::string phrase;
        entity_type type;
    };

    gazetteer() = default;

    explicit gazetteer(const std::vector<entry>& entries)
    {
        for (const auto& e : entries) {
            add(e.phrase, e.type);
        }
    }

    /// Throws data_error on an empty or duplicate phrase.
    void add(std::string_view phrase, entity_type type)
    {
        auto normalized = normalize_space(to_lower(phrase));
        if (matcher_.find(normalized) != nullptr) {
            throw data_error("duplicate gazetteer phrase: " + normalized);
        }
        if (!matcher_.add(normalized, type)) {
            throw data_error("empty gazetteer phrase");
        }
        entries_.push_back({normalized, type});
    }

    const std::vector<entry>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }
    const phrase_matcher<entity_type>& matcher() const noexcept { return matcher_; }

    /// TSV: phrase<TAB>disease|drug. Blank lines and '#' comments are skipped.
    static gazetteer parse(std::string_view content)
    {
        gazetteer g;
        auto lines = split_lines(content);
        std::size_t n = 0;
        for (auto raw : lines) {
            ++n;
            auto line = trim(raw);
            if (line.empty() || line.front() == '#') {
                continue;
            }
            auto cols = split_on(line, '\t');
            if (cols.size() != 2) {
                throw format_error("expected phrase<TAB>disease|drug", n);
            }
            auto label = to_lower(trim(cols[1]));
            entity_type t;
            if (label == "disease") {
                t = entity_type::disease;
            } else if (label == "drug") {
                t = entity_type::drug;
            } else {
                throw format_error("unknown entity type '" + label + "'", n);
            }
            try {
                g.add(cols[0], t);
            } catch (const data_error& e) {
                throw format_error(e.what(), n);
            }
        }
        return g;
    }

    static gazetteer load(const std::filesystem::path& path) { return parse(read_file(path)); }

private:
    std::vector<entry> entries_;
    phrase_matcher<entity_type> matcher_;
};

enum class trigger_category { neg_pre, neg_post, pseudo_neg, historical, family, termination };

inline std::string_view to_string(trigger_category c)
{
    switch (c) {
    case trigger_category::neg_pre: return "NegPre";
    case trigger_category::neg_post: return "NegPost";
    case trigger_category::pseudo_neg: return "PseudoNeg";
    case trigger_category::historical: return "Historical";
    case trigger_category::family: return "Family";
    case trigger_category::termination: return "Termination";
    }
    return "";
}

inline std::optional<trigger_category> parse_trigger_category(std::string_view s)
{
    auto v = to_lower(trim(s));
    for (auto c : {trigger_category::neg_pre, trigger_category::neg_post, trigger_category::pseudo_neg,
                   trigger_category::historical, trigger_category::family, trigger_category::termination}) {
        if (v == to_lower(to_string(c))) {
            return c;
        }
    }
    return std::nullopt;
}

/// ConText trigger phrases. One phrase may carry several categories.
class trigger_lexicon {
public:
    struct entry {
        std::string phrase;
        trigger_category category;
        friend bool operator==(const entry&, const entry&) = default;
    };

    trigger_lexicon() = default;

    explicit trigger_lexicon(const std::vector<entry>& entries)
    {
        for (const auto& e : entries) {
            add(e.phrase, e.category);
        }
    }

    /// Duplicate (phrase, category) pairs are rejected.
    void add(std::string_view phrase, trigger_category category)
    {
        auto normalized = normalize_space(to_lower(phrase));
        auto* existing = matcher_.find(normalized);
        if (existing != nullptr) {
            if (std::find(existing->begin(), existing->end(), category) != existing->end()) {
                throw data_error("duplicate trigger: " + normalized + " / " + std::string(to_string(category)));
            }
            existing->push_back(category);
        } else if (!matcher_.add(normalized, std::vector<trigger_category>{category})) {
            throw data_error("empty trigger phrase");
        }
        entries_.push_back({normalized, category});
    }

    const std::vector<entry>& entries() const noexcept { return entries_; }
    const phrase_matcher<std::vector<trigger_category>>& matcher() const noexcept { return matcher_; }

    /// TSV: phrase<TAB>category, category one of NegPre, NegPost, PseudoNeg,
    /// Historical, Family, Termination.
    static trigger_lexicon parse(std::string_view content)
    {
        trigger_lexicon lex;
        std::size_t n = 0;
        for (auto raw : split_lines(content)) {
            ++n;
            auto line = trim(raw);
            if (line.empty() || line.front() == '#') {
                continue;
            }
            auto cols = split_on(line, '\t');
            if (cols.size() != 2) {
                throw format_error("expected phrase<TAB>category", n);
            }
            auto cat = parse_trigger_category(cols[1]);
            if (!cat) {
                throw format_error("unknown trigger category '" + std::string(trim(cols[1])) + "'", n);
            }
            try {
                lex.add(cols[0], *cat);
            } catch (const data_error& e) {
                throw format_error(e.what(), n);
            }
        }
        return lex;
    }

    static trigger_lexicon load(const std::filesystem::path& path) { return parse(read_file(path)); }

private:
    std::vector<entry> entries_;
    phrase_matcher<std::vector<trigger_category>> matcher_;
};

/// The trigger set shipped as data/triggers.tsv.
inline trigger_lexicon default_trigger_lexicon()
{
    using c = trigger_category;
    trigger_lexicon lex;
    for (auto p : {"no", "not", "without", "denies", "denied", "absence of", "free of", "negative for"}) {
        lex.add(p, c::neg_pre);
    }
    for (auto p : {"unlikely", "was ruled out", "is ruled out"}) {
        lex.add(p, c::neg_post);
    }
    for (auto p : {"no increase", "no change", "not only", "gram negative"}) {
        lex.add(p, c::pseudo_neg);
    }
    for (auto p : {"history of", "hx of", "h/o", "past", "previous", "prior", "history"}) {
        lex.add(p, c::historical);
    }
    for (auto p : {"family history", "mother", "father", "sister", "brother", "sibling", "grandmother",
                   "grandfather"}) {
        lex.add(p, c::family);
    }
    for (auto p : {"but", "however", "except", "although", "aside from"}) {
        lex.add(p, c::termination);
    }
    return lex;
}

/// Abbreviations whose trailing period never ends a sentence.
inline const std::unordered_set<std::string>& sentence_abbreviations()
{
    static const std::unordered_set<std::string> set{
        "dr", "mr", "mrs", "ms", "prof", "dx", "hx", "tx", "rx", "sx", "fx", "pt", "pts",
        "vs", "approx", "e.g", "i.e", "cf", "fig", "jr", "sr", "inc",
    };
    return set;
}

/// Splits on '.', '!' or '?' followed by whitespace or end of text, unless the
/// word carrying the period is a known abbreviation. Sentences are trimmed
/// substrings in source order.
inline std::vector<std::string> split_sentences(std::string_view text)
{
    std::vector<std::string> out;
    auto emit = [&](std::size_t b, std::size_t e) {
        auto s = trim(text.substr(b, e - b));
        if (!s.empty()) {
            out.emplace_back(s);
        }
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?') {
            continue;
        }
        std::size_t j = i + 1;
        while (j < text.size() && (text[j] == ')' || text[j] == '"' || text[j] == '\'' || text[j] == ']')) {
            ++j;
        }
        if (j < text.size() && !is_space(text[j])) {
            continue;
        }
        if (c == '.') {
            std::size_t w = i;
            while (w > start && !is_space(text[w - 1]) && text[w - 1] != '(' && text[w - 1] != '[') {
                --w;
            }
            if (sentence_abbreviations().count(to_lower(text.substr(w, i - w))) > 0) {
                continue;
            }
        }
        emit(start, j);
        start = j;
    }
    emit(start, text.size());
    return out;
}

/// Leftmost-longest gazetteer matches on word boundaries, modifiers defaulted.
inline std::vector<mention> extract_mentions(std::string_view sentence, const gazetteer& gaz)
{
    std::vector<mention> out;
    auto words = split_words(sentence);
    for (const auto& h : gaz.matcher().match(words)) {
        mention m;
        m.begin = words[h.first].begin;
        m.end = words[h.last - 1].end;
        m.surface = std::string(sentence.substr(m.begin, m.end - m.begin));
        m.type = *h.payload;
        out.push_back(std::move(m));
    }
    return out;
}

/// Scope limits for trigger propagation.
struct context_options {
    /// Maximum number of words a trigger reaches; unset means sentence-bounded.
    std::optional<std::size_t> max_scope_words;
};

/// Modifier flags for a word range.
struct span_modifiers {
    bool negated = false;
    bool historical = false;
    bool family = false;
};

/// Resolves ConText modifiers for word ranges [first, last) of one sentence.
///
/// Pre triggers (NegPre, Historical, Family) reach forward to the sentence end,
/// NegPost backward to its start. A scope stops at a Termination trigger or at
/// the next trigger of the same category. PseudoNeg phrases win the
/// leftmost-longest match over the negation they contain and have no scope.
/// Triggers overlapping one of the ranges are ignored.
inline std::vector<span_modifiers> resolve_modifiers(const std::vector<word>& words,
                                                     const std::vector<std::pair<std::size_t, std::size_t>>& ranges,
                                                     const trigger_lexicon& triggers,
                                                     const context_options& opts = {})
{
    using tc = trigger_category;
    struct trig {
        std::size_t first;
        std::size_t last;
        const std::vector<tc>* cats;
        bool has(tc c) const { return std::find(cats->begin(), cats->end(), c) != cats->end(); }
    };
    std::vector<trig> trigs;
    for (const auto& h : triggers.matcher().match(words)) {
        bool overlaps = std::any_of(ranges.begin(), ranges.end(), [&](const auto& r) {
            return h.first < r.second && r.first < h.last;
        });
        if (!overlaps) {
            trigs.push_back({h.first, h.last, h.payload});
        }
    }

    const std::size_t limit = opts.max_scope_words.value_or(words.size());
    std::vector<span_modifiers> out(ranges.size());
    auto apply = [&](std::size_t lo, std::size_t hi, tc cat) {
        for (std::size_t r = 0; r < ranges.size(); ++r) {
            if (ranges[r].first >= lo && ranges[r].second <= hi) {
                auto& m = out[r];
                if (cat == tc::neg_pre || cat == tc::neg_post) {
                    m.negated = true;
                } else if (cat == tc::historical) {
                    m.historical = true;
                } else if (cat == tc::family) {
                    m.family = true;
                }
            }
        }
    };

    for (std::size_t t = 0; t < trigs.size(); ++t) {
        for (auto cat : *trigs[t].cats) {
            if (cat == tc::neg_pre || cat == tc::historical || cat == tc::family) {
                std::size_t lo = trigs[t].last;
                std::size_t hi = std::min(words.size(), lo + limit);
                for (std::size_t u = t + 1; u < trigs.size(); ++u) {
                    if (trigs[u].has(tc::termination) || trigs[u].has(cat)) {
                        hi = std::min(hi, trigs[u].first);
                        break;
                    }
                }
                apply(lo, hi, cat);
            } else if (cat == tc::neg_post) {
                std::size_t hi = trigs[t].first;
                std::size_t lo = hi > limit ? hi - limit : 0;
                for (std::size_t u = t; u-- > 0;) {
                    if (trigs[u].has(tc::termination) || trigs[u].has(cat)) {
                        lo = std::max(lo, trigs[u].last);
                        break;
                    }
                }
                apply(lo, hi, cat);
            }
        }
    }
    return out;
}

/// Assigns negation, temporality and experiencer to mentions of `sentence`.
inline std::vector<mention> apply_context(std::string_view sentence, std::vector<mention> mentions,
                                          const trigger_lexicon& triggers, const context_options& opts = {})
{
    auto words = split_words(sentence);
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& m : mentions) {
        std::size_t first = words.size();
        std::size_t last = 0;
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (words[i].begin >= m.begin && words[i].end <= m.end) {
                first = std::min(first, i);
                last = i + 1;
            }
        }
        if (first >= last) {
            first = last = 0;
        }
        ranges.emplace_back(first, last);
    }
    auto mods = resolve_modifiers(words, ranges, triggers, opts);
    for (std::size_t i = 0; i < mentions.size(); ++i) {
        mentions[i].negated = mods[i].negated;
        mentions[i].time = mods[i].historical ? temporality::historical : temporality::current;
        mentions[i].who = mods[i].family ? experiencer::family : experiencer::patient;
    }
    return mentions;
}

/// Family outranks temporality.
inline section classify_section(const mention& m)
{
    if (m.who == experiencer::family) {
        return section::fmh;
    }
    if (m.time == temporality::historical) {
        return section::pmc;
    }
    return section::cmc;
}

/// Flips the negation flag of every mention; an involution.
inline std::vector<mention> swap_exclusion_polarity(std::vector<mention> mentions)
{
    for (auto& m : mentions) {
        m.negated = !m.negated;
    }
    return mentions;
}

/// Extracted keywords split by polarity (affirmative / negated) and section.
struct keyword_set {
    std::vector<std::string> a_cmc, a_pmc, a_fmh;
    std::vector<std::string> n_cmc, n_pmc, n_fmh;

    std::vector<std::string>& list(bool negated, section s)
    {
        switch (s) {
        case section::pmc: return negated ? n_pmc : a_pmc;
        case section::fmh: return negated ? n_fmh : a_fmh;
        case section::cmc: break;
        }
        return negated ? n_cmc : a_cmc;
    }

    const std::vector<std::string>& list(bool negated, section s) const
    {
        return const_cast<keyword_set*>(this)->list(negated, s);
    }

    /// Appends a phrase unless already present in its list.
    void add(std::string phrase, bool negated, section s)
    {
        auto& l = list(negated, s);
        if (!phrase.empty() && std::find(l.begin(), l.end(), phrase) == l.end()) {
            l.push_back(std::move(phrase));
        }
    }

    bool empty() const
    {
        return a_cmc.empty() && a_pmc.empty() && a_fmh.empty() && n_cmc.empty() && n_pmc.empty()
               && n_fmh.empty();
    }

    friend bool operator==(const keyword_set&, const keyword_set&) = default;
};

/// Swaps the polarity of exclusion mentions, then routes every mention to the
/// list chosen by its polarity and section. Inclusion mentions come first.
inline keyword_set build_keyword_set(const std::vector<mention>& inclusion, const std::vector<mention>& exclusion)
{
    keyword_set ks;
    for (const auto& m : inclusion) {
        ks.add(m.phrase(), m.negated, classify_section(m));
    }
    for (const auto& m : swap_exclusion_polarity(exclusion)) {
        ks.add(m.phrase(), m.negated, classify_section(m));
    }
    return ks;
}

/// Which sections contribute enrichment tokens: (c)urrent, (p)ast, (f)amily.
struct enrichment_flags {
    bool current = false;
    bool past = false;
    bool family = false;

    static enrichment_flags all() { return {true, true, true}; }

    bool enabled(section s) const
    {
        switch (s) {
        case section::pmc: return past;
        case section::fmh: return family;
        case section::cmc: break;
        }
        return current;
    }

    bool any() const { return current || past || family; }

    /// Parses a letter set such as "cfp"; the empty string disables all.
    static enrichment_flags parse(std::string_view letters)
    {
        enrichment_flags f;
        for (char c : letters) {
            switch (to_lower(c)) {
            case 'c': f.current = true; break;
            case 'p': f.past = true; break;
            case 'f': f.family = true; break;
            default: throw config_error("unknown enrichment flag '" + std::string(1, c) + "'");
            }
        }
        return f;
    }

    /// Canonical letters in c, p, f order.
    std::string str() const
    {
        std::string s;
        if (current) s += 'c';
        if (past) s += 'p';
        if (family) s += 'f';
        return s;
    }

    friend bool operator==(const enrichment_flags&, const enrichment_flags&) = default;
};

/// Renders `{section}_{no_}?{words}` tokens in the order a_cmc, a_pmc, a_fmh,
/// n_cmc, n_pmc, n_fmh, restricted to the enabled sections.
inline std::vector<std::string> emit_enrichment_tokens(const keyword_set& ks,
                                                       const enrichment_flags& flags = enrichment_flags::all())
{
    std::vector<std::string> out;
    for (bool negated : {false, true}) {
        for (auto s : all_sections) {
            if (!flags.enabled(s)) {
                continue;
            }
            for (const auto& phrase : ks.list(negated, s)) {
                auto words = word_texts(phrase);
                if (words.empty()) {
                    continue;
                }
                std::string token(to_string(s));
                token += negated ? "_no_" : "_";
                token += join(words, "_");
                out.push_back(std::move(token));
            }
        }
    }
    return out;
}

/// A sentence with its resolved mentions.
struct annotated_sentence {
    std::string text;
    std::vector<mention> mentions;
};

struct annotator {
    const gazetteer& gaz;
    const trigger_lexicon& triggers;
    context_options options{};

    std::vector<annotated_sentence> sentences(std::string_view text) const
    {
        std::vector<annotated_sentence> out;
        for (auto& s : split_sentences(text)) {
            auto ms = apply_context(s, extract_mentions(s, gaz), triggers, options);
            out.push_back({std::move(s), std::move(ms)});
        }
        return out;
    }

    std::vector<mention> mentions(std::string_view text) const
    {
        std::vector<mention> out;
        for (auto& s : sentences(text)) {
            out.insert(out.end(), s.mentions.begin(), s.mentions.end());
        }
        return out;
    }

    std::vector<mention> mentions(const std::vector<std::string>& criteria) const
    {
        std::vector<mention> out;
        for (const auto& c : criteria) {
            auto ms = mentions(c);
            out.insert(out.end(), ms.begin(), ms.end());
        }
        return out;
    }
};

}  // namespace ctmatch
