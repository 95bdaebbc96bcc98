#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "annotate.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "text.hpp"

namespace ctmatch {

using token_stream = std::vector<std::string>;
using stopword_set = std::unordered_set<std::string>;

/// One token per line; blank lines and '#' comments ignored.
inline stopword_set parse_stopwords(std::string_view content)
{
    stopword_set out;
    for (auto line : split_lines(content)) {
        auto w = trim(line);
        if (!w.empty() && w.front() != '#') {
            out.insert(to_lower(w));
        }
    }
    return out;
}

inline stopword_set load_stopwords(const std::filesystem::path& path)
{
    return parse_stopwords(read_file(path));
}

/// Lowercases, splits on non-alphanumerics and drops stopwords.
inline token_stream tokenize(std::string_view text, const stopword_set& stopwords)
{
    token_stream out;
    for (auto& w : split_words(text)) {
        if (stopwords.count(w.text) == 0) {
            out.push_back(std::move(w.text));
        }
    }
    return out;
}

enum class trial_section { brief_title, official_title, description, summary, conditions, inclusion, exclusion, criteria };

inline constexpr std::array all_trial_sections{
    trial_section::brief_title, trial_section::official_title, trial_section::description,
    trial_section::summary,     trial_section::conditions,     trial_section::inclusion,
    trial_section::exclusion,   trial_section::criteria,
};

inline std::string_view to_string(trial_section s)
{
    switch (s) {
    case trial_section::brief_title: return "brief_title";
    case trial_section::official_title: return "official_title";
    case trial_section::description: return "description";
    case trial_section::summary: return "summary";
    case trial_section::conditions: return "conditions";
    case trial_section::inclusion: return "inclusion";
    case trial_section::exclusion: return "exclusion";
    case trial_section::criteria: return "criteria";
    }
    return "";
}

inline trial_section parse_trial_section(std::string_view name)
{
    auto v = to_lower(trim(name));
    for (auto s : all_trial_sections) {
        if (v == to_string(s)) {
            return s;
        }
    }
    throw config_error("unknown trial section '" + std::string(name) + "'");
}

/// Which trial sections, in order, form a document, plus enrichment sections.
struct section_config {
    std::vector<trial_section> sections;
    enrichment_flags enrichment;

    static section_config parse(const std::vector<std::string>& names, std::string_view enrichment_letters = "")
    {
        section_config c;
        for (const auto& n : names) {
            c.sections.push_back(parse_trial_section(n));
        }
        if (c.sections.empty()) {
            throw config_error("section config needs at least one section");
        }
        c.enrichment = enrichment_flags::parse(enrichment_letters);
        return c;
    }

    std::vector<std::string> names() const
    {
        std::vector<std::string> out;
        for (auto s : sections) {
            out.emplace_back(to_string(s));
        }
        return out;
    }

    friend bool operator==(const section_config&, const section_config&) = default;
};

/// Raw text of one trial section. Inclusion and exclusion come from
/// split_criteria, items joined by newlines.
inline std::string section_text(const clinical_trial& t, const criteria_lists& criteria, trial_section s)
{
    switch (s) {
    case trial_section::brief_title: return t.brief_title;
    case trial_section::official_title: return t.official_title;
    case trial_section::description: return t.description;
    case trial_section::summary: return t.summary;
    case trial_section::conditions: return join(t.conditions, "\n");
    case trial_section::inclusion: return join(criteria.inclusion, "\n");
    case trial_section::exclusion: return join(criteria.exclusion, "\n");
    case trial_section::criteria: return t.criteria_text;
    }
    return {};
}

struct posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
    friend bool operator==(const posting&, const posting&) = default;
};

struct term_postings {
    std::vector<posting> list;  ///< ascending doc ordinal
    std::uint64_t cf = 0;

    std::uint64_t df() const noexcept { return list.size(); }

    std::uint32_t tf(std::uint32_t doc) const noexcept
    {
        auto it = std::lower_bound(list.begin(), list.end(), doc,
                                   [](const posting& p, std::uint32_t d) { return p.doc < d; });
        return (it != list.end() && it->doc == doc) ? it->tf : 0;
    }

    friend bool operator==(const term_postings&, const term_postings&) = default;
};

/// Immutable inverted index with the collection statistics needed by the
/// BM25+, TF-IDF and In_expB2 scorers.
class inverted_index {
public:
    static constexpr int format_version = 1;

    inverted_index() = default;

    /// Builds from per-document token streams. Throws data_error on duplicate ids.
    static inverted_index from_tokens(const std::vector<std::pair<std::string, token_stream>>& docs,
                                      section_config config = {})
    {
        inverted_index idx;
        idx.config_ = std::move(config);
        std::unordered_set<std::string> seen;
        for (std::size_t d = 0; d < docs.size(); ++d) {
            const auto& [id, tokens] = docs[d];
            if (!seen.insert(id).second) {
                throw data_error("duplicate document id " + id);
            }
            idx.doc_ids_.push_back(id);
            idx.doc_len_.push_back(static_cast<std::uint32_t>(tokens.size()));
            idx.total_len_ += tokens.size();
            std::map<std::string_view, std::uint32_t> counts;
            for (const auto& t : tokens) {
                ++counts[t];
            }
            for (const auto& [term, tf] : counts) {
                auto& p = idx.postings_[std::string(term)];
                p.list.push_back({static_cast<std::uint32_t>(d), tf});
                p.cf += tf;
            }
        }
        return idx;
    }

    std::size_t num_docs() const noexcept { return doc_ids_.size(); }
    double avgdl() const noexcept
    {
        return doc_ids_.empty() ? 0.0 : static_cast<double>(total_len_) / static_cast<double>(doc_ids_.size());
    }
    std::uint64_t total_length() const noexcept { return total_len_; }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    std::uint32_t doc_len(std::size_t doc) const { return doc_len_.at(doc); }
    const section_config& config() const noexcept { return config_; }
    std::size_t num_terms() const noexcept { return postings_.size(); }

    const term_postings* find(std::string_view term) const
    {
        auto it = postings_.find(std::string(term));
        return it == postings_.end() ? nullptr : &it->second;
    }

    std::uint64_t df(std::string_view term) const
    {
        const auto* p = find(term);
        return p ? p->df() : 0;
    }

    std::uint64_t cf(std::string_view term) const
    {
        const auto* p = find(term);
        return p ? p->cf : 0;
    }

    std::optional<std::size_t> ordinal(std::string_view doc_id) const
    {
        for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
            if (doc_ids_[i] == doc_id) {
                return i;
            }
        }
        return std::nullopt;
    }

    std::vector<std::string> terms_sorted() const
    {
        std::vector<std::string> out;
        out.reserve(postings_.size());
        for (const auto& [t, p] : postings_) {
            out.push_back(t);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    nlohmann::json header() const
    {
        return {
            {"format", "ctmatch-index"},
            {"version", format_version},
            {"sections", config_.names()},
            {"enrichment", config_.enrichment.str()},
            {"num_docs", num_docs()},
            {"num_terms", num_terms()},
            {"total_length", total_len_},
            {"avgdl", avgdl()},
        };
    }

    std::string serialize() const;
    static inverted_index deserialize(std::string_view bytes);

    void save(const std::filesystem::path& path) const { write_file(path, serialize()); }
    static inverted_index load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

    friend bool operator==(const inverted_index& a, const inverted_index& b)
    {
        return a.doc_ids_ == b.doc_ids_ && a.doc_len_ == b.doc_len_ && a.total_len_ == b.total_len_
               && a.postings_ == b.postings_ && a.config_ == b.config_;
    }

private:
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_len_;
    std::uint64_t total_len_ = 0;
    std::unordered_map<std::string, term_postings> postings_;
    section_config config_;
};

namespace detail {

    inline constexpr std::string_view index_magic{"CTMIDX\r\n", 8};

    inline void put_u32(std::string& out, std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) {
            out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
        }
    }

    inline void put_u64(std::string& out, std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) {
            out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
        }
    }

    inline void put_str(std::string& out, std::string_view s)
    {
        put_u32(out, static_cast<std::uint32_t>(s.size()));
        out.append(s);
    }

    class byte_reader {
    public:
        explicit byte_reader(std::string_view data) : data_(data) {}

        std::uint64_t uint(int bytes)
        {
            need(static_cast<std::size_t>(bytes));
            std::uint64_t v = 0;
            for (int i = 0; i < bytes; ++i) {
                v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
            }
            pos_ += static_cast<std::size_t>(bytes);
            return v;
        }

        std::string_view bytes(std::size_t n)
        {
            need(n);
            auto s = data_.substr(pos_, n);
            pos_ += n;
            return s;
        }

        std::string_view str() { return bytes(static_cast<std::size_t>(uint(4))); }
        std::size_t pos() const noexcept { return pos_; }
        bool at_end() const noexcept { return pos_ == data_.size(); }

    private:
        void need(std::size_t n) const
        {
            if (data_.size() - pos_ < n) {
                throw parse_error("truncated index file", pos_);
            }
        }

        std::string_view data_;
        std::size_t pos_ = 0;
    };

}  // namespace detail

/// Layout (all integers little-endian):
///   magic "CTMIDX\r\n" | u64 header length | JSON header
///   per document: u32 id length, id bytes, u32 doc length
///   per term, in byte-lexicographic order: u32 term length, term bytes,
///     u32 df, u64 cf, df x (u32 doc ordinal, u32 tf)
inline std::string inverted_index::serialize() const
{
    std::string out(detail::index_magic);
    auto head = header().dump();
    detail::put_u64(out, head.size());
    out += head;
    for (std::size_t d = 0; d < doc_ids_.size(); ++d) {
        detail::put_str(out, doc_ids_[d]);
        detail::put_u32(out, doc_len_[d]);
    }
    for (const auto& term : terms_sorted()) {
        const auto& p = postings_.at(term);
        detail::put_str(out, term);
        detail::put_u32(out, static_cast<std::uint32_t>(p.list.size()));
        detail::put_u64(out, p.cf);
        for (const auto& e : p.list) {
            detail::put_u32(out, e.doc);
            detail::put_u32(out, e.tf);
        }
    }
    return out;
}

inline inverted_index inverted_index::deserialize(std::string_view bytes)
{
    detail::byte_reader in(bytes);
    if (in.bytes(detail::index_magic.size()) != detail::index_magic) {
        throw parse_error("not an index file", 0);
    }
    auto head_len = in.uint(8);
    nlohmann::json head;
    try {
        head = nlohmann::json::parse(in.bytes(static_cast<std::size_t>(head_len)));
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bad index header: ") + e.what(), detail::index_magic.size() + 8);
    }
    if (head.value("format", "") != "ctmatch-index" || head.value("version", 0) != format_version) {
        throw config_error("unsupported index version; rebuild the index");
    }

    inverted_index idx;
    for (const auto& name : head.at("sections").get<std::vector<std::string>>()) {
        idx.config_.sections.push_back(parse_trial_section(name));
    }
    idx.config_.enrichment = enrichment_flags::parse(head.at("enrichment").get<std::string>());
    auto n_docs = head.at("num_docs").get<std::size_t>();
    auto n_terms = head.at("num_terms").get<std::size_t>();
    for (std::size_t d = 0; d < n_docs; ++d) {
        idx.doc_ids_.emplace_back(in.str());
        idx.doc_len_.push_back(static_cast<std::uint32_t>(in.uint(4)));
        idx.total_len_ += idx.doc_len_.back();
    }
    for (std::size_t t = 0; t < n_terms; ++t) {
        std::string term(in.str());
        auto df = in.uint(4);
        term_postings p;
        p.cf = in.uint(8);
        std::uint64_t sum = 0;
        for (std::uint64_t i = 0; i < df; ++i) {
            posting e;
            e.doc = static_cast<std::uint32_t>(in.uint(4));
            e.tf = static_cast<std::uint32_t>(in.uint(4));
            if (e.doc >= n_docs || (!p.list.empty() && e.doc <= p.list.back().doc) || e.tf == 0) {
                throw parse_error("corrupt postings for term " + term, in.pos());
            }
            sum += e.tf;
            p.list.push_back(e);
        }
        if (sum != p.cf) {
            throw parse_error("collection frequency mismatch for term " + term, in.pos());
        }
        idx.postings_.emplace(std::move(term), std::move(p));
    }
    if (!in.at_end() || idx.total_len_ != head.at("total_length").get<std::uint64_t>()) {
        throw parse_error("index body does not match header", in.pos());
    }
    return idx;
}

/// Document token stream: configured sections in order, then enrichment
/// tokens for the enabled entity sections (exempt from stopword removal).
inline token_stream document_tokens(const clinical_trial& trial, const keyword_set& keywords,
                                    const section_config& cfg, const stopword_set& stopwords)
{
    auto criteria = split_criteria(trial.criteria_text);
    token_stream out;
    for (auto s : cfg.sections) {
        auto toks = tokenize(section_text(trial, criteria, s), stopwords);
        out.insert(out.end(), std::make_move_iterator(toks.begin()), std::make_move_iterator(toks.end()));
    }
    if (cfg.enrichment.any()) {
        auto extra = emit_enrichment_tokens(keywords, cfg.enrichment);
        out.insert(out.end(), extra.begin(), extra.end());
    }
    return out;
}

struct annotated_trial {
    clinical_trial trial;
    keyword_set keywords;
};

inline inverted_index build_index(const std::vector<annotated_trial>& trials, const section_config& cfg,
                                  const stopword_set& stopwords)
{
    if (cfg.sections.empty()) {
        throw config_error("section config needs at least one section");
    }
    std::vector<std::pair<std::string, token_stream>> docs;
    docs.reserve(trials.size());
    for (const auto& t : trials) {
        docs.emplace_back(t.trial.nct_id, document_tokens(t.trial, t.keywords, cfg, stopwords));
    }
    return inverted_index::from_tokens(docs, cfg);
}

enum class scoring_model { bm25_plus, tfidf, in_exp_b2 };

inline std::string_view to_string(scoring_model m)
{
    switch (m) {
    case scoring_model::tfidf: return "tfidf";
    case scoring_model::in_exp_b2: return "inexpb2";
    case scoring_model::bm25_plus: break;
    }
    return "bm25plus";
}

inline scoring_model parse_scoring_model(std::string_view name)
{
    auto v = to_lower(trim(name));
    std::erase_if(v, [](char c) { return c == '_' || c == '-' || c == '+'; });
    if (v == "bm25plus" || v == "bm25") {
        return scoring_model::bm25_plus;
    }
    if (v == "tfidf") {
        return scoring_model::tfidf;
    }
    if (v == "inexpb2") {
        return scoring_model::in_exp_b2;
    }
    throw config_error("unknown scoring model '" + std::string(name) + "'");
}

/// Fixed parameters: BM25+ k1=1.5, b=0.75, delta=1; In_expB2 c=1.
struct scoring_params {
    double k1 = 1.5;
    double b = 0.75;
    double delta = 1.0;
    double c = 1.0;
};

/// Contribution of one query term with in-document frequency tf > 0.
inline double term_score(scoring_model model, double qtf, double tf, double dl, double avgdl, double n_docs,
                         double df, double cf, const scoring_params& p = {})
{
    switch (model) {
    case scoring_model::bm25_plus: {
        double idf = std::log((n_docs + 1.0) / df);
        double norm = p.k1 * (1.0 - p.b + p.b * dl / avgdl);
        return qtf * idf * (((p.k1 + 1.0) * tf) / (norm + tf) + p.delta);
    }
    case scoring_model::tfidf:
        return qtf * tf * std::log(n_docs / df);
    case scoring_model::in_exp_b2: {
        double tfn = tf * std::log2(1.0 + p.c * avgdl / dl);
        double n_e = n_docs * (1.0 - std::pow(1.0 - df / n_docs, cf));
        return qtf * ((cf + 1.0) / (df * (tfn + 1.0))) * tfn * std::log2((n_docs + 1.0) / (n_e + 0.5));
    }
    }
    throw config_error("unknown scoring model");
}

/// Query term multiplicities in term order.
inline std::map<std::string, double> query_term_counts(const token_stream& query)
{
    std::map<std::string, double> out;
    for (const auto& t : query) {
        out[t] += 1.0;
    }
    return out;
}

inline double score(scoring_model model, const inverted_index& index, const token_stream& query, std::size_t doc,
                    const scoring_params& params = {})
{
    if (doc >= index.num_docs()) {
        throw data_error("document ordinal out of range");
    }
    double total = 0.0;
    const double n = static_cast<double>(index.num_docs());
    const double dl = index.doc_len(doc);
    for (const auto& [term, qtf] : query_term_counts(query)) {
        const auto* p = index.find(term);
        if (p == nullptr) {
            continue;
        }
        auto tf = p->tf(static_cast<std::uint32_t>(doc));
        if (tf == 0) {
            continue;
        }
        total += term_score(model, qtf, tf, dl, index.avgdl(), n, static_cast<double>(p->df()),
                            static_cast<double>(p->cf), params);
    }
    return total;
}

struct search_hit {
    std::string doc_id;
    double score = 0.0;
    friend bool operator==(const search_hit&, const search_hit&) = default;
};

/// Documents with a positive score, best first, ties by ascending doc id,
/// truncated to k. Accumulates term-at-a-time in the same term order as score().
inline std::vector<search_hit> search(scoring_model model, const inverted_index& index, const token_stream& query,
                                      std::size_t k, const scoring_params& params = {})
{
    if (k == 0) {
        throw config_error("retrieval depth k must be at least 1");
    }
    std::vector<double> acc(index.num_docs(), 0.0);
    std::vector<std::uint32_t> touched;
    std::vector<char> seen(index.num_docs(), 0);
    const double n = static_cast<double>(index.num_docs());
    for (const auto& [term, qtf] : query_term_counts(query)) {
        const auto* p = index.find(term);
        if (p == nullptr) {
            continue;
        }
        for (const auto& e : p->list) {
            acc[e.doc] += term_score(model, qtf, e.tf, index.doc_len(e.doc), index.avgdl(), n,
                                     static_cast<double>(p->df()), static_cast<double>(p->cf), params);
            if (!seen[e.doc]) {
                seen[e.doc] = 1;
                touched.push_back(e.doc);
            }
        }
    }
    std::vector<search_hit> hits;
    for (auto d : touched) {
        if (acc[d] > 0.0) {
            hits.push_back({index.doc_ids()[d], acc[d]});
        }
    }
    auto better = [](const search_hit& a, const search_hit& b) {
        return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    };
    if (hits.size() > k) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), better);
        hits.resize(k);
    } else {
        std::sort(hits.begin(), hits.end(), better);
    }
    return hits;
}

}  // namespace ctmatch
