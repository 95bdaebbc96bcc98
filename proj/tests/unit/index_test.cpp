#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "ctmatch/index.hpp"
#include "support.hpp"

using namespace ctmatch;

namespace {

const stopword_set& shipped_stopwords()
{
    static const auto s = load_stopwords(test_support::data_dir() / "stopwords.txt");
    return s;
}

inverted_index index_of(const std::vector<std::vector<std::string>>& docs)
{
    std::vector<std::pair<std::string, token_stream>> in;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        in.emplace_back("D" + std::to_string(i + 1), docs[i]);
    }
    return inverted_index::from_tokens(in, section_config::parse({"brief_title"}));
}

constexpr scoring_model all_models[] = {scoring_model::bm25_plus, scoring_model::tfidf, scoring_model::in_exp_b2};

}  // namespace

TEST(tokenize, removes_stopwords_and_punctuation)
{
    EXPECT_EQ(tokenize("The patient, aged 41.", shipped_stopwords()), (token_stream{"patient", "aged", "41"}));
    EXPECT_TRUE(tokenize("", shipped_stopwords()).empty());
    EXPECT_EQ(tokenize("ECOG≤2", shipped_stopwords()), (token_stream{"ecog", "2"}));
}

TEST(tokenize, shipped_stopword_list_is_the_standard_english_set)
{
    EXPECT_EQ(shipped_stopwords().size(), 179u);
    for (auto w : {"the", "and", "of", "no", "not", "with", "is"}) {
        EXPECT_EQ(shipped_stopwords().count(w), 1u) << w;
    }
}

TEST(index, counts_for_single_document)
{
    auto idx = index_of({{"aspirin", "aspirin", "heart"}});
    EXPECT_EQ(idx.num_docs(), 1u);
    EXPECT_EQ(idx.cf("aspirin"), 2u);
    EXPECT_EQ(idx.df("aspirin"), 1u);
    EXPECT_EQ(idx.doc_len(0), 3u);
    EXPECT_DOUBLE_EQ(idx.avgdl(), 3.0);
}

TEST(index, disjoint_documents_have_df_one)
{
    auto idx = index_of({{"a", "b"}, {"c", "d", "d"}});
    for (const auto& t : idx.terms_sorted()) {
        EXPECT_EQ(idx.df(t), 1u) << t;
    }
}

TEST(index, enrichment_tokens_are_indexed)
{
    clinical_trial t;
    t.nct_id = "NCT1";
    t.brief_title = "Tearing study";
    keyword_set ks;
    ks.n_cmc = {"tearing"};
    auto idx = build_index({{t, ks}}, section_config::parse({"brief_title"}, "c"), shipped_stopwords());
    EXPECT_EQ(idx.df("cmc_no_tearing"), 1u);
    auto plain = build_index({{t, ks}}, section_config::parse({"brief_title"}), shipped_stopwords());
    EXPECT_EQ(plain.df("cmc_no_tearing"), 0u);
}

TEST(index, enrichment_tokens_bypass_stopwords)
{
    clinical_trial t;
    t.nct_id = "NCT1";
    t.brief_title = "x";
    keyword_set ks;
    ks.a_cmc = {"no"};
    auto idx = build_index({{t, ks}}, section_config::parse({"brief_title"}, "c"), shipped_stopwords());
    EXPECT_EQ(idx.df("cmc_no"), 1u);
}

TEST(index, duplicate_document_id_is_rejected)
{
    EXPECT_THROW(inverted_index::from_tokens({{"A", {"x"}}, {"A", {"y"}}}), data_error);
}

TEST(index, section_selection_uses_criteria_split)
{
    clinical_trial t;
    t.nct_id = "NCT1";
    t.criteria_text = "Inclusion Criteria:\n- asthma\nExclusion Criteria:\n- pregnancy";
    auto inc = build_index({{t, {}}}, section_config::parse({"inclusion"}), shipped_stopwords());
    auto exc = build_index({{t, {}}}, section_config::parse({"exclusion"}), shipped_stopwords());
    EXPECT_EQ(inc.df("asthma"), 1u);
    EXPECT_EQ(inc.df("pregnancy"), 0u);
    EXPECT_EQ(exc.df("pregnancy"), 1u);
    EXPECT_EQ(exc.df("asthma"), 0u);
}

TEST(index, unknown_section_name_is_a_config_error)
{
    EXPECT_THROW(section_config::parse({"eligibility"}), config_error);
    EXPECT_THROW(section_config::parse({}), config_error);
}

TEST(index, save_load_round_trip)
{
    test_support::temp_dir dir("index");
    auto idx = index_of({{"a", "b", "b"}, {"b", "c"}, {"z"}});
    idx.save(dir / "i.bin");
    auto back = inverted_index::load(dir / "i.bin");
    EXPECT_TRUE(back == idx);
    EXPECT_EQ(back.header(), idx.header());
    EXPECT_EQ(back.serialize(), idx.serialize());
}

TEST(index, serialization_is_independent_of_insertion_history)
{
    auto a = index_of({{"b", "a"}, {"c"}});
    auto b = index_of({{"a", "b"}, {"c"}});
    EXPECT_EQ(a.serialize(), b.serialize());
}

TEST(index, corrupt_or_foreign_files_are_rejected)
{
    auto bytes = index_of({{"a", "b"}}).serialize();
    EXPECT_THROW(inverted_index::deserialize("not an index"), data_error);
    EXPECT_THROW(inverted_index::deserialize(bytes.substr(0, bytes.size() - 3)), data_error);
    auto bumped = bytes;
    auto pos = bumped.find("\"version\":1");
    ASSERT_NE(pos, std::string::npos);
    bumped[pos + 10] = '7';
    EXPECT_THROW(inverted_index::deserialize(bumped), config_error);
}

TEST(index, header_records_configuration)
{
    auto idx = inverted_index::from_tokens({{"A", {"x"}}}, section_config::parse({"summary", "inclusion"}, "pc"));
    auto h = idx.header();
    EXPECT_EQ(h["sections"], nlohmann::json({"summary", "inclusion"}));
    EXPECT_EQ(h["enrichment"], "cp");
    EXPECT_EQ(h["version"], 1);
}

TEST(index, property_df_bounded_by_n_and_cf)
{
    std::mt19937 rng(3);
    for (int round = 0; round < 100; ++round) {
        std::vector<std::vector<std::string>> docs(1 + rng() % 8);
        for (auto& d : docs) {
            for (std::size_t i = 0; i < rng() % 10; ++i) {
                d.push_back(std::string(1, static_cast<char>('a' + rng() % 6)));
            }
        }
        auto idx = index_of(docs);
        for (const auto& t : idx.terms_sorted()) {
            EXPECT_LE(idx.df(t), idx.num_docs());
            EXPECT_LE(idx.df(t), idx.cf(t));
        }
    }
}

TEST(scoring, bm25_plus_single_document_value)
{
    auto idx = index_of({{"aspirin", "heart"}});
    double s = score(scoring_model::bm25_plus, idx, {"aspirin"}, 0);
    EXPECT_NEAR(s, 2.0 * std::log(2.0), 1e-9);
    EXPECT_NEAR(s, 1.3862943611198906, 1e-9);
    EXPECT_NEAR(s, oracle::score(0, {{"aspirin", "heart"}}, {"aspirin"}, 0), 1e-9);
}

TEST(scoring, absent_terms_score_zero)
{
    auto idx = index_of({{"a", "b"}, {"c"}});
    for (auto m : all_models) {
        EXPECT_EQ(score(m, idx, {"zzz", "yyy"}, 0), 0.0);
        EXPECT_EQ(score(m, idx, {"c"}, 0), 0.0);
    }
}

TEST(scoring, identical_documents_score_identically)
{
    auto idx = index_of({{"a", "b", "b"}, {"a", "b", "b"}, {"c"}});
    for (auto m : all_models) {
        EXPECT_EQ(score(m, idx, {"a", "b", "c"}, 0), score(m, idx, {"a", "b", "c"}, 1));
    }
}

TEST(scoring, unknown_model_name_is_a_config_error)
{
    EXPECT_THROW(parse_scoring_model("lm_dirichlet"), config_error);
    EXPECT_EQ(parse_scoring_model("BM25+"), scoring_model::bm25_plus);
    EXPECT_EQ(parse_scoring_model("In_expB2"), scoring_model::in_exp_b2);
    EXPECT_EQ(parse_scoring_model("tf-idf"), scoring_model::tfidf);
}

TEST(scoring, matches_direct_formula_oracle)
{
    std::mt19937 rng(17);
    for (int round = 0; round < 300; ++round) {
        std::vector<std::vector<std::string>> docs(1 + rng() % 8);
        for (auto& d : docs) {
            auto len = 1 + rng() % 9;
            for (std::size_t i = 0; i < len; ++i) {
                d.push_back(std::string(1, static_cast<char>('a' + rng() % 6)));
            }
        }
        std::vector<std::string> q;
        for (std::size_t i = 0; i < 1 + rng() % 4; ++i) {
            q.push_back(std::string(1, static_cast<char>('a' + rng() % 7)));
        }
        auto idx = index_of(docs);
        for (int m = 0; m < 3; ++m) {
            for (std::size_t d = 0; d < docs.size(); ++d) {
                EXPECT_NEAR(score(all_models[m], idx, q, d), oracle::score(m, docs, q, d), 1e-9);
            }
        }
    }
}

TEST(scoring, bm25_plus_monotone_in_tf)
{
    for (int tf = 1; tf < 20; ++tf) {
        double lo = term_score(scoring_model::bm25_plus, 1, tf, 10, 10, 100, 5, 50);
        double hi = term_score(scoring_model::bm25_plus, 1, tf + 1, 10, 10, 100, 5, 50);
        EXPECT_GE(hi, lo);
    }
}

// With N and avgdl held fixed, the content of a document that holds no query
// terms never affects other documents' scores.
TEST(scoring, property_padding_content_does_not_matter)
{
    std::mt19937 rng(29);
    for (int round = 0; round < 100; ++round) {
        std::vector<std::vector<std::string>> docs(1 + rng() % 6);
        for (auto& d : docs) {
            for (std::size_t i = 0; i < 1 + rng() % 6; ++i) {
                d.push_back(std::string(1, static_cast<char>('a' + rng() % 4)));
            }
        }
        std::size_t pad_len = 1 + rng() % 6;
        auto with_a = docs;
        auto with_b = docs;
        with_a.push_back(std::vector<std::string>(pad_len, "x"));
        with_b.push_back(std::vector<std::string>(pad_len, "y"));
        auto ia = index_of(with_a);
        auto ib = index_of(with_b);
        token_stream q{"a", "c"};
        for (auto m : all_models) {
            for (std::size_t d = 0; d < docs.size(); ++d) {
                EXPECT_EQ(score(m, ia, q, d), score(m, ib, q, d));
            }
        }
    }
}

TEST(search, k_larger_than_matches_returns_all_matches)
{
    auto idx = index_of({{"a"}, {"b"}, {"a", "b"}, {"c"}});
    auto hits = search(scoring_model::bm25_plus, idx, {"a"}, 100);
    EXPECT_EQ(hits.size(), 2u);
}

TEST(search, ties_break_by_ascending_doc_id)
{
    auto idx = inverted_index::from_tokens({{"NCT9", {"a", "b"}}, {"NCT2", {"a", "b"}}, {"NCT5", {"c"}}});
    auto hits = search(scoring_model::bm25_plus, idx, {"a"}, 10);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].doc_id, "NCT2");
    EXPECT_EQ(hits[1].doc_id, "NCT9");
}

TEST(search, higher_tf_ranks_first_and_agrees_with_oracle)
{
    std::vector<std::vector<std::string>> docs{{"aspirin", "aspirin"}, {"aspirin", "x"}};
    auto idx = index_of(docs);
    auto hits = search(scoring_model::bm25_plus, idx, {"aspirin"}, 10);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].doc_id, "D1");
    EXPECT_GT(oracle::score(0, docs, {"aspirin"}, 0), oracle::score(0, docs, {"aspirin"}, 1));
}

TEST(search, zero_k_is_a_config_error)
{
    EXPECT_THROW(search(scoring_model::bm25_plus, index_of({{"a"}}), {"a"}, 0), config_error);
}

TEST(search, property_prefix_of_positive_set_with_exact_scores)
{
    std::mt19937 rng(23);
    for (int round = 0; round < 200; ++round) {
        std::vector<std::vector<std::string>> docs(1 + rng() % 10);
        for (auto& d : docs) {
            for (std::size_t i = 0; i < 1 + rng() % 6; ++i) {
                d.push_back(std::string(1, static_cast<char>('a' + rng() % 5)));
            }
        }
        token_stream q{std::string(1, static_cast<char>('a' + rng() % 5)), std::string(1, static_cast<char>('a' + rng() % 5))};
        auto idx = index_of(docs);
        std::size_t k = 1 + rng() % 6;
        for (auto m : all_models) {
            auto hits = search(m, idx, q, k);
            std::size_t positive = 0;
            for (std::size_t d = 0; d < docs.size(); ++d) {
                positive += score(m, idx, q, d) > 0 ? 1 : 0;
            }
            EXPECT_EQ(hits.size(), std::min(k, positive));
            for (std::size_t i = 0; i < hits.size(); ++i) {
                auto d = *idx.ordinal(hits[i].doc_id);
                EXPECT_EQ(hits[i].score, score(m, idx, q, d));
                EXPECT_GT(hits[i].score, 0.0);
                if (i > 0) {
                    EXPECT_TRUE(hits[i - 1].score > hits[i].score
                                || (hits[i - 1].score == hits[i].score && hits[i - 1].doc_id < hits[i].doc_id));
                }
            }
        }
    }
}
