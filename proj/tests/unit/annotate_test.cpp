#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "ctmatch/annotate.hpp"
#include "ctmatch/corpus.hpp"
#include "support.hpp"

using namespace ctmatch;
using test_support::fixture_gazetteer;
using test_support::shipped_triggers;

namespace {

std::vector<mention> annotate_sentence(std::string_view s, const gazetteer& gaz = fixture_gazetteer())
{
    return apply_context(s, extract_mentions(s, gaz), shipped_triggers());
}

const mention& find_mention(const std::vector<mention>& ms, const std::string& phrase)
{
    auto it = std::find_if(ms.begin(), ms.end(), [&](const mention& m) { return m.phrase() == phrase; });
    if (it == ms.end()) {
        throw std::runtime_error("no mention " + phrase);
    }
    return *it;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(sentences, split_on_terminal_punctuation)
{
    EXPECT_EQ(split_sentences("He is 41. He smokes."), (std::vector<std::string>{"He is 41.", "He smokes."}));
}

TEST(sentences, empty_text)
{
    EXPECT_TRUE(split_sentences("").empty());
}

TEST(sentences, abbreviation_does_not_split)
{
    EXPECT_EQ(split_sentences("Hx of DM (dx. 2010) stable."), (std::vector<std::string>{"Hx of DM (dx. 2010) stable."}));
    for (auto a : {"dx", "hx", "dr", "e.g", "vs"}) {
        EXPECT_EQ(sentence_abbreviations().count(a), 1u) << a;
    }
}

TEST(sentences, question_and_exclamation_and_decimals)
{
    EXPECT_EQ(split_sentences("Pain? Yes! Temp 37.5 today."),
              (std::vector<std::string>{"Pain?", "Yes!", "Temp 37.5 today."}));
}

TEST(sentences, closing_bracket_after_period)
{
    EXPECT_EQ(split_sentences("He said (no fever.) Then left."),
              (std::vector<std::string>{"He said (no fever.)", "Then left."}));
}

TEST(gazetteer, longest_match_wins)
{
    gazetteer g({{"myasthenia", entity_type::disease}, {"myasthenia gravis", entity_type::disease}});
    auto ms = extract_mentions("myasthenia gravis suspected", g);
    ASSERT_EQ(ms.size(), 1u);
    EXPECT_EQ(ms[0].surface, "myasthenia gravis");
    EXPECT_FALSE(ms[0].negated);
    EXPECT_EQ(ms[0].time, temporality::current);
    EXPECT_EQ(ms[0].who, experiencer::patient);
}

TEST(gazetteer, fixture_finds_tearing)
{
    auto ms = extract_mentions("no pus or tearing in the affected area", fixture_gazetteer());
    ASSERT_EQ(ms.size(), 1u);
    EXPECT_EQ(ms[0].phrase(), "tearing");
}

TEST(gazetteer, empty_sentence)
{
    EXPECT_TRUE(extract_mentions("", fixture_gazetteer()).empty());
}

TEST(gazetteer, matches_respect_word_boundaries_and_case)
{
    gazetteer g({{"dm", entity_type::disease}});
    auto ms = extract_mentions("DM, admitted; dmx", g);
    ASSERT_EQ(ms.size(), 1u);
    EXPECT_EQ(ms[0].surface, "DM");
    EXPECT_EQ(ms[0].begin, 0u);
    EXPECT_EQ(ms[0].end, 2u);
}

TEST(gazetteer, parse_errors_carry_line_numbers)
{
    try {
        gazetteer::parse("# header\naspirin\tdrug\nfoo\tvegetable\n");
        FAIL();
    } catch (const format_error& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(gazetteer::parse("a\tdrug\nA\tdisease\n"), format_error);
    EXPECT_THROW(gazetteer::parse("no tab here\n"), format_error);
}

TEST(triggers, shipped_file_matches_builtin_defaults)
{
    const auto& file = shipped_triggers();
    auto builtin = default_trigger_lexicon();
    ASSERT_EQ(file.entries().size(), builtin.entries().size());
    for (std::size_t i = 0; i < file.entries().size(); ++i) {
        EXPECT_EQ(file.entries()[i].phrase, builtin.entries()[i].phrase);
        EXPECT_EQ(file.entries()[i].category, builtin.entries()[i].category);
    }
}

TEST(triggers, unknown_category_is_a_format_error)
{
    EXPECT_THROW(trigger_lexicon::parse("no\tNegPre\nmaybe\tHedge\n"), format_error);
}

TEST(context, negation_before_mention)
{
    EXPECT_TRUE(find_mention(annotate_sentence("There is no pus or tearing in the affected area"), "tearing").negated);
}

TEST(context, negated_historical_dm)
{
    auto m = find_mention(annotate_sentence("has no positive history for any underlying disease such as DM"), "dm");
    EXPECT_TRUE(m.negated);
    EXPECT_EQ(m.time, temporality::historical);
    EXPECT_EQ(classify_section(m), section::pmc);
}

TEST(context, family_history_hyperlipidemia)
{
    auto m = find_mention(annotate_sentence("family history is positive for hyperlipidemia in her mother"),
                          "hyperlipidemia");
    EXPECT_EQ(m.who, experiencer::family);
    EXPECT_FALSE(m.negated);
    EXPECT_EQ(classify_section(m), section::fmh);
}

TEST(context, post_negation_reaches_backward)
{
    auto m = find_mention(annotate_sentence("Pneumonia was ruled out."), "pneumonia");
    EXPECT_TRUE(m.negated);
}

TEST(context, pseudo_negation_blocks_contained_trigger)
{
    EXPECT_FALSE(find_mention(annotate_sentence("No change in asthma symptoms."), "asthma").negated);
    EXPECT_FALSE(find_mention(annotate_sentence("Gram negative sepsis."), "sepsis").negated);
}

TEST(context, termination_cuts_scope)
{
    auto ms = annotate_sentence("No fever but persistent cough.");
    EXPECT_TRUE(find_mention(ms, "fever").negated);
    EXPECT_FALSE(find_mention(ms, "cough").negated);
}

TEST(context, historical_trigger_keeps_negation_scope)
{
    // A Historical trigger does not end a negation scope.
    auto ms = annotate_sentence("Denies fever, history of asthma.");
    EXPECT_TRUE(find_mention(ms, "fever").negated);
    EXPECT_TRUE(find_mention(ms, "asthma").negated);
    EXPECT_EQ(find_mention(ms, "asthma").time, temporality::historical);
    EXPECT_EQ(find_mention(ms, "fever").time, temporality::current);
}

TEST(context, scopes_stay_inside_the_sentence)
{
    annotator ann{fixture_gazetteer(), shipped_triggers()};
    auto ms = ann.mentions("No fever. Cough present.");
    EXPECT_TRUE(find_mention(ms, "fever").negated);
    EXPECT_FALSE(find_mention(ms, "cough").negated);
}

TEST(context, optional_window_limits_scope)
{
    annotator ann{fixture_gazetteer(), shipped_triggers(), context_options{2}};
    auto ms = ann.mentions("No recent or current history compatible with asthma.");
    EXPECT_FALSE(find_mention(ms, "asthma").negated);
    annotator unbounded{fixture_gazetteer(), shipped_triggers()};
    EXPECT_TRUE(find_mention(unbounded.mentions("No recent or current history compatible with asthma."), "asthma")
                    .negated);
}

TEST(context, trigger_overlapping_a_mention_is_ignored)
{
    gazetteer g({{"no change syndrome", entity_type::disease}, {"asthma", entity_type::disease}});
    auto ms = annotate_sentence("no change syndrome and asthma", g);
    EXPECT_FALSE(find_mention(ms, "no change syndrome").negated);
    EXPECT_FALSE(find_mention(ms, "asthma").negated);
}

// Modifiers never move spans: surfaces are identical with and without triggers.
TEST(context, property_triggers_change_only_modifiers)
{
    std::mt19937 rng(5);
    const std::vector<std::string> vocab{"no", "history", "of", "asthma", "fever", "mother", "but", "denies",
                                         "diabetes", "cough", "was", "ruled", "out", "and", "prior", "gram",
                                         "negative", "sepsis", "pregnancy", "family"};
    trigger_lexicon empty;
    for (int round = 0; round < 500; ++round) {
        std::string s;
        int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) {
            s += vocab[rng() % vocab.size()] + " ";
        }
        auto base = extract_mentions(s, fixture_gazetteer());
        auto with = apply_context(s, base, shipped_triggers());
        auto without = apply_context(s, base, empty);
        ASSERT_EQ(with.size(), without.size());
        for (std::size_t i = 0; i < with.size(); ++i) {
            EXPECT_EQ(with[i].surface, without[i].surface);
            EXPECT_EQ(with[i].begin, without[i].begin);
            EXPECT_FALSE(without[i].negated);
        }
    }
}

TEST(sections, family_outranks_temporality)
{
    mention m;
    m.who = experiencer::family;
    m.time = temporality::historical;
    EXPECT_EQ(classify_section(m), section::fmh);
    m.who = experiencer::patient;
    EXPECT_EQ(classify_section(m), section::pmc);
    m.time = temporality::current;
    EXPECT_EQ(classify_section(m), section::cmc);
}

TEST(polarity, exclusion_not_smoking_becomes_affirmative)
{
    gazetteer g({{"smoking", entity_type::disease}});
    auto ms = annotate_sentence("Patients who are not smoking", g);
    ASSERT_EQ(ms.size(), 1u);
    EXPECT_TRUE(ms[0].negated);
    EXPECT_FALSE(swap_exclusion_polarity(ms)[0].negated);
}

TEST(polarity, exclusion_history_of_diabetes_becomes_negated)
{
    auto ms = annotate_sentence("history of diabetes");
    ASSERT_EQ(ms.size(), 1u);
    EXPECT_FALSE(ms[0].negated);
    auto swapped = swap_exclusion_polarity(ms);
    EXPECT_TRUE(swapped[0].negated);
    EXPECT_EQ(swap_exclusion_polarity(swapped), ms);
}

TEST(keywords, swap_and_routing)
{
    mention diabetes;
    diabetes.surface = "diabetes";
    mention pregnancy;
    pregnancy.surface = "pregnancy";
    auto ks = build_keyword_set({diabetes}, {pregnancy});
    EXPECT_EQ(ks.a_cmc, (std::vector<std::string>{"diabetes"}));
    EXPECT_EQ(ks.n_cmc, (std::vector<std::string>{"pregnancy"}));
    EXPECT_TRUE(ks.a_pmc.empty() && ks.n_pmc.empty() && ks.a_fmh.empty() && ks.n_fmh.empty());
}

TEST(keywords, empty_inputs)
{
    EXPECT_TRUE(build_keyword_set({}, {}).empty());
}

TEST(keywords, duplicate_phrases_are_kept_once_in_first_occurrence_order)
{
    mention a;
    a.surface = "Asthma";
    mention b;
    b.surface = "cough";
    auto ks = build_keyword_set({a, b, a}, {});
    EXPECT_EQ(ks.a_cmc, (std::vector<std::string>{"asthma", "cough"}));
}

TEST(keywords, topic_48_lists)
{
    annotator ann{fixture_gazetteer(), shipped_triggers()};
    auto ks = build_keyword_set(ann.mentions(test_support::topic_48_text()), {});
    EXPECT_EQ(as_set(ks.a_cmc), (std::set<std::string>{"itchy", "sore", "fissuring", "tinea pedis infection", "koh"}));
    EXPECT_EQ(as_set(ks.n_cmc), (std::set<std::string>{"tearing"}));
    EXPECT_EQ(as_set(ks.n_pmc), (std::set<std::string>{"dm"}));
    EXPECT_EQ(as_set(ks.a_fmh), (std::set<std::string>{"hyperlipidemia"}));
    EXPECT_TRUE(ks.a_pmc.empty());
    EXPECT_TRUE(ks.n_fmh.empty());
}

TEST(tokens, negated_past_phrases)
{
    keyword_set ks;
    ks.n_pmc = {"myasthenia gravis", "shortness of breath"};
    EXPECT_EQ(emit_enrichment_tokens(ks),
              (std::vector<std::string>{"pmc_no_myasthenia_gravis", "pmc_no_shortness_of_breath"}));
}

TEST(tokens, family_affirmative)
{
    keyword_set ks;
    ks.a_fmh = {"hyperlipidemia"};
    EXPECT_EQ(emit_enrichment_tokens(ks), (std::vector<std::string>{"fmh_hyperlipidemia"}));
}

TEST(tokens, empty_set)
{
    EXPECT_TRUE(emit_enrichment_tokens(keyword_set{}).empty());
}

TEST(tokens, order_and_flag_filtering)
{
    keyword_set ks;
    ks.a_cmc = {"a"};
    ks.a_pmc = {"b"};
    ks.a_fmh = {"c"};
    ks.n_cmc = {"d"};
    ks.n_pmc = {"e"};
    ks.n_fmh = {"f"};
    EXPECT_EQ(emit_enrichment_tokens(ks),
              (std::vector<std::string>{"cmc_a", "pmc_b", "fmh_c", "cmc_no_d", "pmc_no_e", "fmh_no_f"}));
    EXPECT_EQ(emit_enrichment_tokens(ks, enrichment_flags::parse("f")),
              (std::vector<std::string>{"fmh_c", "fmh_no_f"}));
    EXPECT_TRUE(emit_enrichment_tokens(ks, enrichment_flags::parse("")).empty());
}

TEST(tokens, punctuation_inside_phrases_is_normalized)
{
    keyword_set ks;
    ks.a_cmc = {"h/o covid-19"};
    EXPECT_EQ(emit_enrichment_tokens(ks), (std::vector<std::string>{"cmc_h_o_covid_19"}));
}

TEST(flags, enrichment_parse_and_canonical_form)
{
    EXPECT_EQ(enrichment_flags::parse("fpc").str(), "cpf");
    EXPECT_EQ(enrichment_flags::parse("CF").str(), "cf");
    EXPECT_THROW(enrichment_flags::parse("x"), config_error);
}
