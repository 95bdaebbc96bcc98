#pragma once

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "annotate.hpp"
#include "corpus.hpp"

namespace ctmatch {

enum class habit { smoking, drinking };

/// A habit phrase; `negative` marks phrases that deny the habit on their own
/// ("non-smoker").
struct habit_cue {
    habit kind;
    bool negative = false;
};

inline const phrase_matcher<habit_cue>& habit_matcher()
{
    static const phrase_matcher<habit_cue> m = [] {
        phrase_matcher<habit_cue> out;
        for (auto p : {"smokes", "smoke", "smoker", "smokers", "smoking", "smoked", "tobacco", "tobacco use",
                       "cigarette", "cigarettes", "cigar", "cigars", "pack year", "pack years"}) {
            out.add(p, {habit::smoking, false});
        }
        for (auto p : {"non smoker", "non smokers", "nonsmoker", "nonsmokers", "never smoker", "never smoked",
                       "former smoker", "ex smoker", "quit smoking"}) {
            out.add(p, {habit::smoking, true});
        }
        for (auto p : {"drinks", "drink", "drinker", "drinkers", "drinking", "alcohol", "alcohol use",
                       "alcohol abuse", "alcoholism", "beer", "beers", "wine", "liquor"}) {
            out.add(p, {habit::drinking, false});
        }
        for (auto p : {"non drinker", "non drinkers", "nondrinker", "nondrinkers", "teetotaler"}) {
            out.add(p, {habit::drinking, true});
        }
        return out;
    }();
    return m;
}

/// Habit mention with its resolved polarity; affirmative means the habit holds.
struct habit_mention {
    habit kind;
    bool affirmative;
};

inline std::vector<habit_mention> find_habits(std::string_view sentence, const trigger_lexicon& triggers)
{
    auto words = split_words(sentence);
    auto hits = habit_matcher().match(words);
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& h : hits) {
        ranges.emplace_back(h.first, h.last);
    }
    auto mods = resolve_modifiers(words, ranges, triggers);
    std::vector<habit_mention> out;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        bool negative = hits[i].payload->negative != mods[i].negated;
        out.push_back({hits[i].payload->kind, !negative});
    }
    return out;
}

/// Patient habit status: true on any affirmative mention, false when only
/// negated mentions occur, nullopt when the habit is never mentioned.
inline std::optional<bool> habit_status(std::string_view text, habit kind, const trigger_lexicon& triggers)
{
    std::optional<bool> status;
    for (const auto& sentence : split_sentences(text)) {
        for (const auto& m : find_habits(sentence, triggers)) {
            if (m.kind != kind) {
                continue;
            }
            if (m.affirmative) {
                return true;
            }
            status = false;
        }
    }
    return status;
}

/// Trial-side lifestyle exclusions.
struct habit_exclusions {
    bool smokers = false;
    bool drinkers = false;
};

/// A trial excludes a habit when an exclusion criterion mentions it
/// affirmatively or an inclusion criterion mentions it negated, the same
/// polarity swap used for keyword sets.
inline habit_exclusions trial_habit_exclusions(const criteria_lists& criteria, const trigger_lexicon& triggers)
{
    habit_exclusions out;
    auto scan = [&](const std::vector<std::string>& items, bool exclusion) {
        for (const auto& item : items) {
            for (const auto& sentence : split_sentences(item)) {
                for (const auto& m : find_habits(sentence, triggers)) {
                    bool excludes = exclusion ? m.affirmative : !m.affirmative;
                    if (!excludes) {
                        continue;
                    }
                    (m.kind == habit::smoking ? out.smokers : out.drinkers) = true;
                }
            }
        }
    };
    scan(criteria.inclusion, false);
    scan(criteria.exclusion, true);
    return out;
}

}  // namespace ctmatch
