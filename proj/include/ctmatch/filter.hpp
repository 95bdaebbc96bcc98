#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "lifestyle.hpp"
#include "topics.hpp"
#include "trec.hpp"

namespace ctmatch {

/// (A)ge, (G)ender, (S)moking, (D)rinking.
struct filter_config {
    bool age = false;
    bool gender = false;
    bool smoking = false;
    bool drinking = false;

    static filter_config parse(std::string_view letters)
    {
        filter_config f;
        for (char c : letters) {
            switch (c) {
            case 'A': case 'a': f.age = true; break;
            case 'G': case 'g': f.gender = true; break;
            case 'S': case 's': f.smoking = true; break;
            case 'D': case 'd': f.drinking = true; break;
            default: throw config_error("unknown filter flag '" + std::string(1, c) + "'");
            }
        }
        return f;
    }

    std::string str() const
    {
        std::string s;
        if (age) s += 'A';
        if (gender) s += 'G';
        if (smoking) s += 'S';
        if (drinking) s += 'D';
        return s;
    }

    bool any() const { return age || gender || smoking || drinking; }
};

/// Trial eligibility facts needed by the filters.
struct trial_constraints {
    std::optional<double> min_age;
    std::optional<double> max_age;
    ctmatch::gender eligible_gender = ctmatch::gender::all;
    habit_exclusions habits;
};

using constraint_lookup = std::unordered_map<std::string, trial_constraints>;

inline trial_constraints constraints_of(const clinical_trial& t, const habit_exclusions& habits = {})
{
    return {t.min_age, t.max_age, t.eligible_gender, habits};
}

namespace detail {

    inline const trial_constraints& resolve(const constraint_lookup& trials, const std::string& doc_id)
    {
        auto it = trials.find(doc_id);
        if (it == trials.end()) {
            throw data_error("ranked document " + doc_id + " not found in the corpus");
        }
        return it->second;
    }

    inline bool fails_demographics(const trial_constraints& t, const demographics& p, const filter_config& cfg)
    {
        if (cfg.age && p.age_years) {
            if ((t.min_age && *p.age_years < *t.min_age) || (t.max_age && *p.age_years > *t.max_age)) {
                return true;
            }
        }
        if (cfg.gender && p.sex && t.eligible_gender != ctmatch::gender::all && t.eligible_gender != *p.sex) {
            return true;
        }
        return false;
    }

    inline bool fails_lifestyle(const trial_constraints& t, const demographics& p, const filter_config& cfg)
    {
        return (cfg.smoking && p.smoker == true && t.habits.smokers)
               || (cfg.drinking && p.drinker == true && t.habits.drinkers);
    }

    template<class Pred>
    std::vector<run_entry> keep_if(const std::vector<run_entry>& ranking, const constraint_lookup& trials, Pred fails)
    {
        std::vector<run_entry> out;
        for (const auto& e : ranking) {
            if (!fails(resolve(trials, e.doc_id))) {
                out.push_back(e);
            }
        }
        renumber(out);
        return out;
    }

}  // namespace detail

struct filter_result {
    std::vector<run_entry> ranking;
    std::size_t removed = 0;
    double removed_fraction = 0.0;
};

/// Age bounds are inclusive. Missing patient age or gender never removes a trial.
inline filter_result demographic_filter(const std::vector<run_entry>& ranking, const demographics& patient,
                                        const constraint_lookup& trials, const filter_config& cfg)
{
    filter_result r;
    r.ranking = detail::keep_if(ranking, trials, [&](const trial_constraints& t) {
        return detail::fails_demographics(t, patient, cfg);
    });
    r.removed = ranking.size() - r.ranking.size();
    r.removed_fraction = ranking.empty() ? 0.0 : static_cast<double>(r.removed) / static_cast<double>(ranking.size());
    return r;
}

/// Drops trials excluding a habit the patient is known to have.
inline std::vector<run_entry> lifestyle_filter(const std::vector<run_entry>& ranking, const demographics& patient,
                                               const constraint_lookup& trials, const filter_config& cfg)
{
    return detail::keep_if(ranking, trials, [&](const trial_constraints& t) {
        return detail::fails_lifestyle(t, patient, cfg);
    });
}

/// Demographic then lifestyle filtering; removed counts cover both.
inline filter_result apply_filters(const std::vector<run_entry>& ranking, const demographics& patient,
                                   const constraint_lookup& trials, const filter_config& cfg)
{
    auto r = demographic_filter(ranking, patient, trials, cfg);
    r.ranking = lifestyle_filter(r.ranking, patient, trials, cfg);
    r.removed = ranking.size() - r.ranking.size();
    r.removed_fraction = ranking.empty() ? 0.0 : static_cast<double>(r.removed) / static_cast<double>(ranking.size());
    return r;
}

inline nlohmann::json filter_report_line(const std::string& topic_id, const filter_config& cfg,
                                         std::size_t original, const filter_result& r)
{
    return {{"topic_id", topic_id},
            {"flags", cfg.str()},
            {"original", original},
            {"removed", r.removed},
            {"removed_fraction", r.removed_fraction}};
}

}  // namespace ctmatch
