#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "ctmatch/annotate.hpp"
#include "ctmatch/pipeline.hpp"
#include "ctmatch/text.hpp"

namespace test_support {

inline std::filesystem::path data_dir() { return CTMATCH_DATA_DIR; }
inline std::filesystem::path fixture_dir() { return CTMATCH_FIXTURE_DIR; }

inline const ctmatch::gazetteer& fixture_gazetteer()
{
    static const auto g = ctmatch::gazetteer::load(data_dir() / "gazetteer_fixture.tsv");
    return g;
}

inline const ctmatch::trigger_lexicon& shipped_triggers()
{
    static const auto t = ctmatch::trigger_lexicon::load(data_dir() / "triggers.tsv");
    return t;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class temp_dir {
public:
    explicit temp_dir(const std::string& tag)
    {
        static std::mt19937_64 rng{std::random_device{}()};
        path_ = std::filesystem::temp_directory_path() / ("ctmatch_" + tag + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~temp_dir() { std::filesystem::remove_all(path_); }
    temp_dir(const temp_dir&) = delete;
    temp_dir& operator=(const temp_dir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Config over the shipped fixtures with every output under `out`.
inline ctmatch::run_config fixture_config(const std::filesystem::path& out)
{
    nlohmann::json j{{"corpus", (fixture_dir() / "corpus").string()},
                     {"topics", (fixture_dir() / "topics.xml").string()},
                     {"qrels", (fixture_dir() / "qrels.txt").string()},
                     {"gazetteer", (data_dir() / "gazetteer_fixture.tsv").string()},
                     {"triggers", (data_dir() / "triggers.tsv").string()},
                     {"stopwords", (data_dir() / "stopwords.txt").string()},
                     {"enrichment", "cpf"},
                     {"filters", "AGSD"},
                     {"run_tag", "fixture"},
                     {"trial_annotations", "trials.jsonl"},
                     {"topic_annotations", "topics.jsonl"},
                     {"index", "index.bin"},
                     {"run", "run.txt"},
                     {"filtered_run", "run.filtered.txt"},
                     {"filter_report", "filter_report.jsonl"},
                     {"eval_run", "run.filtered.txt"},
                     {"eval_tsv", "eval.tsv"},
                     {"eval_json", "eval.json"},
                     {"cutoffs_csv", "cutoffs.csv"},
                     {"pairs", "pairs.jsonl"}};
    return ctmatch::run_config::from_json(j, out);
}

/// Text of topic 48 as shipped in the fixtures.
inline std::string topic_48_text()
{
    return "Fernandez is a 41 year man who is a professional soccer player. He came to the clinic with itchy foot. "
           "Physical exam revealed localized scaling and maceration between the third and fourth of his right toe. "
           "It became inflamed and sore, with mild fissuring. The dorsum and sole of the foot was unaffected. There "
           "is no pus or tearing in the affected area. He didn't use ant topical ointment on the lesion and has no "
           "positive history for any underlying disease such as DM. He smokes 15 cigarettes per day and drinks a "
           "beer per day. His family history is positive for hyperlipidemia in her mother and MI in her father. He "
           "is in relation with several partners and use condom during the intercourse. His physical exam and lab "
           "studies were normal otherwise. Tinea pedis infection confirmed as his diagnosis by the observation of "
           "segmented fungal hyphae during a microscopic KOH wet mount examination.";
}

}  // namespace test_support
