#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "annotate.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "filter.hpp"
#include "index.hpp"
#include "lifestyle.hpp"
#include "text.hpp"
#include "topics.hpp"
#include "trec.hpp"

namespace ctmatch {

inline constexpr int sidecar_version = 1;

// ---------------------------------------------------------------------------
// Sidecar records (JSON-lines, one object per trial or topic)
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const keyword_set& ks)
{
    j["a_cmc"] = ks.a_cmc;
    j["a_pmc"] = ks.a_pmc;
    j["a_fmh"] = ks.a_fmh;
    j["n_cmc"] = ks.n_cmc;
    j["n_pmc"] = ks.n_pmc;
    j["n_fmh"] = ks.n_fmh;
}

inline void from_json(const nlohmann::json& j, keyword_set& ks)
{
    j.at("a_cmc").get_to(ks.a_cmc);
    j.at("a_pmc").get_to(ks.a_pmc);
    j.at("a_fmh").get_to(ks.a_fmh);
    j.at("n_cmc").get_to(ks.n_cmc);
    j.at("n_pmc").get_to(ks.n_pmc);
    j.at("n_fmh").get_to(ks.n_fmh);
}

struct trial_annotation {
    std::string nct_id;
    keyword_set keywords;
    habit_exclusions habits;
};

inline trial_annotation annotate_trial(const clinical_trial& t, const annotator& ann)
{
    auto criteria = split_criteria(t.criteria_text);
    trial_annotation a;
    a.nct_id = t.nct_id;
    a.keywords = build_keyword_set(ann.mentions(criteria.inclusion), ann.mentions(criteria.exclusion));
    a.habits = trial_habit_exclusions(criteria, ann.triggers);
    return a;
}

inline nlohmann::json to_record(const trial_annotation& a)
{
    nlohmann::json j = a.keywords;
    j["version"] = sidecar_version;
    j["nct_id"] = a.nct_id;
    j["excludes_smokers"] = a.habits.smokers;
    j["excludes_drinkers"] = a.habits.drinkers;
    return j;
}

inline nlohmann::json to_record(const patient_topic& t)
{
    nlohmann::json j = t.keywords;
    j["version"] = sidecar_version;
    j["topic_id"] = t.topic_id;
    const auto& p = t.profile;
    j["age_years"] = p.age_years ? nlohmann::json(*p.age_years) : nlohmann::json(nullptr);
    j["gender"] = p.sex ? nlohmann::json(std::string(to_string(*p.sex))) : nlohmann::json(nullptr);
    j["smoker"] = p.smoker ? nlohmann::json(*p.smoker) : nlohmann::json(nullptr);
    j["drinker"] = p.drinker ? nlohmann::json(*p.drinker) : nlohmann::json(nullptr);
    return j;
}

namespace detail {

    template<class T>
    std::optional<T> opt(const nlohmann::json& j, const char* key)
    {
        if (!j.contains(key) || j.at(key).is_null()) {
            return std::nullopt;
        }
        return j.at(key).get<T>();
    }

    inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path)
    {
        std::vector<nlohmann::json> out;
        auto content = read_file(path);
        auto lines = split_lines(content);
        for (std::size_t n = 0; n < lines.size(); ++n) {
            if (trim(lines[n]).empty()) {
                continue;
            }
            try {
                auto j = nlohmann::json::parse(lines[n]);
                out.push_back(std::move(j));
            } catch (const nlohmann::json::exception& e) {
                throw data_error(path.string() + ": line " + std::to_string(n + 1) + ": " + e.what());
            }
        }
        return out;
    }

    inline void check_version(const nlohmann::json& j, const std::filesystem::path& path)
    {
        if (j.value("version", 0) != sidecar_version) {
            throw config_error(path.string() + ": annotation version mismatch; re-run annotate");
        }
    }

    inline std::string jsonl(const std::vector<nlohmann::json>& records)
    {
        std::string out;
        for (const auto& r : records) {
            out += r.dump();
            out += '\n';
        }
        return out;
    }

}  // namespace detail

inline std::unordered_map<std::string, trial_annotation> read_trial_annotations(const std::filesystem::path& path)
{
    std::unordered_map<std::string, trial_annotation> out;
    for (const auto& j : detail::read_jsonl(path)) {
        detail::check_version(j, path);
        try {
            trial_annotation a;
            a.nct_id = j.at("nct_id").get<std::string>();
            a.keywords = j.get<keyword_set>();
            a.habits.smokers = j.value("excludes_smokers", false);
            a.habits.drinkers = j.value("excludes_drinkers", false);
            out.emplace(a.nct_id, std::move(a));
        } catch (const nlohmann::json::exception& e) {
            throw data_error(path.string() + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<patient_topic> read_topic_annotations(const std::filesystem::path& path,
                                                         const std::vector<topic_record>& records)
{
    std::unordered_map<std::string, nlohmann::json> by_id;
    for (auto& j : detail::read_jsonl(path)) {
        detail::check_version(j, path);
        if (!j.contains("topic_id") || !j.at("topic_id").is_string()) {
            throw data_error(path.string() + ": record without topic_id");
        }
        auto id = j.at("topic_id").get<std::string>();
        by_id.emplace(std::move(id), std::move(j));
    }
    std::vector<patient_topic> out;
    for (const auto& r : records) {
        auto it = by_id.find(r.topic_id);
        if (it == by_id.end()) {
            throw config_error(path.string() + ": no annotation for topic " + r.topic_id + "; re-run annotate");
        }
        const auto& j = it->second;
        patient_topic t;
        t.topic_id = r.topic_id;
        t.text = r.text;
        try {
            t.keywords = j.get<keyword_set>();
            t.profile.age_years = detail::opt<double>(j, "age_years");
            if (auto g = detail::opt<std::string>(j, "gender")) {
                t.profile.sex = parse_gender(*g);
            }
            t.profile.smoker = detail::opt<bool>(j, "smoker");
            t.profile.drinker = detail::opt<bool>(j, "drinker");
        } catch (const nlohmann::json::exception& e) {
            throw data_error(path.string() + ": topic " + r.topic_id + ": " + e.what());
        }
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// One row of an experiment grid.
struct experiment_row {
    std::string id;
    section_config sections;
    filter_config filters;
};

enum class pair_phase { topical, criteria };

inline pair_phase parse_pair_phase(std::string_view s)
{
    auto v = to_lower(trim(s));
    if (v == "topical") {
        return pair_phase::topical;
    }
    if (v == "criteria") {
        return pair_phase::criteria;
    }
    throw config_error("unknown phase '" + std::string(s) + "' (expected topical or criteria)");
}

inline std::string_view to_string(pair_phase p)
{
    return p == pair_phase::criteria ? "criteria" : "topical";
}

enum class rerank_mode { sequential, fusion };

/// Run configuration. File paths are resolved against the config file's directory.
struct run_config {
    std::map<std::string, std::filesystem::path> paths;
    field_names fields;
    scoring_model model = scoring_model::bm25_plus;
    section_config sections = section_config::parse(
        {"brief_title", "official_title", "summary", "description", "conditions", "inclusion"});
    filter_config filters;
    std::size_t k = 1000;
    int threshold = 2;
    std::vector<metric> metrics = default_metrics();
    std::string run_tag = "ctmatch";
    std::size_t cutoff_k = 20;
    std::vector<experiment_row> grid;
    pair_phase phase = pair_phase::topical;
    std::size_t rerank_k = 50;
    rerank_mode rerank = rerank_mode::sequential;
    double fusion_weight = 0.5;

    static const std::set<std::string>& path_keys()
    {
        static const std::set<std::string> keys{
            "corpus",        "topics",         "qrels",        "gazetteer",    "triggers",
            "stopwords",     "trial_annotations", "topic_annotations", "index", "run",
            "filtered_run",  "filter_report",  "eval_run",     "eval_tsv",     "eval_json",
            "cutoffs_csv",   "pairs",          "pairs_run",    "ablation_tsv", "ablation_json",
            "rerank_scores", "reranked_run",
        };
        return keys;
    }

    bool has(const std::string& key) const { return paths.count(key) > 0; }

    /// Path of an existing input file or directory.
    std::filesystem::path input(const std::string& key) const
    {
        auto it = paths.find(key);
        if (it == paths.end()) {
            throw config_error("config is missing required input '" + key + "'");
        }
        if (!std::filesystem::exists(it->second)) {
            throw config_error(key + " not found: " + it->second.string());
        }
        return it->second;
    }

    std::filesystem::path output(const std::string& key) const
    {
        auto it = paths.find(key);
        if (it == paths.end()) {
            throw config_error("config is missing required output '" + key + "'");
        }
        return it->second;
    }

    /// Input path with a fallback key, e.g. eval_run falling back to run.
    std::filesystem::path input_or(const std::string& key, const std::string& fallback) const
    {
        return has(key) ? input(key) : input(fallback);
    }

    static run_config from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {})
    {
        run_config c;
        if (!j.is_object()) {
            throw config_error("config must be a JSON object");
        }
        try {
            for (const auto& [key, value] : j.items()) {
                if (path_keys().count(key) > 0) {
                    if (value.is_null()) {
                        continue;
                    }
                    std::filesystem::path p = value.get<std::string>();
                    c.paths[key] = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
                } else if (key == "model") {
                    c.model = parse_scoring_model(value.get<std::string>());
                } else if (key == "sections") {
                    c.sections.sections = section_config::parse(value.get<std::vector<std::string>>()).sections;
                } else if (key == "enrichment") {
                    c.sections.enrichment = enrichment_flags::parse(value.get<std::string>());
                } else if (key == "filters") {
                    c.filters = filter_config::parse(value.get<std::string>());
                } else if (key == "k") {
                    c.k = value.get<std::size_t>();
                } else if (key == "threshold") {
                    c.threshold = value.get<int>();
                } else if (key == "metrics") {
                    c.metrics = parse_metrics(value.get<std::vector<std::string>>());
                } else if (key == "run_tag") {
                    c.run_tag = value.get<std::string>();
                } else if (key == "cutoff_k") {
                    c.cutoff_k = value.get<std::size_t>();
                } else if (key == "phase") {
                    c.phase = parse_pair_phase(value.get<std::string>());
                } else if (key == "rerank_k") {
                    c.rerank_k = value.get<std::size_t>();
                } else if (key == "rerank_mode") {
                    auto m = value.get<std::string>();
                    if (m == "sequential") {
                        c.rerank = rerank_mode::sequential;
                    } else if (m == "fusion") {
                        c.rerank = rerank_mode::fusion;
                    } else {
                        throw config_error("rerank_mode must be sequential or fusion");
                    }
                } else if (key == "fusion_weight") {
                    c.fusion_weight = value.get<double>();
                } else if (key == "fields") {
                    c.fields = parse_fields(value);
                } else if (key == "grid") {
                    for (const auto& row : value) {
                        experiment_row r;
                        r.id = row.at("id").get<std::string>();
                        r.sections = section_config::parse(row.at("sections").get<std::vector<std::string>>(),
                                                           row.value("enrichment", ""));
                        r.filters = filter_config::parse(row.value("filters", ""));
                        c.grid.push_back(std::move(r));
                    }
                } else if (key == "description" || key.starts_with("_")) {
                    continue;
                } else {
                    throw config_error("unknown config key '" + key + "'");
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw config_error(std::string("bad config value: ") + e.what());
        }
        if (c.k == 0 || c.rerank_k == 0 || c.cutoff_k == 0) {
            throw config_error("k, rerank_k and cutoff_k must be at least 1");
        }
        if (c.threshold < 1 || c.threshold > 2) {
            throw config_error("threshold must be 1 or 2");
        }
        return c;
    }

    static run_config load(const std::filesystem::path& path, const nlohmann::json& overrides = nlohmann::json::object())
    {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw config_error(path.string() + ": " + e.what());
        }
        j.merge_patch(overrides);
        return from_json(j, path.parent_path());
    }

private:
    static field_names parse_fields(const nlohmann::json& j)
    {
        field_names f;
        std::map<std::string, std::string*> slots{
            {"nct_id", &f.nct_id},       {"brief_title", &f.brief_title}, {"official_title", &f.official_title},
            {"summary", &f.summary},     {"description", &f.description}, {"condition", &f.condition},
            {"criteria", &f.criteria},   {"min_age", &f.min_age},         {"max_age", &f.max_age},
            {"gender", &f.gender},
        };
        for (const auto& [key, value] : j.items()) {
            auto it = slots.find(key);
            if (it == slots.end()) {
                throw config_error("unknown field name '" + key + "'");
            }
            *it->second = value.get<std::string>();
        }
        return f;
    }
};

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Lexicons loaded once per stage. Missing files fail at startup.
struct lexicons {
    gazetteer gaz;
    trigger_lexicon triggers;

    static lexicons load(const run_config& cfg)
    {
        lexicons l;
        l.gaz = gazetteer::load(cfg.input("gazetteer"));
        l.triggers = trigger_lexicon::load(cfg.input("triggers"));
        if (l.gaz.empty()) {
            throw config_error("gazetteer is empty");
        }
        return l;
    }

    annotator make_annotator() const { return annotator{gaz, triggers}; }
};

inline std::vector<patient_topic> analyze_topics(const std::vector<topic_record>& records, const annotator& ann)
{
    std::vector<patient_topic> out;
    for (const auto& r : records) {
        out.push_back(analyze_topic(r, ann));
    }
    return out;
}

/// Writes the trial sidecar and, when topics are configured, the topic sidecar.
inline void cmd_annotate(const run_config& cfg)
{
    auto lex = lexicons::load(cfg);
    auto ann = lex.make_annotator();
    auto trials = load_corpus(cfg.input("corpus"), cfg.fields);
    std::vector<nlohmann::json> records;
    for (const auto& t : trials) {
        records.push_back(to_record(annotate_trial(t, ann)));
    }
    write_file(cfg.output("trial_annotations"), detail::jsonl(records));
    if (cfg.has("topics")) {
        std::vector<nlohmann::json> topic_records;
        for (const auto& t : analyze_topics(load_topics(cfg.input("topics")), ann)) {
            topic_records.push_back(to_record(t));
        }
        write_file(cfg.output("topic_annotations"), detail::jsonl(topic_records));
    }
}

/// Pairs each trial with its keyword set. Annotations are only required when
/// enrichment is enabled.
inline std::vector<annotated_trial> join_annotations(std::vector<clinical_trial> trials, const run_config& cfg,
                                                     bool need_keywords)
{
    std::unordered_map<std::string, trial_annotation> ann;
    if (need_keywords) {
        ann = read_trial_annotations(cfg.input("trial_annotations"));
    }
    std::vector<annotated_trial> out;
    for (auto& t : trials) {
        annotated_trial a{std::move(t), {}};
        if (need_keywords) {
            auto it = ann.find(a.trial.nct_id);
            if (it == ann.end()) {
                throw config_error("trial " + a.trial.nct_id + " missing from annotations; re-run annotate");
            }
            a.keywords = it->second.keywords;
        }
        out.push_back(std::move(a));
    }
    return out;
}

inline stopword_set stopwords_of(const run_config& cfg)
{
    return cfg.has("stopwords") ? load_stopwords(cfg.input("stopwords")) : stopword_set{};
}

inline void cmd_index(const run_config& cfg)
{
    auto trials = join_annotations(load_corpus(cfg.input("corpus"), cfg.fields), cfg, cfg.sections.enrichment.any());
    build_index(trials, cfg.sections, stopwords_of(cfg)).save(cfg.output("index"));
}

/// Topics with demographics and keywords: from the topic sidecar when present,
/// otherwise analyzed on the fly (which needs the lexicons).
inline std::vector<patient_topic> load_patient_topics(const run_config& cfg)
{
    auto records = load_topics(cfg.input("topics"));
    if (cfg.has("topic_annotations") && std::filesystem::exists(cfg.output("topic_annotations"))) {
        return read_topic_annotations(cfg.output("topic_annotations"), records);
    }
    auto lex = lexicons::load(cfg);
    return analyze_topics(records, lex.make_annotator());
}

inline run_file search_topics(const inverted_index& index, const std::vector<patient_topic>& topics,
                              const run_config& cfg, const stopword_set& stopwords, const enrichment_flags& flags)
{
    run_file run;
    for (const auto& t : topics) {
        topic_ranking tr{t.topic_id, {}};
        for (auto& h : search(cfg.model, index, build_query(t, flags, stopwords), cfg.k)) {
            tr.entries.push_back({std::move(h.doc_id), 0, h.score, cfg.run_tag});
        }
        renumber(tr.entries);
        run.topics.push_back(std::move(tr));
    }
    return run;
}

/// Refuses an index whose recorded section config differs from the run config.
inline void check_index_matches(const inverted_index& index, const run_config& cfg)
{
    if (!(index.config() == cfg.sections)) {
        throw config_error("stale index: built for sections [" + join(index.config().names(), ",") + "] enrichment '"
                           + index.config().enrichment.str() + "' but config asks for [" + join(cfg.sections.names(), ",")
                           + "] enrichment '" + cfg.sections.enrichment.str() + "'; rebuild with `ctmatch index`");
    }
}

inline void cmd_search(const run_config& cfg)
{
    auto index = inverted_index::load(cfg.input("index"));
    check_index_matches(index, cfg);
    auto topics = load_patient_topics(cfg);
    write_run(cfg.output("run"), search_topics(index, topics, cfg, stopwords_of(cfg), cfg.sections.enrichment));
}

inline constraint_lookup load_constraints(const run_config& cfg, const filter_config& filters)
{
    std::unordered_map<std::string, trial_annotation> ann;
    if (filters.smoking || filters.drinking) {
        ann = read_trial_annotations(cfg.input("trial_annotations"));
    }
    constraint_lookup out;
    for (const auto& t : load_corpus(cfg.input("corpus"), cfg.fields)) {
        habit_exclusions habits;
        if (auto it = ann.find(t.nct_id); it != ann.end()) {
            habits = it->second.habits;
        }
        out.emplace(t.nct_id, constraints_of(t, habits));
    }
    return out;
}

struct filtered_run {
    run_file run;
    std::vector<nlohmann::json> report;
    double mean_removed_fraction = 0.0;
};

inline filtered_run filter_run(const run_file& run, const std::vector<patient_topic>& topics,
                               const constraint_lookup& trials, const filter_config& flags)
{
    std::unordered_map<std::string, const patient_topic*> by_id;
    for (const auto& t : topics) {
        by_id.emplace(t.topic_id, &t);
    }
    filtered_run out;
    for (const auto& tr : run.topics) {
        auto it = by_id.find(tr.topic_id);
        demographics profile;
        if (it != by_id.end()) {
            profile = it->second->profile;
        }
        auto r = apply_filters(tr.entries, profile, trials, flags);
        out.report.push_back(filter_report_line(tr.topic_id, flags, tr.entries.size(), r));
        out.mean_removed_fraction += r.removed_fraction;
        out.run.topics.push_back({tr.topic_id, std::move(r.ranking)});
    }
    if (!run.topics.empty()) {
        out.mean_removed_fraction /= static_cast<double>(run.topics.size());
    }
    return out;
}

/// With no filter flags the input run is copied byte for byte.
inline void cmd_filter(const run_config& cfg)
{
    auto in_path = cfg.input("run");
    auto bytes = read_file(in_path);
    run_file run;
    try {
        run = parse_run(bytes);
    } catch (const format_error& e) {
        throw data_error(in_path.string() + ": " + e.what());
    }
    auto topics = load_patient_topics(cfg);
    auto result = filter_run(run, topics, load_constraints(cfg, cfg.filters), cfg.filters);
    write_file(cfg.output("filtered_run"), cfg.filters.any() ? format_run(result.run) : bytes);
    if (cfg.has("filter_report")) {
        write_file(cfg.output("filter_report"), detail::jsonl(result.report));
    }
}

inline eval_table cmd_eval(const run_config& cfg)
{
    auto run = read_run(cfg.input_or("eval_run", "run"));
    auto q = read_qrels(cfg.input("qrels"));
    auto table = evaluate_run(run, q, cfg.metrics, cfg.threshold);
    if (cfg.has("eval_tsv")) {
        write_file(cfg.output("eval_tsv"), table.to_tsv());
    }
    if (cfg.has("eval_json")) {
        write_file(cfg.output("eval_json"), table.to_json().dump(2) + "\n");
    }
    if (cfg.has("cutoffs_csv")) {
        write_file(cfg.output("cutoffs_csv"), count_at_cutoffs(run, q, cfg.cutoff_k).to_csv());
    }
    return table;
}

struct grid_row_result {
    experiment_row row;
    eval_table table;
    double mean_removed_fraction = 0.0;
};

struct grid_report {
    std::vector<grid_row_result> rows;

    std::string to_tsv() const
    {
        std::string out = "id\tsections\tenrichment\tfilters";
        if (!rows.empty()) {
            for (const auto& m : rows.front().table.metric_names) {
                out += "\t" + m;
            }
        }
        out += "\tremoved_fraction\n";
        for (const auto& r : rows) {
            out += r.row.id + "\t" + join(r.row.sections.names(), "+") + "\t" + r.row.sections.enrichment.str() + "\t"
                   + r.row.filters.str();
            for (double v : r.table.means) {
                out += "\t" + format_double(v);
            }
            out += "\t" + format_double(r.mean_removed_fraction) + "\n";
        }
        return out;
    }

    /// Per row and metric, the ids of rows whose per-topic values differ with
    /// paired t-test p <= alpha.
    nlohmann::json to_json(double alpha = 0.05) const
    {
        nlohmann::json out = nlohmann::json::array();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            nlohmann::json row{{"id", r.row.id},
                               {"sections", r.row.sections.names()},
                               {"enrichment", r.row.sections.enrichment.str()},
                               {"filters", r.row.filters.str()},
                               {"removed_fraction", r.mean_removed_fraction}};
            nlohmann::json means = nlohmann::json::object();
            nlohmann::json sig = nlohmann::json::object();
            for (std::size_t m = 0; m < r.table.metric_names.size(); ++m) {
                const auto& name = r.table.metric_names[m];
                means[name] = r.table.means[m];
                std::vector<std::string> better_than;
                auto a = r.table.column(m);
                for (std::size_t j = 0; j < rows.size(); ++j) {
                    if (j == i || a.size() < 2) {
                        continue;
                    }
                    auto b = rows[j].table.column(m);
                    if (b.size() == a.size() && paired_t_test(a, b) <= alpha && r.table.means[m] > rows[j].table.means[m]) {
                        better_than.push_back(rows[j].row.id);
                    }
                }
                sig[name] = better_than;
            }
            row["mean"] = means;
            row["significantly_better_than"] = sig;
            out.push_back(std::move(row));
        }
        return out;
    }
};

/// Runs every grid row: index (cached per section config), search, filter, evaluate.
inline grid_report run_grid(const run_config& cfg)
{
    if (cfg.grid.empty()) {
        throw config_error("ablation needs at least one grid row");
    }
    auto stopwords = stopwords_of(cfg);
    bool need_keywords = std::any_of(cfg.grid.begin(), cfg.grid.end(),
                                     [](const auto& r) { return r.sections.enrichment.any(); });
    auto trials = join_annotations(load_corpus(cfg.input("corpus"), cfg.fields), cfg, need_keywords);
    auto topics = load_patient_topics(cfg);
    auto q = read_qrels(cfg.input("qrels"));
    bool need_constraints = std::any_of(cfg.grid.begin(), cfg.grid.end(), [](const auto& r) { return r.filters.any(); });
    filter_config all_filters;
    for (const auto& r : cfg.grid) {
        all_filters.smoking = all_filters.smoking || r.filters.smoking;
        all_filters.drinking = all_filters.drinking || r.filters.drinking;
    }
    constraint_lookup constraints;
    if (need_constraints) {
        constraints = load_constraints(cfg, all_filters);
    }

    grid_report report;
    std::map<std::string, inverted_index> cache;
    for (const auto& row : cfg.grid) {
        auto key = join(row.sections.names(), "+") + "|" + row.sections.enrichment.str();
        auto it = cache.find(key);
        if (it == cache.end()) {
            it = cache.emplace(key, build_index(trials, row.sections, stopwords)).first;
        }
        auto run = search_topics(it->second, topics, cfg, stopwords, row.sections.enrichment);
        grid_row_result res{row, {}, 0.0};
        if (row.filters.any()) {
            auto f = filter_run(run, topics, constraints, row.filters);
            run = std::move(f.run);
            res.mean_removed_fraction = f.mean_removed_fraction;
        }
        res.table = evaluate_run(run, q, cfg.metrics, cfg.threshold);
        report.rows.push_back(std::move(res));
    }
    return report;
}

inline grid_report cmd_ablation(const run_config& cfg)
{
    auto report = run_grid(cfg);
    write_file(cfg.output("ablation_tsv"), report.to_tsv());
    if (cfg.has("ablation_json")) {
        write_file(cfg.output("ablation_json"), report.to_json().dump(2) + "\n");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Re-ranker bridge
// ---------------------------------------------------------------------------

/// Titles, summary, description and conditions.
inline std::string descriptive_text(const clinical_trial& t)
{
    std::vector<std::string> parts;
    for (const auto* s : {&t.brief_title, &t.official_title, &t.summary, &t.description}) {
        if (!s->empty()) {
            parts.push_back(*s);
        }
    }
    if (!t.conditions.empty()) {
        parts.push_back(join(t.conditions, "; "));
    }
    return join(parts, "\n");
}

struct training_example {
    std::string topic_id;
    std::string doc_id;
    bool positive = false;
};

/// Grade routing for pair export over documents present in the run.
/// Topical: grade >= 1 positive, grade 0 or unjudged negative.
/// Criteria: grade 2 positive, grade 1 negative, others unused.
/// Topics without positives are dropped and reported through `skipped`.
inline std::vector<training_example> select_training_examples(const run_file& run, const qrels& q, pair_phase phase,
                                                              std::vector<std::string>* skipped = nullptr)
{
    std::vector<training_example> out;
    for (const auto& tr : run.topics) {
        std::vector<training_example> topic;
        bool any_pos = false;
        for (const auto& e : tr.entries) {
            int g = q.grade(tr.topic_id, e.doc_id);
            if (phase == pair_phase::topical) {
                topic.push_back({tr.topic_id, e.doc_id, g >= 1});
                any_pos = any_pos || g >= 1;
            } else if (g >= 1) {
                topic.push_back({tr.topic_id, e.doc_id, g == 2});
                any_pos = any_pos || g == 2;
            }
        }
        if (!any_pos) {
            if (skipped != nullptr) {
                skipped->push_back(tr.topic_id);
            }
            continue;
        }
        out.insert(out.end(), topic.begin(), topic.end());
    }
    return out;
}

inline std::vector<nlohmann::json> export_pairs(const run_file& run, const qrels& q,
                                                const std::vector<topic_record>& topics,
                                                const std::vector<clinical_trial>& trials, pair_phase phase,
                                                std::vector<std::string>* skipped = nullptr)
{
    std::unordered_map<std::string, const topic_record*> topic_by_id;
    for (const auto& t : topics) {
        topic_by_id.emplace(t.topic_id, &t);
    }
    std::unordered_map<std::string, const clinical_trial*> trial_by_id;
    for (const auto& t : trials) {
        trial_by_id.emplace(t.nct_id, &t);
    }
    std::vector<nlohmann::json> out;
    for (const auto& ex : select_training_examples(run, q, phase, skipped)) {
        auto tp = topic_by_id.find(ex.topic_id);
        if (tp == topic_by_id.end()) {
            throw data_error("run topic " + ex.topic_id + " not in topics file");
        }
        auto tr = trial_by_id.find(ex.doc_id);
        if (tr == trial_by_id.end()) {
            throw data_error("run document " + ex.doc_id + " not in corpus");
        }
        out.push_back({{"topic_id", ex.topic_id},
                       {"topic_text", tp->second->text},
                       {"doc_id", ex.doc_id},
                       {"doc_text", phase == pair_phase::topical ? descriptive_text(*tr->second)
                                                                 : tr->second->criteria_text},
                       {"label", ex.positive ? "pos" : "neg"},
                       {"phase", std::string(to_string(phase))}});
    }
    return out;
}

inline void cmd_export_pairs(const run_config& cfg)
{
    auto run = read_run(cfg.input_or("pairs_run", "run"));
    auto q = read_qrels(cfg.input("qrels"));
    std::vector<std::string> skipped;
    auto records = export_pairs(run, q, load_topics(cfg.input("topics")), load_corpus(cfg.input("corpus"), cfg.fields),
                                cfg.phase, &skipped);
    for (const auto& t : skipped) {
        std::cerr << "warning: topic " << t << " has no positives for phase " << to_string(cfg.phase)
                  << "; skipped\n";
    }
    write_file(cfg.output("pairs"), detail::jsonl(records));
}

struct rerank_scores {
    double stage1 = 0.0;
    double stage2 = 0.0;
};

using score_sidecar = std::map<std::pair<std::string, std::string>, rerank_scores>;

/// JSON-lines records {topic_id, doc_id, stage1_score, stage2_score}.
inline score_sidecar read_score_sidecar(const std::filesystem::path& path)
{
    score_sidecar out;
    for (const auto& j : detail::read_jsonl(path)) {
        try {
            out[{j.at("topic_id").get<std::string>(), j.at("doc_id").get<std::string>()}] = {
                j.at("stage1_score").get<double>(), j.at("stage2_score").get<double>()};
        } catch (const nlohmann::json::exception& e) {
            throw data_error(path.string() + ": " + e.what());
        }
    }
    return out;
}

/// Reorders each topic's top k by the external scores and keeps the tail.
///
/// Sequential mode sorts by stage-1 score, then stably by stage-2 score; fusion
/// sorts by w * stage1 + (1 - w) * stage2. Ties keep the incoming order. The
/// top block carries its final scores; tail scores are shifted to sit below the
/// block minimum so scores stay non-increasing.
inline run_file apply_rerank(const run_file& run, const score_sidecar& scores, std::size_t k, rerank_mode mode,
                             double fusion_weight = 0.5)
{
    run_file out;
    for (const auto& tr : run.topics) {
        auto n = std::min(k, tr.entries.size());
        struct item {
            run_entry entry;
            rerank_scores s;
        };
        std::vector<item> head;
        for (std::size_t i = 0; i < n; ++i) {
            auto it = scores.find({tr.topic_id, tr.entries[i].doc_id});
            if (it == scores.end()) {
                throw data_error("no re-rank score for topic " + tr.topic_id + " document " + tr.entries[i].doc_id);
            }
            head.push_back({tr.entries[i], it->second});
        }
        std::vector<run_entry> entries;
        if (mode == rerank_mode::sequential) {
            std::stable_sort(head.begin(), head.end(), [](const item& a, const item& b) { return a.s.stage1 > b.s.stage1; });
            std::stable_sort(head.begin(), head.end(), [](const item& a, const item& b) { return a.s.stage2 > b.s.stage2; });
            for (auto& h : head) {
                h.entry.score = h.s.stage2;
                entries.push_back(std::move(h.entry));
            }
        } else {
            auto fused = [&](const item& x) { return fusion_weight * x.s.stage1 + (1.0 - fusion_weight) * x.s.stage2; };
            std::stable_sort(head.begin(), head.end(), [&](const item& a, const item& b) { return fused(a) > fused(b); });
            for (auto& h : head) {
                h.entry.score = fused(h);
                entries.push_back(std::move(h.entry));
            }
        }
        if (n < tr.entries.size()) {
            double floor = entries.empty() ? tr.entries[n].score + 1.0 : entries.back().score;
            double shift = tr.entries[n].score - floor + 1.0;
            for (std::size_t i = n; i < tr.entries.size(); ++i) {
                auto e = tr.entries[i];
                e.score -= shift;
                entries.push_back(std::move(e));
            }
        }
        renumber(entries);
        out.topics.push_back({tr.topic_id, std::move(entries)});
    }
    return out;
}

inline void cmd_rerank_apply(const run_config& cfg)
{
    auto run = read_run(cfg.input("run"));
    auto scores = read_score_sidecar(cfg.input("rerank_scores"));
    write_run(cfg.output("reranked_run"), apply_rerank(run, scores, cfg.rerank_k, cfg.rerank, cfg.fusion_weight));
}

}  // namespace ctmatch
