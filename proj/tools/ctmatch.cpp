// Command-line front end: ctmatch <subcommand> --config run.json [overrides]
//
// Exit codes: 0 success, 1 data error, 2 configuration error.

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctmatch/pipeline.hpp"

namespace {

struct overrides {
    std::string config;
    std::map<std::string, std::string> paths;  // config key -> CLI value
    std::string output;
    std::string model;
    std::string sections;
    std::string enrichment;
    std::string filters;
    std::string tag;
    std::string phase;
    std::string rerank_mode;
    std::size_t k = 0;
    std::size_t rerank_k = 0;
    std::vector<std::string> sets;
};

void add_common(CLI::App& cmd, overrides& o)
{
    cmd.add_option("-c,--config", o.config, "run configuration (JSON)");
    for (const auto& key : ctmatch::run_config::path_keys()) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        cmd.add_option(flag, o.paths[key], key + " path");
    }
    cmd.add_option("-o,--output", o.output, "primary output of this subcommand");
    cmd.add_option("--model", o.model, "bm25plus, tfidf or inexpb2");
    cmd.add_option("--sections", o.sections, "comma-separated section names");
    cmd.add_option("--enrichment", o.enrichment, "subset of cpf");
    cmd.add_option("--filters", o.filters, "subset of AGSD");
    cmd.add_option("-k,--depth", o.k, "ranking depth");
    cmd.add_option("--tag", o.tag, "run tag");
    cmd.add_option("--phase", o.phase, "topical or criteria");
    cmd.add_option("--rerank-k", o.rerank_k, "re-ranked prefix length");
    cmd.add_option("--rerank-mode", o.rerank_mode, "sequential or fusion");
    cmd.add_option("--set", o.sets, "key=value config override (value parsed as JSON when possible)");
}

nlohmann::json to_patch(const overrides& o, const std::string& primary_output)
{
    nlohmann::json p = nlohmann::json::object();
    auto abs = [](const std::string& s) { return std::filesystem::absolute(s).lexically_normal().string(); };
    for (const auto& [key, value] : o.paths) {
        if (!value.empty()) {
            p[key] = abs(value);
        }
    }
    if (!o.output.empty()) {
        p[primary_output] = abs(o.output);
    }
    if (!o.model.empty()) {
        p["model"] = o.model;
    }
    if (!o.sections.empty()) {
        std::vector<std::string> names;
        for (auto s : ctmatch::split_on(o.sections, ',')) {
            names.emplace_back(ctmatch::trim(s));
        }
        p["sections"] = names;
    }
    if (!o.enrichment.empty()) {
        p["enrichment"] = o.enrichment == "none" ? "" : o.enrichment;
    }
    if (!o.filters.empty()) {
        p["filters"] = o.filters == "none" ? "" : o.filters;
    }
    if (!o.tag.empty()) {
        p["run_tag"] = o.tag;
    }
    if (!o.phase.empty()) {
        p["phase"] = o.phase;
    }
    if (!o.rerank_mode.empty()) {
        p["rerank_mode"] = o.rerank_mode;
    }
    if (o.k > 0) {
        p["k"] = o.k;
    }
    if (o.rerank_k > 0) {
        p["rerank_k"] = o.rerank_k;
    }
    for (const auto& s : o.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ctmatch::config_error("--set expects key=value, got '" + s + "'");
        }
        auto key = s.substr(0, eq);
        auto value = s.substr(eq + 1);
        auto parsed = nlohmann::json::parse(value, nullptr, false);
        p[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
    }
    return p;
}

ctmatch::run_config resolve(const overrides& o, const std::string& primary_output)
{
    auto patch = to_patch(o, primary_output);
    if (o.config.empty()) {
        return ctmatch::run_config::from_json(patch);
    }
    return ctmatch::run_config::load(o.config, patch);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Patient-to-clinical-trial retrieval"};
    app.require_subcommand(1);

    struct command {
        const char* name;
        const char* help;
        const char* primary_output;
        std::function<void(const ctmatch::run_config&)> run;
    };
    const std::vector<command> commands{
        {"annotate", "write trial and topic keyword sidecars", "trial_annotations", ctmatch::cmd_annotate},
        {"index", "build an inverted index", "index", ctmatch::cmd_index},
        {"search", "rank trials for every topic", "run", ctmatch::cmd_search},
        {"filter", "drop ineligible trials from a run", "filtered_run", ctmatch::cmd_filter},
        {"eval", "score a run against qrels", "eval_tsv",
         [](const ctmatch::run_config& cfg) {
             auto table = ctmatch::cmd_eval(cfg);
             if (!cfg.has("eval_tsv") && !cfg.has("eval_json")) {
                 std::cout << table.to_tsv();
             }
         }},
        {"ablation", "evaluate every row of an experiment grid", "ablation_tsv",
         [](const ctmatch::run_config& cfg) { std::cout << ctmatch::cmd_ablation(cfg).to_tsv(); }},
        {"export-pairs", "write training pairs for an external re-ranker", "pairs", ctmatch::cmd_export_pairs},
        {"rerank-apply", "merge external re-ranker scores into a run", "reranked_run", ctmatch::cmd_rerank_apply},
    };

    std::vector<overrides> opts(commands.size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        auto* sub = app.add_subcommand(commands[i].name, commands[i].help);
        add_common(*sub, opts[i]);
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        for (std::size_t i = 0; i < commands.size(); ++i) {
            if (subs[i]->parsed()) {
                commands[i].run(resolve(opts[i], commands[i].primary_output));
            }
        }
    } catch (const ctmatch::config_error& e) {
        std::cerr << "ctmatch: configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ctmatch::data_error& e) {
        std::cerr << "ctmatch: data error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ctmatch: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
