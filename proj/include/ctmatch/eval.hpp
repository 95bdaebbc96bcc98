#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "error.hpp"
#include "text.hpp"
#include "trec.hpp"

namespace ctmatch {

/// nDCG@k with gain = grade and discount log2(i + 1). Unjudged documents count
/// as grade 0; the ideal ranking uses every judged grade of the topic.
inline double ndcg_at_k(std::span<const std::string> ranking, const grade_map& judged, std::size_t k)
{
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        auto it = judged.find(ranking[i]);
        if (it != judged.end() && it->second > 0) {
            dcg += it->second / std::log2(static_cast<double>(i) + 2.0);
        }
    }
    std::vector<int> ideal;
    for (const auto& [doc, g] : judged) {
        if (g > 0) {
            ideal.push_back(g);
        }
    }
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
        idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
    }
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

/// Fraction of the top k that is relevant (grade >= threshold). The
/// denominator stays k for short rankings.
inline double precision_at_k(std::span<const std::string> ranking, const grade_map& judged, std::size_t k,
                             int threshold = 2)
{
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        auto it = judged.find(ranking[i]);
        if (it != judged.end() && it->second >= threshold) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

inline double reciprocal_rank(std::span<const std::string> ranking, const grade_map& judged, int threshold = 2)
{
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        auto it = judged.find(ranking[i]);
        if (it != judged.end() && it->second >= threshold) {
            return 1.0 / static_cast<double>(i + 1);
        }
    }
    return 0.0;
}

enum class metric_kind { ndcg, precision, rr };

struct metric {
    metric_kind kind = metric_kind::ndcg;
    std::size_t k = 0;

    /// Accepts "ndcg@5", "p@10", "rr" (case-insensitive).
    static metric parse(std::string_view name)
    {
        auto v = to_lower(trim(name));
        if (v == "rr" || v == "recip_rank" || v == "mrr") {
            return {metric_kind::rr, 0};
        }
        auto at = v.find('@');
        if (at != std::string::npos) {
            std::size_t k = 0;
            auto base = v.substr(0, at);
            if (parse_int(std::string_view(v).substr(at + 1), k) && k >= 1) {
                if (base == "ndcg") {
                    return {metric_kind::ndcg, k};
                }
                if (base == "p" || base == "precision") {
                    return {metric_kind::precision, k};
                }
            }
        }
        throw config_error("unknown metric '" + std::string(name) + "'");
    }

    std::string name() const
    {
        switch (kind) {
        case metric_kind::ndcg: return "ndcg@" + std::to_string(k);
        case metric_kind::precision: return "p@" + std::to_string(k);
        case metric_kind::rr: break;
        }
        return "rr";
    }

    double compute(std::span<const std::string> ranking, const grade_map& judged, int threshold) const
    {
        switch (kind) {
        case metric_kind::ndcg: return ndcg_at_k(ranking, judged, k);
        case metric_kind::precision: return precision_at_k(ranking, judged, k, threshold);
        case metric_kind::rr: break;
        }
        return reciprocal_rank(ranking, judged, threshold);
    }
};

inline std::vector<metric> parse_metrics(const std::vector<std::string>& names)
{
    std::vector<metric> out;
    for (const auto& n : names) {
        out.push_back(metric::parse(n));
    }
    return out;
}

inline std::vector<metric> default_metrics()
{
    return parse_metrics({"ndcg@5", "ndcg@10", "p@10", "rr"});
}

struct eval_table {
    std::vector<std::string> metric_names;
    std::vector<std::string> topic_ids;    ///< qrels topics, natural order
    std::vector<std::vector<double>> rows; ///< [topic][metric]
    std::vector<double> means;

    /// Per-topic values of one metric column.
    std::vector<double> column(std::size_t m) const
    {
        std::vector<double> out;
        for (const auto& r : rows) {
            out.push_back(r.at(m));
        }
        return out;
    }

    std::string to_tsv() const
    {
        std::string out = "topic";
        for (const auto& m : metric_names) {
            out += "\t" + m;
        }
        out += "\n";
        for (std::size_t t = 0; t < topic_ids.size(); ++t) {
            out += topic_ids[t];
            for (double v : rows[t]) {
                out += "\t" + format_double(v);
            }
            out += "\n";
        }
        out += "mean";
        for (double v : means) {
            out += "\t" + format_double(v);
        }
        out += "\n";
        return out;
    }

    nlohmann::json to_json() const
    {
        nlohmann::json per_topic = nlohmann::json::array();
        for (std::size_t t = 0; t < topic_ids.size(); ++t) {
            nlohmann::json row{{"topic", topic_ids[t]}};
            for (std::size_t m = 0; m < metric_names.size(); ++m) {
                row[metric_names[m]] = rows[t][m];
            }
            per_topic.push_back(std::move(row));
        }
        nlohmann::json mean = nlohmann::json::object();
        for (std::size_t m = 0; m < metric_names.size(); ++m) {
            mean[metric_names[m]] = means[m];
        }
        return {{"metrics", metric_names}, {"topics", per_topic}, {"mean", mean}};
    }
};

/// Scores every qrels topic; topics absent from the run score 0 everywhere.
/// Means are unweighted over qrels topics.
inline eval_table evaluate_run(const run_file& run, const qrels& q, const std::vector<metric>& metrics,
                               int threshold = 2)
{
    eval_table table;
    for (const auto& m : metrics) {
        table.metric_names.push_back(m.name());
    }
    table.means.assign(metrics.size(), 0.0);
    for (const auto& [topic, judged] : q.topics) {
        std::vector<std::string> ranking;
        if (const auto* r = run.find(topic)) {
            ranking = r->doc_ids();
        }
        std::vector<double> row;
        for (std::size_t m = 0; m < metrics.size(); ++m) {
            row.push_back(metrics[m].compute(ranking, judged, threshold));
            table.means[m] += row.back();
        }
        table.topic_ids.push_back(topic);
        table.rows.push_back(std::move(row));
    }
    if (!table.topic_ids.empty()) {
        for (auto& v : table.means) {
            v /= static_cast<double>(table.topic_ids.size());
        }
    }
    return table;
}

/// Two-sided paired Student's t-test p-value.
///
/// All differences zero gives 1.0. Zero variance with a nonzero mean has an
/// infinite t statistic and gives 0.0.
inline double paired_t_test(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.size() < 2) {
        throw data_error("paired t-test needs two equal-length samples of size >= 2");
    }
    const auto n = static_cast<double>(a.size());
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = a[i] - b[i];
    }
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) {
        return 1.0;
    }
    double mean = 0.0;
    for (double x : d) {
        mean += x;
    }
    mean /= n;
    double ss = 0.0;
    for (double x : d) {
        ss += (x - mean) * (x - mean);
    }
    double var = ss / (n - 1.0);
    if (var == 0.0) {
        return 0.0;
    }
    double t = mean / std::sqrt(var / n);
    boost::math::students_t dist(n - 1.0);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

struct cutoff_counts {
    std::vector<double> eligible;  ///< [k-1] mean count of grade 2 in top k
    std::vector<double> excluded;  ///< [k-1] mean count of grade 1 in top k

    std::string to_csv() const
    {
        std::string out = "k,eligible,excluded\n";
        for (std::size_t i = 0; i < eligible.size(); ++i) {
            out += std::to_string(i + 1) + "," + format_double(eligible[i]) + "," + format_double(excluded[i]) + "\n";
        }
        return out;
    }
};

/// Mean per-topic counts of eligible and excluded documents in the top k, for
/// k = 1..max_k, averaged over qrels topics.
inline cutoff_counts count_at_cutoffs(const run_file& run, const qrels& q, std::size_t max_k)
{
    if (max_k == 0) {
        throw config_error("max_k must be at least 1");
    }
    cutoff_counts out;
    out.eligible.assign(max_k, 0.0);
    out.excluded.assign(max_k, 0.0);
    if (q.topics.empty()) {
        return out;
    }
    for (const auto& [topic, judged] : q.topics) {
        const auto* r = run.find(topic);
        std::size_t e = 0;
        std::size_t x = 0;
        for (std::size_t k = 0; k < max_k; ++k) {
            if (r != nullptr && k < r->entries.size()) {
                auto it = judged.find(r->entries[k].doc_id);
                if (it != judged.end()) {
                    e += it->second == 2 ? 1 : 0;
                    x += it->second == 1 ? 1 : 0;
                }
            }
            out.eligible[k] += static_cast<double>(e);
            out.excluded[k] += static_cast<double>(x);
        }
    }
    for (std::size_t k = 0; k < max_k; ++k) {
        out.eligible[k] /= static_cast<double>(q.topics.size());
        out.excluded[k] /= static_cast<double>(q.topics.size());
    }
    return out;
}

}  // namespace ctmatch
