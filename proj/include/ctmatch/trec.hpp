#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace ctmatch {

struct run_entry {
    std::string doc_id;
    int rank = 0;
    double score = 0.0;
    std::string tag;
    friend bool operator==(const run_entry&, const run_entry&) = default;
};

struct topic_ranking {
    std::string topic_id;
    std::vector<run_entry> entries;  ///< rank order
    friend bool operator==(const topic_ranking&, const topic_ranking&) = default;

    std::vector<std::string> doc_ids() const
    {
        std::vector<std::string> out;
        out.reserve(entries.size());
        for (const auto& e : entries) {
            out.push_back(e.doc_id);
        }
        return out;
    }
};

/// TREC run: topics in first-appearance order, each ranked 1..n.
struct run_file {
    std::vector<topic_ranking> topics;

    const topic_ranking* find(std::string_view topic_id) const
    {
        for (const auto& t : topics) {
            if (t.topic_id == topic_id) {
                return &t;
            }
        }
        return nullptr;
    }

    friend bool operator==(const run_file&, const run_file&) = default;
};

/// Renumbers ranks from 1 in the current order.
inline void renumber(std::vector<run_entry>& entries)
{
    for (std::size_t i = 0; i < entries.size(); ++i) {
        entries[i].rank = static_cast<int>(i + 1);
    }
}

/// Parses `topic Q0 doc rank score tag` lines. Ranks must be 1..n without gaps,
/// scores non-increasing with rank, doc ids unique per topic.
inline run_file parse_run(std::string_view content)
{
    struct pending {
        std::vector<run_entry> entries;
        std::vector<std::size_t> lines;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, pending> by_topic;
    auto lines = split_lines(content);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        auto f = split_fields(lines[n]);
        if (f.empty()) {
            continue;
        }
        if (f.size() != 6) {
            throw format_error("run line needs 6 fields: topic Q0 doc rank score tag", n + 1);
        }
        run_entry e;
        e.doc_id = std::string(f[2]);
        e.tag = std::string(f[5]);
        if (!parse_int(f[3], e.rank) || e.rank < 1) {
            throw format_error("bad rank '" + std::string(f[3]) + "'", n + 1);
        }
        if (!parse_double(f[4], e.score)) {
            throw format_error("bad score '" + std::string(f[4]) + "'", n + 1);
        }
        std::string topic(f[0]);
        auto [it, inserted] = by_topic.try_emplace(topic);
        if (inserted) {
            order.push_back(topic);
        }
        it->second.entries.push_back(std::move(e));
        it->second.lines.push_back(n + 1);
    }

    run_file run;
    for (const auto& topic : order) {
        auto& p = by_topic[topic];
        std::vector<std::size_t> idx(p.entries.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            idx[i] = i;
        }
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return p.entries[a].rank < p.entries[b].rank; });
        topic_ranking tr{topic, {}};
        std::set<std::string> docs;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            auto& e = p.entries[idx[i]];
            auto line = p.lines[idx[i]];
            if (e.rank != static_cast<int>(i + 1)) {
                throw format_error("topic " + topic + ": rank " + std::to_string(e.rank) + " breaks the sequence 1.."
                                       + std::to_string(idx.size()),
                                   line);
            }
            if (!docs.insert(e.doc_id).second) {
                throw format_error("topic " + topic + ": duplicate document " + e.doc_id, line);
            }
            if (!tr.entries.empty() && e.score > tr.entries.back().score) {
                throw format_error("topic " + topic + ": score increases with rank", line);
            }
            tr.entries.push_back(std::move(e));
        }
        run.topics.push_back(std::move(tr));
    }
    return run;
}

inline run_file read_run(const std::filesystem::path& path)
{
    try {
        return parse_run(read_file(path));
    } catch (const format_error& e) {
        throw data_error(path.string() + ": " + e.what());
    }
}

inline std::string format_run(const run_file& run)
{
    std::string out;
    for (const auto& t : run.topics) {
        for (const auto& e : t.entries) {
            out += t.topic_id;
            out += " Q0 ";
            out += e.doc_id;
            out += ' ';
            out += std::to_string(e.rank);
            out += ' ';
            out += format_double(e.score);
            out += ' ';
            out += e.tag;
            out += '\n';
        }
    }
    return out;
}

inline void write_run(const std::filesystem::path& path, const run_file& run)
{
    write_file(path, format_run(run));
}

using grade_map = std::unordered_map<std::string, int>;

struct natural_order {
    bool operator()(const std::string& a, const std::string& b) const { return natural_less(a, b); }
};

/// Graded judgments: 0 not relevant, 1 excluded, 2 eligible.
struct qrels {
    std::map<std::string, grade_map, natural_order> topics;

    int grade(const std::string& topic, const std::string& doc) const
    {
        auto t = topics.find(topic);
        if (t == topics.end()) {
            return 0;
        }
        auto d = t->second.find(doc);
        return d == t->second.end() ? 0 : d->second;
    }

    const grade_map& judgments(const std::string& topic) const
    {
        static const grade_map empty;
        auto t = topics.find(topic);
        return t == topics.end() ? empty : t->second;
    }
};

/// Parses `topic iteration doc grade` lines; grades outside {0,1,2} are errors,
/// as are conflicting duplicate judgments.
inline qrels parse_qrels(std::string_view content)
{
    qrels q;
    auto lines = split_lines(content);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        auto f = split_fields(lines[n]);
        if (f.empty()) {
            continue;
        }
        if (f.size() != 4) {
            throw format_error("qrels line needs 4 fields: topic iteration doc grade", n + 1);
        }
        int grade = 0;
        if (!parse_int(f[3], grade) || grade < 0 || grade > 2) {
            throw format_error("grade must be 0, 1 or 2, got '" + std::string(f[3]) + "'", n + 1);
        }
        auto& topic = q.topics[std::string(f[0])];
        auto [it, inserted] = topic.try_emplace(std::string(f[2]), grade);
        if (!inserted && it->second != grade) {
            throw format_error("conflicting judgments for " + std::string(f[0]) + "/" + std::string(f[2]), n + 1);
        }
    }
    return q;
}

inline qrels read_qrels(const std::filesystem::path& path)
{
    try {
        return parse_qrels(read_file(path));
    } catch (const format_error& e) {
        throw data_error(path.string() + ": " + e.what());
    }
}

inline std::string format_qrels(const qrels& q)
{
    std::string out;
    for (const auto& [topic, grades] : q.topics) {
        std::vector<std::string> docs;
        for (const auto& [doc, g] : grades) {
            docs.push_back(doc);
        }
        std::sort(docs.begin(), docs.end());
        for (const auto& doc : docs) {
            out += topic + " 0 " + doc + " " + std::to_string(grades.at(doc)) + "\n";
        }
    }
    return out;
}

}  // namespace ctmatch
