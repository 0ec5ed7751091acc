#include "saloss/salience.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace saloss {

using nlohmann::json;

namespace {

bool is_special_marker(const std::string& token) {
    return token == "[PAD]" || token == "[CLS]" || token == "[SEP]";
}

}  // namespace

CoocGraph build_graph(const std::vector<std::string>& tokens,
                      std::size_t window) {
    if (window < 2) throw DataError("build_graph: window must be >= 2");
    CoocGraph graph;
    std::vector<std::size_t> position_node;  // node index per content position
    std::vector<std::string> content;
    for (const auto& tok : tokens) {
        if (is_special_marker(tok)) continue;
        auto [it, inserted] =
            graph.node_index.try_emplace(tok, graph.node_tokens.size());
        if (inserted) graph.node_tokens.push_back(tok);
        position_node.push_back(it->second);
        content.push_back(tok);
    }
    if (graph.node_tokens.empty()) {
        throw DataError("build_graph: no graph nodes");
    }
    std::vector<std::set<std::size_t>> nbrs(graph.num_nodes());
    for (std::size_t i = 0; i < position_node.size(); ++i) {
        for (std::size_t j = i + 1; j < position_node.size() && j - i < window;
             ++j) {
            const std::size_t u = position_node[i], v = position_node[j];
            if (u == v) continue;  // no self-loops
            nbrs[u].insert(v);
            nbrs[v].insert(u);
        }
    }
    graph.adjacency.reserve(graph.num_nodes());
    for (auto& s : nbrs) {
        graph.adjacency.emplace_back(s.begin(), s.end());
    }
    return graph;
}

std::vector<double> textrank(const CoocGraph& graph, const TextRankConfig& cfg) {
    const std::size_t n = graph.num_nodes();
    if (n == 0) throw DataError("textrank: graph has no nodes");
    std::vector<double> scores(n, 1.0), next(n);
    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        double max_change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j : graph.adjacency[i]) {
                acc += scores[j] / static_cast<double>(graph.degree(j));
            }
            next[i] = (1.0 - cfg.damping) + cfg.damping * acc;
            max_change = std::max(max_change, std::abs(next[i] - scores[i]));
        }
        scores.swap(next);
        if (max_change < cfg.tol) break;
    }
    return scores;
}

SalienceMap textrank_salience(const Document& doc, const TextRankConfig& cfg) {
    auto graph = build_graph(doc.tokens, cfg.window);
    auto node_scores = textrank(graph, cfg);
    SalienceMap map;
    map.doc_id = doc.id;
    map.method = "textrank";
    map.scores.reserve(doc.tokens.size());
    for (const auto& tok : doc.tokens) {
        auto it = graph.node_index.find(tok);
        map.scores.push_back(it == graph.node_index.end()
                                 ? 0.0
                                 : node_scores[it->second]);
    }
    return map;
}

DfTable DfTable::build(const std::vector<Document>& train_docs) {
    DfTable table;
    table.num_docs = train_docs.size();
    for (const auto& doc : train_docs) {
        std::set<std::string> distinct(doc.tokens.begin(), doc.tokens.end());
        for (const auto& tok : distinct) ++table.df[tok];
    }
    return table;
}

SalienceMap tfidf_salience(const Document& doc, const DfTable& stats) {
    std::unordered_map<std::string, double> tf;
    for (const auto& tok : doc.tokens) ++tf[tok];
    SalienceMap map;
    map.doc_id = doc.id;
    map.method = "tfidf";
    map.scores.reserve(doc.tokens.size());
    const double n = static_cast<double>(stats.num_docs);
    for (const auto& tok : doc.tokens) {
        auto it = stats.df.find(tok);
        const double df = it == stats.df.end()
                              ? 0.0
                              : static_cast<double>(it->second);
        const double idf = std::log((n + 1.0) / (df + 1.0)) + 1.0;
        map.scores.push_back(tf[tok] * idf);
    }
    return map;
}

Chi2Table Chi2Table::build(const std::vector<Document>& train_docs,
                           int num_classes) {
    if (num_classes < 2) throw DataError("chi2: need at least 2 classes");
    const std::size_t c = static_cast<std::size_t>(num_classes);
    std::vector<double> class_totals(c, 0.0);
    std::unordered_map<std::string, std::vector<double>> present;
    for (const auto& doc : train_docs) {
        const std::size_t label = static_cast<std::size_t>(doc.label);
        if (label >= c) throw DataError("chi2: label out of range");
        class_totals[label] += 1.0;
        std::set<std::string> distinct(doc.tokens.begin(), doc.tokens.end());
        for (const auto& tok : distinct) {
            auto& row = present[tok];
            row.resize(c, 0.0);
            row[label] += 1.0;
        }
    }
    const double total = static_cast<double>(train_docs.size());
    Chi2Table table;
    for (const auto& [tok, with_tok] : present) {
        // 2 x C contingency: rows = {contains token, does not}
        double row_with = 0.0;
        for (double v : with_tok) row_with += v;
        const double row_without = total - row_with;
        double chi2 = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            const double col = class_totals[k];
            const double e_with = row_with * col / total;
            const double e_without = row_without * col / total;
            if (e_with > 0.0) {
                const double d = with_tok[k] - e_with;
                chi2 += d * d / e_with;
            }
            if (e_without > 0.0) {
                const double d = (col - with_tok[k]) - e_without;
                chi2 += d * d / e_without;
            }
        }
        table.scores[tok] = chi2;
    }
    return table;
}

SalienceMap chi2_salience(const Document& doc, const Chi2Table& table) {
    SalienceMap map;
    map.doc_id = doc.id;
    map.method = "chi2";
    map.scores.reserve(doc.tokens.size());
    for (const auto& tok : doc.tokens) {
        auto it = table.scores.find(tok);
        map.scores.push_back(it == table.scores.end() ? 0.0 : it->second);
    }
    return map;
}

SalienceMap uniform_salience(const Document& doc) {
    if (doc.tokens.empty()) {
        throw DataError("uniform_salience: document has no tokens");
    }
    SalienceMap map;
    map.doc_id = doc.id;
    map.method = "uniform";
    map.scores.assign(doc.tokens.size(), 1.0);
    return map;
}

SalienceMap normalize_salience(SalienceMap map,
                               const std::vector<bool>& special_mask,
                               double epsilon) {
    if (epsilon <= 0.0) {
        throw NumericError("normalize_salience: epsilon must be positive");
    }
    std::vector<bool> mask = special_mask;
    if (mask.empty()) mask.assign(map.scores.size(), false);
    if (mask.size() != map.scores.size()) {
        throw ShapeError("normalize_salience: mask length " +
                         std::to_string(mask.size()) + " vs scores " +
                         std::to_string(map.scores.size()));
    }
    std::size_t n_special = 0, n_content = 0;
    double content_sum = 0.0;
    for (std::size_t i = 0; i < map.scores.size(); ++i) {
        if (map.scores[i] < 0.0) {
            throw NumericError("normalize_salience: negative score");
        }
        if (mask[i]) {
            ++n_special;
        } else {
            ++n_content;
            content_sum += map.scores[i];
        }
    }
    if (n_content == 0) {
        throw DataError("normalize_salience: no content positions");
    }
    const double target = 1.0 - epsilon * static_cast<double>(n_special);
    if (target <= 0.0) {
        throw NumericError("normalize_salience: epsilon mass exceeds 1");
    }
    if (content_sum <= 0.0) {
        // uniform fallback over content tokens
        for (std::size_t i = 0; i < map.scores.size(); ++i) {
            map.scores[i] = mask[i]
                                ? epsilon
                                : target / static_cast<double>(n_content);
        }
        map.normalized = true;
        return map;
    }
    for (std::size_t i = 0; i < map.scores.size(); ++i) {
        map.scores[i] = mask[i] ? epsilon
                                : map.scores[i] * target / content_sum;
    }
    // floor content entries at epsilon, compensating from the unfloored mass
    for (int pass = 0; pass < 2; ++pass) {
        double floored = 0.0, free_mass = 0.0;
        for (std::size_t i = 0; i < map.scores.size(); ++i) {
            if (mask[i]) continue;
            if (map.scores[i] < epsilon) {
                floored += epsilon;
            } else {
                free_mass += map.scores[i];
            }
        }
        if (floored == 0.0) break;
        const double rescale = (target - floored) / free_mass;
        for (std::size_t i = 0; i < map.scores.size(); ++i) {
            if (mask[i]) continue;
            map.scores[i] = map.scores[i] < epsilon ? epsilon
                                                    : map.scores[i] * rescale;
        }
    }
    map.normalized = true;
    return map;
}

SalienceMap compute_salience(const Document& doc, const std::string& method,
                             const TextRankConfig& cfg, const DfTable* df,
                             const Chi2Table* chi2) {
    if (method == "textrank") return textrank_salience(doc, cfg);
    if (method == "uniform") return uniform_salience(doc);
    if (method == "tfidf") {
        if (!df) throw UsageError("tfidf salience needs corpus statistics");
        return tfidf_salience(doc, *df);
    }
    if (method == "chi2") {
        if (!chi2) throw UsageError("chi2 salience needs a score table");
        return chi2_salience(doc, *chi2);
    }
    throw UsageError("unknown salience method \"" + method + "\"");
}

void save_salience_jsonl(const std::vector<SalienceMap>& maps,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("save_salience_jsonl: cannot open " + path);
    for (const auto& map : maps) {
        json obj;
        obj["id"] = map.doc_id;
        obj["method"] = map.method;
        obj["scores"] = map.scores;
        out << obj.dump() << "\n";
    }
}

std::vector<SalienceMap> load_salience_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_salience_jsonl: cannot open " + path);
    std::vector<SalienceMap> maps;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("load_salience_jsonl: line " +
                            std::to_string(line_no) + ": " + e.what());
        }
        SalienceMap map;
        map.doc_id = obj.at("id").get<std::string>();
        map.method = obj.at("method").get<std::string>();
        map.scores = obj.at("scores").get<std::vector<double>>();
        maps.push_back(std::move(map));
    }
    return maps;
}

}  // namespace saloss
