#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "saloss/data.hpp"

namespace saloss {

/// Unweighted undirected co-occurrence graph over the distinct content
/// tokens of one document. Nodes exclude special-token markers; no self-loops.
struct CoocGraph {
    std::vector<std::string> node_tokens;
    std::unordered_map<std::string, std::size_t> node_index;
    std::vector<std::vector<std::size_t>> adjacency;  // sorted neighbor lists

    std::size_t num_nodes() const { return node_tokens.size(); }
    std::size_t degree(std::size_t node) const { return adjacency[node].size(); }
};

struct TextRankConfig {
    double damping = 0.85;
    std::size_t window = 4;
    std::size_t max_iters = 10;
    double tol = 1e-6;
};

struct SalienceMap {
    std::string doc_id;
    std::vector<double> scores;  // one per token position
    bool normalized = false;
    std::string method;  // textrank | tfidf | chi2 | uniform
};

/// Edge between distinct tokens u,v iff some occurrence pair lies within
/// `window` positions of each other (|i-j| < window).
CoocGraph build_graph(const std::vector<std::string>& tokens,
                      std::size_t window);

/// Damped degree-normalized centrality from an all-ones start:
/// s_i <- (1-d) + d * sum_{j in N(i)} s_j / deg(j), run for max_iters steps
/// or until the max per-node change drops below tol. Isolated nodes get 1-d.
std::vector<double> textrank(const CoocGraph& graph, const TextRankConfig& cfg);

/// Per-position salience: every occurrence of a word carries its node score.
SalienceMap textrank_salience(const Document& doc, const TextRankConfig& cfg);

/// Document-frequency statistics over the training split.
struct DfTable {
    std::size_t num_docs = 0;
    std::unordered_map<std::string, std::size_t> df;

    static DfTable build(const std::vector<Document>& train_docs);
};

/// score_i = tf(token_i) * (log((N+1)/(df+1)) + 1); unseen tokens use df = 0.
SalienceMap tfidf_salience(const Document& doc, const DfTable& stats);

/// Per-token chi-squared scores from token-presence x class contingency
/// counts over the training split.
struct Chi2Table {
    std::unordered_map<std::string, double> scores;

    static Chi2Table build(const std::vector<Document>& train_docs,
                           int num_classes);
};

/// Table lookup; missing tokens score 0 before normalization.
SalienceMap chi2_salience(const Document& doc, const Chi2Table& table);

SalienceMap uniform_salience(const Document& doc);

/// Positions under special_mask get epsilon; the remaining mass is scaled so
/// the full vector sums to 1 with every entry positive. All-zero content
/// scores fall back to uniform. An empty mask means no special positions.
SalienceMap normalize_salience(SalienceMap map,
                               const std::vector<bool>& special_mask = {},
                               double epsilon = 1e-8);

SalienceMap compute_salience(const Document& doc, const std::string& method,
                             const TextRankConfig& cfg, const DfTable* df,
                             const Chi2Table* chi2);

/// JSONL: {"id": str, "method": str, "scores": [float]} per document.
void save_salience_jsonl(const std::vector<SalienceMap>& maps,
                         const std::string& path);
std::vector<SalienceMap> load_salience_jsonl(const std::string& path);

}  // namespace saloss
