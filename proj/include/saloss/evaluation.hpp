#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "saloss/attribution.hpp"
#include "saloss/data.hpp"
#include "saloss/model.hpp"
#include "saloss/stats.hpp"
#include "saloss/training.hpp"

namespace saloss {

struct ErasureResult {
    std::string doc_id;
    std::string method;
    double flip_fraction = 1.0;  // multiple of the step, or exactly 1.0
    bool flipped = false;
};

struct RationaleSet {
    std::string doc_id;
    std::string thresholder;  // topk | contiguous
    double ratio = 0.0;
    std::vector<std::size_t> positions;  // original order
};

/// Classifies a plain content-token sequence (no CLS/SEP).
using TokenPredictor = std::function<int(const std::vector<std::string>&)>;

TokenPredictor model_predictor(const Model& model, const Vocabulary& vocab);

/// Deletes tokens in descending importance order in budgets of ceil(k*step*t)
/// (k = 1, 2, ...), re-encodes the shortened sequence and re-predicts.
/// Returns the smallest nominal fraction k*step at which the argmax class
/// changes, or 1.0 with flipped=false when it never does.
ErasureResult decision_flip_fraction(const TokenPredictor& predict,
                                     const Document& doc,
                                     const AttributionScores& scores,
                                     double step = 0.05);

/// ceil(ratio*t) highest-scoring positions, ties to the earlier position.
RationaleSet topk_rationale(const AttributionScores& scores, double ratio);

/// The length-ceil(ratio*t) window with maximal score sum; ties leftmost.
RationaleSet contiguous_rationale(const AttributionScores& scores, double ratio);

/// Unweighted mean of per-class F1 over all classes in [0, num_classes).
double f1_macro(const std::vector<int>& predictions,
                const std::vector<int>& labels, int num_classes);

struct FreshSpec {
    std::string method = "alpha";
    std::string thresholder = "topk";
    double ratio = 0.2;
    int ig_steps = 50;
};

/// Support model scores tokens, the extractor keeps a fixed-ratio rationale,
/// a fresh classifier (same architecture, lambda = 0) trains on the re-packed
/// rationales. Returns test macro-F1.
double fresh_run(const Model& support, const Vocabulary& support_vocab,
                 const DataSplits& splits, const FreshSpec& spec,
                 const ModelConfig& classifier_cfg,
                 const TrainConfig& classifier_train_cfg);

struct PosStat {
    double mean = 0.0;
    std::size_t count = 0;
};

/// Mean importance per PoS tag over all token occurrences; attributions are
/// matched to documents by id. Tags absent from the corpus are omitted.
std::map<std::string, PosStat> pos_importance(
    const std::vector<Document>& docs,
    const std::vector<AttributionScores>& attributions);

struct MethodErasure {
    std::string method;
    double mean_fraction = 0.0;
    double no_flip_rate = 0.0;
    std::size_t count = 0;
    std::vector<ErasureResult> per_doc;
};

struct FreshEntry {
    std::string method;
    std::string thresholder;
    double ratio = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    std::string dataset;
    std::vector<MethodErasure> erasure;
    std::vector<FreshEntry> fresh;
    std::map<std::string, PosStat> pos;
};

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string render_report_tables(const EvalReport& report);

}  // namespace saloss
