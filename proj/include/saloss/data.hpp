#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "saloss/errors.hpp"

namespace saloss {

struct Document {
    std::string id;
    std::vector<std::string> tokens;
    int label = 0;
    std::vector<std::string> pos_tags;  // empty or length-matched to tokens

    bool has_pos_tags() const { return !pos_tags.empty(); }
};

struct DataSplits {
    std::vector<Document> train;
    std::vector<Document> dev;
    std::vector<Document> test;
};

/// Token ids with fixed reserved slots. Content ids start at 4.
class Vocabulary {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kCls = 1;
    static constexpr std::size_t kSep = 2;
    static constexpr std::size_t kUnk = 3;

    /// Built from the training split only; tokens below min_freq map to UNK.
    /// Id order is by descending frequency, then lexicographic.
    static Vocabulary build(const std::vector<Document>& train_docs,
                            std::size_t min_freq = 1);

    std::size_t size() const { return tokens_.size(); }
    std::size_t id(const std::string& token) const;
    const std::string& token(std::size_t id) const { return tokens_.at(id); }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> ids_;
};

/// Lowercase, split on whitespace and punctuation.
std::vector<std::string> tokenize(const std::string& text);

/// One JSON object per line: {"id", "tokens" or "text", "label", "pos_tags"?}.
/// Malformed lines raise DataError naming the line number. num_classes < 0
/// disables the label range check.
std::vector<Document> load_jsonl(const std::string& path, int num_classes = -1);
void save_jsonl(const std::vector<Document>& docs, const std::string& path);

/// [CLS] content... [SEP], truncating content to max_len - 2.
std::vector<std::size_t> encode(const std::vector<std::string>& tokens,
                                const Vocabulary& vocab, std::size_t max_len);

/// Content tokens truncated so the encoded sequence fits max_len.
std::vector<std::string> truncate_tokens(const std::vector<std::string>& tokens,
                                         std::size_t max_len);

struct SyntheticSpec {
    std::size_t num_docs = 200;
    std::size_t vocab_size = 50;   // distractor vocabulary size
    std::size_t seq_len = 20;
    int num_classes = 2;
    std::vector<std::vector<std::string>> keywords_per_class;
    double distractor_rate = 1.0;  // probability a free slot draws a distractor
    std::uint64_t seed = 0;
};

/// Planted-keyword corpus: each document carries exactly the keywords of its
/// class, one at a uniform random position, remaining slots distractors (or
/// extra keyword copies with probability 1 - distractor_rate). Splits 70/10/20.
DataSplits make_synthetic_corpus(const SyntheticSpec& spec);

}  // namespace saloss
