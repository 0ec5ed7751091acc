#include "saloss/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace saloss {

using nlohmann::json;

Vocabulary Vocabulary::build(const std::vector<Document>& train_docs,
                             std::size_t min_freq) {
    if (train_docs.empty()) {
        throw DataError("build_vocab: empty training split");
    }
    std::map<std::string, std::size_t> freq;  // ordered for determinism
    for (const auto& doc : train_docs) {
        for (const auto& tok : doc.tokens) ++freq[tok];
    }
    std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(),
                                                             freq.end());
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) {
                         if (a.second != b.second) return a.second > b.second;
                         return a.first < b.first;
                     });
    Vocabulary vocab;
    vocab.tokens_ = {"[PAD]", "[CLS]", "[SEP]", "[UNK]"};
    for (const auto& [tok, count] : entries) {
        if (count < min_freq) continue;
        vocab.ids_[tok] = vocab.tokens_.size();
        vocab.tokens_.push_back(tok);
    }
    return vocab;
}

std::size_t Vocabulary::id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            if (!cur.empty()) {
                tokens.push_back(cur);
                cur.clear();
            }
            if (std::ispunct(c)) tokens.emplace_back(1, ch);
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

std::vector<Document> load_jsonl(const std::string& path, int num_classes) {
    std::ifstream in(path);
    if (!in) throw DataError("load_jsonl: cannot open " + path);
    std::vector<Document> docs;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("load_jsonl: line " + std::to_string(line_no) +
                            ": " + e.what());
        }
        const auto require = [&](const char* key) {
            if (!obj.contains(key)) {
                throw DataError("load_jsonl: line " + std::to_string(line_no) +
                                ": missing key \"" + key + "\"");
            }
        };
        require("id");
        require("label");
        Document doc;
        doc.id = obj.at("id").get<std::string>();
        doc.label = obj.at("label").get<int>();
        if (doc.label < 0 ||
            (num_classes >= 0 && doc.label >= num_classes)) {
            throw DataError("load_jsonl: line " + std::to_string(line_no) +
                            ": label " + std::to_string(doc.label) +
                            " out of range");
        }
        if (obj.contains("tokens")) {
            doc.tokens = obj.at("tokens").get<std::vector<std::string>>();
        } else if (obj.contains("text")) {
            doc.tokens = tokenize(obj.at("text").get<std::string>());
        } else {
            throw DataError("load_jsonl: line " + std::to_string(line_no) +
                            ": missing key \"tokens\" or \"text\"");
        }
        if (doc.tokens.empty()) {
            throw DataError("load_jsonl: line " + std::to_string(line_no) +
                            ": document has no tokens");
        }
        if (obj.contains("pos_tags")) {
            doc.pos_tags = obj.at("pos_tags").get<std::vector<std::string>>();
            if (doc.pos_tags.size() != doc.tokens.size()) {
                throw DataError("load_jsonl: line " + std::to_string(line_no) +
                                ": pos_tags length mismatch for doc " + doc.id);
            }
        }
        if (!seen_ids.insert(doc.id).second) {
            std::cerr << "warning: duplicate document id \"" << doc.id
                      << "\" at line " << line_no << "\n";
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

void save_jsonl(const std::vector<Document>& docs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("save_jsonl: cannot open " + path);
    for (const auto& doc : docs) {
        json obj;
        obj["id"] = doc.id;
        obj["tokens"] = doc.tokens;
        obj["label"] = doc.label;
        if (doc.has_pos_tags()) obj["pos_tags"] = doc.pos_tags;
        out << obj.dump() << "\n";
    }
}

std::vector<std::string> truncate_tokens(const std::vector<std::string>& tokens,
                                         std::size_t max_len) {
    if (max_len < 3) throw DataError("truncate_tokens: max_len must be >= 3");
    const std::size_t max_content = max_len - 2;
    if (tokens.size() <= max_content) return tokens;
    return {tokens.begin(), tokens.begin() + static_cast<long>(max_content)};
}

std::vector<std::size_t> encode(const std::vector<std::string>& tokens,
                                const Vocabulary& vocab, std::size_t max_len) {
    auto content = truncate_tokens(tokens, max_len);
    std::vector<std::size_t> ids;
    ids.reserve(content.size() + 2);
    ids.push_back(Vocabulary::kCls);
    for (const auto& tok : content) ids.push_back(vocab.id(tok));
    ids.push_back(Vocabulary::kSep);
    return ids;
}

DataSplits make_synthetic_corpus(const SyntheticSpec& spec) {
    if (spec.keywords_per_class.size() !=
        static_cast<std::size_t>(spec.num_classes)) {
        throw DataError("make_synthetic_corpus: need one keyword set per class");
    }
    std::set<std::string> all_keywords;
    for (const auto& kws : spec.keywords_per_class) {
        if (kws.empty()) {
            throw DataError("make_synthetic_corpus: empty keyword set");
        }
        for (const auto& kw : kws) {
            if (!all_keywords.insert(kw).second) {
                throw DataError(
                    "make_synthetic_corpus: keyword sets overlap on \"" + kw +
                    "\"");
            }
        }
    }
    std::vector<std::string> distractors;
    distractors.reserve(spec.vocab_size);
    for (std::size_t i = 0; i < spec.vocab_size; ++i) {
        std::string tok = "d" + std::to_string(i);
        if (all_keywords.count(tok)) {
            throw DataError("make_synthetic_corpus: keyword collides with "
                            "distractor token " + tok);
        }
        distractors.push_back(std::move(tok));
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<std::size_t> pos_dist(0, spec.seq_len - 1);
    std::uniform_int_distribution<std::size_t> distractor_dist(
        0, distractors.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Document> docs;
    docs.reserve(spec.num_docs);
    for (std::size_t i = 0; i < spec.num_docs; ++i) {
        const int label = static_cast<int>(i % spec.num_classes);
        const auto& keywords = spec.keywords_per_class[label];
        std::uniform_int_distribution<std::size_t> kw_dist(0,
                                                           keywords.size() - 1);
        Document doc;
        doc.id = "syn" + std::to_string(i);
        doc.label = label;
        doc.tokens.resize(spec.seq_len);
        const std::size_t kw_pos = pos_dist(rng);
        for (std::size_t p = 0; p < spec.seq_len; ++p) {
            if (p == kw_pos) {
                doc.tokens[p] = keywords[kw_dist(rng)];
            } else if (unit(rng) < spec.distractor_rate) {
                doc.tokens[p] = distractors[distractor_dist(rng)];
            } else {
                doc.tokens[p] = keywords[kw_dist(rng)];
            }
        }
        docs.push_back(std::move(doc));
    }

    DataSplits splits;
    const std::size_t n_train = spec.num_docs * 7 / 10;
    const std::size_t n_dev = spec.num_docs / 10;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i < n_train) {
            splits.train.push_back(std::move(docs[i]));
        } else if (i < n_train + n_dev) {
            splits.dev.push_back(std::move(docs[i]));
        } else {
            splits.test.push_back(std::move(docs[i]));
        }
    }
    return splits;
}

}  // namespace saloss
