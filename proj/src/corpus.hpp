#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace teko {

enum class Split { Train, Val, Test, Unlabeled };

struct Document {
  std::string id;
  std::string text;
  std::optional<int> label;  // class index in [0, C)
  Split split = Split::Unlabeled;
};

// Documents in file order plus an id -> position index.
struct DocumentSet {
  std::vector<Document> docs;
  std::map<std::string, int> index;

  bool contains(const std::string& id) const { return index.count(id) != 0; }
  int position(const std::string& id) const;
  size_t size() const { return docs.size(); }
};

using Edge = std::pair<std::string, std::string>;  // canonical: first < second

struct VocabConfig {
  int min_df = 1;
  int max_vocab = 50000;
  bool lowercase = true;
  // The corpus tokenizer drops tokens below this length; tests that exercise
  // single-letter vocabularies set it to 1.
  int min_token_len = 2;
};

struct AttributeMatrix {
  Matrix X;                        // n x f, TF-IDF
  std::vector<std::string> vocab;  // column order
};

struct TextRichGraph {
  DocumentSet documents;
  std::vector<Edge> edges;  // deduplicated, canonical order, no self-loops
  AttributeMatrix attributes;
  int class_count = 0;
  int self_loops_dropped = 0;
};

struct SplitSpec {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
  uint64_t seed = 0;
};

// documents file: one record per line, TAB-separated
//   id <TAB> text [<TAB> label]
// Text must not contain tabs or newlines; label is a nonnegative integer.
DocumentSet load_documents(const std::string& path);
DocumentSet parse_documents(const std::string& content, const std::string& origin);

// edges file: "a <TAB> b" per line, '#' comments ignored. Undirected,
// deduplicated; self-loops dropped (counted in *self_loops_dropped).
std::vector<Edge> load_edges(const std::string& path, const DocumentSet& docs,
                             int* self_loops_dropped = nullptr);
std::vector<Edge> parse_edges(const std::string& content, const DocumentSet& docs,
                              const std::string& origin, int* self_loops_dropped = nullptr);

// TF-IDF with tf = count / doc token count and idf = ln(n / df).
AttributeMatrix build_attributes(const DocumentSet& docs, const VocabConfig& vocab);

// Stratified per class: each class is shuffled (seeded) and cut at
// floor(ratio * class size); the rounding remainder inside the covered
// fraction goes to test. Only labeled documents are eligible.
SplitSpec make_splits(const DocumentSet& docs, double train_ratio, double val_ratio,
                      double test_ratio, uint64_t seed);

void apply_splits(DocumentSet& docs, const SplitSpec& spec);
int infer_class_count(const DocumentSet& docs);

// splits file: three lines "train:", "val:", "test:" with comma-separated ids.
std::string format_splits(const SplitSpec& spec);
SplitSpec parse_splits(const std::string& content, const DocumentSet& docs);
void save_splits(const std::string& path, const SplitSpec& spec);
SplitSpec load_splits(const std::string& path, const DocumentSet& docs);

}  // namespace teko
