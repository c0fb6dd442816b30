#include "corpus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace teko {

int DocumentSet::position(const std::string& id) const {
  auto it = index.find(id);
  if (it == index.end()) fail(Err::UnknownId, id);
  return it->second;
}

static std::vector<std::string> lines_of(const std::string& content) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : content) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

DocumentSet parse_documents(const std::string& content, const std::string& origin) {
  DocumentSet set;
  auto lines = lines_of(content);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty())
      fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1));
    Document d;
    d.id = fields[0];
    d.text = fields[1];
    if (fields.size() == 3 && !trim(fields[2]).empty()) {
      long long v = 0;
      if (!parse_long(trim(fields[2]), &v) || v < 0)
        fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1) + ": bad label");
      d.label = static_cast<int>(v);
    }
    if (set.contains(d.id)) fail(Err::DuplicateId, d.id);
    set.index[d.id] = static_cast<int>(set.docs.size());
    set.docs.push_back(std::move(d));
  }
  return set;
}

DocumentSet load_documents(const std::string& path) {
  return parse_documents(read_file(path), path);
}

std::vector<Edge> parse_edges(const std::string& content, const DocumentSet& docs,
                              const std::string& origin, int* self_loops_dropped) {
  std::set<Edge> seen;
  std::vector<Edge> edges;
  int dropped = 0;
  auto lines = lines_of(content);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    std::string line = lines[ln];
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1));
    const std::string& a = fields[0];
    const std::string& b = fields[1];
    if (!docs.contains(a)) fail(Err::UnknownId, a);
    if (!docs.contains(b)) fail(Err::UnknownId, b);
    if (a == b) {
      ++dropped;
      continue;
    }
    Edge e = a < b ? Edge{a, b} : Edge{b, a};
    if (seen.insert(e).second) edges.push_back(e);
  }
  if (self_loops_dropped) *self_loops_dropped = dropped;
  std::sort(edges.begin(), edges.end());
  return edges;
}

std::vector<Edge> load_edges(const std::string& path, const DocumentSet& docs,
                             int* self_loops_dropped) {
  return parse_edges(read_file(path), docs, path, self_loops_dropped);
}

AttributeMatrix build_attributes(const DocumentSet& docs, const VocabConfig& vocab) {
  if (docs.docs.empty()) fail(Err::EmptyCorpus, "no documents");
  const size_t n = docs.docs.size();

  std::vector<std::vector<std::string>> toks(n);
  std::map<std::string, int> df;
  for (size_t i = 0; i < n; ++i) {
    auto tokens = tokenize(docs.docs[i].text, vocab.lowercase,
                           static_cast<size_t>(std::max(1, vocab.min_token_len)));
    std::set<std::string> uniq;
    toks[i].reserve(tokens.size());
    for (auto& t : tokens) {
      uniq.insert(t.text);
      toks[i].push_back(std::move(t.text));
    }
    for (auto& w : uniq) df[w]++;
  }

  // Retain by min_df, then cap at max_vocab keeping highest-df terms
  // (ties resolved lexicographically for determinism).
  std::vector<std::pair<std::string, int>> terms;
  for (auto& [w, c] : df)
    if (c >= vocab.min_df) terms.emplace_back(w, c);
  if (vocab.max_vocab > 0 && terms.size() > static_cast<size_t>(vocab.max_vocab)) {
    std::sort(terms.begin(), terms.end(), [](const auto& x, const auto& y) {
      if (x.second != y.second) return x.second > y.second;
      return x.first < y.first;
    });
    terms.resize(static_cast<size_t>(vocab.max_vocab));
    std::sort(terms.begin(), terms.end());
  }

  AttributeMatrix out;
  out.vocab.reserve(terms.size());
  std::map<std::string, int> col;
  for (auto& [w, c] : terms) {
    col[w] = static_cast<int>(out.vocab.size());
    out.vocab.push_back(w);
  }

  out.X = Matrix(static_cast<int>(n), static_cast<int>(out.vocab.size()));
  for (size_t i = 0; i < n; ++i) {
    const double len = static_cast<double>(toks[i].size());
    if (len == 0.0) continue;
    std::map<std::string, int> counts;
    for (auto& w : toks[i]) counts[w]++;
    for (auto& [w, c] : counts) {
      auto it = col.find(w);
      if (it == col.end()) continue;
      double tf = static_cast<double>(c) / len;
      double idf = std::log(static_cast<double>(n) / static_cast<double>(df[w]));
      out.X.at(static_cast<int>(i), it->second) = tf * idf;
    }
  }
  return out;
}

SplitSpec make_splits(const DocumentSet& docs, double train_ratio, double val_ratio,
                      double test_ratio, uint64_t seed) {
  if (train_ratio < 0 || val_ratio < 0 || test_ratio < 0 ||
      train_ratio + val_ratio + test_ratio > 1.0 + 1e-12)
    fail(Err::RatioOutOfRange, "ratios must be nonnegative and sum to at most 1");

  // Labeled documents grouped by class, sorted by id so the result is a
  // pure function of the set, not of file order.
  std::map<int, std::vector<std::string>> by_class;
  for (const auto& d : docs.docs)
    if (d.label) by_class[*d.label].push_back(d.id);
  for (auto& [c, ids] : by_class) std::sort(ids.begin(), ids.end());

  int active_splits = (train_ratio > 0) + (val_ratio > 0) + (test_ratio > 0);

  SplitSpec spec;
  spec.seed = seed;
  Rng rng(seed);
  const double covered = train_ratio + val_ratio + test_ratio;
  for (auto& [c, ids] : by_class) {
    if (static_cast<int>(ids.size()) < active_splits)
      fail(Err::TooFewLabeled, "class " + std::to_string(c));
    rng.shuffle(ids);
    size_t n_c = ids.size();
    size_t n_train = static_cast<size_t>(std::floor(train_ratio * n_c));
    size_t n_val = static_cast<size_t>(std::floor(val_ratio * n_c));
    size_t n_cov = static_cast<size_t>(std::floor(covered * n_c + 1e-9));
    size_t n_test = n_cov - n_train - n_val;
    size_t k = 0;
    for (size_t i = 0; i < n_train; ++i) spec.train_ids.push_back(ids[k++]);
    for (size_t i = 0; i < n_val; ++i) spec.val_ids.push_back(ids[k++]);
    for (size_t i = 0; i < n_test; ++i) spec.test_ids.push_back(ids[k++]);
  }
  std::sort(spec.train_ids.begin(), spec.train_ids.end());
  std::sort(spec.val_ids.begin(), spec.val_ids.end());
  std::sort(spec.test_ids.begin(), spec.test_ids.end());
  return spec;
}

void apply_splits(DocumentSet& docs, const SplitSpec& spec) {
  for (auto& d : docs.docs) d.split = Split::Unlabeled;
  auto mark = [&](const std::vector<std::string>& ids, Split s) {
    for (const auto& id : ids) {
      int pos = docs.position(id);
      if (!docs.docs[pos].label) fail(Err::TooFewLabeled, "unlabeled doc in split: " + id);
      docs.docs[pos].split = s;
    }
  };
  mark(spec.train_ids, Split::Train);
  mark(spec.val_ids, Split::Val);
  mark(spec.test_ids, Split::Test);
}

int infer_class_count(const DocumentSet& docs) {
  int c = 0;
  for (const auto& d : docs.docs)
    if (d.label) c = std::max(c, *d.label + 1);
  return c;
}

static std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(',');
    out += ids[i];
  }
  return out;
}

std::string format_splits(const SplitSpec& spec) {
  std::ostringstream ss;
  ss << "train: " << join_ids(spec.train_ids) << "\n";
  ss << "val: " << join_ids(spec.val_ids) << "\n";
  ss << "test: " << join_ids(spec.test_ids) << "\n";
  return ss.str();
}

SplitSpec parse_splits(const std::string& content, const DocumentSet& docs) {
  SplitSpec spec;
  std::vector<std::string> lines;
  for (auto& line : lines_of(content))
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  auto read_ids = [&](const std::string& line, const std::string& prefix,
                      std::vector<std::string>* out) {
    if (line.rfind(prefix, 0) != 0) fail(Err::MalformedRecord, "splits: expected '" + prefix + "'");
    std::string rest = trim(line.substr(prefix.size()));
    if (rest.empty()) return;
    for (auto& id : split(rest, ',')) {
      std::string t = trim(id);
      if (!docs.contains(t)) fail(Err::UnknownId, t);
      out->push_back(t);
    }
  };
  if (lines.size() < 3) fail(Err::MalformedRecord, "splits file needs 3 lines");
  read_ids(lines[0], "train:", &spec.train_ids);
  read_ids(lines[1], "val:", &spec.val_ids);
  read_ids(lines[2], "test:", &spec.test_ids);

  std::set<std::string> seen;
  for (auto* v : {&spec.train_ids, &spec.val_ids, &spec.test_ids})
    for (auto& id : *v)
      if (!seen.insert(id).second) fail(Err::DuplicateId, "splits overlap on " + id);
  return spec;
}

void save_splits(const std::string& path, const SplitSpec& spec) {
  write_file_atomic(path, format_splits(spec));
}

SplitSpec load_splits(const std::string& path, const DocumentSet& docs) {
  return parse_splits(read_file(path), docs);
}

}  // namespace teko
