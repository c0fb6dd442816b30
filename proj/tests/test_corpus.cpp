#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "corpus.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace teko;

TEST_CASE("load_documents parses records and preserves order") {
  auto docs = parse_documents("d1\talpha text\t0\nd2\tbeta text\t1\nd3\tno label\n", "mem");
  CHECK(docs.size() == 3);
  CHECK(docs.docs[0].id == "d1");
  CHECK(docs.docs[1].label.value() == 1);
  CHECK_FALSE(docs.docs[2].label.has_value());
}

TEST_CASE("load_documents rejects duplicate ids") {
  CHECK_THROWS_WITH_AS(parse_documents("d1\ta\nd1\tb\n", "mem"), doctest::Contains("d1"), Error);
  try {
    parse_documents("d1\ta\nd1\tb\n", "mem");
  } catch (const Error& e) {
    CHECK(e.code() == Err::DuplicateId);
  }
}

TEST_CASE("empty documents file is a valid empty set") {
  auto docs = parse_documents("", "mem");
  CHECK(docs.size() == 0);
}

TEST_CASE("malformed document line reports the line number") {
  try {
    parse_documents("d1\ta\nonly_one_field\n", "mem");
    FAIL("expected MalformedRecord");
  } catch (const Error& e) {
    CHECK(e.code() == Err::MalformedRecord);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("load_edges deduplicates and drops self loops") {
  auto docs = parse_documents("d1\ta\nd2\tb\n", "mem");
  int dropped = 0;
  auto edges = parse_edges("d1\td2\nd2\td1\nd1\td1\n# comment\n", docs, "mem", &dropped);
  CHECK(edges.size() == 1);
  CHECK(dropped == 1);
  CHECK(edges[0] == Edge{"d1", "d2"});
}

TEST_CASE("load_edges rejects unknown endpoints") {
  auto docs = parse_documents("d1\ta\n", "mem");
  try {
    parse_edges("d1\tdX\n", docs, "mem");
    FAIL("expected UnknownId");
  } catch (const Error& e) {
    CHECK(e.code() == Err::UnknownId);
  }
}

TEST_CASE("edge set is symmetric by construction") {
  auto docs = parse_documents("a\tx\nb\tx\nc\tx\n", "mem");
  auto edges = parse_edges("b\ta\nc\tb\n", docs, "mem");
  std::set<Edge> s(edges.begin(), edges.end());
  for (const auto& [x, y] : s) {
    CHECK(x < y);                      // canonical orientation
    CHECK(s.count({x, y}) == 1);
  }
}

TEST_CASE("tf-idf arithmetic on a two-document corpus") {
  auto docs = parse_documents("d1\ta b\nd2\ta c\n", "mem");
  VocabConfig vc;
  vc.min_token_len = 1;
  auto attrs = build_attributes(docs, vc);
  REQUIRE(attrs.vocab == std::vector<std::string>{"a", "b", "c"});
  // idf("a") = ln(2/2) = 0, so its column is all zero
  CHECK(attrs.X.at(0, 0) == doctest::Approx(0.0));
  CHECK(attrs.X.at(1, 0) == doctest::Approx(0.0));
  // "b": tf = 1/2, idf = ln 2
  CHECK(attrs.X.at(0, 1) == doctest::Approx(0.5 * std::log(2.0)));
  CHECK(attrs.X.at(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("single-document corpus gives a zero matrix") {
  auto docs = parse_documents("d1\tsome words here\n", "mem");
  VocabConfig vc;
  auto attrs = build_attributes(docs, vc);
  for (double v : attrs.X.a) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("rare term tf-idf value") {
  // 4 docs, "x" appears once in a doc of length 1: entry = 1 * ln(4)
  auto docs = parse_documents("d1\tx\nd2\ty\nd3\ty\nd4\ty\n", "mem");
  VocabConfig vc;
  vc.min_token_len = 1;
  auto attrs = build_attributes(docs, vc);
  int col = -1;
  for (size_t i = 0; i < attrs.vocab.size(); ++i)
    if (attrs.vocab[i] == "x") col = static_cast<int>(i);
  REQUIRE(col >= 0);
  CHECK(attrs.X.at(0, col) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(attrs.X.at(0, col) == doctest::Approx(1.3862943611198906));
}

TEST_CASE("tf-idf entries are nonnegative") {
  auto docs = parse_documents("d1\tfoo bar baz\nd2\tbar qux\nd3\tfoo foo foo\n", "mem");
  VocabConfig vc;
  auto attrs = build_attributes(docs, vc);
  for (double v : attrs.X.a) CHECK(v >= 0.0);
}

TEST_CASE("build_attributes rejects an empty corpus") {
  DocumentSet empty;
  VocabConfig vc;
  CHECK_THROWS_AS(build_attributes(empty, vc), Error);
}

static DocumentSet labeled_corpus(int n, int classes) {
  std::string content;
  for (int i = 0; i < n; ++i) {
    content += "d" + std::to_string(100 + i) + "\ttext\t" + std::to_string(i % classes) + "\n";
  }
  return parse_documents(content, "mem");
}

TEST_CASE("make_splits sizes and determinism") {
  auto docs = labeled_corpus(100, 10);
  auto s1 = make_splits(docs, 0.1, 0.1, 0.8, 7);
  CHECK(s1.train_ids.size() == 10);
  CHECK(s1.val_ids.size() == 10);
  CHECK(s1.test_ids.size() == 80);
  auto s2 = make_splits(docs, 0.1, 0.1, 0.8, 7);
  CHECK(s1.train_ids == s2.train_ids);
  CHECK(s1.val_ids == s2.val_ids);
  CHECK(s1.test_ids == s2.test_ids);
  auto s3 = make_splits(docs, 0.1, 0.1, 0.8, 8);
  CHECK(s1.train_ids != s3.train_ids);
}

TEST_CASE("make_splits is stratified and disjoint") {
  auto docs = labeled_corpus(60, 3);
  auto s = make_splits(docs, 0.2, 0.2, 0.6, 1);
  std::set<std::string> train(s.train_ids.begin(), s.train_ids.end());
  std::set<std::string> val(s.val_ids.begin(), s.val_ids.end());
  std::set<std::string> test(s.test_ids.begin(), s.test_ids.end());
  for (const auto& id : val) CHECK(train.count(id) == 0);
  for (const auto& id : test) {
    CHECK(train.count(id) == 0);
    CHECK(val.count(id) == 0);
  }
  // per-class counts: 20 per class, 4 train each
  std::map<int, int> per_class;
  for (const auto& id : s.train_ids) per_class[*docs.docs[docs.position(id)].label]++;
  for (auto& [c, cnt] : per_class) CHECK(cnt == 4);
}

TEST_CASE("make_splits rejects bad ratios and tiny classes") {
  auto docs = labeled_corpus(10, 2);
  CHECK_THROWS_AS(make_splits(docs, 0.5, 0.6, 0.2, 1), Error);
  CHECK_THROWS_AS(make_splits(docs, -0.1, 0.1, 0.5, 1), Error);

  auto one = parse_documents("d1\tx\t0\nd2\tx\t1\nd3\tx\t1\nd4\tx\t1\n", "mem");
  try {
    make_splits(one, 0.33, 0.33, 0.34, 1);  // class 0 has a single member
    FAIL("expected TooFewLabeled");
  } catch (const Error& e) {
    CHECK(e.code() == Err::TooFewLabeled);
  }
}

TEST_CASE("splits file round-trip") {
  auto docs = labeled_corpus(12, 3);
  auto s = make_splits(docs, 0.25, 0.25, 0.5, 3);
  std::string text = format_splits(s);
  auto back = parse_splits(text, docs);
  CHECK(back.train_ids == s.train_ids);
  CHECK(back.val_ids == s.val_ids);
  CHECK(back.test_ids == s.test_ids);
}

TEST_CASE("splits file rejects overlaps") {
  auto docs = labeled_corpus(4, 2);
  CHECK_THROWS_AS(parse_splits("train: d100\nval: d100\ntest: d101\n", docs), Error);
}

TEST_CASE("apply_splits marks documents and rejects unlabeled members") {
  auto docs = labeled_corpus(8, 2);
  auto s = make_splits(docs, 0.25, 0.25, 0.5, 2);
  apply_splits(docs, s);
  int train = 0, val = 0, test = 0, unl = 0;
  for (const auto& d : docs.docs) {
    switch (d.split) {
      case Split::Train: ++train; break;
      case Split::Val: ++val; break;
      case Split::Test: ++test; break;
      case Split::Unlabeled: ++unl; break;
    }
  }
  CHECK(train == 2);
  CHECK(val == 2);
  CHECK(test == 4);
  CHECK(unl == 0);
  CHECK(infer_class_count(docs) == 2);

  auto mixed = parse_documents("d1\tx\t0\nd2\tx\t1\nd3\tno label\n", "mem");
  SplitSpec bad;
  bad.train_ids = {"d3"};
  CHECK_THROWS_AS(apply_splits(mixed, bad), Error);
}

TEST_CASE("file loading round trip through disk") {
  testutil::TempDir tmp("corpus");
  auto docs_path = tmp.write("docs.tsv", "d1\thello world\t0\nd2\tmore text\t1\n");
  auto edges_path = tmp.write("edges.tsv", "d1\td2\n");
  auto docs = load_documents(docs_path);
  auto edges = load_edges(edges_path, docs);
  CHECK(docs.size() == 2);
  CHECK(edges.size() == 1);
  CHECK_THROWS_AS(load_documents(tmp.file("absent.tsv")), Error);
}
