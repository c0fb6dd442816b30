#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "train.hpp"

using namespace teko;

TEST_CASE("supervised loss identities") {
  // perfect one-hot prediction -> ~0
  Matrix H(3, 2);
  H.at(0, 0) = 1.0;
  H.at(1, 1) = 1.0;
  H.at(2, 0) = 1.0;
  std::vector<int> labels{0, 1, 0};
  std::vector<int> mask{0, 1, 2};
  CHECK(supervised_loss(H, labels, mask) <= 1e-10);

  // uniform two-class prediction -> ln 2 per node
  Matrix U(4, 2);
  U.fill(0.5);
  std::vector<int> l2{0, 1, 0, 1};
  std::vector<int> m2{0, 1, 2, 3};
  CHECK(supervised_loss(U, l2, m2) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(supervised_loss(H, labels, {}), Error);
}

TEST_CASE("supervised loss is nonnegative and clamps zero probabilities") {
  Matrix H(2, 2);
  H.at(0, 0) = 0.0;  // exact zero probability on the true class
  H.at(0, 1) = 1.0;
  H.at(1, 1) = 1.0;
  std::vector<int> labels{0, 1};
  double loss = supervised_loss(H, labels, {0, 1});
  CHECK(std::isfinite(loss));
  CHECK(loss >= 0.0);
  CHECK(loss == doctest::Approx(-std::log(1e-12) / 2.0));
}

TEST_CASE("unsupervised loss identities") {
  Matrix zero(4, 3);
  PairSets pairs;
  pairs.positives = {{0, 1}, {1, 2}};
  pairs.negatives = {{0, 3}};
  CHECK(unsupervised_loss(zero, pairs) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // saturated dot products drive the loss to zero
  Matrix sat(4, 1);
  sat.at(0, 0) = 6.0;
  sat.at(1, 0) = 5.0;   // h0.h1 = 30
  sat.at(2, 0) = 5.0;   // h1.h2 = 25 (positive)
  sat.at(3, 0) = -5.0;  // h0.h3 = -30 (negative pair, score -30)
  PairSets sat_pairs;
  sat_pairs.positives = {{0, 1}};
  sat_pairs.negatives = {{0, 3}};
  CHECK(unsupervised_loss(sat, sat_pairs) < 1e-9);

  // swapping the roles inverts the ordering
  PairSets swapped;
  swapped.positives = sat_pairs.negatives;
  swapped.negatives = sat_pairs.positives;
  CHECK(unsupervised_loss(sat, swapped) > unsupervised_loss(sat, sat_pairs));

  PairSets empty;
  CHECK_THROWS_AS(unsupervised_loss(zero, empty), Error);
}

TEST_CASE("unsupervised loss is nonnegative on random embeddings") {
  Rng rng(8);
  Matrix H(6, 4);
  for (double& v : H.a) v = rng.uniform(-3, 3);
  PairSets pairs;
  pairs.positives = {{0, 1}, {2, 3}};
  pairs.negatives = {{0, 5}, {1, 4}, {2, 5}};
  CHECK(unsupervised_loss(H, pairs) >= 0.0);
}

TEST_CASE("sample_pairs counting, disjointness, determinism") {
  auto inst = fixtures::make_hetero_instance(10, 0, 3, 2, 44, 0.25, 0.0, 0.0);
  auto pairs = sample_pairs(inst.graph, 1, 5);
  CHECK(pairs.positives.size() == inst.graph.edges_dd.size());
  CHECK(pairs.negatives.size() == pairs.positives.size());

  std::set<std::pair<int, int>> pos(pairs.positives.begin(), pairs.positives.end());
  for (const auto& p : pairs.negatives) {
    CHECK(pos.count(p) == 0);
    CHECK(p.first != p.second);
    CHECK(p.first < p.second);
  }

  auto again = sample_pairs(inst.graph, 1, 5);
  CHECK(again.negatives == pairs.negatives);
  auto other = sample_pairs(inst.graph, 1, 6);
  CHECK(other.negatives != pairs.negatives);
}

TEST_CASE("sample_pairs on a complete graph reports density") {
  TextRichGraph g;
  g.documents = parse_documents("a\tx\nb\tx\nc\tx\n", "mem");
  g.edges = {{"a", "b"}, {"a", "c"}, {"b", "c"}};
  auto h = assemble(g, AnnotationSet{}, {});
  try {
    sample_pairs(h, 1, 1);
    FAIL("expected GraphTooDense");
  } catch (const Error& e) {
    CHECK(e.code() == Err::GraphTooDense);
  }

  HeteroGraph empty_graph;
  CHECK_THROWS_AS(sample_pairs(empty_graph, 1, 1), Error);
}

namespace {

struct Toy {
  fixtures::HeteroInstance inst;
  std::unique_ptr<TekoModel> model;
  SupervisedTask task;
};

Toy make_toy(uint64_t seed, double dropout = 0.0) {
  Toy toy;
  toy.inst = fixtures::make_hetero_instance(12, 4, 6, 4, seed);
  TekoModelConfig cfg;
  cfg.layer_dims = {6, 2};
  cfg.dropout = dropout;
  cfg.init_seed = seed;
  toy.model = std::make_unique<TekoModel>(toy.inst.graph, toy.inst.X, toy.inst.Es, toy.inst.Ed, cfg);
  toy.task.labels = toy.inst.labels;
  toy.task.train_mask = toy.inst.train_rows;
  return toy;
}

}  // namespace

TEST_CASE("training descends on a learnable toy task") {
  auto toy = make_toy(1);
  OptimizerConfig opt;
  opt.epochs = 200;
  opt.patience = 200;
  opt.learning_rate = 0.01;
  opt.seed = 1;
  auto result = train(*toy.model, Objective::Supervised, &toy.task, nullptr, opt);
  REQUIRE(result.history.size() >= 2);
  CHECK(result.history.back().train_loss < result.history.front().train_loss);
}

TEST_CASE("training history is deterministic given the seed, even with dropout") {
  auto run = [](uint64_t seed) {
    auto toy = make_toy(7, 0.3);
    OptimizerConfig opt;
    opt.epochs = 40;
    opt.patience = 40;
    opt.seed = seed;
    return train(*toy.model, Objective::Supervised, &toy.task, nullptr, opt);
  };
  auto a = run(5);
  auto b = run(5);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_metric == b.history[i].val_metric);
  }
  auto c = run(6);
  bool same = a.history.size() == c.history.size();
  if (same)
    for (size_t i = 0; i < a.history.size(); ++i)
      same = same && a.history[i].train_loss == c.history[i].train_loss;
  CHECK_FALSE(same);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  auto toy = make_toy(3);
  auto before = toy.model->params();
  OptimizerConfig opt;
  opt.epochs = 10;
  opt.patience = 10;
  opt.learning_rate = 0.0;
  opt.weight_decay = 5e-4;
  opt.seed = 2;
  train(*toy.model, Objective::Supervised, &toy.task, nullptr, opt);
  for (size_t p = 0; p < before.size(); ++p) CHECK(toy.model->params()[p].w == before[p].w);
}

TEST_CASE("early stopping restores the best-validation parameters") {
  auto toy = make_toy(11);
  toy.task.val_mask = {0, 1, 2};
  OptimizerConfig opt;
  opt.epochs = 120;
  opt.patience = 15;
  opt.seed = 4;
  opt.learning_rate = 0.05;  // deliberately jumpy so validation wobbles
  auto result = train(*toy.model, Objective::Supervised, &toy.task, nullptr, opt);
  REQUIRE(result.best_epoch >= 0);
  CHECK(result.best_epoch <= result.history.back().epoch);

  // re-evaluating the restored parameters reproduces the recorded best metric
  const Matrix& H = toy.model->forward(false);
  int hits = 0;
  for (int i : toy.task.val_mask) {
    const double* row = H.row(i);
    int arg = 0;
    for (int c = 1; c < H.cols; ++c)
      if (row[c] > row[arg]) arg = c;
    hits += arg == toy.task.labels[static_cast<size_t>(i)];
  }
  double acc = static_cast<double>(hits) / static_cast<double>(toy.task.val_mask.size());
  CHECK(acc == doctest::Approx(result.best_val).epsilon(1e-12));
}

TEST_CASE("unsupervised training runs and descends") {
  auto inst = fixtures::make_hetero_instance(12, 4, 6, 4, 77);
  TekoModelConfig cfg;
  cfg.layer_dims = {6, 6};
  cfg.dropout = 0.0;
  cfg.head = HeadKind::Activation;
  cfg.init_seed = 1;
  TekoModel model(inst.graph, inst.X, inst.Es, inst.Ed, cfg);
  PairSets pairs = sample_pairs(inst.graph, 1, 9);
  OptimizerConfig opt;
  opt.epochs = 150;
  opt.patience = 150;
  opt.learning_rate = 0.01;
  opt.seed = 9;
  auto result = train(model, Objective::Unsupervised, nullptr, &pairs, opt);
  CHECK(result.history.back().train_loss < result.history.front().train_loss);
}

TEST_CASE("grad_check reports one entry per parameter tensor") {
  auto toy = make_toy(13);
  auto report = grad_check(*toy.model, Objective::Supervised, &toy.task, nullptr, 1e-5);
  CHECK(report.size() == toy.model->params().size());
  std::set<std::string> names;
  for (const auto& e : report) names.insert(e.group);
  CHECK(names.size() == report.size());
  CHECK(names.count("GATE") == 1);
  CHECK(names.count("W_DOC_0") == 1);
  CHECK(names.count("GAMMA_1") == 1);
}

TEST_CASE("parameters beyond the receptive field have zero gradient both ways") {
  // path d1-d2-d3-d4 with the only entity hanging off d4; mask = {d1}.
  // With 2 layers, d1 never sees the entity, so the gate gradient is zero.
  TextRichGraph g;
  g.documents = parse_documents("d1\tx\t0\nd2\tx\t1\nd3\tx\t0\nd4\tx\t1\n", "mem");
  g.edges = {{"d1", "d2"}, {"d2", "d3"}, {"d3", "d4"}};
  AnnotationSet ann;
  Mention m;
  m.doc_id = "d4";
  m.entity_id = "E1";
  m.score = 0.9;
  ann.mentions.push_back(m);
  auto h = assemble(g, ann, {});

  Rng rng(2);
  Matrix X(4, 3), Es(1, 3), Ed(1, 3);
  for (double& v : X.a) v = rng.uniform(-1, 1);
  for (double& v : Es.a) v = rng.uniform(-1, 1);
  for (double& v : Ed.a) v = rng.uniform(-1, 1);

  TekoModelConfig cfg;
  cfg.layer_dims = {4, 2};
  cfg.dropout = 0.0;
  cfg.init_seed = 3;
  TekoModel model(h, X, Es, Ed, cfg);

  SupervisedTask task;
  task.labels = {0, 1, 0, 1, -1};
  task.train_mask = {0};
  auto report = grad_check(model, Objective::Supervised, &task, nullptr, 1e-5);
  for (const auto& e : report) {
    if (e.group == "GATE") {
      CHECK(e.analytic_norm < 1e-8);
      CHECK(e.numeric_norm < 1e-8);
      CHECK(e.max_rel_error == 0.0);
    }
  }
}

TEST_CASE("history csv export") {
  std::vector<EpochRecord> hist{{0, 1.5, 0.25}, {1, 1.25, 0.5}};
  std::string csv = format_history(hist);
  CHECK(csv == "epoch,train_loss,val_metric\n0,1.5,0.25\n1,1.25,0.5\n");
}

TEST_CASE("training rejects inconsistent setups") {
  auto toy = make_toy(21);
  OptimizerConfig opt;
  CHECK_THROWS_AS(train(*toy.model, Objective::Supervised, nullptr, nullptr, opt), Error);
  CHECK_THROWS_AS(train(*toy.model, Objective::Unsupervised, nullptr, nullptr, opt), Error);
}
