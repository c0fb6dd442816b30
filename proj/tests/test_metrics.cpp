#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "metrics.hpp"

using namespace teko;

TEST_CASE("classification metrics: identity prediction") {
  auto r = classification_metrics({0, 1, 2}, {0, 1, 2});
  CHECK(r.accuracy == doctest::Approx(1.0));
  CHECK(r.macro_f1 == doctest::Approx(1.0));
}

TEST_CASE("classification metrics: mixed prediction arithmetic") {
  auto r = classification_metrics({0, 0, 1}, {0, 1, 1});
  CHECK(r.accuracy == doctest::Approx(2.0 / 3.0));
  REQUIRE(r.per_class.size() == 2);
  CHECK(r.per_class[0].precision == doctest::Approx(0.5));
  CHECK(r.per_class[0].recall == doctest::Approx(1.0));
  CHECK(r.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class[1].precision == doctest::Approx(1.0));
  CHECK(r.per_class[1].recall == doctest::Approx(0.5));
  CHECK(r.macro_f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("classification metrics: degenerate single-class predictor") {
  auto r = classification_metrics({0, 0, 0, 0}, {0, 0, 1, 1});
  CHECK(r.accuracy == doctest::Approx(0.5));
  // class0 F1 = 2/3, class1 F1 = 0 -> macro 1/3
  CHECK(r.macro_f1 == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("classification metrics validate input") {
  CHECK_THROWS_AS(classification_metrics({0, 1}, {0}), Error);
  CHECK_THROWS_AS(classification_metrics({}, {}), Error);
  CHECK_THROWS_AS(classification_metrics({-1}, {0}), Error);
}

TEST_CASE("accuracy is invariant under a consistent relabeling") {
  std::vector<int> preds{0, 1, 2, 1, 0};
  std::vector<int> labels{0, 1, 1, 2, 0};
  auto base = classification_metrics(preds, labels);
  // swap classes 0 <-> 2 in both
  auto swap02 = [](std::vector<int> v) {
    for (int& x : v) x = x == 0 ? 2 : x == 2 ? 0 : x;
    return v;
  };
  auto relabeled = classification_metrics(swap02(preds), swap02(labels));
  CHECK(base.accuracy == doctest::Approx(relabeled.accuracy));
  CHECK(base.macro_f1 == doctest::Approx(relabeled.macro_f1));
}

namespace {

Matrix two_clouds(int per_cloud, double gap, uint64_t seed, std::vector<int>* truth) {
  Rng rng(seed);
  Matrix pts(2 * per_cloud, 3);
  for (int i = 0; i < 2 * per_cloud; ++i) {
    int cloud = i < per_cloud ? 0 : 1;
    truth->push_back(cloud);
    for (int c = 0; c < 3; ++c) pts.at(i, c) = cloud * gap + rng.uniform(-0.5, 0.5);
  }
  return pts;
}

}  // namespace

TEST_CASE("kmeans recovers two well-separated clouds exactly") {
  std::vector<int> truth;
  Matrix pts = two_clouds(20, 100.0, 3, &truth);
  auto assign = kmeans(pts, 2, 7, 5);
  auto m = clustering_metrics(assign, truth);
  CHECK(m.nmi == doctest::Approx(1.0));
  CHECK(m.ari == doctest::Approx(1.0));
}

TEST_CASE("kmeans degenerate cases") {
  std::vector<int> truth;
  Matrix pts = two_clouds(5, 10.0, 1, &truth);

  auto one = kmeans(pts, 1, 2);
  for (int a : one) CHECK(a == 0);

  double wcss = -1;
  auto all = kmeans(pts, pts.rows, 2, 3, &wcss);
  std::set<int> distinct(all.begin(), all.end());
  CHECK(static_cast<int>(distinct.size()) == pts.rows);
  CHECK(wcss == doctest::Approx(0.0));

  CHECK_THROWS_AS(kmeans(Matrix(2, 2), 3, 1), Error);
}

TEST_CASE("kmeans is deterministic given seed and objective never increases") {
  Rng rng(90);
  Matrix pts(40, 4);
  for (double& v : pts.a) v = rng.uniform(-5, 5);
  auto a = kmeans(pts, 4, 123, 10);
  auto b = kmeans(pts, 4, 123, 10);
  CHECK(a == b);

  std::vector<double> trace;
  kmeans(pts, 4, 123, 1, nullptr, &trace);
  REQUIRE(trace.size() >= 1);
  for (size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-9);
}

TEST_CASE("clustering metrics: identity and degenerate partitions") {
  auto ident = clustering_metrics({0, 0, 1, 1}, {5, 5, 9, 9});
  CHECK(ident.nmi == doctest::Approx(1.0));
  CHECK(ident.ari == doctest::Approx(1.0));

  auto zero = clustering_metrics({0, 0, 0, 0}, {0, 1, 0, 1});
  CHECK(zero.nmi == doctest::Approx(0.0));

  CHECK_THROWS_AS(clustering_metrics({0}, {0}), Error);
  CHECK_THROWS_AS(clustering_metrics({0, 1}, {0, 1, 2}), Error);
}

TEST_CASE("ari crossing pattern matches the brute-force pair count") {
  std::vector<int> a{0, 0, 1, 1};
  std::vector<int> b{0, 1, 0, 1};
  auto m = clustering_metrics(a, b);
  CHECK(m.ari == doctest::Approx(fixtures::ari_bruteforce(a, b)).epsilon(1e-12));
  // 6 pairs: s11=0 s10=2 s01=2 s00=2 -> 2(0*2-2*2)/((0+2)(2+2)+(0+2)(2+2)) = -1/2
  CHECK(m.ari == doctest::Approx(-0.5));
}

TEST_CASE("nmi and ari match brute force on random partition pairs") {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    size_t n = 5 + rng.index(14);
    std::vector<int> a(n), b(n);
    int ka = 2 + static_cast<int>(rng.index(3));
    int kb = 2 + static_cast<int>(rng.index(3));
    for (auto& v : a) v = static_cast<int>(rng.index(static_cast<size_t>(ka)));
    for (auto& v : b) v = static_cast<int>(rng.index(static_cast<size_t>(kb)));
    auto m = clustering_metrics(a, b);
    CHECK(std::abs(m.nmi - fixtures::nmi_bruteforce(a, b)) < 1e-9);
    CHECK(std::abs(m.ari - fixtures::ari_bruteforce(a, b)) < 1e-9);
  }
}

TEST_CASE("ari is invariant under independent relabeling of either side") {
  std::vector<int> a{0, 1, 1, 2, 2, 0, 1};
  std::vector<int> b{1, 1, 0, 2, 0, 2, 1};
  auto base = clustering_metrics(a, b);
  std::vector<int> a2;
  for (int v : a) a2.push_back(v == 0 ? 7 : v == 1 ? 3 : 5);
  auto renamed = clustering_metrics(a2, b);
  CHECK(base.ari == doctest::Approx(renamed.ari).epsilon(1e-12));
  CHECK(base.nmi == doctest::Approx(renamed.nmi).epsilon(1e-12));
}

TEST_CASE("random partitions score near-zero ari on average") {
  Rng rng(55);
  std::vector<int> labels(50);
  for (auto& v : labels) v = static_cast<int>(rng.index(3));
  double total = 0.0;
  const int draws = 100;
  for (int d = 0; d < draws; ++d) {
    std::vector<int> part(50);
    for (auto& v : part) v = static_cast<int>(rng.index(3));
    total += clustering_metrics(part, labels).ari;
  }
  double mean = total / draws;
  CHECK(mean > -0.1);
  CHECK(mean < 0.1);
}

TEST_CASE("evaluate aggregates across seeds") {
  // per-seed outputs shaped n x 2 with argmax matching labels except one row
  std::vector<int> labels{0, 1, 0, 1};
  std::vector<int> rows{0, 1, 2, 3};
  auto out_for = [&](int wrong_row) {
    Matrix H(4, 2);
    for (int i = 0; i < 4; ++i) {
      int cls = labels[static_cast<size_t>(i)];
      if (i == wrong_row) cls = 1 - cls;
      H.at(i, cls) = 0.9;
      H.at(i, 1 - cls) = 0.1;
    }
    return H;
  };

  auto single = evaluate({out_for(-1)}, {11}, labels, rows, 2, EvalMode::Classify);
  CHECK(single.std_primary == doctest::Approx(0.0));
  CHECK(single.mean_primary == doctest::Approx(1.0));

  std::vector<Matrix> outs;
  std::vector<uint64_t> seeds;
  for (int s = 0; s < 10; ++s) {
    outs.push_back(out_for(s % 4 == 0 ? 0 : -1));
    seeds.push_back(static_cast<uint64_t>(s));
  }
  auto multi = evaluate(outs, seeds, labels, rows, 2, EvalMode::Classify);
  CHECK(multi.accuracy.size() == 10);
  double mn = *std::min_element(multi.accuracy.begin(), multi.accuracy.end());
  double mx = *std::max_element(multi.accuracy.begin(), multi.accuracy.end());
  CHECK(multi.mean_primary >= mn);
  CHECK(multi.mean_primary <= mx);
  CHECK(multi.std_primary > 0.0);
}

TEST_CASE("evaluate cluster mode uses K = class count") {
  std::vector<int> truth;
  Matrix pts = two_clouds(10, 50.0, 9, &truth);
  auto report = evaluate({pts}, {3}, truth,
                         [&] {
                           std::vector<int> rows;
                           for (int i = 0; i < pts.rows; ++i) rows.push_back(i);
                           return rows;
                         }(),
                         2, EvalMode::Cluster);
  CHECK(report.nmi.size() == 1);
  CHECK(report.mean_primary == doctest::Approx(1.0));
  CHECK(report.mean_secondary == doctest::Approx(1.0));
}

TEST_CASE("report exports carry one row per seed plus summary") {
  MetricsReport r;
  r.mode = EvalMode::Classify;
  r.seeds = {1, 2};
  r.accuracy = {0.5, 0.75};
  r.macro_f1 = {0.375, 0.625};
  r.mean_primary = 0.625;
  r.std_primary = 0.125;
  r.mean_secondary = 0.5;
  r.std_secondary = 0.125;
  std::string csv = format_report_csv(r);
  CHECK(csv.find("seed,accuracy,macro_f1\n") == 0);
  CHECK(csv.find("\nmean,") != std::string::npos);
  CHECK(csv.find("\nstd,") != std::string::npos);
  std::string json = format_report_json(r);
  CHECK(json.find("\"mode\":\"classify\"") != std::string::npos);
  CHECK(json.find("\"accuracy\":[0.5,0.75]") != std::string::npos);
}
