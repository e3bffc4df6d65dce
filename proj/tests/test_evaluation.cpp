#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "halluscore/calibration.hpp"
#include "halluscore/error.hpp"
#include "halluscore/evaluation.hpp"
#include "halluscore/rng.hpp"
#include "support/oracles.hpp"

using namespace halluscore;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string temp_path(const std::string& name) {
  return "/tmp/halluscore_eval_" + name;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("brier on hand-checked inputs") {
  CHECK(brier({0.5}, {1}) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(brier({1.0}, {1}) == 0.0);
  CHECK(brier({0.0}, {1}) == 1.0);
  CHECK(brier({0.8, 0.3}, {1, 0}) ==
        doctest::Approx((0.04 + 0.09) / 2.0).epsilon(1e-12));
  CHECK_THROWS_AS((void)brier({0.5, 0.5}, {1}), Error);
  CHECK_THROWS_AS((void)brier({}, {}), Error);
}

TEST_CASE("nearest-rank percentile thresholds") {
  const std::vector<double> scores{0.1, 0.2, 0.3, 0.4};
  CHECK(threshold_at_percentile(scores, 50.0) == 0.2);
  CHECK(threshold_at_percentile(scores, 100.0) == 0.4);
  CHECK(threshold_at_percentile(scores, 0.0) == 0.1);
  CHECK(threshold_at_percentile(scores, 25.0) == 0.1);
  CHECK(threshold_at_percentile(scores, 26.0) == 0.2);
  // Input order cannot matter.
  CHECK(threshold_at_percentile({0.4, 0.1, 0.3, 0.2}, 50.0) == 0.2);
  CHECK(threshold_at_percentile({0.7}, 50.0) == 0.7);
  CHECK_THROWS_AS((void)threshold_at_percentile({}, 50.0), Error);
  CHECK_THROWS_AS((void)threshold_at_percentile({0.5}, 101.0), Error);
  CHECK_THROWS_AS((void)threshold_at_percentile({0.5}, -1.0), Error);
}

TEST_CASE("f1 and accuracy on a small confusion table") {
  // preds 1,1,0,0 vs labels 1,0,1,0: tp=1 fp=1 fn=1 tn=1
  const F1Accuracy fa = f1_accuracy({1, 1, 0, 0}, {1, 0, 1, 0});
  CHECK(fa.f1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fa.accuracy == doctest::Approx(0.5).epsilon(1e-12));

  const F1Accuracy none_predicted = f1_accuracy({0, 0}, {1, 0});
  CHECK(none_predicted.f1 == 0.0);
  CHECK(none_predicted.accuracy == 0.5);

  const F1Accuracy perfect = f1_accuracy({1, 0, 1}, {1, 0, 1});
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.accuracy == 1.0);

  CHECK_THROWS_AS((void)f1_accuracy({1}, {1, 0}), Error);
  CHECK_THROWS_AS((void)f1_accuracy({}, {}), Error);
}

TEST_CASE("fractional ranks average over ties") {
  const std::vector<double> ranks = average_ranks({10.0, 20.0, 20.0, 30.0});
  REQUIRE(ranks.size() == 4);
  CHECK(ranks[0] == 1.0);
  CHECK(ranks[1] == 2.5);
  CHECK(ranks[2] == 2.5);
  CHECK(ranks[3] == 4.0);

  const std::vector<double> all_tied = average_ranks({5.0, 5.0, 5.0});
  CHECK(all_tied[0] == 2.0);
  CHECK(all_tied[1] == 2.0);
  CHECK(all_tied[2] == 2.0);
}

TEST_CASE("spearman endpoints and invariances") {
  const std::vector<double> a{0.1, 0.4, 0.2, 0.9, 0.7};
  std::vector<double> increasing = a;
  for (double& v : increasing) v = std::exp(3.0 * v);  // monotone transform
  CHECK(spearman(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman(a, increasing) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> reversed = a;
  for (double& v : reversed) v = -v;
  CHECK(spearman(a, reversed) == doctest::Approx(-1.0).epsilon(1e-12));

  CHECK_THROWS_AS((void)spearman({1.0, 1.0, 1.0}, {0.1, 0.2, 0.3}), Error);
  CHECK_THROWS_AS((void)spearman({1.0, 2.0}, {0.1, 0.2, 0.3}), Error);
  try {
    (void)spearman({2.0, 2.0}, {1.0, 0.0});
    FAIL("expected ConstantInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConstantInput);
  }
}

TEST_CASE("metric implementations agree with naive oracles on random data") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + int(rng.below(49));
    std::vector<double> preds(n), other(n);
    std::vector<int> labels(n), pred_labels(n);
    for (int i = 0; i < n; ++i) {
      preds[i] = rng.uniform01();
      other[i] = rng.uniform01();
      labels[i] = rng.below(2) ? 1 : 0;
      pred_labels[i] = rng.below(2) ? 1 : 0;
    }

    CHECK(brier(preds, labels) ==
          doctest::Approx(testsupport::oracle_brier(preds, labels))
              .epsilon(1e-12));

    const double pct = 100.0 * rng.uniform01();
    CHECK(threshold_at_percentile(preds, pct) ==
          testsupport::oracle_threshold(preds, pct));

    const F1Accuracy fa = f1_accuracy(pred_labels, labels);
    CHECK(fa.f1 == doctest::Approx(testsupport::oracle_f1(pred_labels, labels))
                       .epsilon(1e-12));
    CHECK(fa.accuracy ==
          doctest::Approx(testsupport::oracle_accuracy(pred_labels, labels))
              .epsilon(1e-12));

    // Uniform draws collide with probability zero, so spearman is defined.
    CHECK(spearman(preds, other) ==
          doctest::Approx(testsupport::oracle_spearman(preds, other))
              .epsilon(1e-10));

    const int bins = 1 + int(rng.below(10));
    const int min_cell = 1 + int(rng.below(5));
    const CalibrationErrorReport rep =
        calibration_error(preds, labels, bins, min_cell);
    CHECK(rep.max_cell_error ==
          doctest::Approx(testsupport::oracle_max_cell_error(preds, labels,
                                                             bins, min_cell))
              .epsilon(1e-12));
  }
}

TEST_CASE("doubles format by shortest round-trip with spelled-out specials") {
  CHECK(format_double(0.25) == "0.25");
  CHECK(format_double(0.0) == "0.0");
  CHECK(format_double(1.0) == "1.0");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  // Round-trip: parsing the formatted text recovers the exact double.
  const double v = 0.1234567890123456789;
  CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("metrics csv writes one row per report entry") {
  EvaluationReport report;
  report.rows.push_back({"p_true", 0.125, 0.5, 0.75, 1});
  report.rows.push_back({"multi_score", 0.1, 0.8, 0.9, 7});
  const std::string path = temp_path("metrics.csv");
  write_metrics_csv(report, path);
  CHECK(slurp(path) ==
        "scorer,brier,f1,accuracy,cost\n"
        "p_true,0.125,0.5,0.75,1\n"
        "multi_score,0.1,0.8,0.9,7\n");
  std::remove(path.c_str());
}

TEST_CASE("correlation csv writes a labeled square matrix") {
  EvaluationReport report;
  report.correlation_names = {"a", "b"};
  report.correlation = {1.0, 0.5, 0.5, std::nan("")};
  const std::string path = temp_path("corr.csv");
  write_correlation_csv(report, path);
  CHECK(slurp(path) ==
        "scorer,a,b\n"
        "a,1.0,0.5\n"
        "b,0.5,nan\n");
  std::remove(path.c_str());
}

TEST_CASE("budget curve csv carries the selection per budget") {
  EvaluationReport report;
  BudgetRow row;
  row.budget = 2;
  row.selected = "p_true;nli_direct";
  row.cost = 2;
  row.validation_loss = 0.25;
  row.test_brier = 0.2;
  row.test_f1 = 0.5;
  row.test_accuracy = 0.75;
  report.budget_rows.push_back(row);
  const std::string path = temp_path("budget.csv");
  write_budget_curve_csv(report, path);
  CHECK(slurp(path) ==
        "budget,selected,cost,validation_loss,test_brier,test_f1,test_accuracy\n"
        "2,p_true;nli_direct,2,0.25,0.2,0.5,0.75\n");
  std::remove(path.c_str());
}

}  // TEST_SUITE
