#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>

#include "tvemi/csv.hpp"
#include "tvemi/errors.hpp"

using namespace tvemi;

namespace {

const double kNan = std::numeric_limits<double>::quiet_NaN();

SurvivalDataset mixed_dataset() {
  Eigen::VectorXd time(4);
  time << 2.5, 1.0, 3.1415926535897931, 0.25;
  Eigen::VectorXi event(4);
  event << 1, 0, 1, 0;
  Eigen::MatrixXd x(4, 2);
  x << 1.0, -1.25, 0.0, 0.1, kNan, 3.1415926535897931, 1.0, kNan;
  MaskMatrix mask = MaskMatrix::Constant(4, 2, true);
  mask(2, 0) = false;
  mask(3, 1) = false;
  return make_dataset({"a", "b", "c", "d"}, time, event, x, mask,
                      {{"x1", CovariateKind::Binary},
                       {"x2", CovariateKind::Continuous}});
}

}  // namespace

TEST_CASE("doubles render to shortest exact form and NA for NaN") {
  CHECK(format_double(kNan) == "NA");
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(5.0) == "5");
  CHECK(format_double(-0.5) == "-0.5");
  for (const double v : {3.141592653589793, 0.1, 1e300, -2.2250738585072014e-308,
                         1.0 / 3.0}) {
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("dataset csv round trips values, masks and kinds") {
  const SurvivalDataset ds = mixed_dataset();
  const std::string text = dataset_csv(ds);
  CHECK(text.rfind("id,time,event,x1,x2\n", 0) == 0);
  CHECK(text.find("c,3.1415926535897931,1,NA,3.1415926535897931\n") !=
        std::string::npos);

  std::istringstream in(text);
  const SurvivalDataset back = parse_dataset_csv(in);
  REQUIRE(back.n() == 4);
  REQUIRE(back.p() == 2);
  CHECK(back.ids == ds.ids);
  CHECK((back.time.array() == ds.time.array()).all());
  CHECK((back.event.array() == ds.event.array()).all());
  CHECK((back.observed == ds.observed).all());
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index k = 0; k < 2; ++k)
      if (ds.observed(i, k)) CHECK(back.x(i, k) == ds.x(i, k));
  CHECK(back.covariates[0].kind == CovariateKind::Binary);
  CHECK(back.covariates[1].kind == CovariateKind::Continuous);
  CHECK(back.covariates[0].name == "x1");
}

TEST_CASE("dataset csv files round trip through disk") {
  const auto path =
      (std::filesystem::temp_directory_path() / "tvemi_csv_roundtrip.csv")
          .string();
  const SurvivalDataset ds = mixed_dataset();
  write_dataset_csv(ds, path);
  const SurvivalDataset back = read_dataset_csv(path);
  CHECK(dataset_csv(back) == dataset_csv(ds));
  std::remove(path.c_str());

  CHECK_THROWS_AS(read_dataset_csv("/nonexistent/dir/file.csv"), DataError);

  const std::string content = "line one\nline two";
  write_text_file(path, content);
  CHECK(read_text_file(path) == content);
  std::remove(path.c_str());
}

TEST_CASE("covariate kinds are inferred and can be overridden") {
  const std::string text =
      "time,event,a,b\n"
      "1,1,0,2.5\n"
      "2,0,1,0\n";
  {
    std::istringstream in(text);
    const SurvivalDataset ds = parse_dataset_csv(in);
    CHECK(ds.covariates[0].kind == CovariateKind::Binary);
    CHECK(ds.covariates[1].kind == CovariateKind::Continuous);
    CHECK(ds.ids == std::vector<std::string>{"1", "2"});  // no id column
  }
  {
    CsvOverrides ov;
    ov.continuous = {"a"};
    std::istringstream in(text);
    const SurvivalDataset ds = parse_dataset_csv(in, ov);
    CHECK(ds.covariates[0].kind == CovariateKind::Continuous);
  }
  {
    // forcing a non-0/1 column binary trips the dataset invariants
    CsvOverrides ov;
    ov.binary = {"b"};
    std::istringstream in(text);
    CHECK_THROWS_AS(parse_dataset_csv(in, ov), DataError);
  }
  {
    CsvOverrides ov;
    ov.binary = {"zz"};
    std::istringstream in(text);
    CHECK_THROWS_AS(parse_dataset_csv(in, ov), ConfigError);
  }
}

TEST_CASE("missing cells accept both empty fields and the NA token") {
  std::istringstream in(
      "time,event,x1,x2\n"
      "1,1,,2\n"
      "2,0,NA,\n");
  const SurvivalDataset ds = parse_dataset_csv(in);
  CHECK_FALSE(ds.observed(0, 0));
  CHECK_FALSE(ds.observed(1, 0));
  CHECK(ds.observed(0, 1));
  CHECK_FALSE(ds.observed(1, 1));
  CHECK(ds.x(0, 1) == 2.0);
}

TEST_CASE("parse failures carry the offending row and column") {
  const auto throws_with = [](const std::string& text, const char* needle) {
    std::istringstream in(text);
    try {
      parse_dataset_csv(in);
      FAIL_CHECK("expected DataError for: " << text);
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  throws_with("event,x1\n1,2\n", "time");
  throws_with("time,x1\n1,2\n", "event");
  throws_with("time,event,x1\n1,2,0\n", "row 1, column 'event'");
  throws_with("time,event,x1\n-1,1,0\n", "row 1, column 'time'");
  throws_with("time,event,x1\nx,1,0\n", "not a nonnegative number");
  throws_with("time,event,x1\n1,1,0\n2,0\n", "row 2");
  throws_with("time,event,x1\n1,1,abc\n", "row 1, column 'x1'");
  throws_with("time,event,x1,x1\n1,1,0,0\n", "duplicate column name 'x1'");
  throws_with("", "header");
  throws_with("time,event,x1\n", "no data rows");
  throws_with("time,event,,x1\n1,1,0,0\n", "empty column name");
}

TEST_CASE("imputation export stacks one block per completed copy") {
  SurvivalDataset base = mixed_dataset();
  ImputedDatasets imp;
  imp.base = base;
  Eigen::MatrixXd c1 = base.x, c2 = base.x;
  c1(2, 0) = 1.0;
  c1(3, 1) = -0.5;
  c2(2, 0) = 0.0;
  c2(3, 1) = 0.75;
  imp.completed = {c1, c2};

  const std::string text = imputations_csv(imp);
  CHECK(text.rfind("imp,id,time,event,x1,x2\n", 0) == 0);
  std::size_t lines = 0;
  for (const char ch : text) lines += ch == '\n';
  CHECK(lines == 1 + 2 * 4);
  CHECK(text.find("1,c,3.1415926535897931,1,1,3.1415926535897931\n") !=
        std::string::npos);
  CHECK(text.find("2,c,3.1415926535897931,1,0,3.1415926535897931\n") !=
        std::string::npos);
  CHECK(text.find("1,d,0.25,0,1,-0.5\n") != std::string::npos);
  CHECK(text.find("2,d,0.25,0,1,0.75\n") != std::string::npos);
  CHECK(text.find("NA") == std::string::npos);
}

namespace {

PerformanceReport tiny_report() {
  PerformanceReport rep;
  rep.grid = Eigen::Vector3d(0.0, 1.0, 2.0);
  rep.eval_times = {1.0, 5.0, 9.0};
  rep.true_curve = Eigen::MatrixXd::Constant(3, 2, 0.5);
  rep.true_at_eval = Eigen::MatrixXd::Constant(3, 2, 0.5);
  rep.reps = 5;

  MethodReport mr;
  mr.method = Method::CompleteData;
  mr.n_reps_used = 4;
  mr.n_reps_failed = 1;
  mr.mean_curve = Eigen::MatrixXd::Constant(3, 2, 0.25);
  mr.curve_q025 = Eigen::MatrixXd::Constant(3, 2, 0.125);
  mr.curve_q50 = Eigen::MatrixXd::Constant(3, 2, 0.25);
  mr.curve_q975 = Eigen::MatrixXd::Constant(3, 2, 0.5);
  mr.bias = Eigen::MatrixXd::Constant(3, 2, -0.5);
  mr.bias_mcse = Eigen::MatrixXd::Constant(3, 2, 0.0625);
  mr.coverage_pct = Eigen::MatrixXd::Constant(3, 2, 93.75);
  mr.coverage_mcse = Eigen::MatrixXd::Constant(3, 2, 0.25);
  mr.rejection_pct = Eigen::Vector2d(50.0, 25.0);
  mr.rejection_mcse = Eigen::Vector2d(12.5, 6.25);
  rep.methods = {mr};
  return rep;
}

}  // namespace

TEST_CASE("summary rows follow the documented layout exactly") {
  const std::string expected =
      "method,metric,covariate,time,value,mcse\n"
      "complete_data,reps_used,,,4,\n"
      "complete_data,reps_failed,,,1,\n"
      "complete_data,rejection_pct,x1,,50,12.5\n"
      "complete_data,rejection_pct,x2,,25,6.25\n"
      "complete_data,bias,x1,1,-0.5,0.0625\n"
      "complete_data,coverage_pct,x1,1,93.75,0.25\n"
      "complete_data,bias,x2,1,-0.5,0.0625\n"
      "complete_data,coverage_pct,x2,1,93.75,0.25\n"
      "complete_data,bias,x1,5,-0.5,0.0625\n"
      "complete_data,coverage_pct,x1,5,93.75,0.25\n"
      "complete_data,bias,x2,5,-0.5,0.0625\n"
      "complete_data,coverage_pct,x2,5,93.75,0.25\n"
      "complete_data,bias,x1,9,-0.5,0.0625\n"
      "complete_data,coverage_pct,x1,9,93.75,0.25\n"
      "complete_data,bias,x2,9,-0.5,0.0625\n"
      "complete_data,coverage_pct,x2,9,93.75,0.25\n";
  CHECK(summary_csv(tiny_report()) == expected);
}

TEST_CASE("curve rows follow the documented layout exactly") {
  const std::string expected =
      "method,covariate,t,mean,q025,q50,q975,truth\n"
      "complete_data,x1,0,0.25,0.125,0.25,0.5,0.5\n"
      "complete_data,x1,1,0.25,0.125,0.25,0.5,0.5\n"
      "complete_data,x1,2,0.25,0.125,0.25,0.5,0.5\n"
      "complete_data,x2,0,0.25,0.125,0.25,0.5,0.5\n"
      "complete_data,x2,1,0.25,0.125,0.25,0.5,0.5\n"
      "complete_data,x2,2,0.25,0.125,0.25,0.5,0.5\n";
  CHECK(curves_csv(tiny_report()) == expected);

  PerformanceReport rep = tiny_report();
  rep.methods[0].mean_curve(0, 0) = kNan;  // failed cells render as NA
  CHECK(curves_csv(rep).find("complete_data,x1,0,NA,0.125,0.25,0.5,0.5\n") !=
        std::string::npos);
}
