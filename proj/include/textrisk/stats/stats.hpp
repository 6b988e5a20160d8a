#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "textrisk/common/exec.hpp"
#include "textrisk/common/matrix.hpp"

namespace textrisk::stats {

// ---- distributions ----
double normal_cdf(double z);
double normal_sf(double z);
double chi2_sf(double x, double df);
// P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided(double t, double df);
// P(K > lambda) for the Kolmogorov limiting distribution.
double kolmogorov_sf(double lambda);

// ---- classification metrics ----
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

struct MetricSet {
  double bacc = 0.0;
  std::optional<double> auc;  // absent when only one class is present
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  Confusion confusion;
  double threshold = 0.5;

  nlohmann::json to_json() const;
};

// score >= threshold predicts default (label 1). Precision, recall and F1 are
// for the default class; an empty denominator gives 0.
MetricSet metrics(std::span<const int> labels, std::span<const double> scores, double threshold = 0.5);
Confusion confusion(std::span<const int> labels, std::span<const int> predicted);
double balanced_accuracy(std::span<const int> labels, std::span<const int> predicted);
// Rank statistic with mid-ranks for ties; Errc::degenerate_class for one class.
double auc(std::span<const int> labels, std::span<const double> scores);
// 1-based ranks, ties share the mean rank.
std::vector<double> mid_ranks(std::span<const double> values);

// ---- hypothesis tests ----
// JSON record consumed by the report: {name, statistic, p, n, params}.
struct TestRecord {
  std::string name;
  double statistic = 0.0;
  double p = 1.0;
  std::size_t n = 0;
  nlohmann::json params = nlohmann::json::object();

  nlohmann::json to_json() const;
};

struct DelongResult {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double z = 0.0;
  double p = 1.0;
};
DelongResult delong_test(std::span<const int> labels, std::span<const double> scores_a,
                         std::span<const double> scores_b);

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

struct Chi2Result {
  double statistic = 0.0;
  int df = 0;
  double p = 1.0;
};
// Rows of equal length; Errc::validation when any expected count is zero.
Chi2Result chi2_independence(const std::vector<std::vector<double>>& table);

struct KruskalResult {
  double h = 0.0;
  int df = 0;
  double p = 1.0;
};
KruskalResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

struct CorrelationResult {
  double pearson = 0.0;
  double pearson_p = 1.0;
  double spearman = 0.0;
  double spearman_p = 1.0;
  std::size_t n = 0;
};
CorrelationResult correlations(std::span<const double> x, std::span<const double> y);

// ---- quantile regression ----
double pinball_loss(double u, double tau);
double pinball_objective(const Matrix& x, std::span<const double> y, std::span<const double> beta, double tau);

struct QuantFit {
  std::vector<double> beta;
  double objective = 0.0;
  int iterations = 0;
};

// Exact minimizer of the pinball objective at a vertex of the LP (the fit
// interpolates x.cols() observations). Errc::validation for a rank-deficient
// design, Errc::numeric if the simplex fails to terminate.
QuantFit quantile_fit(const Matrix& x, std::span<const double> y, double tau);

struct QuantRow {
  double tau = 0.0;
  std::vector<double> beta;
  std::vector<double> se;
  std::vector<double> p;
};

struct QuantRegResult {
  std::vector<std::string> terms;
  std::vector<QuantRow> rows;
  std::size_t n = 0;
  int bootstrap = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

inline const std::vector<double> kQuantileLevels{0.05, 0.10, 0.50, 0.90, 0.95};
inline const std::vector<std::string> kQuantileTerms{"intercept", "default", "educational", "moving",
                                                     "default_x_educational", "default_x_moving"};

// Columns: intercept, Default, D_E, D_M, Default*D_E, Default*D_M, with every
// other purpose as reference. Errc::validation when a column is all zero.
Matrix quantreg_design(std::span<const int> default_flag, std::span<const std::string> purpose);

// Row-resampling bootstrap standard errors; p from the normal approximation.
QuantRegResult quantile_regression(std::span<const double> score, std::span<const int> default_flag,
                                   std::span<const std::string> purpose, std::uint64_t seed, int bootstrap = 1000,
                                   const std::vector<double>& taus = kQuantileLevels, Exec exec = Exec::parallel);

}  // namespace textrisk::stats
