#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "textrisk/common/exec.hpp"
#include "textrisk/common/matrix.hpp"

namespace textrisk::gbdt {

struct GbdtParams {
  double scale_pos_weight = 1.0;
  double eta = 0.3;
  double subsample = 1.0;
  int n_estimators = 100;
  double colsample_bytree = 1.0;
  int max_depth = 6;
  double lambda = 1.0;
  double alpha = 0.5;
  double gamma = 0.0;
  double min_child_weight = 1.0;

  nlohmann::json to_json() const;
  static GbdtParams from_json(const nlohmann::json& j);
  bool operator==(const GbdtParams&) const = default;
};

// Search ranges of the genetic optimizer.
void validate_table_ranges(const GbdtParams& p);
// What fit accepts: positive weights and rates, non-negative penalties. Wider
// than the search ranges so analytic checks can use eta = 1 and alpha = 0.
void validate_fit_params(const GbdtParams& p);

// Node-parallel arrays; node 0 is the root, left[n] < 0 marks a leaf.
// leaf_value is already scaled by eta. cover is the hessian sum of the rows
// that reached the node during fitting.
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> leaf_value;
  std::vector<double> cover;
  std::vector<double> gain;

  std::size_t size() const noexcept { return feature.size(); }
  bool is_leaf(std::size_t n) const { return left[n] < 0; }
  int add_node(double cover_value);
  // Row goes left when x[feature] < threshold.
  int leaf_for(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return leaf_value[static_cast<std::size_t>(leaf_for(x))]; }
  int depth() const;
  // Share of a parent's cover that flows to the given child; 0.5 when the
  // parent has no cover.
  double child_fraction(std::size_t parent, std::size_t child) const;
  // Cover-weighted mean of the leaves.
  double expected_value() const;
};

struct GbdtModel {
  std::vector<Tree> trees;
  double base_margin = 0.0;
  GbdtParams params;
  std::size_t n_features = 0;
  std::vector<std::string> feature_names;

  static constexpr std::size_t all_trees = std::numeric_limits<std::size_t>::max();

  double margin(std::span<const double> x, std::size_t n_trees = all_trees) const;
  double proba(std::span<const double> x) const;
  std::vector<double> predict_margin(const Matrix& x, Exec exec = Exec::parallel,
                                     std::size_t n_trees = all_trees) const;
  std::vector<double> predict_proba(const Matrix& x, Exec exec = Exec::parallel) const;

  nlohmann::json to_json() const;
  static GbdtModel from_json(const nlohmann::json& j);
};

struct FitOptions {
  Exec exec = Exec::parallel;
  // Lets analytic checks fit single-class data; pipelines leave it off.
  bool allow_single_class = false;
};

// Newton boosting on the logistic loss. Errors: Errc::degenerate_class for a
// single class, Errc::non_finite for NaN/inf features, Errc::length_mismatch.
GbdtModel fit(const Matrix& x, std::span<const int> y, const GbdtParams& params, std::uint64_t seed,
              std::vector<std::string> feature_names = {}, const FitOptions& options = {});

double leaf_weight(double g, double h, double lambda, double alpha);
double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma);

// Logistic loss weighted by scale_pos_weight for positives, averaged over
// total weight, using the first n_trees trees.
double training_loss(const GbdtModel& model, const Matrix& x, std::span<const int> y,
                     std::size_t n_trees = GbdtModel::all_trees);

struct FeatureShare {
  std::size_t feature = 0;
  std::string name;
  double share = 0.0;
};

// Total split gain per feature over sum of all gains; features that never
// split are omitted. Sorted by share descending, then feature index.
std::vector<FeatureShare> feature_importance(const GbdtModel& model);

struct ShapVector {
  double base = 0.0;
  std::vector<double> phi;
};

// Exact path-dependent TreeSHAP in margin units.
ShapVector tree_shap(const GbdtModel& model, std::span<const double> x);
// Adds one tree's contributions to phi.
void tree_shap_add(const Tree& tree, std::span<const double> x, std::span<double> phi);

struct ShapMatrix {
  double base = 0.0;
  Matrix phi;  // rows x features
};

ShapMatrix tree_shap_batch(const GbdtModel& model, const Matrix& x, Exec exec = Exec::parallel);

}  // namespace textrisk::gbdt
