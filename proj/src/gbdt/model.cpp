#include <algorithm>
#include <cmath>
#include <map>

#include "textrisk/common/error.hpp"
#include "textrisk/gbdt/gbdt.hpp"

namespace textrisk::gbdt {

namespace {

constexpr const char* kFormat = "textrisk-gbdt/1";

void check_range(const char* name, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi))
    fail(Errc::validation, std::string(name) + " = " + std::to_string(v) + " is outside [" + std::to_string(lo) +
                               ", " + std::to_string(hi) + "]");
}

void check_width(const GbdtModel& m, std::size_t width) {
  if (width != m.n_features)
    fail(Errc::dim_mismatch,
         "row has " + std::to_string(width) + " features, model expects " + std::to_string(m.n_features));
}

}  // namespace

nlohmann::json GbdtParams::to_json() const {
  return {{"scale_pos_weight", scale_pos_weight},
          {"eta", eta},
          {"subsample", subsample},
          {"n_estimators", n_estimators},
          {"colsample_bytree", colsample_bytree},
          {"max_depth", max_depth},
          {"lambda", lambda},
          {"alpha", alpha},
          {"gamma", gamma},
          {"min_child_weight", min_child_weight}};
}

GbdtParams GbdtParams::from_json(const nlohmann::json& j) {
  GbdtParams p;
  p.scale_pos_weight = j.at("scale_pos_weight").get<double>();
  p.eta = j.at("eta").get<double>();
  p.subsample = j.at("subsample").get<double>();
  p.n_estimators = j.at("n_estimators").get<int>();
  p.colsample_bytree = j.at("colsample_bytree").get<double>();
  p.max_depth = j.at("max_depth").get<int>();
  p.lambda = j.at("lambda").get<double>();
  p.alpha = j.at("alpha").get<double>();
  p.gamma = j.at("gamma").get<double>();
  p.min_child_weight = j.at("min_child_weight").get<double>();
  return p;
}

void validate_table_ranges(const GbdtParams& p) {
  check_range("scale_pos_weight", p.scale_pos_weight, 0.1, 10);
  check_range("eta", p.eta, 0.001, 0.5);
  check_range("subsample", p.subsample, 0.7, 1);
  check_range("n_estimators", p.n_estimators, 2, 500);
  check_range("colsample_bytree", p.colsample_bytree, 0.3, 1);
  check_range("max_depth", p.max_depth, 2, 12);
  check_range("lambda", p.lambda, 0.5, 10);
  check_range("alpha", p.alpha, 0.5, 10);
  check_range("gamma", p.gamma, 0, 10);
  check_range("min_child_weight", p.min_child_weight, 0, 10);
}

void validate_fit_params(const GbdtParams& p) {
  const double inf = std::numeric_limits<double>::max();
  if (!(p.scale_pos_weight > 0) || !std::isfinite(p.scale_pos_weight))
    fail(Errc::validation, "scale_pos_weight must be positive");
  if (!(p.eta > 0)) fail(Errc::validation, "eta must be positive");
  check_range("eta", p.eta, 0, 1);
  if (!(p.subsample > 0)) fail(Errc::validation, "subsample must be positive");
  check_range("subsample", p.subsample, 0, 1);
  check_range("n_estimators", p.n_estimators, 0, 100000);
  if (!(p.colsample_bytree > 0)) fail(Errc::validation, "colsample_bytree must be positive");
  check_range("colsample_bytree", p.colsample_bytree, 0, 1);
  check_range("max_depth", p.max_depth, 0, 30);
  check_range("lambda", p.lambda, 0, inf);
  check_range("alpha", p.alpha, 0, inf);
  check_range("gamma", p.gamma, 0, inf);
  check_range("min_child_weight", p.min_child_weight, 0, inf);
}

int Tree::add_node(double cover_value) {
  feature.push_back(-1);
  threshold.push_back(0.0);
  left.push_back(-1);
  right.push_back(-1);
  leaf_value.push_back(0.0);
  cover.push_back(cover_value);
  gain.push_back(0.0);
  return static_cast<int>(feature.size() - 1);
}

int Tree::leaf_for(std::span<const double> x) const {
  std::size_t n = 0;
  while (left[n] >= 0) {
    n = static_cast<std::size_t>(x[static_cast<std::size_t>(feature[n])] < threshold[n] ? left[n] : right[n]);
  }
  return static_cast<int>(n);
}

int Tree::depth() const {
  if (size() == 0) return 0;
  std::vector<int> d(size(), 0);
  int best = 0;
  for (std::size_t n = 0; n < size(); ++n) {
    if (left[n] < 0) continue;
    d[static_cast<std::size_t>(left[n])] = d[n] + 1;
    d[static_cast<std::size_t>(right[n])] = d[n] + 1;
    best = std::max(best, d[n] + 1);
  }
  return best;
}

double Tree::child_fraction(std::size_t parent, std::size_t child) const {
  return cover[parent] > 0 ? cover[child] / cover[parent] : 0.5;
}

double Tree::expected_value() const {
  // Children always have larger indices than their parent.
  std::vector<double> ev(size(), 0.0);
  for (std::size_t i = size(); i-- > 0;) {
    if (left[i] < 0) {
      ev[i] = leaf_value[i];
    } else {
      auto l = static_cast<std::size_t>(left[i]);
      auto r = static_cast<std::size_t>(right[i]);
      ev[i] = child_fraction(i, l) * ev[l] + child_fraction(i, r) * ev[r];
    }
  }
  return size() ? ev[0] : 0.0;
}

double GbdtModel::margin(std::span<const double> x, std::size_t n_trees) const {
  check_width(*this, x.size());
  double m = base_margin;
  const std::size_t count = std::min(n_trees, trees.size());
  for (std::size_t t = 0; t < count; ++t) m += trees[t].predict(x);
  return m;
}

double GbdtModel::proba(std::span<const double> x) const { return 1.0 / (1.0 + std::exp(-margin(x))); }

std::vector<double> GbdtModel::predict_margin(const Matrix& x, Exec exec, std::size_t n_trees) const {
  check_width(*this, x.cols());
  std::vector<double> out(x.rows());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = margin(x.row(static_cast<std::size_t>(i)), n_trees);
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = margin(x.row(static_cast<std::size_t>(i)), n_trees);
  }
  return out;
}

std::vector<double> GbdtModel::predict_proba(const Matrix& x, Exec exec) const {
  auto out = predict_margin(x, exec);
  for (auto& v : out) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

nlohmann::json GbdtModel::to_json() const {
  nlohmann::json jt = nlohmann::json::array();
  for (const auto& t : trees) {
    jt.push_back({{"feature", t.feature},
                  {"threshold", t.threshold},
                  {"left", t.left},
                  {"right", t.right},
                  {"leaf_value", t.leaf_value},
                  {"cover", t.cover},
                  {"gain", t.gain}});
  }
  return {{"format", kFormat},
          {"params", params.to_json()},
          {"base_margin", base_margin},
          {"n_features", n_features},
          {"feature_names", feature_names},
          {"trees", jt}};
}

GbdtModel GbdtModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kFormat) fail(Errc::validation, "not a textrisk-gbdt/1 model dump");
  GbdtModel m;
  m.params = GbdtParams::from_json(j.at("params"));
  m.base_margin = j.at("base_margin").get<double>();
  m.n_features = j.at("n_features").get<std::size_t>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  for (const auto& jt : j.at("trees")) {
    Tree t;
    t.feature = jt.at("feature").get<std::vector<int>>();
    t.threshold = jt.at("threshold").get<std::vector<double>>();
    t.left = jt.at("left").get<std::vector<int>>();
    t.right = jt.at("right").get<std::vector<int>>();
    t.leaf_value = jt.at("leaf_value").get<std::vector<double>>();
    t.cover = jt.at("cover").get<std::vector<double>>();
    t.gain = jt.at("gain").get<std::vector<double>>();
    const std::size_t n = t.feature.size();
    if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n || t.leaf_value.size() != n ||
        t.cover.size() != n || t.gain.size() != n)
      fail(Errc::validation, "tree arrays differ in length");
    for (std::size_t i = 0; i < n; ++i) {
      if (t.left[i] < 0) continue;
      const auto l = static_cast<std::size_t>(t.left[i]);
      const auto r = static_cast<std::size_t>(t.right[i]);
      if (l <= i || r <= i || l >= n || r >= n || t.feature[i] < 0 ||
          static_cast<std::size_t>(t.feature[i]) >= m.n_features)
        fail(Errc::validation, "malformed tree node " + std::to_string(i));
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

double leaf_weight(double g, double h, double lambda, double alpha) {
  const double shrunk = std::max(0.0, std::abs(g) - alpha);
  if (shrunk == 0.0 || h + lambda <= 0) return 0.0;
  return (g > 0 ? -shrunk : shrunk) / (h + lambda);
}

double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  auto term = [lambda](double g, double h) { return h + lambda > 0 ? g * g / (h + lambda) : 0.0; };
  return 0.5 * (term(gl, hl) + term(gr, hr) - term(gl + gr, hl + hr)) - gamma;
}

double training_loss(const GbdtModel& model, const Matrix& x, std::span<const int> y, std::size_t n_trees) {
  if (y.size() != x.rows()) fail(Errc::length_mismatch, "labels and rows differ in length");
  const auto margins = model.predict_margin(x, Exec::serial, n_trees);
  double loss = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double w = y[i] ? model.params.scale_pos_weight : 1.0;
    const double m = margins[i];
    // log(1 + exp(-m)) for y = 1, log(1 + exp(m)) for y = 0, computed stably.
    const double z = y[i] ? -m : m;
    loss += w * (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
    total += w;
  }
  return loss / total;
}

std::vector<FeatureShare> feature_importance(const GbdtModel& model) {
  std::map<std::size_t, double> gains;
  double total = 0.0;
  for (const auto& t : model.trees) {
    for (std::size_t n = 0; n < t.size(); ++n) {
      if (t.is_leaf(n)) continue;
      gains[static_cast<std::size_t>(t.feature[n])] += t.gain[n];
      total += t.gain[n];
    }
  }
  std::vector<FeatureShare> out;
  if (total <= 0) return out;
  for (const auto& [f, g] : gains) {
    if (g <= 0) continue;
    out.push_back({f, f < model.feature_names.size() ? model.feature_names[f] : "f" + std::to_string(f), g / total});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.share > b.share; });
  return out;
}

}  // namespace textrisk::gbdt
