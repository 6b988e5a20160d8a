#include <algorithm>
#include <cmath>
#include <numeric>

#include "textrisk/common/error.hpp"
#include "textrisk/common/rng.hpp"
#include "textrisk/gbdt/gbdt.hpp"

namespace textrisk::gbdt {

namespace {

struct Candidate {
  double gain = 0.0;
  double threshold = 0.0;
  double gl = 0.0;
  double hl = 0.0;
  bool found = false;
};

struct OpenNode {
  int node = 0;
  double g = 0.0;
  double h = 0.0;
};

struct ScanState {
  double gl = 0.0;
  double hl = 0.0;
  double last = 0.0;
  bool seen = false;
};

// Best split per open node for one feature. Thresholds are visited in
// ascending order and only a strictly larger gain replaces the incumbent.
void scan_feature(const Matrix& x, std::size_t f, const std::vector<std::uint32_t>& order,
                  const std::vector<int>& slot_of_row, const std::vector<OpenNode>& open, const std::vector<double>& g,
                  const std::vector<double>& h, const GbdtParams& p, std::vector<Candidate>& best) {
  std::vector<ScanState> state(open.size());
  for (std::uint32_t r : order) {
    const int s = slot_of_row[r];
    if (s < 0) continue;
    auto& st = state[static_cast<std::size_t>(s)];
    const double v = x(r, f);
    if (st.seen && v > st.last) {
      const auto& nd = open[static_cast<std::size_t>(s)];
      const double hr = nd.h - st.hl;
      if (st.hl >= p.min_child_weight && hr >= p.min_child_weight) {
        const double gain = split_gain(st.gl, st.hl, nd.g - st.gl, hr, p.lambda, p.gamma);
        auto& b = best[static_cast<std::size_t>(s)];
        if (gain > b.gain) {
          double thr = st.last + (v - st.last) / 2;
          if (!(thr > st.last)) thr = v;
          b = {gain, thr, st.gl, st.hl, true};
        }
      }
    }
    st.gl += g[r];
    st.hl += h[r];
    st.last = v;
    st.seen = true;
  }
}

Tree grow_tree(const Matrix& x, const std::vector<std::vector<std::uint32_t>>& sorted, const std::vector<double>& g,
               const std::vector<double>& h, const std::vector<char>& in_sample, const std::vector<std::size_t>& features,
               const GbdtParams& p, Exec exec) {
  const std::size_t n = x.rows();
  Tree tree;
  OpenNode root;
  for (std::size_t r = 0; r < n; ++r) {
    if (!in_sample[r]) continue;
    root.g += g[r];
    root.h += h[r];
  }
  root.node = tree.add_node(root.h);

  // node_of[r]: tree node holding a sampled row, -1 otherwise.
  std::vector<int> node_of(n, -1);
  for (std::size_t r = 0; r < n; ++r)
    if (in_sample[r]) node_of[r] = 0;

  std::vector<OpenNode> open{root};
  std::vector<OpenNode> leaves;
  for (int depth = 0; depth < p.max_depth && !open.empty(); ++depth) {
    std::vector<int> slot_of_node(tree.size(), -1);
    for (std::size_t s = 0; s < open.size(); ++s) slot_of_node[static_cast<std::size_t>(open[s].node)] = static_cast<int>(s);
    std::vector<int> slot_of_row(n, -1);
    for (std::size_t r = 0; r < n; ++r)
      if (node_of[r] >= 0) slot_of_row[r] = slot_of_node[static_cast<std::size_t>(node_of[r])];

    std::vector<std::vector<Candidate>> per_feature(features.size(), std::vector<Candidate>(open.size()));
    const auto nf = static_cast<std::ptrdiff_t>(features.size());
    if (exec == Exec::serial) {
      for (std::ptrdiff_t i = 0; i < nf; ++i) {
        const auto fi = static_cast<std::size_t>(i);
        scan_feature(x, features[fi], sorted[features[fi]], slot_of_row, open, g, h, p, per_feature[fi]);
      }
    } else {
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t i = 0; i < nf; ++i) {
        const auto fi = static_cast<std::size_t>(i);
        scan_feature(x, features[fi], sorted[features[fi]], slot_of_row, open, g, h, p, per_feature[fi]);
      }
    }

    std::vector<OpenNode> next;
    std::vector<std::size_t> split_feature(open.size(), 0);
    std::vector<Candidate> chosen(open.size());
    for (std::size_t s = 0; s < open.size(); ++s) {
      for (std::size_t fi = 0; fi < features.size(); ++fi) {
        const auto& c = per_feature[fi][s];
        if (c.found && c.gain > chosen[s].gain) {
          chosen[s] = c;
          split_feature[s] = features[fi];
        }
      }
      const auto& nd = open[s];
      if (!chosen[s].found) {
        leaves.push_back(nd);
        continue;
      }
      const auto& c = chosen[s];
      const auto id = static_cast<std::size_t>(nd.node);
      OpenNode l{0, c.gl, c.hl};
      OpenNode r{0, nd.g - c.gl, nd.h - c.hl};
      l.node = tree.add_node(l.h);
      r.node = tree.add_node(r.h);
      tree.feature[id] = static_cast<int>(split_feature[s]);
      tree.threshold[id] = c.threshold;
      tree.gain[id] = c.gain;
      tree.left[id] = l.node;
      tree.right[id] = r.node;
      next.push_back(l);
      next.push_back(r);
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (node_of[r] < 0) continue;
      const auto id = static_cast<std::size_t>(node_of[r]);
      if (tree.left[id] < 0) continue;
      node_of[r] = x(r, static_cast<std::size_t>(tree.feature[id])) < tree.threshold[id] ? tree.left[id] : tree.right[id];
    }
    open = std::move(next);
  }
  leaves.insert(leaves.end(), open.begin(), open.end());
  for (const auto& nd : leaves)
    tree.leaf_value[static_cast<std::size_t>(nd.node)] = leaf_weight(nd.g, nd.h, p.lambda, p.alpha) * p.eta;
  return tree;
}

}  // namespace

GbdtModel fit(const Matrix& x, std::span<const int> y, const GbdtParams& params, std::uint64_t seed,
              std::vector<std::string> feature_names, const FitOptions& options) {
  validate_fit_params(params);
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (y.size() != n) fail(Errc::length_mismatch, "labels and rows differ in length");
  if (n == 0 || p == 0) fail(Errc::validation, "empty training matrix");
  if (!feature_names.empty() && feature_names.size() != p)
    fail(Errc::length_mismatch, "feature name count differs from column count");
  for (double v : x.data())
    if (!std::isfinite(v)) fail(Errc::non_finite, "feature matrix contains NaN or infinity");
  std::size_t positives = 0;
  for (int v : y) {
    if (v != 0 && v != 1) fail(Errc::validation, "labels must be 0 or 1");
    positives += static_cast<std::size_t>(v);
  }
  if (!options.allow_single_class && (positives == 0 || positives == n))
    fail(Errc::degenerate_class, "training labels contain a single class");

  GbdtModel model;
  model.params = params;
  model.n_features = p;
  model.feature_names = std::move(feature_names);

  std::vector<std::vector<std::uint32_t>> sorted(p, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < p; ++f) {
    auto& o = sorted[f];
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
  }

  const std::size_t n_cols =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(params.colsample_bytree * static_cast<double>(p))), 1, p);
  std::vector<double> margin(n, model.base_margin);
  std::vector<double> g(n);
  std::vector<double> h(n);
  std::vector<char> in_sample(n);
  std::vector<std::size_t> all_features(p);
  std::iota(all_features.begin(), all_features.end(), 0);

  for (int t = 0; t < params.n_estimators; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double prob = 1.0 / (1.0 + std::exp(-margin[i]));
      const double w = y[i] ? params.scale_pos_weight : 1.0;
      g[i] = w * (prob - y[i]);
      h[i] = w * prob * (1.0 - prob);
    }
    Rng rng = Rng::stream(seed, Stream::gbdt, {static_cast<std::uint64_t>(t)});
    for (std::size_t i = 0; i < n; ++i) in_sample[i] = params.subsample >= 1.0 ? 1 : rng.bernoulli(params.subsample);
    std::vector<std::size_t> features = all_features;
    if (n_cols < p) {
      rng.shuffle(std::span<std::size_t>(features));
      features.resize(n_cols);
      std::sort(features.begin(), features.end());
    }
    Tree tree = grow_tree(x, sorted, g, h, in_sample, features, params, options.exec);
    for (std::size_t i = 0; i < n; ++i) margin[i] += tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace textrisk::gbdt
