#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <vector>

#include "textrisk/common/matrix.hpp"
#include "textrisk/common/rng.hpp"
#include "textrisk/gbdt/gbdt.hpp"

namespace textrisk::testing {

// n x p uniform features, labels from a noisy logistic on the first columns.
struct Dataset {
  Matrix x;
  std::vector<int> y;
};

inline Dataset random_dataset(std::size_t n, std::size_t p, std::uint64_t seed, bool integer_valued = false) {
  Rng rng(seed);
  Dataset d{Matrix(n, p), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0;
    for (std::size_t c = 0; c < p; ++c) {
      d.x(i, c) = integer_valued ? static_cast<double>(rng.below(5)) : rng.uniform(-1, 1);
      if (c < 3) z += (c % 2 ? -1.5 : 2.0) * d.x(i, c);
    }
    d.y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0;
  }
  // both classes present
  d.y[0] = 0;
  d.y[1] = 1;
  return d;
}

// Value function E[f(x) | x_S] on one tree, averaging unknown features by
// cover, the same conditioning TreeSHAP uses.
inline double tree_conditional(const gbdt::Tree& t, std::span<const double> x, std::uint32_t mask,
                               std::size_t node = 0) {
  if (t.is_leaf(node)) return t.leaf_value[node];
  const auto f = static_cast<std::size_t>(t.feature[node]);
  const auto l = static_cast<std::size_t>(t.left[node]);
  const auto r = static_cast<std::size_t>(t.right[node]);
  if (mask & (1u << f)) return tree_conditional(t, x, mask, x[f] < t.threshold[node] ? l : r);
  return t.child_fraction(node, l) * tree_conditional(t, x, mask, l) +
         t.child_fraction(node, r) * tree_conditional(t, x, mask, r);
}

// Exhaustive Shapley values over all 2^p coalitions.
inline std::vector<double> brute_force_shapley(const gbdt::GbdtModel& m, std::span<const double> x) {
  const std::size_t p = m.n_features;
  std::vector<double> fact(p + 1, 1.0);
  for (std::size_t i = 1; i <= p; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  auto value = [&](std::uint32_t mask) {
    double v = m.base_margin;
    for (const auto& t : m.trees) v += tree_conditional(t, x, mask);
    return v;
  };
  std::vector<double> phi(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::uint32_t s = 0; s < (1u << p); ++s) {
      if (s & (1u << i)) continue;
      const auto size = static_cast<std::size_t>(__builtin_popcount(s));
      const double w = fact[size] * fact[p - size - 1] / fact[p];
      phi[i] += w * (value(s | (1u << i)) - value(s));
    }
  }
  return phi;
}

inline gbdt::GbdtParams stump_params(double lambda, double alpha, double mcw, double spw, double eta) {
  gbdt::GbdtParams p;
  p.n_estimators = 1;
  p.max_depth = 1;
  p.eta = eta;
  p.lambda = lambda;
  p.alpha = alpha;
  p.gamma = 0;
  p.min_child_weight = mcw;
  p.scale_pos_weight = spw;
  p.subsample = 1;
  p.colsample_bytree = 1;
  return p;
}

inline double soft_leaf(double g, double h, double lambda, double alpha) {
  double t = 0;
  if (g > alpha) t = g - alpha;
  else if (g < -alpha) t = g + alpha;
  return -t / (h + lambda);
}

struct StumpOracle {
  bool split = false;
  std::size_t feature = 0;
  double threshold = 0;
  double left = 0, right = 0, root = 0;
};

// Depth-1 Newton step from p = 0.5, every candidate threshold enumerated.
inline StumpOracle oracle_stump(const Matrix& x, const std::vector<int>& y, const gbdt::GbdtParams& p) {
  const std::size_t n = y.size();
  std::vector<double> g(n), h(n);
  double G = 0, H = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = y[i] ? p.scale_pos_weight : 1.0;
    g[i] = w * (0.5 - y[i]);
    h[i] = w * 0.25;
    G += g[i];
    H += h[i];
  }
  auto score = [&](double gs, double hs) { return gs * gs / (hs + p.lambda); };
  StumpOracle best;
  best.root = soft_leaf(G, H, p.lambda, p.alpha) * p.eta;
  double best_gain = 0;
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::vector<double> vals;
    for (std::size_t i = 0; i < n; ++i) vals.push_back(x(i, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t v = 0; v + 1 < vals.size(); ++v) {
      double thr = (vals[v] + vals[v + 1]) / 2;
      if (!(thr > vals[v])) thr = vals[v + 1];
      double gl = 0, hl = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (x(i, f) < thr) {
          gl += g[i];
          hl += h[i];
        }
      const double gr = G - gl, hr = H - hl;
      if (hl < p.min_child_weight || hr < p.min_child_weight) continue;
      const double gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(G, H)) - p.gamma;
      if (gain > best_gain) {
        best_gain = gain;
        best.split = true;
        best.feature = f;
        best.threshold = thr;
        best.left = soft_leaf(gl, hl, p.lambda, p.alpha) * p.eta;
        best.right = soft_leaf(gr, hr, p.lambda, p.alpha) * p.eta;
      }
    }
  }
  return best;
}

inline double logloss(const std::vector<double>& proba, const std::vector<int>& y) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s -= y[i] ? std::log(proba[i]) : std::log(1 - proba[i]);
  return s / static_cast<double>(y.size());
}

}  // namespace textrisk::testing
