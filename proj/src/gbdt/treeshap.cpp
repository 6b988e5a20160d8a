#include <vector>

#include "textrisk/common/error.hpp"
#include "textrisk/gbdt/gbdt.hpp"

namespace textrisk::gbdt {

namespace {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

using Path = std::vector<PathElement>;

void extend_path(Path& path, double zero_fraction, double one_fraction, int feature) {
  const std::size_t d = path.size();
  path.push_back({feature, zero_fraction, one_fraction, d == 0 ? 1.0 : 0.0});
  for (std::size_t i = d; i-- > 0;) {
    path[i + 1].pweight += one_fraction * path[i].pweight * static_cast<double>(i + 1) / static_cast<double>(d + 1);
    path[i].pweight = zero_fraction * path[i].pweight * static_cast<double>(d - i) / static_cast<double>(d + 1);
  }
}

void unwind_path(Path& path, std::size_t index) {
  const std::size_t d = path.size() - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next_one = path[d].pweight;
  for (std::size_t i = d; i-- > 0;) {
    if (one != 0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one * static_cast<double>(d + 1) / (static_cast<double>(i + 1) * one);
      next_one = tmp - path[i].pweight * zero * static_cast<double>(d - i) / static_cast<double>(d + 1);
    } else {
      path[i].pweight = path[i].pweight * static_cast<double>(d + 1) / (zero * static_cast<double>(d - i));
    }
  }
  for (std::size_t i = index; i < d; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
  path.pop_back();
}

double unwound_path_sum(const Path& path, std::size_t index) {
  const std::size_t d = path.size() - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next_one = path[d].pweight;
  double total = 0.0;
  for (std::size_t i = d; i-- > 0;) {
    if (one != 0) {
      const double tmp = next_one * static_cast<double>(d + 1) / (static_cast<double>(i + 1) * one);
      total += tmp;
      next_one = path[i].pweight - tmp * zero * static_cast<double>(d - i) / static_cast<double>(d + 1);
    } else if (zero != 0) {
      total += path[i].pweight / zero / (static_cast<double>(d - i) / static_cast<double>(d + 1));
    }
  }
  return total;
}

void recurse(const Tree& tree, std::span<const double> x, std::span<double> phi, std::size_t node, Path path,
             double zero_fraction, double one_fraction, int feature) {
  extend_path(path, zero_fraction, one_fraction, feature);
  if (tree.is_leaf(node)) {
    for (std::size_t i = 1; i < path.size(); ++i) {
      const double w = unwound_path_sum(path, i);
      const auto& el = path[i];
      phi[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * tree.leaf_value[node];
    }
    return;
  }
  const int split = tree.feature[node];
  const auto l = static_cast<std::size_t>(tree.left[node]);
  const auto r = static_cast<std::size_t>(tree.right[node]);
  const bool goes_left = x[static_cast<std::size_t>(split)] < tree.threshold[node];
  const std::size_t hot = goes_left ? l : r;
  const std::size_t cold = goes_left ? r : l;

  double incoming_zero = 1.0;
  double incoming_one = 1.0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    if (path[k].feature == split) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, k);
      break;
    }
  }
  recurse(tree, x, phi, hot, path, tree.child_fraction(node, hot) * incoming_zero, incoming_one, split);
  recurse(tree, x, phi, cold, path, tree.child_fraction(node, cold) * incoming_zero, 0.0, split);
}

double expected_margin(const GbdtModel& model) {
  double base = model.base_margin;
  for (const auto& t : model.trees) base += t.expected_value();
  return base;
}

}  // namespace

void tree_shap_add(const Tree& tree, std::span<const double> x, std::span<double> phi) {
  if (tree.size() == 0) return;
  Path path;
  path.reserve(32);
  recurse(tree, x, phi, 0, std::move(path), 1.0, 1.0, -1);
}

ShapVector tree_shap(const GbdtModel& model, std::span<const double> x) {
  if (x.size() != model.n_features)
    fail(Errc::dim_mismatch,
         "row has " + std::to_string(x.size()) + " features, model expects " + std::to_string(model.n_features));
  ShapVector out;
  out.base = expected_margin(model);
  out.phi.assign(model.n_features, 0.0);
  for (const auto& t : model.trees) tree_shap_add(t, x, out.phi);
  return out;
}

ShapMatrix tree_shap_batch(const GbdtModel& model, const Matrix& x, Exec exec) {
  if (x.cols() != model.n_features)
    fail(Errc::dim_mismatch,
         "matrix has " + std::to_string(x.cols()) + " features, model expects " + std::to_string(model.n_features));
  ShapMatrix out{expected_margin(model), Matrix(x.rows(), model.n_features)};
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  auto one = [&](std::ptrdiff_t i) {
    const auto r = static_cast<std::size_t>(i);
    for (const auto& t : model.trees) tree_shap_add(t, x.row(r), out.phi.row(r));
  };
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  } else {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  }
  return out;
}

}  // namespace textrisk::gbdt
