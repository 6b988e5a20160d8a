#include <algorithm>
#include <cmath>

#include "textrisk/common/error.hpp"
#include "textrisk/stats/stats.hpp"

namespace textrisk::stats {

nlohmann::json TestRecord::to_json() const {
  return {{"name", name}, {"statistic", statistic}, {"p", p}, {"n", n}, {"params", params}};
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) fail(Errc::validation, "KS test needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult r;
  r.d = d;
  const double ne = na * nb / (na + nb);
  r.p = kolmogorov_sf(std::sqrt(ne) * d);
  return r;
}

Chi2Result chi2_independence(const std::vector<std::vector<double>>& table) {
  const std::size_t rows = table.size();
  if (rows < 2) fail(Errc::validation, "contingency table needs at least two rows");
  const std::size_t cols = table[0].size();
  if (cols < 2) fail(Errc::validation, "contingency table needs at least two columns");
  std::vector<double> row_sum(rows, 0.0);
  std::vector<double> col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (table[r].size() != cols) fail(Errc::validation, "contingency table rows differ in length");
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = table[r][c];
      if (!(v >= 0) || !std::isfinite(v)) fail(Errc::validation, "contingency counts must be non-negative");
      row_sum[r] += v;
      col_sum[c] += v;
      total += v;
    }
  }
  Chi2Result res;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = row_sum[r] * col_sum[c] / total;
      if (!(e > 0))
        fail(Errc::validation, "expected count is zero at cell (" + std::to_string(r) + ", " + std::to_string(c) + ")");
      const double diff = table[r][c] - e;
      res.statistic += diff * diff / e;
    }
  }
  res.df = static_cast<int>((rows - 1) * (cols - 1));
  res.p = chi2_sf(res.statistic, res.df);
  return res;
}

KruskalResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) fail(Errc::validation, "Kruskal-Wallis needs at least two groups");
  std::vector<double> pooled;
  for (const auto& g : groups) {
    if (g.empty()) fail(Errc::validation, "Kruskal-Wallis groups must be non-empty");
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  const auto ranks = mid_ranks(pooled);
  const double n = static_cast<double>(pooled.size());
  double sum = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double r = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) r += ranks[offset + i];
    sum += r * r / static_cast<double>(g.size());
    offset += g.size();
  }
  double h = 12.0 / (n * (n + 1)) * sum - 3 * (n + 1);

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double correction = 1.0 - ties / (n * n * n - n);
  h = correction > 0 ? h / correction : 0.0;
  KruskalResult res;
  res.h = std::max(0.0, h);
  res.df = static_cast<int>(groups.size() - 1);
  res.p = chi2_sf(res.h, res.df);
  return res;
}

namespace {

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0) || !(syy > 0)) fail(Errc::validation, "correlation input has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double correlation_p(double r, std::size_t n) {
  if (std::abs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n) - 2;
  return student_t_two_sided(r * std::sqrt(df / (1 - r * r)), df);
}

}  // namespace

CorrelationResult correlations(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(Errc::length_mismatch, "correlation inputs differ in length");
  if (x.size() < 3) fail(Errc::validation, "correlation needs at least 3 pairs");
  CorrelationResult r;
  r.n = x.size();
  r.pearson = pearson(x, y);
  r.pearson_p = correlation_p(r.pearson, r.n);
  const auto rx = mid_ranks(x);
  const auto ry = mid_ranks(y);
  r.spearman = pearson(rx, ry);
  r.spearman_p = correlation_p(r.spearman, r.n);
  return r;
}

}  // namespace textrisk::stats
