#include <algorithm>
#include <cmath>
#include <numeric>

#include "textrisk/common/error.hpp"
#include "textrisk/stats/stats.hpp"

namespace textrisk::stats {

namespace {

double ratio(std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; }

void check_labels(std::span<const int> labels, std::size_t n) {
  if (labels.size() != n) fail(Errc::length_mismatch, "labels and scores differ in length");
  for (int v : labels)
    if (v != 0 && v != 1) fail(Errc::validation, "labels must be 0 or 1");
}

}  // namespace

nlohmann::json MetricSet::to_json() const {
  nlohmann::json j{{"bacc", bacc},
                   {"f1", f1},
                   {"precision", precision},
                   {"recall", recall},
                   {"accuracy", accuracy},
                   {"threshold", threshold},
                   {"confusion", {{"tp", confusion.tp}, {"fp", confusion.fp}, {"tn", confusion.tn}, {"fn", confusion.fn}}}};
  j["auc"] = auc ? nlohmann::json(*auc) : nlohmann::json(nullptr);
  return j;
}

std::vector<double> mid_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double auc(std::span<const int> labels, std::span<const double> scores) {
  check_labels(labels, scores.size());
  const auto ranks = mid_ranks(scores);
  double pos_rank_sum = 0.0;
  std::size_t n1 = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      pos_rank_sum += ranks[i];
      ++n1;
    }
  }
  const std::size_t n0 = labels.size() - n1;
  if (n1 == 0 || n0 == 0) fail(Errc::degenerate_class, "AUC is undefined with a single class");
  const double d1 = static_cast<double>(n1);
  return (pos_rank_sum - d1 * (d1 + 1) / 2.0) / (d1 * static_cast<double>(n0));
}

Confusion confusion(std::span<const int> labels, std::span<const int> predicted) {
  check_labels(labels, predicted.size());
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      (predicted[i] ? c.tp : c.fn)++;
    } else {
      (predicted[i] ? c.fp : c.tn)++;
    }
  }
  return c;
}

double balanced_accuracy(std::span<const int> labels, std::span<const int> predicted) {
  const Confusion c = confusion(labels, predicted);
  const bool has_pos = c.tp + c.fn > 0;
  const bool has_neg = c.tn + c.fp > 0;
  if (has_pos && has_neg) return (ratio(c.tp, c.tp + c.fn) + ratio(c.tn, c.tn + c.fp)) / 2.0;
  return has_pos ? ratio(c.tp, c.tp + c.fn) : ratio(c.tn, c.tn + c.fp);
}

MetricSet metrics(std::span<const int> labels, std::span<const double> scores, double threshold) {
  check_labels(labels, scores.size());
  if (labels.empty()) fail(Errc::validation, "metrics need at least one row");
  std::vector<int> predicted(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) fail(Errc::non_finite, "score at row " + std::to_string(i) + " is not finite");
    predicted[i] = scores[i] >= threshold ? 1 : 0;
  }
  MetricSet m;
  m.threshold = threshold;
  m.confusion = confusion(labels, predicted);
  const auto& c = m.confusion;
  m.bacc = balanced_accuracy(labels, predicted);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = ratio(c.tp + c.tn, labels.size());
  const bool both = c.tp + c.fn > 0 && c.tn + c.fp > 0;
  if (both) m.auc = auc(labels, scores);
  return m;
}

DelongResult delong_test(std::span<const int> labels, std::span<const double> scores_a,
                         std::span<const double> scores_b) {
  check_labels(labels, scores_a.size());
  check_labels(labels, scores_b.size());
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) fail(Errc::degenerate_class, "DeLong test needs both classes");
  const double m = static_cast<double>(pos.size());
  const double n = static_cast<double>(neg.size());

  // Structural components from mid-ranks in the pooled, positive and negative samples.
  auto components = [&](std::span<const double> s, std::vector<double>& v10, std::vector<double>& v01) {
    const auto all = mid_ranks(s);
    std::vector<double> sp(pos.size());
    std::vector<double> sn(neg.size());
    for (std::size_t i = 0; i < pos.size(); ++i) sp[i] = s[pos[i]];
    for (std::size_t j = 0; j < neg.size(); ++j) sn[j] = s[neg[j]];
    const auto rp = mid_ranks(sp);
    const auto rn = mid_ranks(sn);
    v10.resize(pos.size());
    v01.resize(neg.size());
    double auc_value = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      v10[i] = (all[pos[i]] - rp[i]) / n;
      auc_value += v10[i];
    }
    for (std::size_t j = 0; j < neg.size(); ++j) v01[j] = 1.0 - (all[neg[j]] - rn[j]) / m;
    return auc_value / m;
  };
  std::vector<double> a10, a01, b10, b01;
  DelongResult r;
  r.auc_a = components(scores_a, a10, a01);
  r.auc_b = components(scores_b, b10, b01);

  auto cov = [](const std::vector<double>& x, const std::vector<double>& y, double mx, double my) {
    if (x.size() < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
    return s / static_cast<double>(x.size() - 1);
  };
  const double var_diff = (cov(a10, a10, r.auc_a, r.auc_a) + cov(b10, b10, r.auc_b, r.auc_b) -
                           2 * cov(a10, b10, r.auc_a, r.auc_b)) / m +
                          (cov(a01, a01, r.auc_a, r.auc_a) + cov(b01, b01, r.auc_b, r.auc_b) -
                           2 * cov(a01, b01, r.auc_a, r.auc_b)) / n;
  const double diff = r.auc_a - r.auc_b;
  if (diff == 0.0) {
    r.z = 0.0;
    r.p = 1.0;
    return r;
  }
  if (!(var_diff > 0)) fail(Errc::numeric, "DeLong variance of the AUC difference is zero while the AUCs differ");
  r.z = diff / std::sqrt(var_diff);
  r.p = std::min(1.0, 2.0 * normal_sf(std::abs(r.z)));
  return r;
}

}  // namespace textrisk::stats
