#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "textrisk/common/error.hpp"
#include "textrisk/common/rng.hpp"
#include "textrisk/stats/stats.hpp"

namespace textrisk::stats {

double pinball_loss(double u, double tau) { return u * (tau - (u < 0 ? 1.0 : 0.0)); }

double pinball_objective(const Matrix& x, std::span<const double> y, std::span<const double> beta, double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double fit = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) fit += x(i, c) * beta[c];
    total += pinball_loss(y[i] - fit, tau);
  }
  return total;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Greedy choice of p linearly independent rows, preferring rows whose
// response is closest to the marginal tau-quantile.
std::vector<std::size_t> initial_basis(const Matrix& x, std::span<const double> y, double tau) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  std::vector<double> sorted(y.begin(), y.end());
  const auto k = std::min(n - 1, static_cast<std::size_t>(std::floor(tau * static_cast<double>(n))));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  const double q = sorted[k];
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(y[a] - q) < std::abs(y[b] - q); });

  std::vector<VectorXd> ortho;
  std::vector<std::size_t> basis;
  for (std::size_t idx : order) {
    VectorXd v(static_cast<Eigen::Index>(p));
    for (std::size_t c = 0; c < p; ++c) v(static_cast<Eigen::Index>(c)) = x(idx, c);
    const double norm = v.norm();
    if (norm == 0) continue;
    for (const auto& u : ortho) v -= u.dot(v) * u;
    if (v.norm() <= 1e-9 * norm) continue;
    ortho.push_back(v / v.norm());
    basis.push_back(idx);
    if (basis.size() == p) break;
  }
  if (basis.size() < p) fail(Errc::validation, "quantile regression design matrix is rank deficient");
  return basis;
}

}  // namespace

QuantFit quantile_fit(const Matrix& x, std::span<const double> y, double tau) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (y.size() != n) fail(Errc::length_mismatch, "design rows and responses differ in length");
  if (!(tau > 0 && tau < 1)) fail(Errc::validation, "tau must lie in (0, 1)");
  if (n < p || p == 0) fail(Errc::validation, "quantile regression needs at least as many rows as columns");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(y[i])) fail(Errc::non_finite, "response is not finite at row " + std::to_string(i));

  const auto P = static_cast<Eigen::Index>(p);
  std::vector<std::size_t> basis = initial_basis(x, y, tau);
  std::vector<char> in_basis(n, 0);
  for (auto b : basis) in_basis[b] = 1;
  // Dual variable of each non-basic row, held at a bound: 1 above the fit, 0 below.
  std::vector<char> upper(n, 0);

  VectorXd colsum = VectorXd::Zero(P);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < p; ++c) colsum(static_cast<Eigen::Index>(c)) += x(i, c);

  VectorXd beta(P);
  std::vector<double> r(n);
  auto refresh = [&](Eigen::PartialPivLU<MatrixXd>& lu) {
    MatrixXd xh(P, P);
    VectorXd yh(P);
    for (Eigen::Index k = 0; k < P; ++k) {
      for (Eigen::Index c = 0; c < P; ++c) xh(k, c) = x(basis[static_cast<std::size_t>(k)], static_cast<std::size_t>(c));
      yh(k) = y[basis[static_cast<std::size_t>(k)]];
    }
    lu.compute(xh);
    beta = lu.solve(yh);
    for (std::size_t i = 0; i < n; ++i) {
      if (in_basis[i]) {
        r[i] = 0.0;
        continue;
      }
      double fit = 0.0;
      for (std::size_t c = 0; c < p; ++c) fit += x(i, c) * beta(static_cast<Eigen::Index>(c));
      r[i] = y[i] - fit;
    }
  };

  Eigen::PartialPivLU<MatrixXd> lu;
  refresh(lu);
  for (std::size_t i = 0; i < n; ++i) upper[i] = !in_basis[i] && r[i] > 0;

  constexpr double tol = 1e-10;
  const int max_iter = static_cast<int>(std::min<std::size_t>(50 * n + 1000, 10'000'000));
  bool degenerate_last = false;
  struct Break {
    double t;
    std::size_t row;
    double weight;
  };
  std::vector<Break> breaks;
  breaks.reserve(n);

  for (int iter = 0; iter < max_iter; ++iter) {
    VectorXd rhs = (1 - tau) * colsum;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_basis[i] || !upper[i]) continue;
      for (std::size_t c = 0; c < p; ++c) rhs(static_cast<Eigen::Index>(c)) -= x(i, c);
    }
    const VectorXd a = lu.transpose().solve(rhs);

    // Leaving row: most violated dual bound, or the smallest row index after a
    // degenerate step to rule out cycling.
    Eigen::Index leave = -1;
    double worst = tol;
    for (Eigen::Index k = 0; k < P; ++k) {
      const double v = std::max(-a(k), a(k) - 1);
      if (v <= tol) continue;
      if (degenerate_last) {
        if (leave < 0 || basis[static_cast<std::size_t>(k)] < basis[static_cast<std::size_t>(leave)]) leave = k;
      } else if (v > worst) {
        worst = v;
        leave = k;
      }
    }
    if (leave < 0) {
      QuantFit fit;
      fit.beta.assign(beta.data(), beta.data() + P);
      fit.objective = pinball_objective(x, y, fit.beta, tau);
      fit.iterations = iter;
      return fit;
    }

    const double sigma = a(leave) < 0 ? 1.0 : -1.0;
    double slope = a(leave) < 0 ? a(leave) : 1.0 - a(leave);
    VectorXd e = VectorXd::Zero(P);
    e(leave) = sigma;
    const VectorXd d = lu.solve(e);

    breaks.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (in_basis[i]) continue;
      double c = 0.0;
      for (std::size_t col = 0; col < p; ++col) c += x(i, col) * d(static_cast<Eigen::Index>(col));
      if (upper[i] ? c > 1e-14 : c < -1e-14) breaks.push_back({std::max(0.0, r[i] / c), i, std::abs(c)});
    }
    std::sort(breaks.begin(), breaks.end(),
              [](const Break& l, const Break& rr) { return l.t != rr.t ? l.t < rr.t : l.row < rr.row; });
    std::size_t stop = breaks.size();
    for (std::size_t k = 0; k < breaks.size(); ++k) {
      slope += breaks[k].weight;
      if (slope >= 0) {
        stop = k;
        break;
      }
    }
    if (stop == breaks.size()) fail(Errc::numeric, "quantile regression simplex found no entering row");
    for (std::size_t k = 0; k < stop; ++k) upper[breaks[k].row] = !upper[breaks[k].row];

    const std::size_t enter = breaks[stop].row;
    const std::size_t out = basis[static_cast<std::size_t>(leave)];
    degenerate_last = breaks[stop].t == 0.0;
    in_basis[out] = 0;
    upper[out] = sigma < 0;
    in_basis[enter] = 1;
    upper[enter] = 0;
    basis[static_cast<std::size_t>(leave)] = enter;
    refresh(lu);
  }
  fail(Errc::numeric, "quantile regression simplex did not converge");
}

Matrix quantreg_design(std::span<const int> default_flag, std::span<const std::string> purpose) {
  if (default_flag.size() != purpose.size()) fail(Errc::length_mismatch, "default flags and purposes differ in length");
  Matrix x(default_flag.size(), 6);
  for (std::size_t i = 0; i < default_flag.size(); ++i) {
    const double def = default_flag[i] ? 1.0 : 0.0;
    const double edu = purpose[i] == "educational" ? 1.0 : 0.0;
    const double mov = purpose[i] == "moving" ? 1.0 : 0.0;
    x(i, 0) = 1.0;
    x(i, 1) = def;
    x(i, 2) = edu;
    x(i, 3) = mov;
    x(i, 4) = def * edu;
    x(i, 5) = def * mov;
  }
  for (std::size_t c = 1; c < 6; ++c) {
    bool any = false;
    for (std::size_t i = 0; i < x.rows() && !any; ++i) any = x(i, c) != 0;
    if (!any) fail(Errc::validation, "quantile regression column '" + kQuantileTerms[c] + "' has no observations");
  }
  return x;
}

nlohmann::json QuantRegResult::to_json() const {
  nlohmann::json jr = nlohmann::json::array();
  for (const auto& row : rows) jr.push_back({{"tau", row.tau}, {"beta", row.beta}, {"se", row.se}, {"p", row.p}});
  return {{"terms", terms}, {"n", n}, {"bootstrap", bootstrap}, {"seed", seed}, {"rows", jr}};
}

QuantRegResult quantile_regression(std::span<const double> score, std::span<const int> default_flag,
                                   std::span<const std::string> purpose, std::uint64_t seed, int bootstrap,
                                   const std::vector<double>& taus, Exec exec) {
  if (score.size() != default_flag.size()) fail(Errc::length_mismatch, "scores and default flags differ in length");
  if (bootstrap < 2) fail(Errc::validation, "bootstrap needs at least 2 replicates");
  const Matrix x = quantreg_design(default_flag, purpose);
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();

  QuantRegResult res;
  res.terms = kQuantileTerms;
  res.n = n;
  res.bootstrap = bootstrap;
  res.seed = seed;

  for (std::size_t ti = 0; ti < taus.size(); ++ti) {
    const double tau = taus[ti];
    QuantRow row;
    row.tau = tau;
    row.beta = quantile_fit(x, score, tau).beta;

    std::vector<std::vector<double>> draws(static_cast<std::size_t>(bootstrap));
    std::vector<std::exception_ptr> errors(draws.size());
    auto replicate = [&](std::ptrdiff_t b) {
      const auto bi = static_cast<std::size_t>(b);
      try {
        Rng rng = Rng::stream(seed, Stream::bootstrap, {ti, bi});
        // Resamples that leave a design column empty are redrawn.
        for (int attempt = 0; attempt < 100; ++attempt) {
          std::vector<std::size_t> rows(n);
          for (auto& v : rows) v = rng.below(n);
          Matrix xb = x.select_rows(rows);
          bool full = true;
          for (std::size_t c = 1; c < p && full; ++c) {
            bool any = false;
            for (std::size_t i = 0; i < n && !any; ++i) any = xb(i, c) != 0;
            full = any;
          }
          if (!full) continue;
          std::vector<double> yb(n);
          for (std::size_t i = 0; i < n; ++i) yb[i] = score[rows[i]];
          draws[bi] = quantile_fit(xb, yb, tau).beta;
          return;
        }
        fail(Errc::numeric, "bootstrap could not draw a full-rank resample");
      } catch (...) {
        errors[bi] = std::current_exception();
      }
    };
    const auto nb = static_cast<std::ptrdiff_t>(bootstrap);
    if (exec == Exec::serial) {
      for (std::ptrdiff_t b = 0; b < nb; ++b) replicate(b);
    } else {
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t b = 0; b < nb; ++b) replicate(b);
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);

    row.se.assign(p, 0.0);
    row.p.assign(p, 1.0);
    for (std::size_t c = 0; c < p; ++c) {
      double mean = 0.0;
      for (const auto& d : draws) mean += d[c];
      mean /= static_cast<double>(draws.size());
      double ss = 0.0;
      for (const auto& d : draws) ss += (d[c] - mean) * (d[c] - mean);
      row.se[c] = std::sqrt(ss / static_cast<double>(draws.size() - 1));
      if (row.se[c] > 0) {
        row.p[c] = std::min(1.0, 2.0 * normal_sf(std::abs(row.beta[c]) / row.se[c]));
      } else {
        row.p[c] = row.beta[c] == 0 ? 1.0 : 0.0;
      }
    }
    res.rows.push_back(std::move(row));
  }
  return res;
}

}  // namespace textrisk::stats
