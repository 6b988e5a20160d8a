#include "textrisk/scorehead/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "textrisk/common/error.hpp"

namespace textrisk::scorehead {

namespace {

constexpr double kOutputFloor = 1e-15;

struct Rows {
  std::vector<std::size_t> store_rows;
  std::vector<int> labels;
};

Rows resolve(const encoder::EmbeddingStore& store, const LabelMap& labels, std::span<const std::string> ids) {
  Rows rows;
  rows.store_rows.reserve(ids.size());
  rows.labels.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = labels.find(id);
    if (it == labels.end()) fail(Errc::unknown_id, "no label for id " + id);
    rows.store_rows.push_back(store.row_of(id));
    rows.labels.push_back(it->second);
  }
  return rows;
}

std::vector<double> predict_rows(const Network& net, const encoder::EmbeddingStore& store,
                                 const std::vector<std::size_t>& rows) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = net.predict(store.row(rows[i]));
  return out;
}

void run_epoch(Network& net, AdamOptimizer& opt, Gradients& grads, const encoder::EmbeddingStore& store,
               const Rows& train, ClassWeights weights, std::size_t batch_size, Rng& rng,
               std::vector<std::size_t>& order) {
  rng.shuffle(std::span<std::size_t>(order));
  ForwardTrace trace;
  std::vector<double> x(store.dim());
  const bool dropout = net.config().dropout_rate > 0.0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    const double inv_n = 1.0 / static_cast<double>(end - start);
    grads.zero();
    for (std::size_t b = start; b < end; ++b) {
      const std::size_t i = order[b];
      auto src = store.row(train.store_rows[i]);
      std::copy(src.begin(), src.end(), x.begin());
      net.forward(x, dropout ? &rng : nullptr, trace);
      const int y = train.labels[i];
      const double w = y ? weights.positive : weights.negative;
      net.backward(trace, w * (trace.probability - y) * inv_n, grads);
    }
    opt.step(net, grads);
  }
}

std::vector<std::string> sorted_union(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::string> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void check_two_classes(const Rows& rows, const char* what) {
  const int pos = std::accumulate(rows.labels.begin(), rows.labels.end(), 0);
  if (pos == 0 || pos == static_cast<int>(rows.labels.size()))
    fail(Errc::degenerate_class, std::string(what) + " holds a single class");
}

}  // namespace

double TrainedScoreHead::predict(std::span<const float> encoding) const {
  return std::clamp(network.predict(encoding), kOutputFloor, 1.0 - kOutputFloor);
}

nlohmann::json TrainedScoreHead::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : network.layers())
    layers.push_back({{"in", layer.in}, {"out", layer.out}, {"weights", layer.weights}, {"bias", layer.bias}});
  return {{"format", "textrisk-scorehead/1"},
          {"config", config().to_json()},
          {"weights_layout", "input-major: weights[k * out + j]"},
          {"layers", layers},
          {"selected_epochs", selected_epochs},
          {"validation_loss", validation_loss},
          {"epoch_losses", epoch_losses},
          {"provenance", provenance},
          {"seed", seed}};
}

TrainedScoreHead TrainedScoreHead::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "textrisk-scorehead/1") fail(Errc::validation, "not a score head document");
  std::vector<DenseLayer> layers;
  for (const auto& l : j.at("layers"))
    layers.push_back({l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                      l.at("weights").get<std::vector<double>>(), l.at("bias").get<std::vector<double>>()});
  TrainedScoreHead head;
  head.network = Network(ScoreHeadConfig::from_json(j.at("config")), std::move(layers));
  head.selected_epochs = j.at("selected_epochs").get<int>();
  head.validation_loss = j.value("validation_loss", 0.0);
  head.epoch_losses = j.value("epoch_losses", std::vector<double>{});
  head.provenance = j.at("provenance").get<std::vector<std::string>>();
  head.seed = j.at("seed").get<std::uint64_t>();
  if (head.provenance.empty()) fail(Errc::validation, "score head has empty provenance");
  return head;
}

TrainedScoreHead train_head(const encoder::EmbeddingStore& store, const LabelMap& labels,
                            const ScoreHeadConfig& config, std::span<const std::string> train_ids,
                            std::span<const std::string> val_ids, const TrainingOptions& options) {
  if (train_ids.empty() || val_ids.empty()) fail(Errc::empty_split, "training and validation ids must be non-empty");
  {
    std::unordered_set<std::string> train_set(train_ids.begin(), train_ids.end());
    for (const auto& id : val_ids)
      if (train_set.count(id)) fail(Errc::validation, "id " + id + " is in both training and validation ids");
  }
  const Rows train = resolve(store, labels, train_ids);
  const Rows val = resolve(store, labels, val_ids);
  check_two_classes(train, "training set");
  const ClassWeights weights = balanced_class_weights(train.labels);

  Rng rng(options.seed);
  Network net(config, store.dim(), rng);
  AdamOptimizer opt(net, net.config().learning_rate);
  Gradients grads = net.make_gradients();
  std::vector<std::size_t> order(train.store_rows.size());
  std::iota(order.begin(), order.end(), 0);

  TrainedScoreHead best;
  best.network = net;
  best.validation_loss = std::numeric_limits<double>::infinity();
  best.seed = options.seed;
  int since_best = 0;
  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    run_epoch(net, opt, grads, store, train, weights, options.batch_size, rng, order);
    const double loss = weighted_bce(predict_rows(net, store, val.store_rows), val.labels, weights);
    if (!std::isfinite(loss))
      fail(Errc::numeric, "non-finite validation loss for " + net.config().key() + " at epoch " + std::to_string(epoch));
    best.epoch_losses.push_back(loss);
    if (loss < best.validation_loss) {
      best.validation_loss = loss;
      best.network = net;
      best.selected_epochs = epoch;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }
  best.provenance = sorted_union(train_ids, val_ids);
  return best;
}

TrainedScoreHead train_head_fixed(const encoder::EmbeddingStore& store, const LabelMap& labels,
                                  const ScoreHeadConfig& config, std::span<const std::string> train_ids,
                                  int epochs, const TrainingOptions& options) {
  if (train_ids.empty()) fail(Errc::empty_split, "training ids must be non-empty");
  if (epochs < 1) fail(Errc::validation, "fixed-epoch training needs at least one epoch");
  const Rows train = resolve(store, labels, train_ids);
  check_two_classes(train, "training set");
  const ClassWeights weights = balanced_class_weights(train.labels);

  Rng rng(options.seed);
  Network net(config, store.dim(), rng);
  AdamOptimizer opt(net, net.config().learning_rate);
  Gradients grads = net.make_gradients();
  std::vector<std::size_t> order(train.store_rows.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    run_epoch(net, opt, grads, store, train, weights, options.batch_size, rng, order);
    for (const auto& layer : net.layers())
      for (double w : layer.weights)
        if (!std::isfinite(w))
          fail(Errc::numeric, "non-finite weights for " + net.config().key() + " at epoch " + std::to_string(epoch));
  }
  TrainedScoreHead head;
  head.network = std::move(net);
  head.selected_epochs = epochs;
  head.provenance = sorted_union(train_ids, {});
  head.seed = options.seed;
  return head;
}

std::pair<std::vector<std::string>, std::vector<std::string>> stratified_split(
    std::span<const std::string> ids, const LabelMap& labels, double first_fraction, Rng& rng) {
  std::vector<std::string> by_class[2];
  for (const auto& id : ids) {
    auto it = labels.find(id);
    if (it == labels.end()) fail(Errc::unknown_id, "no label for id " + id);
    by_class[it->second ? 1 : 0].push_back(id);
  }
  std::vector<std::string> first;
  std::vector<std::string> second;
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::string>(members));
    auto take = static_cast<std::size_t>(std::llround(first_fraction * static_cast<double>(members.size())));
    if (members.size() >= 2) take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    first.insert(first.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    second.insert(second.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  return {std::move(first), std::move(second)};
}

Selection select_architecture(const encoder::EmbeddingStore& store, const LabelMap& labels,
                              std::span<const std::string> fold_train_ids, std::uint64_t seed,
                              const std::vector<ScoreHeadConfig>& grid, const TrainingOptions& options,
                              Exec exec) {
  if (grid.empty()) fail(Errc::validation, "architecture grid is empty");
  Selection sel;
  Rng split_rng = Rng::stream(seed, Stream::head_split);
  std::tie(sel.subset_train, sel.subset_test) = stratified_split(fold_train_ids, labels, 0.7, split_rng);

  std::vector<ConfigOutcome> outcomes(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  auto evaluate = [&](std::ptrdiff_t c) {
    try {
      TrainingOptions opt = options;
      opt.seed = Rng::derive_seed(seed, Stream::head_train, {static_cast<std::uint64_t>(c)});
      auto head = train_head(store, labels, grid[c], sel.subset_train, sel.subset_test, opt);
      outcomes[c] = {grid[c].canonical(), head.validation_loss, head.selected_epochs};
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t c = 0; c < n; ++c) evaluate(c);
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t c = 0; c < n; ++c) evaluate(c);
  }
  for (std::size_t c = 0; c < grid.size(); ++c) {
    if (!errors[c]) continue;
    try {
      std::rethrow_exception(errors[c]);
    } catch (const Error& e) {
      throw Error(e.code(), "config " + grid[c].key() + ": " + e.what());
    }
  }

  std::size_t winner = 0;
  for (std::size_t c = 1; c < outcomes.size(); ++c)
    if (outcomes[c].test_loss < outcomes[winner].test_loss) winner = c;
  sel.outcomes = std::move(outcomes);
  sel.config = sel.outcomes[winner].config;

  TrainingOptions refit = options;
  refit.seed = Rng::derive_seed(seed, Stream::head_train, {grid.size(), winner});
  try {
    sel.head = train_head_fixed(store, labels, sel.config, fold_train_ids, sel.outcomes[winner].selected_epochs, refit);
  } catch (const Error& e) {
    throw Error(e.code(), "refit of " + sel.config.key() + ": " + e.what());
  }
  return sel;
}

std::vector<double> score(const TrainedScoreHead& head, const encoder::EmbeddingStore& store,
                          std::span<const std::string> ids) {
  std::vector<double> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out[i] = head.predict(store.vector(ids[i]));
  return out;
}

}  // namespace textrisk::scorehead
