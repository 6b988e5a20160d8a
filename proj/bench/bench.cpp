// Serial twins vs OpenMP kernels. Arg 0 is Exec::serial, 1 is Exec::parallel.
#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "support.hpp"
#include "textrisk/encoder/encoder.hpp"
#include "textrisk/gbdt/gbdt.hpp"
#include "textrisk/lingfeat/lingfeat.hpp"

using namespace textrisk;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

const testing::Dataset& data() {
  static const auto d = testing::random_dataset(20000, 20, 1);
  return d;
}

const gbdt::GbdtModel& model() {
  static const auto m = [] {
    gbdt::GbdtParams p;
    p.n_estimators = 100;
    p.max_depth = 6;
    return gbdt::fit(data().x, data().y, p, 1);
  }();
  return m;
}

const std::vector<std::string>& texts() {
  static const auto t = [] {
    std::vector<std::string> out;
    Rng rng(3);
    const char* words[] = {"loan", "pay", "off", "credit", "cards", "stable", "job", "late", "rate", "debt",
                           "home", "car", "medical", "bills", "thank", "you", "years", "income", "help", "lower"};
    for (int i = 0; i < 5000; ++i) {
      std::string s;
      for (int w = 0; w < 60; ++w) s += std::string(words[rng.below(20)]) + (w % 12 == 11 ? ". " : " ");
      out.push_back(s);
    }
    return out;
  }();
  return t;
}

void BM_PredictMargin(benchmark::State& state) {
  model();  // fitted once, outside the timed loop
  for (auto _ : state) benchmark::DoNotOptimize(model().predict_margin(data().x, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(data().x.rows()));
}

void BM_TreeShap(benchmark::State& state) {
  Matrix rows(0, data().x.cols());
  for (std::size_t i = 0; i < 2000; ++i) rows.append_row(data().x.row(i));
  for (auto _ : state) benchmark::DoNotOptimize(gbdt::tree_shap_batch(model(), rows, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * 2000);
}

void BM_GbdtFit(benchmark::State& state) {
  gbdt::GbdtParams p;
  p.n_estimators = 20;
  p.max_depth = 6;
  gbdt::FitOptions opt;
  opt.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(gbdt::fit(data().x, data().y, p, 1, {}, opt));
}

void BM_HashedStore(benchmark::State& state) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < texts().size(); ++i) ids.push_back("B" + std::to_string(i));
  for (auto _ : state) benchmark::DoNotOptimize(encoder::hashed_store(ids, texts(), encoder::kDefaultDim, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(texts().size()));
}

void BM_Linguistic(benchmark::State& state) {
  const auto& lex = lingfeat::Lexicon::bundled();
  for (auto _ : state) benchmark::DoNotOptimize(lingfeat::compute_batch(texts(), lex, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(texts().size()));
}

}  // namespace

BENCHMARK(BM_PredictMargin)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TreeShap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GbdtFit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HashedStore)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Linguistic)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
