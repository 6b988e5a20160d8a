#include "textrisk/scorehead/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "textrisk/common/error.hpp"
#include "textrisk/common/numfmt.hpp"

namespace textrisk::scorehead {

ScoreHeadConfig ScoreHeadConfig::canonical() const {
  ScoreHeadConfig c = *this;
  if (c.dropout_rate == 0.0) c.dropout_position = DropoutPosition::before;
  return c;
}

std::string ScoreHeadConfig::key() const {
  const ScoreHeadConfig c = canonical();
  std::ostringstream ss;
  ss << "dense" << c.first_dense << (c.second_dense ? "+128" : "") << "/dropout" << format_double(c.dropout_rate);
  if (c.dropout_rate > 0.0) ss << (c.dropout_position == DropoutPosition::before ? "-before" : "-after");
  ss << "/lr" << format_double(c.learning_rate);
  return ss.str();
}

nlohmann::json ScoreHeadConfig::to_json() const {
  const ScoreHeadConfig c = canonical();
  return {{"first_dense", c.first_dense},
          {"second_dense", c.second_dense},
          {"dropout_rate", c.dropout_rate},
          {"dropout_position", c.dropout_position == DropoutPosition::before ? "before" : "after"},
          {"learning_rate", c.learning_rate}};
}

ScoreHeadConfig ScoreHeadConfig::from_json(const nlohmann::json& j) {
  ScoreHeadConfig c;
  c.first_dense = j.at("first_dense").get<int>();
  c.second_dense = j.at("second_dense").get<bool>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  const auto pos = j.at("dropout_position").get<std::string>();
  if (pos != "before" && pos != "after") fail(Errc::validation, "dropout_position must be before or after");
  c.dropout_position = pos == "before" ? DropoutPosition::before : DropoutPosition::after;
  c.learning_rate = j.at("learning_rate").get<double>();
  if (c.first_dense <= 0 || c.dropout_rate < 0.0 || c.dropout_rate >= 1.0 || !(c.learning_rate > 0.0))
    fail(Errc::validation, "invalid head configuration " + j.dump());
  return c.canonical();
}

std::vector<ScoreHeadConfig> enumerate_grid() {
  std::vector<ScoreHeadConfig> grid;
  for (int width : {128, 256, 512})
    for (bool second : {false, true})
      for (double rate : {0.0, 0.10, 0.20, 0.30})
        for (DropoutPosition pos : {DropoutPosition::before, DropoutPosition::after})
          for (double lr : {1e-3, 1e-4, 1e-5}) {
            ScoreHeadConfig c{width, second, rate, pos, lr};
            c = c.canonical();
            if (std::find(grid.begin(), grid.end(), c) == grid.end()) grid.push_back(c);
          }
  return grid;
}

std::vector<ScoreHeadConfig> compact_grid() {
  return {
      {128, false, 0.0, DropoutPosition::before, 1e-3},
      {128, false, 0.2, DropoutPosition::after, 1e-3},
      {128, true, 0.0, DropoutPosition::before, 1e-3},
      {128, true, 0.2, DropoutPosition::after, 1e-3},
  };
}

ClassWeights balanced_class_weights(std::span<const int> labels) {
  double pos = 0.0;
  for (int y : labels) pos += y;
  const double n = static_cast<double>(labels.size());
  const double neg = n - pos;
  if (pos == 0.0 || neg == 0.0) fail(Errc::degenerate_class, "class weights need both classes present");
  return {n / (2.0 * neg), n / (2.0 * pos)};
}

double weighted_bce(std::span<const double> predictions, std::span<const int> labels, ClassWeights weights) {
  if (predictions.size() != labels.size())
    fail(Errc::length_mismatch, "weighted_bce: " + std::to_string(predictions.size()) + " predictions vs " +
                                    std::to_string(labels.size()) + " labels");
  if (predictions.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total += labels[i] ? -weights.positive * std::log(p) : -weights.negative * std::log(1.0 - p);
  }
  return total / static_cast<double>(predictions.size());
}

}  // namespace textrisk::scorehead
