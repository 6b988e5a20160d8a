#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace textrisk::scorehead {

enum class DropoutPosition { before, after };

// One point of the head architecture grid.
struct ScoreHeadConfig {
  int first_dense = 128;       // 128, 256 or 512
  bool second_dense = false;   // extra 128-unit layer
  double dropout_rate = 0.0;   // 0, 0.10, 0.20 or 0.30
  DropoutPosition dropout_position = DropoutPosition::before;
  double learning_rate = 1e-3; // 1e-3, 1e-4 or 1e-5

  // Position is meaningless without dropout; canonical form pins it to before.
  ScoreHeadConfig canonical() const;
  std::string key() const;

  nlohmann::json to_json() const;
  static ScoreHeadConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ScoreHeadConfig& a, const ScoreHeadConfig& b) { return a.key() == b.key(); }
};

inline constexpr int kSecondDenseUnits = 128;

// All 126 unique configurations: 3 widths x 2 depths x 3 learning rates x
// (1 no-dropout + 3 rates x 2 positions).
std::vector<ScoreHeadConfig> enumerate_grid();

// Four-config subset (128 units, one or two layers, dropout 0 or 0.2 after,
// learning rate 1e-3) for desk-scale runs.
std::vector<ScoreHeadConfig> compact_grid();

struct ClassWeights {
  double negative = 1.0;
  double positive = 1.0;
};

// w1 = N / (2 N_pos), w0 = N / (2 N_neg).
ClassWeights balanced_class_weights(std::span<const int> labels);

inline constexpr double kProbabilityClamp = 1e-7;

// Mean of -w_y [y ln p + (1 - y) ln(1 - p)], p clamped to [1e-7, 1 - 1e-7].
// Throws Errc::length_mismatch.
double weighted_bce(std::span<const double> predictions, std::span<const int> labels, ClassWeights weights);

}  // namespace textrisk::scorehead
