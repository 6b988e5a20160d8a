#pragma once

#include <cstdint>
#include <ostream>

namespace textrisk::pipeline {

// Synthetic loan export in the raw input layout (bureau score ranges,
// underscore purposes, "Charged Off"/"Fully Paid" outcomes, description
// stamps and HTML entities). Each description repeats phrases drawn from a
// risky or a reassuring pool according to a latent text risk that also moves
// the default logit, so a text score can add information the tabular
// columns do not carry.
struct SynthOptions {
  std::size_t rows = 5000;
  std::uint64_t seed = 20240611;
  double text_effect = 1.8;     // logit weight of the latent text risk
  double tabular_effect = 0.7;  // logit weight of the latent tabular risk
  double intercept = -2.2;
  int signal_phrases = 5;
};

void write_synthetic_csv(std::ostream& out, const SynthOptions& options = {});

}  // namespace textrisk::pipeline
