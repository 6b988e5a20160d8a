#pragma once

namespace textrisk {

// Selects between the serial reference path and the OpenMP kernel for every
// data-parallel loop. Both paths produce identical results.
enum class Exec { serial, parallel };

int max_threads() noexcept;

}  // namespace textrisk
