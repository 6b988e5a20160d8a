#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace textrisk {

enum class Errc {
  validation,
  io,
  duplicate_id,
  dim_mismatch,
  non_finite,
  truncated,
  unknown_id,
  length_mismatch,
  degenerate_class,
  insufficient_class,
  empty_split,
  stale_input,
  leakage,
  numeric,
};

std::string_view errc_name(Errc code) noexcept;

// CLI exit code for an error category: 2 validation, 3 leakage, 4 numeric.
int exit_code(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace textrisk
