#include "textrisk/common/error.hpp"

namespace textrisk {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::validation: return "VALIDATION";
    case Errc::io: return "IO";
    case Errc::duplicate_id: return "DUPLICATE_ID";
    case Errc::dim_mismatch: return "DIM_MISMATCH";
    case Errc::non_finite: return "NON_FINITE";
    case Errc::truncated: return "TRUNCATED";
    case Errc::unknown_id: return "UNKNOWN_ID";
    case Errc::length_mismatch: return "LENGTH_MISMATCH";
    case Errc::degenerate_class: return "DEGENERATE_CLASS";
    case Errc::insufficient_class: return "INSUFFICIENT_CLASS";
    case Errc::empty_split: return "EMPTY_SPLIT";
    case Errc::stale_input: return "STALE_INPUT";
    case Errc::leakage: return "LEAKAGE";
    case Errc::numeric: return "NUMERIC";
  }
  return "UNKNOWN";
}

int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::leakage: return 3;
    case Errc::numeric:
    case Errc::non_finite: return 4;
    default: return 2;
  }
}

}  // namespace textrisk
