#pragma once

#include <string>
#include <string_view>

namespace textrisk {

// Shortest decimal string that round-trips to the same value.
std::string format_double(double value);
std::string format_float(float value);

// Strict parse of the whole field; nullopt-like failure reported via bool.
bool parse_double(std::string_view text, double& out);
bool parse_float(std::string_view text, float& out);

}  // namespace textrisk
