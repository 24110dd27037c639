#pragma once

#include <string>
#include <string_view>

namespace impactlab {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

/// Strict parse of a whole field; returns false on trailing junk or overflow.
bool parse_double(std::string_view text, double& out);

}  // namespace impactlab
