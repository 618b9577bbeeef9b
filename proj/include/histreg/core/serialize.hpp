#pragma once

#include <iosfwd>
#include <string>
#include <variant>

#include "histreg/core/transform.hpp"

namespace histreg {

using Transform = std::variant<AffineTransform2D, TpsWarp>;

/// Text transform format. Header `# transform v1`, a `type affine|tps` field,
/// row-major coefficients, control points and lambda for TPS. All numbers are
/// written with 17 significant digits.
void write_transform(std::ostream& os, const Transform& t);
void write_transform_file(const std::string& path, const Transform& t);

Transform read_transform(std::istream& is);
Transform read_transform_file(const std::string& path);

/// Format a double with 17 significant digits (round-trip exact).
std::string format_double(double v);

}  // namespace histreg
