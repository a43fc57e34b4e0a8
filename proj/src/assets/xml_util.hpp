#pragma once

#include <boost/property_tree/ptree.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metasim/common/math.hpp"

namespace metasim::assets::xml {

using Tree = boost::property_tree::ptree;

/// Throws MalformedXml with the line number on failure.
Tree parse(std::string_view text);

std::optional<std::string> attr(const Tree& node, const char* name);
std::string attr_or(const Tree& node, const char* name, const std::string& fallback);

/// Whitespace-separated doubles. Throws MalformedXml on bad numbers or when
/// `expected` (if non-zero) does not match the count.
std::vector<double> numbers(const std::string& text, std::size_t expected, const std::string& what);
Vec3 vec3(const std::string& text, const std::string& what);

std::string escape(std::string_view text);

}  // namespace metasim::assets::xml
