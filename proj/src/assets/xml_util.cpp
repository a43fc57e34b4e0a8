#include "xml_util.hpp"

#include <boost/property_tree/xml_parser.hpp>
#include <sstream>

#include "metasim/common/error.hpp"
#include "metasim/common/numfmt.hpp"

namespace metasim::assets::xml {

Tree parse(std::string_view text) {
  Tree tree;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::read_xml(in, tree, boost::property_tree::xml_parser::no_comments);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw Error(Errc::MalformedXml, e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return tree;
}

std::optional<std::string> attr(const Tree& node, const char* name) {
  if (auto attrs = node.get_child_optional("<xmlattr>")) {
    if (auto v = attrs->get_optional<std::string>(name)) return *v;
  }
  return std::nullopt;
}

std::string attr_or(const Tree& node, const char* name, const std::string& fallback) {
  auto v = attr(node, name);
  return v ? *v : fallback;
}

std::vector<double> numbers(const std::string& text, std::size_t expected, const std::string& what) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    auto v = parse_double(token);
    if (!v) throw Error(Errc::MalformedXml, "bad number '" + token + "' in " + what);
    out.push_back(*v);
  }
  if (expected != 0 && out.size() != expected)
    throw Error(Errc::MalformedXml, what + " expects " + std::to_string(expected) + " numbers, got " +
                                        std::to_string(out.size()));
  return out;
}

Vec3 vec3(const std::string& text, const std::string& what) {
  auto v = numbers(text, 3, what);
  return {v[0], v[1], v[2]};
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace metasim::assets::xml
