#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace metasim::config {

/// One node of the scenario text format: nested `key: value` blocks with
/// two-space indentation, `- item` lists, `[a, b]` inline lists, `#`
/// comments, and optionally double-quoted strings.
struct Node {
  enum class Kind { Scalar, Map, List };

  Kind kind = Kind::Scalar;
  std::string scalar;
  bool quoted = false;
  std::vector<std::pair<std::string, Node>> entries;
  std::vector<Node> items;
  int line = 0;

  static Node make_scalar(std::string text, bool quoted = false);
  static Node make_map() { Node n; n.kind = Kind::Map; return n; }
  static Node make_list() { Node n; n.kind = Kind::List; return n; }

  const Node* find(std::string_view key) const;
  Node* find(std::string_view key);
  Node& set(std::string key, Node value);

  bool operator==(const Node& other) const;
};

/// Throws Error(SyntaxError) with "line L, column C" in the message.
Node parse_tree(std::string_view text);
std::string write_tree(const Node& root);

/// A single value as written after `key: ` (scalar, quoted string, inline
/// list or `{}`); used by the override grammar.
Node parse_value(std::string_view text);

/// Quotes a string only when the bare form would not read back unchanged.
Node string_node(const std::string& text);

}  // namespace metasim::config
