#include "metasim/config/tree.hpp"

#include <cctype>

#include "metasim/common/error.hpp"
#include "metasim/common/numfmt.hpp"

namespace metasim::config {

Node Node::make_scalar(std::string text, bool quoted) {
  Node n;
  n.scalar = std::move(text);
  n.quoted = quoted;
  return n;
}

const Node* Node::find(std::string_view key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

Node* Node::find(std::string_view key) {
  for (auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

Node& Node::set(std::string key, Node value) {
  if (Node* existing = find(key)) {
    *existing = std::move(value);
    return *existing;
  }
  entries.emplace_back(std::move(key), std::move(value));
  return entries.back().second;
}

bool Node::operator==(const Node& other) const {
  return kind == other.kind && scalar == other.scalar && entries == other.entries && items == other.items;
}

namespace {

[[noreturn]] void syntax(int line, int column, const std::string& msg) {
  throw Error(Errc::SyntaxError, "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg);
}

struct Line {
  int indent = 0;
  std::string content;
  int number = 0;
};

/// Strips a trailing comment that is outside double quotes.
std::string strip_comment(const std::string& text) {
  bool in_quotes = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '\\') ++i;
      else if (c == '"') in_quotes = false;
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == '#' && (i == 0 || text[i - 1] == ' ')) {
      return text.substr(0, i);
    }
  }
  return text;
}

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string raw(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++number;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::size_t indent = 0;
    while (indent < raw.size() && raw[indent] == ' ') ++indent;
    if (indent < raw.size() && raw[indent] == '\t') syntax(number, static_cast<int>(indent) + 1, "tab in indentation");
    std::string content(trim(strip_comment(raw.substr(indent))));
    if (content.empty()) continue;
    if (indent % 2 != 0) syntax(number, static_cast<int>(indent) + 1, "indentation must be a multiple of two spaces");
    lines.push_back({static_cast<int>(indent), content, number});
  }
  return lines;
}

bool key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

/// Length of a leading `key:` token followed by space or end of line; 0 if none.
std::size_t key_length(const std::string& content) {
  std::size_t i = 0;
  while (i < content.size() && key_char(content[i])) ++i;
  if (i == 0 || i >= content.size() || content[i] != ':') return 0;
  if (i + 1 < content.size() && content[i + 1] != ' ') return 0;
  return i;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, int line, int column) : text_(text), line_(line), column_(column) {}

  Node parse_whole() {
    skip_ws();
    Node n = parse_item(true);
    skip_ws();
    if (pos_ != text_.size()) error("unexpected trailing characters");
    return n;
  }

 private:
  [[noreturn]] void error(const std::string& msg) const { syntax(line_, column_ + static_cast<int>(pos_), msg); }

  void skip_ws() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }

  Node parse_item(bool top) {
    Node n;
    n.line = line_;
    if (pos_ >= text_.size()) error("missing value");
    const char c = text_[pos_];
    if (c == '"') return parse_quoted();
    if (c == '[') return parse_flow();
    if (c == '{') {
      if (text_.substr(pos_, 2) != "{}") error("only the empty map {} may be written inline");
      pos_ += 2;
      n.kind = Node::Kind::Map;
      return n;
    }
    const std::size_t start = pos_;
    if (top) {
      pos_ = text_.size();
    } else {
      while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']') ++pos_;
    }
    n.scalar = std::string(trim(text_.substr(start, pos_ - start)));
    if (n.scalar.empty()) error("empty value");
    return n;
  }

  Node parse_quoted() {
    Node n;
    n.line = line_;
    n.quoted = true;
    ++pos_;
    while (true) {
      if (pos_ >= text_.size()) error("unterminated string");
      const char c = text_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        n.scalar += c;
        continue;
      }
      if (pos_ >= text_.size()) error("dangling escape");
      const char e = text_[pos_++];
      switch (e) {
        case 'n': n.scalar += '\n'; break;
        case 't': n.scalar += '\t'; break;
        case 'r': n.scalar += '\r'; break;
        case '"': n.scalar += '"'; break;
        case '\\': n.scalar += '\\'; break;
        default: error(std::string("unknown escape \\") + e);
      }
    }
    return n;
  }

  Node parse_flow() {
    Node n;
    n.line = line_;
    n.kind = Node::Kind::List;
    ++pos_;
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return n;
    }
    while (true) {
      skip_ws();
      n.items.push_back(parse_item(false));
      skip_ws();
      if (pos_ >= text_.size()) error("unterminated list");
      if (text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        return n;
      }
      error("expected ',' or ']'");
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_;
  int column_;
};

class BlockParser {
 public:
  explicit BlockParser(std::vector<Line> lines) : lines_(std::move(lines)) {}

  Node parse_document() {
    if (lines_.empty()) return Node::make_map();
    if (lines_[0].indent != 0) syntax(lines_[0].number, 1, "document must start at column 1");
    Node root = parse_block(0);
    if (i_ < lines_.size()) syntax(lines_[i_].number, lines_[i_].indent + 1, "unexpected indentation");
    return root;
  }

 private:
  static bool is_item(const Line& l) { return l.content == "-" || l.content.rfind("- ", 0) == 0; }

  Node parse_block(int indent) {
    if (is_item(lines_[i_])) return parse_list(indent);
    return parse_map(indent);
  }

  Node parse_map(int indent) {
    Node map = Node::make_map();
    map.line = lines_[i_].number;
    while (i_ < lines_.size() && lines_[i_].indent == indent && !is_item(lines_[i_])) {
      const Line line = lines_[i_];
      const std::size_t klen = key_length(line.content);
      if (klen == 0) syntax(line.number, indent + 1, "expected 'key: value'");
      std::string key = line.content.substr(0, klen);
      if (map.find(key)) syntax(line.number, indent + 1, "duplicate key '" + key + "'");
      std::string rest(trim(std::string_view(line.content).substr(klen + 1)));
      ++i_;
      if (!rest.empty()) {
        map.entries.emplace_back(key, ValueParser(rest, line.number, indent + static_cast<int>(klen) + 3).parse_whole());
        continue;
      }
      if (i_ >= lines_.size() || lines_[i_].indent <= indent)
        syntax(line.number, indent + static_cast<int>(klen) + 2, "missing value for '" + key + "'");
      if (lines_[i_].indent != indent + 2)
        syntax(lines_[i_].number, lines_[i_].indent + 1, "nested block must be indented by two spaces");
      map.entries.emplace_back(key, parse_block(indent + 2));
    }
    if (i_ < lines_.size() && lines_[i_].indent > indent)
      syntax(lines_[i_].number, lines_[i_].indent + 1, "unexpected indentation");
    return map;
  }

  Node parse_list(int indent) {
    Node list = Node::make_list();
    list.line = lines_[i_].number;
    while (i_ < lines_.size() && lines_[i_].indent == indent && is_item(lines_[i_])) {
      Line& line = lines_[i_];
      const std::string rest = line.content == "-" ? "" : std::string(trim(line.content.substr(2)));
      if (rest.empty()) {
        ++i_;
        if (i_ >= lines_.size() || lines_[i_].indent != indent + 2)
          syntax(line.number, indent + 1, "empty list item");
        list.items.push_back(parse_block(indent + 2));
      } else if (key_length(rest) > 0 || rest.rfind("- ", 0) == 0) {
        // "- key: value" opens a map (or nested list) whose body sits two columns in.
        line.indent = indent + 2;
        line.content = rest;
        list.items.push_back(parse_block(indent + 2));
      } else {
        ++i_;
        list.items.push_back(ValueParser(rest, line.number, indent + 3).parse_whole());
      }
    }
    if (i_ < lines_.size() && lines_[i_].indent > indent)
      syntax(lines_[i_].number, lines_[i_].indent + 1, "unexpected indentation");
    return list;
  }

  std::vector<Line> lines_;
  std::size_t i_ = 0;
};

bool needs_quotes(const std::string& s) {
  if (s.empty()) return true;
  if (s.front() == ' ' || s.back() == ' ') return true;
  const char first = s.front();
  if (first == '[' || first == '{' || first == '"' || first == '#') return true;
  if (first == '-' && (s.size() == 1 || s[1] == ' ')) return true;
  for (char c : s) {
    if (c == '#' || c == ',' || c == ']' || c == ':' || c == '\n' || c == '\r' || c == '\t' || c == '\\' ||
        c == '"')
      return true;
  }
  return false;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

bool is_inline(const Node& n) {
  if (n.kind == Node::Kind::Scalar) return true;
  if (n.kind == Node::Kind::Map) return n.entries.empty();
  for (const auto& item : n.items)
    if (!(item.kind == Node::Kind::Scalar || (item.kind == Node::Kind::List && is_inline(item)))) return false;
  return true;
}

std::string inline_text(const Node& n) {
  switch (n.kind) {
    case Node::Kind::Scalar:
      return (n.quoted || needs_quotes(n.scalar)) ? quote(n.scalar) : n.scalar;
    case Node::Kind::Map:
      return "{}";
    case Node::Kind::List: {
      std::string out = "[";
      for (std::size_t i = 0; i < n.items.size(); ++i) out += (i ? ", " : "") + inline_text(n.items[i]);
      return out + "]";
    }
  }
  return {};
}

void write_block(const Node& n, int indent, std::string& out, bool dash);

void write_map(const Node& n, int indent, std::string& out, bool dash) {
  bool first = true;
  for (const auto& [key, value] : n.entries) {
    out += (first && dash) ? std::string(indent - 2, ' ') + "- " : std::string(indent, ' ');
    first = false;
    out += key + ":";
    if (is_inline(value)) {
      out += " " + inline_text(value) + "\n";
    } else {
      out += "\n";
      write_block(value, indent + 2, out, false);
    }
  }
}

void write_list(const Node& n, int indent, std::string& out, bool dash) {
  bool first = true;
  for (const auto& item : n.items) {
    const bool lead = first && dash;
    first = false;
    if (is_inline(item)) {
      out += (lead ? std::string(indent - 2, ' ') + "- " : std::string(indent, ' ')) + "- " + inline_text(item) + "\n";
      continue;
    }
    // The item's own block starts after "- " on the same line.
    std::string sub;
    write_block(item, indent + 2, sub, true);
    if (lead) sub = std::string(indent - 2, ' ') + "- " + sub.substr(static_cast<std::size_t>(indent));
    out += sub;
  }
}

void write_block(const Node& n, int indent, std::string& out, bool dash) {
  if (n.kind == Node::Kind::Map) write_map(n, indent, out, dash);
  else write_list(n, indent, out, dash);
}

}  // namespace

Node parse_tree(std::string_view text) { return BlockParser(split_lines(text)).parse_document(); }

std::string write_tree(const Node& root) {
  std::string out;
  if (root.kind == Node::Kind::Map && root.entries.empty()) return out;
  if (root.kind == Node::Kind::Scalar) return inline_text(root) + "\n";
  write_block(root, 0, out, false);
  return out;
}

Node parse_value(std::string_view text) {
  const std::string t(trim(text));
  if (t.empty()) return Node::make_scalar("", true);
  return ValueParser(t, 1, 1).parse_whole();
}

Node string_node(const std::string& text) { return Node::make_scalar(text, needs_quotes(text)); }

}  // namespace metasim::config
