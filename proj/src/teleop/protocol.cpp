#include "metasim/teleop/protocol.hpp"

#include <cmath>

#include "metasim/common/error.hpp"
#include "metasim/common/numfmt.hpp"

namespace metasim::teleop {

namespace {

[[noreturn]] void malformed(std::string_view frame, const std::string& why) {
  std::string shown(frame.substr(0, 80));
  throw Error(Errc::MalformedFrame, why + " in frame '" + shown + "'");
}

/// Single-space separated tokens; a trailing newline is tolerated.
std::vector<std::string_view> tokens(std::string_view line, std::string_view frame) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t sp = line.find(' ', start);
    const std::string_view tok = line.substr(start, sp == std::string_view::npos ? sp : sp - start);
    if (tok.empty()) malformed(frame, "empty field");
    out.push_back(tok);
    if (sp == std::string_view::npos) break;
    start = sp + 1;
  }
  return out;
}

std::uint64_t unsigned_field(std::string_view tok, std::string_view frame, const char* what) {
  const auto v = parse_int(tok);
  if (!v || *v < 0) malformed(frame, std::string("bad ") + what + " '" + std::string(tok) + "'");
  return static_cast<std::uint64_t>(*v);
}

double number(std::string_view tok, std::string_view frame) {
  const auto v = parse_double(tok);
  if (!v || !std::isfinite(*v)) malformed(frame, "bad number '" + std::string(tok) + "'");
  return *v;
}

bool flag(std::string_view tok, std::string_view frame, const char* what) {
  if (tok == "0") return false;
  if (tok == "1") return true;
  malformed(frame, std::string(what) + " must be 0 or 1");
}

std::vector<std::string_view> lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    out.push_back(text.substr(start, nl == std::string_view::npos ? nl : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

TeleopCommand decode_cmd_tokens(const std::vector<std::string_view>& t, std::string_view frame) {
  if (t.size() != 12) malformed(frame, "CMD needs 11 fields, got " + std::to_string(t.size() - 1));
  TeleopCommand c;
  c.seq = unsigned_field(t[1], frame, "seq");
  c.t_ms = unsigned_field(t[2], frame, "timestamp");
  for (int i = 0; i < 3; ++i) {
    const std::string_view v = t[3 + i];
    if (v == "-1") c.translate[i] = -1;
    else if (v == "0") c.translate[i] = 0;
    else if (v == "1") c.translate[i] = 1;
    else malformed(frame, "translate values must be -1, 0 or 1");
  }
  c.orientation_enabled = flag(t[6], frame, "oriflag");
  c.orientation = Quat(number(t[7], frame), number(t[8], frame), number(t[9], frame), number(t[10], frame));
  if (c.orientation_enabled && std::abs(c.orientation.norm() - 1.0) > 1e-3)
    malformed(frame, "orientation is not a unit quaternion");
  c.gripper_toggle = flag(t[11], frame, "grip");
  return c;
}

}  // namespace

std::string_view frame_kind(std::string_view frame) {
  const std::size_t end = frame.find_first_of(" \n");
  return frame.substr(0, end);
}

TeleopCommand decode_command(std::string_view frame) {
  const auto t = tokens(frame, frame);
  if (t[0] != "CMD") malformed(frame, "expected CMD");
  return decode_cmd_tokens(t, frame);
}

std::string encode_command(const TeleopCommand& c) {
  std::string out = "CMD " + std::to_string(c.seq) + " " + std::to_string(c.t_ms);
  for (int v : c.translate) out += " " + std::to_string(v);
  out += c.orientation_enabled ? " 1" : " 0";
  for (double v : {c.orientation.w(), c.orientation.x(), c.orientation.y(), c.orientation.z()})
    out += " " + format_double(v);
  out += c.gripper_toggle ? " 1" : " 0";
  return out;
}

std::string encode_state(const backends::SceneModel& model, const state::EnvState& s, std::uint64_t seq,
                         std::uint64_t t_ms) {
  std::string out = "STATE " + std::to_string(seq) + " " + std::to_string(t_ms);
  for (const auto& e : model.entities()) {
    const auto& es = s.at(e.name);
    out += "\nE " + e.name;
    for (double v : {es.pos.x(), es.pos.y(), es.pos.z(), es.rot.w(), es.rot.x(), es.rot.y(), es.rot.z()})
      out += " " + format_double(v);
  }
  for (const auto& e : model.entities()) {
    if (e.type != backends::EntityType::Robot) continue;
    out += "\nD " + e.name;
    const auto& q = s.at(e.name).dof_pos;
    for (int i = 0; i < q.size(); ++i) out += " " + format_double(q(i));
  }
  return out;
}

StateFrame decode_state(std::string_view frame) {
  const auto ls = lines(frame);
  if (ls.empty()) malformed(frame, "empty state frame");
  StateFrame f;
  const auto head = tokens(ls[0], frame);
  if (head.size() != 3 || head[0] != "STATE") malformed(frame, "expected 'STATE <seq> <t_ms>'");
  f.seq = unsigned_field(head[1], frame, "seq");
  f.t_ms = unsigned_field(head[2], frame, "timestamp");
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto t = tokens(ls[i], frame);
    if (t[0] == "E") {
      if (t.size() != 9) malformed(frame, "E line needs a name and 7 numbers");
      Pose p(Vec3(number(t[2], frame), number(t[3], frame), number(t[4], frame)),
             Quat(number(t[5], frame), number(t[6], frame), number(t[7], frame), number(t[8], frame)));
      f.entities.emplace_back(std::string(t[1]), p);
    } else if (t[0] == "D") {
      if (t.size() < 2) malformed(frame, "D line needs a robot name");
      VecX q(static_cast<int>(t.size() - 2));
      for (std::size_t k = 2; k < t.size(); ++k) q(static_cast<int>(k - 2)) = number(t[k], frame);
      f.dofs.emplace_back(std::string(t[1]), q);
    } else {
      malformed(frame, "unknown state line '" + std::string(t[0]) + "'");
    }
  }
  return f;
}

ClientMessage decode_client_message(std::string_view frame) {
  const auto t = tokens(frame, frame);
  ClientMessage m;
  if (t[0] == "CMD") {
    m.kind = ControlKind::Cmd;
    m.cmd = decode_cmd_tokens(t, frame);
  } else if (t[0] == "HELLO") {
    if (t.size() > 2) malformed(frame, "HELLO takes at most a token");
    m.kind = ControlKind::Hello;
    if (t.size() == 2) m.token = std::string(t[1]);
  } else if (t[0] == "BYE") {
    if (t.size() != 1) malformed(frame, "BYE takes no fields");
    m.kind = ControlKind::Bye;
  } else {
    malformed(frame, "unknown record '" + std::string(t[0]) + "'");
  }
  return m;
}

}  // namespace metasim::teleop
