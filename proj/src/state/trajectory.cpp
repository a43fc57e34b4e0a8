#include "metasim/state/trajectory.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <boost/crc.hpp>

#include "metasim/common/error.hpp"

namespace metasim::state {

bool Action::operator==(const Action& o) const {
  if (dof_targets.size() != o.dof_targets.size()) return false;
  for (const auto& [name, v] : dof_targets) {
    auto it = o.dof_targets.find(name);
    if (it == o.dof_targets.end() || it->second.size() != v.size() || it->second != v) return false;
  }
  return true;
}

namespace {

constexpr std::uint32_t fourcc(const char (&s)[5]) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(s[0])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[3])) << 24;
}

constexpr std::uint32_t kHead = fourcc("HEAD");
constexpr std::uint32_t kInit = fourcc("INIT");
constexpr std::uint32_t kActs = fourcc("ACTS");
constexpr std::uint32_t kStat = fourcc("STAT");

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { uint(v, 2); }
  void u32(std::uint32_t v) { uint(v, 4); }
  void u64(std::uint64_t v) { uint(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void vec(const VecX& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  void vec3(const Vec3& v) {
    for (int i = 0; i < 3; ++i) f64(v[i]);
  }
  void raw(const Bytes& b) { out_.insert(out_.end(), b.begin(), b.end()); }
  Bytes& bytes() { return out_; }

 private:
  void uint(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(uint(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(uint(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  VecX vec() {
    const std::uint32_t n = u32();
    need(static_cast<std::uint64_t>(n) * 8);
    VecX v(n);
    for (std::uint32_t i = 0; i < n; ++i) v[i] = f64();
    return v;
  }
  Vec3 vec3() {
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = f64();
    return v;
  }
  /// Element counts are bounded by the bytes that remain, so a corrupted
  /// count cannot trigger a huge allocation.
  std::uint32_t count(std::size_t min_element_bytes) {
    const std::uint32_t n = u32();
    need(static_cast<std::uint64_t>(n) * min_element_bytes);
    return n;
  }
  std::size_t remaining() const { return size_ - pos_; }
  std::size_t pos() const { return pos_; }
  void skip(std::uint64_t n) {
    need(n);
    pos_ += static_cast<std::size_t>(n);
  }
  const std::uint8_t* here() const { return data_ + pos_; }

  void need(std::uint64_t n) const {
    if (n > remaining())
      throw Error(Errc::TruncatedStream, "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                                             ", " + std::to_string(remaining()) + " left");
  }

 private:
  std::uint64_t uint(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

void write_env(Writer& w, const EnvState& env) {
  w.u32(static_cast<std::uint32_t>(env.size()));
  for (const auto& [name, e] : env) {
    w.str(name);
    w.u8(e.mask);
    if (e.has(kPos)) w.vec3(e.pos);
    if (e.has(kRot)) {
      w.f64(e.rot.w());
      w.f64(e.rot.x());
      w.f64(e.rot.y());
      w.f64(e.rot.z());
    }
    if (e.has(kLinVel)) w.vec3(e.lin_vel);
    if (e.has(kAngVel)) w.vec3(e.ang_vel);
    if (e.has(kDofPos)) w.vec(e.dof_pos);
    if (e.has(kDofVel)) w.vec(e.dof_vel);
    if (e.has(kDofTarget)) w.vec(e.dof_target);
  }
}

EnvState read_env(Reader& r) {
  EnvState env;
  const std::uint32_t n = r.count(5);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    EntityState e;
    e.mask = r.u8();
    if (e.mask & ~kAllFields) throw Error(Errc::TruncatedStream, "invalid field mask for '" + name + "'");
    if (e.has(kPos)) e.pos = r.vec3();
    if (e.has(kRot)) {
      const double w = r.f64(), x = r.f64(), y = r.f64(), z = r.f64();
      e.rot = quat_wxyz(w, x, y, z);
    }
    if (e.has(kLinVel)) e.lin_vel = r.vec3();
    if (e.has(kAngVel)) e.ang_vel = r.vec3();
    if (e.has(kDofPos)) e.dof_pos = r.vec();
    if (e.has(kDofVel)) e.dof_vel = r.vec();
    if (e.has(kDofTarget)) e.dof_target = r.vec();
    env.emplace(std::move(name), std::move(e));
  }
  return env;
}

const EnvState& only_env(const SceneState& s, const char* what) {
  if (s.envs.size() != 1)
    throw Error(Errc::InvalidArgument, std::string(what) + " must hold exactly one env, has " +
                                           std::to_string(s.envs.size()));
  return s.envs[0];
}

void section(Writer& out, std::uint32_t tag, Writer& payload) {
  out.u32(tag);
  out.u64(payload.bytes().size());
  out.raw(payload.bytes());
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
  boost::crc_32_type crc;
  crc.process_bytes(data, n);
  return crc.checksum();
}

}  // namespace

Bytes serialize_trajectory(const Trajectory& t) {
  if (t.states && t.states->size() != t.actions.size())
    throw Error(Errc::InvalidArgument, "trajectory has " + std::to_string(t.actions.size()) + " actions but " +
                                           std::to_string(t.states->size()) + " states");
  Writer out;
  for (char c : std::string_view("RVT1")) out.u8(static_cast<std::uint8_t>(c));
  out.u16(kRvtMajor);
  out.u16(kRvtMinor);

  Writer head;
  head.str(t.scenario_name);
  head.u8(!t.success ? 0 : (*t.success ? 2 : 1));
  head.u32(static_cast<std::uint32_t>(t.extras.size()));
  for (const auto& [k, v] : t.extras) {
    head.str(k);
    head.str(v);
  }
  section(out, kHead, head);

  Writer init;
  write_env(init, only_env(t.init_state, "init_state"));
  section(out, kInit, init);

  Writer acts;
  acts.u32(static_cast<std::uint32_t>(t.actions.size()));
  for (const auto& a : t.actions) {
    acts.u32(static_cast<std::uint32_t>(a.dof_targets.size()));
    for (const auto& [robot, q] : a.dof_targets) {
      acts.str(robot);
      acts.vec(q);
    }
  }
  section(out, kActs, acts);

  if (t.states) {
    Writer stat;
    stat.u32(static_cast<std::uint32_t>(t.states->size()));
    for (const auto& s : *t.states) write_env(stat, only_env(s, "stored state"));
    section(out, kStat, stat);
  }

  out.u32(crc32(out.bytes().data(), out.bytes().size()));
  return std::move(out.bytes());
}

Trajectory deserialize_trajectory(const Bytes& bytes) {
  Reader r(bytes.data(), bytes.size());
  r.need(4);
  if (std::memcmp(bytes.data(), "RVT1", 4) != 0) throw Error(Errc::BadMagic, "not an RVT1 stream");
  r.skip(4);
  const std::uint16_t major = r.u16();
  const std::uint16_t minor = r.u16();
  if (major != kRvtMajor)
    throw Error(Errc::VersionMismatch, "RVT1 major version " + std::to_string(major) + "." + std::to_string(minor) +
                                           " not supported (reader is " + std::to_string(kRvtMajor) + ")");
  if (r.remaining() < 4) throw Error(Errc::TruncatedStream, "missing checksum");
  const std::size_t body_end = bytes.size() - 4;

  // Framing first, so a damaged length header reads as truncation; then the
  // checksum; payloads are decoded last.
  struct Section {
    std::uint32_t tag;
    const std::uint8_t* data;
    std::size_t len;
  };
  std::vector<Section> sections;
  while (r.pos() < body_end) {
    if (body_end - r.pos() < 12) throw Error(Errc::TruncatedStream, "partial section header");
    const std::uint32_t tag = r.u32();
    const std::uint64_t len = r.u64();
    if (len > body_end - r.pos())
      throw Error(Errc::TruncatedStream, "section length " + std::to_string(len) + " exceeds stream");
    sections.push_back({tag, r.here(), static_cast<std::size_t>(len)});
    r.skip(len);
  }
  const std::uint32_t stored = Reader(bytes.data() + body_end, 4).u32();
  if (stored != crc32(bytes.data(), body_end)) throw Error(Errc::ChecksumFailure, "CRC32 mismatch");

  Trajectory t;
  bool seen_head = false, seen_init = false, seen_acts = false;
  for (const auto& sec : sections) {
    Reader s(sec.data, sec.len);
    if (sec.tag == kHead) {
      t.scenario_name = s.str();
      const std::uint8_t success = s.u8();
      if (success > 2) throw Error(Errc::TruncatedStream, "invalid success flag");
      if (success) t.success = success == 2;
      const std::uint32_t n = s.count(8);
      for (std::uint32_t i = 0; i < n; ++i) {
        std::string k = s.str();
        t.extras[k] = s.str();
      }
      seen_head = true;
    } else if (sec.tag == kInit) {
      t.init_state = single(read_env(s));
      seen_init = true;
    } else if (sec.tag == kActs) {
      const std::uint32_t n = s.count(4);
      t.actions.resize(n);
      for (auto& a : t.actions) {
        const std::uint32_t m = s.count(8);
        for (std::uint32_t j = 0; j < m; ++j) {
          std::string robot = s.str();
          a.dof_targets[robot] = s.vec();
        }
      }
      seen_acts = true;
    } else if (sec.tag == kStat) {
      const std::uint32_t n = s.count(4);
      std::vector<SceneState> states;
      states.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) states.push_back(single(read_env(s)));
      t.states = std::move(states);
    } else {
      continue;  // sections added by later minor versions
    }
    if (s.remaining() != 0) throw Error(Errc::TruncatedStream, "section has trailing bytes");
  }
  if (!seen_head || !seen_init || !seen_acts) throw Error(Errc::TruncatedStream, "missing required section");
  if (t.states && t.states->size() != t.actions.size())
    throw Error(Errc::TruncatedStream, "states and actions differ in length");
  return t;
}

void write_trajectory_file(const std::filesystem::path& path, const Trajectory& t) {
  const Bytes b = serialize_trajectory(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw Error(Errc::Io, "write failed for '" + path.string() + "'");
}

Trajectory read_trajectory_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read '" + path.string() + "'");
  Bytes b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_trajectory(b);
}

}  // namespace metasim::state
