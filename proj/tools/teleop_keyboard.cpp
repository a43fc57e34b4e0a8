// Terminal teleop driver: arrows move +-X/+-Y, e/d +-Z, q/w a/s z/x rotate,
// space toggles the gripper, Ctrl-C or Ctrl-D ends the session.
#include <poll.h>
#include <termios.h>
#include <unistd.h>

#include <chrono>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "metasim/common/error.hpp"
#include "metasim/teleop/client.hpp"
#include "metasim/teleop/server.hpp"

using namespace metasim;
using namespace metasim::teleop;
using Clock = std::chrono::steady_clock;

namespace {

class RawTerminal {
 public:
  RawTerminal() {
    if (tcgetattr(STDIN_FILENO, &saved_) != 0) return;
    termios raw = saved_;
    raw.c_lflag &= ~(ICANON | ECHO | ISIG);
    raw.c_cc[VMIN] = 0;
    raw.c_cc[VTIME] = 0;
    ok_ = tcsetattr(STDIN_FILENO, TCSANOW, &raw) == 0;
  }
  ~RawTerminal() {
    if (ok_) tcsetattr(STDIN_FILENO, TCSANOW, &saved_);
  }
  bool ok() const { return ok_; }

 private:
  termios saved_{};
  bool ok_ = false;
};

std::string read_available() {
  std::string s;
  pollfd p{STDIN_FILENO, POLLIN, 0};
  while (poll(&p, 1, 0) > 0 && (p.revents & POLLIN)) {
    char buf[64];
    const auto n = ::read(STDIN_FILENO, buf, sizeof buf);
    if (n <= 0) break;
    s.append(buf, static_cast<std::size_t>(n));
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keyboard client for metasim teleop-serve", "teleop-keyboard"};
  std::string host = "127.0.0.1";
  unsigned short port = default_port();
  double rate = 50.0;
  int hold_ms = 150;
  app.add_option("--host", host)->capture_default_str();
  app.add_option("--port", port)->capture_default_str();
  app.add_option("--rate", rate, "Frames per second")->capture_default_str();
  app.add_option("--hold-ms", hold_ms, "A key counts as held this long after its last repeat")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  TeleopClient client;
  try {
    client.connect(host, port);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  client.send("HELLO");
  const auto hello = client.receive_kind("SESSION", std::chrono::seconds(3));
  if (!hello) {
    std::cerr << "error: no SESSION reply\n";
    return 1;
  }
  std::istringstream in(*hello);
  std::string kw, token;
  std::uint64_t last_seq = 0;
  double w = 1, x = 0, y = 0, z = 0;
  in >> kw >> token >> last_seq >> w >> x >> y >> z;
  KeyboardMapper mapper(Quat(w, x, y, z).normalized());
  std::cerr << "session " << token << "; arrows/e/d move, q/w a/s z/x rotate, space grips, Ctrl-C quits\r\n";

  RawTerminal term;
  if (!term.ok()) std::cerr << "WARN: stdin is not a terminal\n";

  std::map<KeyboardMapper::Key, Clock::time_point> seen;
  const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / rate));
  const auto t0 = Clock::now();
  auto next = t0;
  bool quit = false;
  while (!quit && client.open()) {
    const auto now = Clock::now();
    const std::string bytes = read_available();
    for (std::size_t i = 0; i < bytes.size();) {
      if (bytes[i] == 0x03 || bytes[i] == 0x04) {
        quit = true;
        break;
      }
      const std::size_t len = (bytes[i] == 0x1b && i + 2 < bytes.size() && bytes[i + 1] == '[') ? 3 : 1;
      if (auto k = KeyboardMapper::from_terminal(std::string_view(bytes).substr(i, len))) seen[*k] = now;
      i += len;
    }
    mapper.release_all();
    for (auto it = seen.begin(); it != seen.end();) {
      if (now - it->second > std::chrono::milliseconds(hold_ms)) {
        it = seen.erase(it);
      } else {
        mapper.press(it->first);
        ++it;
      }
    }
    // one toggle per press
    seen.erase(KeyboardMapper::Space);
    auto cmd = mapper.next(static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(now - t0).count()));
    cmd.seq += last_seq;
    client.send(encode_command(cmd));
    while (auto f = client.receive(std::chrono::milliseconds(0))) {
      if (frame_kind(*f) == "WARN" || frame_kind(*f) == "ERR") std::cerr << *f << "\r\n";
    }
    next += period;
    std::this_thread::sleep_until(next);
  }
  client.send("BYE");
  if (auto bye = client.receive_kind("BYE", std::chrono::seconds(5))) std::cerr << *bye << "\r\n";
  client.close();
  return 0;
}
