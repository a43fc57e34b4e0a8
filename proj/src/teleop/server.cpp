#include "metasim/teleop/server.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "metasim/common/error.hpp"
#include "metasim/common/numfmt.hpp"

namespace metasim::teleop {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;

unsigned short default_port() {
  if (const char* v = std::getenv("METASIM_TELEOP_PORT")) {
    const auto p = parse_int(trim(v));
    if (p && *p > 0 && *p < 65536) return static_cast<unsigned short>(*p);
  }
  return 8571;
}

namespace {

class WsConn;

/// Callbacks the connections make into the server.
struct Hub {
  virtual ~Hub() = default;
  virtual void on_frame(const std::shared_ptr<WsConn>& conn, const std::string& text) = 0;
  virtual void on_disconnect(const WsConn* conn) = 0;
  virtual std::string index_page() const = 0;
};

class WsConn : public std::enable_shared_from_this<WsConn> {
 public:
  WsConn(tcp::socket socket, Hub* hub) : ws_(std::move(socket)), hub_(hub) {}

  void start(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.text(true);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->read();
    });
  }

  /// Thread-safe; frames go out in call order.
  void send(std::string msg) {
    net::post(ws_.get_executor(), [self = shared_from_this(), m = std::move(msg)]() mutable {
      if (self->closed_) return;
      self->out_.push_back(std::move(m));
      if (self->out_.size() == 1) self->write();
    });
  }

  /// Closes once everything queued has been written.
  void close_after_writes() {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      self->closing_ = true;
      if (self->out_.empty()) self->do_close();
    });
  }

  void abort() {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      beast::error_code ec;
      beast::get_lowest_layer(self->ws_).socket().close(ec);
    });
  }

 private:
  void read() {
    ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        self->hub_->on_disconnect(self.get());
        return;
      }
      const std::string text = beast::buffers_to_string(self->buf_.data());
      self->buf_.consume(self->buf_.size());
      self->hub_->on_frame(self, text);
      self->read();
    });
  }

  void write() {
    ws_.async_write(net::buffer(out_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->out_.clear();
        return;
      }
      self->out_.pop_front();
      if (!self->out_.empty()) self->write();
      else if (self->closing_) self->do_close();
    });
  }

  void do_close() {
    if (closed_) return;
    closed_ = true;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buf_;
  std::deque<std::string> out_;
  Hub* hub_;
  bool closing_ = false;
  bool closed_ = false;
};

class HttpConn : public std::enable_shared_from_this<HttpConn> {
 public:
  HttpConn(tcp::socket socket, Hub* hub) : stream_(std::move(socket)), hub_(hub) {}

  void start() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buf_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (!ec) self->route();
    });
  }

 private:
  void route() {
    stream_.expires_never();
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == "/teleop") {
        std::make_shared<WsConn>(stream_.release_socket(), hub_)->start(std::move(req_));
        return;
      }
      respond(http::status::not_found, "no such endpoint\n", "text/plain");
      return;
    }
    if (req_.method() != http::verb::get) {
      respond(http::status::method_not_allowed, "GET only\n", "text/plain");
    } else if (req_.target() == "/" || req_.target() == "/index.html") {
      respond(http::status::ok, hub_->index_page(), "text/html; charset=utf-8");
    } else {
      respond(http::status::not_found, "not found\n", "text/plain");
    }
  }

  void respond(http::status status, std::string body, const char* type) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::content_type, type);
    res->keep_alive(false);
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ec;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buf_;
  http::request<http::string_body> req_;
  Hub* hub_;
};

std::string err_frame(const Error& e) {
  std::string_view msg = e.what();
  const std::string_view name = errc_name(e.code());
  if (msg.substr(0, name.size()) == name && msg.substr(name.size(), 2) == ": ") msg.remove_prefix(name.size() + 2);
  return "ERR " + std::string(name) + " " + std::string(msg);
}

std::string make_token() {
  std::random_device rd;
  std::ostringstream os;
  os << std::hex;
  for (int i = 0; i < 4; ++i) os << ((rd() & 0xffff) | 0x10000);
  std::string s = os.str();
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i % 5 != 0) out += s[i];  // drop the leading 1 of each group
  return out;
}

}  // namespace

struct TeleopServer::Impl final : Hub {
  Impl(env::Env& e, ServerOptions o)
      : env(e), opts(std::move(o)), queue(static_cast<std::size_t>(std::max(1.0, opts.session.rate))) {}

  void on_frame(const std::shared_ptr<WsConn>& conn, const std::string& text) override {
    ClientMessage m;
    try {
      m = decode_client_message(text);
    } catch (const Error& e) {
      std::lock_guard lock(mu);
      ++stats.malformed;
      conn->send(err_frame(e));
      return;
    }
    std::lock_guard lock(mu);
    const auto cur = active.lock();
    switch (m.kind) {
      case ControlKind::Hello: {
        if (cur && cur != conn) {
          conn->send("ERR InvalidArgument another client holds the session");
          return;
        }
        const bool resuming = had_client && cur != conn;
        if (done || closing) {
          conn->send("ERR SessionClosed session is closed");
          return;
        }
        if ((resuming && m.token != token) || (!resuming && !m.token.empty() && m.token != token)) {
          conn->send("ERR InvalidArgument unknown session token");
          return;
        }
        active = conn;
        had_client = true;
        paused = false;
        cv.notify_all();
        const Quat& q = ee_rot;
        conn->send("SESSION " + token + " " + std::to_string(queue.last_seq()) + " " + format_double(q.w()) + " " +
                   format_double(q.x()) + " " + format_double(q.y()) + " " + format_double(q.z()));
        return;
      }
      case ControlKind::Cmd: {
        if (cur != conn) {
          conn->send("ERR InvalidArgument send HELLO first");
          return;
        }
        if (closing || done) {
          conn->send("ERR SessionClosed session is closing");
          return;
        }
        try {
          queue.push(m.cmd);
        } catch (const Error& e) {
          ++stats.stale;
          conn->send(err_frame(e));
          return;
        }
        ++stats.received;
        arrivals[m.cmd.seq] = Clock::now();
        stats.max_queue = std::max(stats.max_queue, queue.size());
        cv.notify_all();
        return;
      }
      case ControlKind::Bye:
        if (cur == conn) {
          closing = true;
          cv.notify_all();
        }
        return;
    }
  }

  void on_disconnect(const WsConn* conn) override {
    std::lock_guard lock(mu);
    const auto cur = active.lock();
    if (!cur || cur.get() == conn) {
      active.reset();
      if (!closing && !done) paused = true;
    }
  }

  std::string index_page() const override {
    if (!opts.web_root.empty()) {
      std::ifstream in(opts.web_root / "index.html", std::ios::binary);
      if (in) return std::string(std::istreambuf_iterator<char>(in), {});
    }
    return builtin_index_page();
  }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      std::make_shared<HttpConn>(std::move(socket), this)->start();
      accept();
    });
  }

  /// Time is cut into slots of 1/rate. A command is applied as soon as it
  /// is queued, unless its slot has already been used, in which case it
  /// waits for the next slot. The slots stay aligned to the session start,
  /// so a client sending at the same rate never builds up a backlog.
  void tick_loop() {
    const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / opts.session.rate));
    const auto t0 = Clock::now();
    std::int64_t slot = 0;
    auto finished = [&] { return closing && queue.size() == 0; };
    while (true) {
      {
        std::unique_lock lock(mu);
        cv.wait_until(lock, t0 + slot * period, finished);
        cv.wait(lock, [&] { return finished() || (queue.size() > 0 && (!paused || closing)); });
        if (finished()) break;
      }
      if (auto cmd = queue.pop()) apply(*cmd, t0);
      slot = (Clock::now() - t0) / period + 1;
    }
    finish();
  }

  void apply(const TeleopCommand& cmd, Clock::time_point t0) {
    std::string frame;
    std::vector<std::string> warnings;
    std::string error;
    try {
      const auto r = session->tick(cmd);
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
      frame = encode_state(env.model(), r.observation.states.envs.at(0), cmd.seq, static_cast<std::uint64_t>(ms));
      warnings = session->take_warnings();
    } catch (const Error& e) {
      error = err_frame(e);
    }
    std::lock_guard lock(mu);
    if (error.empty()) {
      ++stats.applied;
      ee_rot = session->ee_target().rot;
    }
    if (auto it = arrivals.find(cmd.seq); it != arrivals.end()) {
      stats.max_latency_ms =
          std::max(stats.max_latency_ms, std::chrono::duration<double, std::milli>(Clock::now() - it->second).count());
      arrivals.erase(arrivals.begin(), std::next(it));
    }
    if (auto conn = active.lock()) {
      if (!error.empty()) conn->send(error);
      if (!frame.empty()) conn->send(frame);
      for (auto& w : warnings) conn->send("WARN " + w);
    }
  }

  void finish() {
    state::Trajectory t = session->close();
    std::string failure;
    if (opts.record) {
      try {
        state::write_trajectory_file(*opts.record, t);
      } catch (const Error& e) {
        failure = e.what();
      }
    }
    std::lock_guard lock(mu);
    stats.coalesced = queue.coalesced();
    if (auto conn = active.lock()) {
      if (!failure.empty()) conn->send("ERR Io " + failure);
      conn->send("BYE " + std::to_string(t.actions.size()));
      conn->close_after_writes();
    }
    if (!failure.empty()) std::cerr << "WARN: recording not written: " << failure << "\n";
    result = std::move(t);
    done = true;
    cv.notify_all();
  }

  env::Env& env;
  ServerOptions opts;
  CommandQueue queue;
  std::unique_ptr<TeleopSession> session;
  std::string token = make_token();
  Quat ee_rot = Quat::Identity();

  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  unsigned short bound_port = 0;
  std::thread io_thread;
  std::thread tick_thread;
  bool io_finished = false;

  mutable std::mutex mu;
  std::condition_variable cv;
  std::weak_ptr<WsConn> active;
  std::map<std::uint64_t, Clock::time_point> arrivals;
  bool had_client = false;
  bool paused = false;
  bool closing = false;
  bool done = false;
  bool started = false;
  bool shut = false;
  std::optional<state::Trajectory> result;
  ServerStats stats;
};

TeleopServer::TeleopServer(env::Env& env, ServerOptions opts) : impl_(std::make_unique<Impl>(env, std::move(opts))) {
  impl_->session = std::make_unique<TeleopSession>(env, impl_->opts.session);
  impl_->ee_rot = impl_->session->ee_target().rot;
}

TeleopServer::~TeleopServer() { stop(); }

void TeleopServer::start() {
  auto& d = *impl_;
  if (d.started) throw Error(Errc::InvalidArgument, "server already started");
  try {
    const tcp::endpoint ep(net::ip::make_address(d.opts.address), d.opts.port);
    d.acceptor.open(ep.protocol());
    d.acceptor.set_option(net::socket_base::reuse_address(true));
    d.acceptor.bind(ep);
    d.acceptor.listen();
    d.bound_port = d.acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw Error(Errc::Io, "cannot listen on " + d.opts.address + ":" + std::to_string(d.opts.port) + ": " +
                              e.code().message());
  }
  d.accept();
  d.started = true;
  d.io_thread = std::thread([&d] {
    d.ioc.run();
    std::lock_guard lock(d.mu);
    d.io_finished = true;
    d.cv.notify_all();
  });
  d.tick_thread = std::thread([&d] { d.tick_loop(); });
}

unsigned short TeleopServer::port() const { return impl_->bound_port; }
const std::string& TeleopServer::token() const { return impl_->token; }

std::optional<state::Trajectory> TeleopServer::wait(std::optional<std::chrono::milliseconds> timeout) {
  auto& d = *impl_;
  std::unique_lock lock(d.mu);
  if (timeout) {
    if (!d.cv.wait_for(lock, *timeout, [&] { return d.done; })) return std::nullopt;
  } else {
    d.cv.wait(lock, [&] { return d.done; });
  }
  return d.result;
}

void TeleopServer::stop() {
  auto& d = *impl_;
  if (!d.started || d.shut) return;
  {
    std::lock_guard lock(d.mu);
    d.closing = true;
    d.cv.notify_all();
  }
  if (d.tick_thread.joinable()) d.tick_thread.join();
  net::post(d.ioc, [&d] {
    beast::error_code ec;
    d.acceptor.close(ec);
  });
  {
    // give the closing handshake a moment, then cut remaining connections
    std::unique_lock lock(d.mu);
    d.cv.wait_for(lock, std::chrono::seconds(1), [&] { return d.io_finished; });
  }
  d.ioc.stop();
  if (d.io_thread.joinable()) d.io_thread.join();
  d.shut = true;
}

ServerStats TeleopServer::stats() const {
  std::lock_guard lock(impl_->mu);
  ServerStats s = impl_->stats;
  s.coalesced = impl_->queue.coalesced();
  return s;
}

SessionStatus TeleopServer::status() const {
  std::lock_guard lock(impl_->mu);
  if (impl_->done) return SessionStatus::Closed;
  return impl_->paused ? SessionStatus::Paused : SessionStatus::Running;
}

}  // namespace metasim::teleop
