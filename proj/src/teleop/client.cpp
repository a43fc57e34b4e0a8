#include "metasim/teleop/client.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "metasim/common/error.hpp"

namespace metasim::teleop {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct TeleopClient::Impl {
  net::io_context ioc;
  std::optional<websocket::stream<beast::tcp_stream>> ws;
  beast::flat_buffer buf;
  std::deque<std::string> out;
  std::thread io_thread;
  std::optional<net::executor_work_guard<net::io_context::executor_type>> work;

  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> inbox;
  bool is_open = false;
  bool closing = false;

  void read() {
    ws->async_read(buf, [this](beast::error_code ec, std::size_t) {
      if (ec) {
        std::lock_guard lock(mu);
        is_open = false;
        cv.notify_all();
        return;
      }
      {
        std::lock_guard lock(mu);
        inbox.push_back(beast::buffers_to_string(buf.data()));
        cv.notify_all();
      }
      buf.consume(buf.size());
      read();
    });
  }

  void write() {
    ws->async_write(net::buffer(out.front()), [this](beast::error_code ec, std::size_t) {
      if (ec) {
        out.clear();
        return;
      }
      out.pop_front();
      if (!out.empty()) write();
      else if (closing) close_ws();
    });
  }

  void close_ws() {
    ws->async_close(websocket::close_code::normal, [](beast::error_code) {});
  }

  void shutdown() {
    work.reset();
    if (io_thread.joinable()) io_thread.join();
  }
};

TeleopClient::TeleopClient() : impl_(std::make_unique<Impl>()) {}

TeleopClient::~TeleopClient() { close(true); }

void TeleopClient::connect(const std::string& host, unsigned short port, const std::string& target) {
  auto& d = *impl_;
  if (d.io_thread.joinable()) throw Error(Errc::InvalidArgument, "client already connected");
  try {
    tcp::resolver resolver(d.ioc);
    d.ws.emplace(d.ioc);
    beast::get_lowest_layer(*d.ws).connect(resolver.resolve(host, std::to_string(port)));
    d.ws->set_option(websocket::stream_base::timeout::suggested(beast::role_type::client));
    d.ws->text(true);
    d.ws->handshake(host + ":" + std::to_string(port), target);
  } catch (const boost::system::system_error& e) {
    d.ws.reset();
    throw Error(Errc::Io, "cannot connect to ws://" + host + ":" + std::to_string(port) + target + ": " +
                              e.code().message());
  }
  d.is_open = true;
  d.work.emplace(d.ioc.get_executor());
  d.read();
  d.io_thread = std::thread([&d] { d.ioc.run(); });
}

void TeleopClient::send(const std::string& frame) {
  auto& d = *impl_;
  if (!open()) throw Error(Errc::Io, "connection is closed");
  net::post(d.ioc, [&d, frame] {
    d.out.push_back(frame);
    if (d.out.size() == 1) d.write();
  });
}

std::optional<std::string> TeleopClient::receive(std::chrono::milliseconds timeout) {
  auto& d = *impl_;
  std::unique_lock lock(d.mu);
  if (!d.cv.wait_for(lock, timeout, [&] { return !d.inbox.empty() || !d.is_open; })) return std::nullopt;
  if (d.inbox.empty()) return std::nullopt;
  std::string s = std::move(d.inbox.front());
  d.inbox.pop_front();
  return s;
}

std::optional<std::string> TeleopClient::receive_kind(const std::string& kind, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    auto f = receive(left);
    if (!f) return std::nullopt;
    const auto sp = f->find(' ');
    if (f->substr(0, sp) == kind) return f;
  }
}

void TeleopClient::close(bool abrupt) {
  auto& d = *impl_;
  if (!d.io_thread.joinable()) return;
  if (abrupt) {
    net::post(d.ioc, [&d] {
      beast::error_code ec;
      beast::get_lowest_layer(*d.ws).socket().close(ec);
    });
  } else {
    net::post(d.ioc, [&d] {
      d.closing = true;
      if (d.out.empty()) d.close_ws();
    });
    std::unique_lock lock(d.mu);
    d.cv.wait_for(lock, std::chrono::seconds(2), [&] { return !d.is_open; });
  }
  d.work.reset();
  d.ioc.stop();
  d.io_thread.join();
  std::lock_guard lock(d.mu);
  d.is_open = false;
}

bool TeleopClient::open() const {
  std::lock_guard lock(impl_->mu);
  return impl_->is_open;
}

std::string http_get(const std::string& host, unsigned short port, const std::string& target) {
  try {
    net::io_context ioc;
    tcp::resolver resolver(ioc);
    beast::tcp_stream stream(ioc);
    stream.connect(resolver.resolve(host, std::to_string(port)));
    http::request<http::empty_body> req{http::verb::get, target, 11};
    req.set(http::field::host, host);
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(stream, buf, res);
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_both, ec);
    if (res.result() != http::status::ok)
      throw Error(Errc::Io, "GET " + target + " returned " + std::to_string(res.result_int()));
    return res.body();
  } catch (const boost::system::system_error& e) {
    throw Error(Errc::Io, "GET http://" + host + ":" + std::to_string(port) + target + ": " + e.code().message());
  }
}

}  // namespace metasim::teleop
