#include "safeteleop/teleop_server.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cmath>
#include <deque>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace safeteleop {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

class Hub;

/// One websocket client. All members are touched on the network thread only.
class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, Hub& hub) : ws_(std::move(socket)), hub_(hub) {}

  void accept(http::request<http::string_body> req);
  void send(std::shared_ptr<const std::string> message);

 private:
  void read_next();
  void write_next();

  websocket::stream<beast::tcp_stream> ws_;
  Hub& hub_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
};

/// Routes between the network side and the tick loop.
class Hub {
 public:
  explicit Hub(std::string scene_json) : scene_json_(std::move(scene_json)) {}

  void join(const std::shared_ptr<WsSession>& s) { sessions_.insert(s); }
  void leave(const std::shared_ptr<WsSession>& s) { sessions_.erase(s); }
  void broadcast(const std::shared_ptr<const std::string>& msg) {
    for (const auto& s : sessions_) s->send(msg);
  }
  const std::string& scene_json() const { return scene_json_; }

  // Inbound mailbox; the tick loop drains it.
  void deliver(ClientMessage m) {
    std::lock_guard lock(mailbox_mutex_);
    mailbox_.push_back(std::move(m));
  }
  std::vector<ClientMessage> drain() {
    std::lock_guard lock(mailbox_mutex_);
    return std::exchange(mailbox_, {});
  }

 private:
  std::string scene_json_;
  std::set<std::shared_ptr<WsSession>> sessions_;
  std::mutex mailbox_mutex_;
  std::vector<ClientMessage> mailbox_;
};

void WsSession::accept(http::request<http::string_body> req) {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    self->hub_.join(self);
    self->send(std::make_shared<const std::string>(self->hub_.scene_json()));
    self->read_next();
  });
}

void WsSession::read_next() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->hub_.leave(self);
      return;
    }
    const std::string text = beast::buffers_to_string(self->buffer_.data());
    self->buffer_.consume(self->buffer_.size());
    std::string why;
    if (auto msg = parse_client_message(text, &why)) {
      self->hub_.deliver(std::move(*msg));
    } else {
      std::cerr << "warning: ignoring client message (" << why << "): " << text.substr(0, 200) << '\n';
    }
    self->read_next();
  });
}

void WsSession::send(std::shared_ptr<const std::string> message) {
  queue_.push_back(std::move(message));
  if (queue_.size() == 1) write_next();
}

void WsSession::write_next() {
  ws_.text(true);
  ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->hub_.leave(self);
      return;
    }
    self->queue_.pop_front();
    if (!self->queue_.empty()) self->write_next();
  });
}

/// Plain HTTP connection: upgrades /ws, answers GET /scene, 404 otherwise.
class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, Hub& hub) : stream_(std::move(socket)), hub_(hub) {}

  void run() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (!ec) self->handle();
    });
  }

 private:
  void handle() {
    if (websocket::is_upgrade(req_) && req_.target() == "/ws") {
      stream_.expires_never();
      std::make_shared<WsSession>(stream_.release_socket(), hub_)->accept(std::move(req_));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(req_.version());
    res->keep_alive(false);
    if (req_.method() == http::verb::get && req_.target() == "/scene") {
      res->result(http::status::ok);
      res->set(http::field::content_type, "application/json");
      res->body() = hub_.scene_json();
    } else {
      res->result(http::status::not_found);
      res->set(http::field::content_type, "text/plain");
      res->body() = "not found\n";
    }
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  Hub& hub_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace

struct TeleopServer::Impl {
  Impl(Scenario scenario, ServeOptions opts)
      : options(opts),
        session(std::move(scenario), [&] {
          SessionOptions s = opts.session;
          s.slice_every = std::max(1, static_cast<int>(std::lround(opts.tick_hz / opts.slice_hz)));
          return s;
        }()),
        hub(session.scene_message().dump()),
        acceptor(ioc) {
    if (!(opts.tick_hz > 0.0) || !(opts.slice_hz > 0.0)) throw std::invalid_argument("rates must be positive");
    beast::error_code ec;
    const tcp::endpoint ep(net::ip::make_address("0.0.0.0"), opts.port);
    acceptor.open(ep.protocol(), ec);
    if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(ep, ec);
    if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw std::runtime_error("cannot listen on port " + std::to_string(opts.port) + ": " + ec.message());
  }

  void accept_next() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      std::make_shared<HttpSession>(std::move(socket), hub)->run();
      accept_next();
    });
  }

  void tick_loop() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / options.tick_hz));
    auto next = clock::now();
    while (!stopping.load()) {
      TickOutput out;
      {
        std::lock_guard lock(session_mutex);
        for (const ClientMessage& m : hub.drain()) session.post(m);
        out = session.tick();
        record = session.record();
      }
      auto telemetry = std::make_shared<const std::string>(out.telemetry.dump());
      std::shared_ptr<const std::string> slice;
      if (out.map_slice) slice = std::make_shared<const std::string>(out.map_slice->dump());
      net::post(ioc, [this, telemetry, slice] {
        hub.broadcast(telemetry);
        if (slice) hub.broadcast(slice);
      });
      next += period;
      std::unique_lock lock(stop_mutex);
      stop_cv.wait_until(lock, next, [this] { return stopping.load(); });
    }
  }

  ServeOptions options;
  TeleopSession session;
  Hub hub;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::thread net_thread;
  std::thread tick_thread;
  std::atomic<bool> stopping{false};
  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  mutable std::mutex session_mutex;
  TrialLog record;
};

TeleopServer::TeleopServer(Scenario scenario, ServeOptions options)
    : impl_(std::make_unique<Impl>(std::move(scenario), options)) {}

TeleopServer::~TeleopServer() { stop(); }

unsigned short TeleopServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void TeleopServer::start() {
  Impl& s = *impl_;
  s.accept_next();
  s.net_thread = std::thread([&s] {
    auto guard = net::make_work_guard(s.ioc);
    s.ioc.run();
  });
  s.tick_thread = std::thread([&s] { s.tick_loop(); });
}

void TeleopServer::wait() {
  Impl& s = *impl_;
  std::unique_lock lock(s.stop_mutex);
  s.stop_cv.wait(lock, [&s] { return s.stopping.load(); });
}

void TeleopServer::stop() {
  Impl& s = *impl_;
  {
    std::lock_guard lock(s.stop_mutex);
    s.stopping = true;
  }
  s.stop_cv.notify_all();
  if (s.tick_thread.joinable()) s.tick_thread.join();
  s.ioc.stop();
  if (s.net_thread.joinable()) s.net_thread.join();
}

TrialLog TeleopServer::session_record() const {
  std::lock_guard lock(impl_->session_mutex);
  return impl_->record;
}

std::int64_t TeleopServer::ticks() const {
  std::lock_guard lock(impl_->session_mutex);
  return static_cast<std::int64_t>(impl_->record.records.size());
}

}  // namespace safeteleop
