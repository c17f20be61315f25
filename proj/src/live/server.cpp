#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <condition_variable>
#include <csignal>
#include <future>
#include <map>

#include "fdm/live_service.hpp"

namespace fdm {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;

bool EventQueue::push(HandleEvent e) {
  std::lock_guard lock(mutex_);
  bool kept = true;
  if (items_.size() >= capacity_) {
    items_.pop_front();
    ++dropped_;
    kept = false;
  }
  items_.push_back(std::move(e));
  return kept;
}

std::vector<HandleEvent> EventQueue::drain() {
  std::lock_guard lock(mutex_);
  std::vector<HandleEvent> out(std::make_move_iterator(items_.begin()), std::make_move_iterator(items_.end()));
  items_.clear();
  return out;
}

class ServiceClient;

struct LiveService::Impl {
  Impl(SessionSetup setup, LiveOptions o)
      : opts(std::move(o)), session(std::move(setup)), queue(opts.queue_capacity), acceptor(ioc) {
    num_vertices = session.mesh().num_vertices();
    init = std::make_shared<const std::string>(session.init_message());
  }

  void accept();
  void sim_loop();
  void publish(std::shared_ptr<const std::string> frame, std::vector<Reply> replies);

  LiveOptions opts;
  LiveSession session;  // touched only by the simulation thread
  EventQueue queue;
  Index num_vertices = 0;
  std::shared_ptr<const std::string> init;

  asio::io_context ioc;
  tcp::acceptor acceptor;
  std::map<std::uint64_t, std::shared_ptr<ServiceClient>> clients;  // io thread only
  std::uint64_t next_client = 1;

  std::thread io_thread;
  std::thread sim_thread;
  std::atomic<bool> running{false};
  std::atomic<Index> active{0};

  mutable std::mutex stats_mutex;
  ServiceStats stats;
  std::atomic<std::uint64_t> dropped_frames{0};

  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool stopped = false;
};

namespace {

struct Outgoing {
  std::shared_ptr<const std::string> bytes;
  bool binary;
};

}  // namespace

class ServiceClient : public std::enable_shared_from_this<ServiceClient> {
 public:
  ServiceClient(tcp::socket socket, LiveService::Impl& service, std::uint64_t id)
      : ws_(std::move(socket)), service_(service), id_(id) {}

  void run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.set_option(websocket::stream_base::decorator([](websocket::response_type& res) {
      res.set("X-Fdm-Protocol", std::to_string(kProtocolVersion));
    }));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void send(std::shared_ptr<const std::string> bytes, bool binary) {
    if (!open_) return;
    if (binary && frames_pending_ >= service_.opts.client_backlog) {
      ++service_.dropped_frames;
      return;
    }
    if (binary) ++frames_pending_;
    outbox_.push_back({std::move(bytes), binary});
    if (!writing_) write_next();
  }

  void send_text(const std::string& text) { send(std::make_shared<const std::string>(text), false); }

  void close() {
    if (!open_) return;
    open_ = false;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).close();
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) {
      spdlog::debug("client {} handshake failed: {}", id_, ec.message());
      return;
    }
    open_ = true;
    service_.clients[id_] = shared_from_this();
    spdlog::info("client {} connected", id_);
    send(service_.init, false);
    read();
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      drop(ec);
      return;
    }
    if (!ws_.got_text()) {
      buffer_.consume(buffer_.size());
      send_text(nlohmann::json{{"type", "error"}, {"message", "binary client messages are not supported"}}.dump());
      read();
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    try {
      ClientMessage msg = parse_client_message(text, service_.num_vertices);
      if (msg.ping) {
        nlohmann::json pong{{"type", "pong"}};
        if (!msg.echo.is_null()) pong["id"] = msg.echo;
        send_text(pong.dump());
      } else {
        msg.event.client = id_;
        if (!service_.queue.push(msg.event)) spdlog::warn("input queue full, dropped the oldest event");
      }
    } catch (const ProtocolError& e) {
      send_text(nlohmann::json{{"type", "error"}, {"message", e.what()}}.dump());
    }
    read();
  }

  void write_next() {
    if (outbox_.empty() || !open_) {
      writing_ = false;
      return;
    }
    writing_ = true;
    const Outgoing& next = outbox_.front();
    ws_.binary(next.binary);
    ws_.async_write(asio::buffer(*next.bytes), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_write(ec);
    });
  }

  void on_write(beast::error_code ec) {
    if (outbox_.front().binary) --frames_pending_;
    outbox_.pop_front();
    if (ec) {
      writing_ = false;
      drop(ec);
      return;
    }
    write_next();
  }

  void drop(beast::error_code ec) {
    if (ec != websocket::error::closed && ec != asio::error::operation_aborted && ec != asio::error::eof)
      spdlog::debug("client {} dropped: {}", id_, ec.message());
    spdlog::info("client {} disconnected", id_);
    open_ = false;
    service_.clients.erase(id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  LiveService::Impl& service_;
  std::uint64_t id_;
  beast::flat_buffer buffer_;
  std::deque<Outgoing> outbox_;
  std::size_t frames_pending_ = 0;
  bool writing_ = false;
  bool open_ = false;
};

void LiveService::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (ec != asio::error::operation_aborted) spdlog::warn("accept failed: {}", ec.message());
      if (!acceptor.is_open()) return;
    } else {
      beast::error_code opt_ec;
      socket.set_option(tcp::no_delay(true), opt_ec);
      if (opts.send_buffer > 0)
        socket.set_option(asio::socket_base::send_buffer_size(static_cast<int>(opts.send_buffer)), opt_ec);
      std::make_shared<ServiceClient>(std::move(socket), *this, next_client++)->run();
    }
    accept();
  });
}

void LiveService::Impl::publish(std::shared_ptr<const std::string> frame, std::vector<Reply> replies) {
  asio::post(ioc, [this, frame = std::move(frame), replies = std::move(replies)] {
    // Replies first so acks precede the frame that reflects them.
    for (const auto& r : replies) {
      auto it = clients.find(r.client);
      if (it != clients.end()) it->second->send_text(r.text);
    }
    for (auto& [id, client] : clients) client->send(frame, true);
  });
}

void LiveService::Impl::sim_loop() {
  const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / opts.frame_rate));
  auto next = Clock::now() + period;
  std::optional<Clock::time_point> last;
  while (running) {
    std::this_thread::sleep_until(next);
    if (!running) break;
    const auto now = Clock::now();
    std::vector<Reply> replies;
    std::shared_ptr<const std::string> frame;
    try {
      frame = std::make_shared<const std::string>(encode_frame(session.tick(queue.drain(), replies)));
    } catch (const Error& e) {
      spdlog::error("simulation step failed: {}", e.what());
      replies.push_back({0, nlohmann::json{{"type", "error"}, {"message", e.what()}}.dump()});
    }
    active = session.active_component();
    {
      std::lock_guard lock(stats_mutex);
      if (last) stats.step_intervals.push_back(std::chrono::duration<double>(now - *last).count());
      if (frame) ++stats.frames;
    }
    last = now;
    if (frame) {
      publish(std::move(frame), std::move(replies));
    } else {
      asio::post(ioc, [this, replies = std::move(replies)] {
        for (auto& [id, client] : clients) client->send_text(replies.back().text);
      });
    }
    // Fall back onto the tick grid instead of running the missed ticks.
    next += period;
    const auto after = Clock::now();
    while (next <= after) {
      next += period;
      std::lock_guard lock(stats_mutex);
      ++stats.skipped_ticks;
    }
  }
}

LiveService::LiveService(SessionSetup setup, LiveOptions opts)
    : impl_(std::make_unique<Impl>(std::move(setup), std::move(opts))) {
  if (!(impl_->opts.frame_rate > 0.0)) throw InputError("frame_rate must be positive");
  if (impl_->opts.queue_capacity == 0) throw InputError("queue_capacity must be positive");
}

LiveService::~LiveService() { stop(); }

unsigned short LiveService::start() {
  Impl& s = *impl_;
  if (s.running) throw InputError("service already running");
  beast::error_code ec;
  const auto address = asio::ip::make_address(s.opts.host, ec);
  if (ec) throw InputError("invalid bind address " + s.opts.host + ": " + ec.message());
  const tcp::endpoint endpoint(address, s.opts.port);
  s.acceptor.open(endpoint.protocol(), ec);
  if (!ec) s.acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) s.acceptor.bind(endpoint, ec);
  if (!ec) s.acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw InputError("cannot bind " + s.opts.host + ":" + std::to_string(s.opts.port) + ": " + ec.message());
  const unsigned short port = s.acceptor.local_endpoint().port();

  s.running = true;
  s.accept();
  s.io_thread = std::thread([&s] {
    auto guard = asio::make_work_guard(s.ioc);
    s.ioc.run();
  });
  s.sim_thread = std::thread([&s] { s.sim_loop(); });
  spdlog::info("serving on ws://{}:{} at {} Hz", s.opts.host, port, s.opts.frame_rate);
  return port;
}

void LiveService::stop() {
  Impl& s = *impl_;
  if (s.running.exchange(false)) {
    if (s.sim_thread.joinable()) s.sim_thread.join();
    asio::post(s.ioc, [&s] {
      beast::error_code ec;
      s.acceptor.close(ec);
      auto clients = s.clients;
      for (auto& [id, client] : clients) client->close();
      s.clients.clear();
    });
    // Let the close handlers run before stopping the loop.
    std::promise<void> drained;
    auto done = drained.get_future();
    asio::post(s.ioc, [&drained] { drained.set_value(); });
    done.wait_for(std::chrono::seconds(2));
    s.ioc.stop();
    if (s.io_thread.joinable()) s.io_thread.join();
  }
  std::lock_guard lock(s.stop_mutex);
  s.stopped = true;
  s.stop_cv.notify_all();
}

void LiveService::wait() {
  std::unique_lock lock(impl_->stop_mutex);
  impl_->stop_cv.wait(lock, [this] { return impl_->stopped; });
}

ServiceStats LiveService::stats() const {
  std::lock_guard lock(impl_->stats_mutex);
  ServiceStats out = impl_->stats;
  out.dropped_frames = impl_->dropped_frames;
  return out;
}

Index LiveService::active_component() const { return impl_->active; }

int run_serve(const CommandOptions& opts) {
  set_thread_count(opts.threads);
  spdlog::set_level(opts.verbose ? spdlog::level::debug : spdlog::level::info);
  if (opts.config.empty()) throw InputError("--config is required");
  const SceneConfig config = load_config(opts.config);
  const Scene scene = load_scene(config);
  LiveOptions lo;
  lo.host = config.service.host;
  lo.port = config.service.port;
  lo.frame_rate = config.service.frame_rate;

  // Block termination signals before any thread starts so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  LiveService service(make_session_setup(config, scene, opts.subspaces, opts.seed), lo);
  service.start();
  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("signal {} received, shutting down", sig);
  service.stop();
  return kExitOk;
}

}  // namespace fdm
