#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "fdm/commands.hpp"

namespace fdm {

inline constexpr int kProtocolVersion = 1;

// ---------------------------------------------------------------------------
// Wire format

/// Binary frame: u64 frame id, u16 active component, m f32 reduced
/// coordinates, 3 n_surface f32 positions; little-endian, no padding.
struct FramePayload {
  std::uint64_t frame_id = 0;
  std::uint16_t component = 0;
  std::vector<float> reduced;
  std::vector<float> positions;
};

std::string encode_frame(const FramePayload& frame);
/// `surface_vertices` fixes the position count; m is inferred from the size.
FramePayload decode_frame(const std::string& bytes, std::size_t surface_vertices);

enum class EventKind { assign, move, release };

struct HandleEvent {
  EventKind kind = EventKind::assign;
  Index vertex = 0;
  std::optional<Vec3> target;  // absolute position
  std::uint64_t client = 0;
};

struct ClientMessage {
  bool ping = false;
  HandleEvent event;
  nlohmann::json echo;  // optional "id" field of a ping, returned in the pong
};

/// Malformed or out-of-contract client message.
class ProtocolError : public InputError {
 public:
  using InputError::InputError;
};

/// Parses one text message; vertex ids are checked against `num_vertices`.
ClientMessage parse_client_message(const std::string& text, Index num_vertices);

std::string event_name(EventKind kind);

// ---------------------------------------------------------------------------
// Session

struct SessionSetup {
  TetMesh mesh;
  SystemOperators ops;
  std::vector<Subspace> subspaces;
  std::vector<ForcePrior> priors;  // masked, one per subspace
  Vec weights;
  HysteresisOptions hysteresis;
  MixtureOptions mixture;
  StepSettings settings;
  Vec constant_force;  // empty means zero
  double handle_strength = 1.0;
};

/// Builds the session from a scene config, building subspaces unless
/// `subspace_files` supplies them.
SessionSetup make_session_setup(const SceneConfig& config, const Scene& scene,
                                const std::vector<std::filesystem::path>& subspace_files, std::uint64_t seed);

struct Reply {
  std::uint64_t client = 0;
  std::string text;
};

/// Simulation state of a live session. Not thread-safe: owned by the loop.
class LiveSession {
 public:
  explicit LiveSession(SessionSetup setup);
  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  /// init message sent to every new client.
  std::string init_message() const;

  /// Applies queued handle events, runs selection and one step. Replies
  /// (acks and errors) are appended to `replies`.
  FramePayload tick(const std::vector<HandleEvent>& events, std::vector<Reply>& replies);

  Index active_component() const { return selector_.active(); }
  std::uint64_t frames() const { return frame_id_; }
  const ReducedSimulator& simulator() const { return sim_; }
  const TetMesh& mesh() const { return setup_.mesh; }

 private:
  void apply(const HandleEvent& e, std::vector<Reply>& replies);

  SessionSetup setup_;
  std::optional<MixtureModel> mixture_;
  ComponentSelector selector_;
  ReducedSimulator sim_;
  std::uint64_t frame_id_ = 0;
};

// ---------------------------------------------------------------------------
// WebSocket server

struct LiveOptions {
  std::string host = "127.0.0.1";
  unsigned short port = 0;  // 0 picks a free port
  double frame_rate = 60.0;
  std::size_t queue_capacity = 1024;
  std::size_t client_backlog = 2;  // frames in flight per client before dropping
  std::size_t send_buffer = 0;     // per-client socket send buffer in bytes, 0 keeps the OS default
};

/// Thread-safe bounded FIFO that drops its oldest entry when full.
class EventQueue {
 public:
  explicit EventQueue(std::size_t capacity) : capacity_(capacity) {}
  /// Returns false when an old entry was dropped to make room.
  bool push(HandleEvent e);
  std::vector<HandleEvent> drain();
  std::size_t dropped() const { return dropped_; }

 private:
  std::mutex mutex_;
  std::deque<HandleEvent> items_;
  std::size_t capacity_;
  std::atomic<std::size_t> dropped_{0};
};

struct ServiceStats {
  std::uint64_t frames = 0;
  std::uint64_t skipped_ticks = 0;
  std::uint64_t dropped_frames = 0;
  std::vector<double> step_intervals;  // seconds between consecutive ticks
};

/// One io thread for all sockets plus one fixed-rate simulation thread.
class LiveService {
 public:
  LiveService(SessionSetup setup, LiveOptions opts);
  ~LiveService();
  LiveService(const LiveService&) = delete;
  LiveService& operator=(const LiveService&) = delete;

  /// Binds and starts both threads; returns the bound port. Throws
  /// InputError when the address cannot be bound.
  unsigned short start();
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  ServiceStats stats() const;
  Index active_component() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

int run_serve(const CommandOptions& opts);

}  // namespace fdm
