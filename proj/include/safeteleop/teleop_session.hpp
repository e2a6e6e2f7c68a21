#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include <json.hpp>

#include "safeteleop/harness.hpp"

namespace safeteleop {

// Client -> server messages. Wire format in docs/protocol.md.
struct SetReference {
  Eigen::Vector3d position;
};
struct SetYaw {
  double yaw;
};
struct ToggleFilter {
  bool enabled;
};
struct Reset {};

using ClientMessage = std::variant<SetReference, SetYaw, ToggleFilter, Reset>;

/// nullopt for malformed or unknown messages; `error` receives the reason.
std::optional<ClientMessage> parse_client_message(const std::string& text, std::string* error = nullptr);
std::string encode(const ClientMessage& message);

struct SessionOptions {
  Axis slice_axis = Axis::Z;
  std::optional<double> slice_coord;  // defaults to the start height
  int slice_every = 3;                // ticks between map_slice messages
};

struct TickOutput {
  nlohmann::json telemetry;
  std::optional<nlohmann::json> map_slice;
};

/// Deterministic core of a live session. Messages posted between two ticks
/// apply in order, so the last reference wins. Not thread-safe: the owner
/// feeds it from a single tick loop.
class TeleopSession {
 public:
  explicit TeleopSession(Scenario scenario, SessionOptions options = {});

  void post(const ClientMessage& message);
  TickOutput tick();

  /// Log of every tick since start (or the last reset), same shape as a scripted trial.
  const TrialLog& record() const { return runner_->log(); }
  bool filter_enabled() const { return filter_enabled_; }
  std::int64_t tick_count() const { return runner_->state().k; }
  const Scenario& scenario() const { return scenario_; }

  nlohmann::json scene_message() const;
  nlohmann::json map_slice_message() const;

 private:
  void restart();

  Scenario scenario_;
  SessionOptions options_;
  std::optional<TrialRunner> runner_;
  Eigen::Vector3d reference_;
  double yaw_;
  bool filter_enabled_ = true;
};

struct TranscriptEntry {
  std::int64_t tick = 0;  // applied just before this tick runs
  std::string message;
};

/// Virtual-time replay of a recorded transcript for `ticks` ticks.
TrialLog replay(const Scenario& scenario, std::span<const TranscriptEntry> transcript, std::int64_t ticks,
                SessionOptions options = {});

}  // namespace safeteleop
