#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bci/error.hpp"

namespace bci {

enum class ChannelKind { Eeg, Eog, Emg };
enum class Session { Mi, Me };
enum class Transition { SitToStand, StandToSit, None };

enum class EventLabel {
  TrialStart,
  RestOnset,
  AoOnset,
  IdleOnset,
  AudioCue,
  TaskOnset,
  MovementOnset,
};

// Trial states / window classes. R and AO double as decoded classes in the
// two-stage cascade; MI and MRCP are the positive detection classes.
enum class ClassLabel { R, Ao, Mi, Mrcp };

std::string to_string(ChannelKind k);
std::string to_string(Session s);
std::string to_string(Transition t);
std::string to_string(EventLabel l);
std::string to_string(ClassLabel c);
ChannelKind parse_channel_kind(const std::string& s);
Session parse_session(const std::string& s);
Transition parse_transition(const std::string& s);
EventLabel parse_event_label(const std::string& s);
ClassLabel parse_class_label(const std::string& s);

// The one shared time->index rule. All modules use this; never floor/ceil.
inline std::int64_t time_to_sample(double t_s, double fs) {
  return std::llround(t_s * fs);
}

struct ChannelMeta {
  std::string name;
  ChannelKind kind = ChannelKind::Eeg;
  std::string unit = "uV";
};

struct Event {
  std::int64_t sample = 0;
  EventLabel label = EventLabel::TrialStart;
  Transition transition = Transition::None;
};

// The 11-electrode montage used when montage validation is on.
const std::vector<std::string>& standard_montage();

struct RecordingOptions {
  bool validate_montage = false;
};

// Immutable multichannel time series (channel-major), safe to share between
// threads once constructed.
class Recording {
 public:
  Recording(std::string id, std::vector<ChannelMeta> channels, double fs,
            Eigen::MatrixXd data, std::vector<Event> events,
            const RecordingOptions& opts = {});

  const std::string& id() const { return id_; }
  double fs() const { return fs_; }
  const std::vector<ChannelMeta>& channels() const { return channels_; }
  const Eigen::MatrixXd& data() const { return data_; }
  const std::vector<Event>& events() const { return events_; }

  Eigen::Index n_channels() const { return data_.rows(); }
  Eigen::Index n_samples() const { return data_.cols(); }
  double duration_s() const { return double(n_samples()) / fs_; }

  int channel_index(const std::string& name) const;  // -1 when absent
  std::optional<Event> first_event(EventLabel label) const;

  // New recording restricted to channels of one kind (order preserved).
  Recording select_kind(ChannelKind kind) const;
  // Replace the sample matrix, keeping metadata and events.
  Recording with_data(Eigen::MatrixXd data) const;

 private:
  std::string id_;
  std::vector<ChannelMeta> channels_;
  double fs_ = 0;
  Eigen::MatrixXd data_;  // channels x samples
  std::vector<Event> events_;
};

// Labeled trials x windows x channels x samples, stored as nested matrices.
struct EpochSet {
  std::vector<ClassLabel> labels;                    // one per trial
  std::vector<std::vector<Eigen::MatrixXd>> trials;  // [trial][window]
  double fs = 0;
  double window_s = 0;
  double shift_s = 0;

  std::size_t n_trials() const { return trials.size(); }
  void validate() const;
};

// Number of sliding windows in an epoch of `duration_s`. 1e-9 slack before
// the floor so exact multiples are not lost to binary rounding.
int window_count(double duration_s, double window_s, double shift_s);

// Single-trial epoch locked to `anchor`: [start_s, end_s) relative to it.
// Sample count is round((end_s - start_s) * fs) by construction.
Eigen::MatrixXd epoch(const Recording& rec, const Event& anchor,
                      double start_s, double end_s);

std::vector<Eigen::MatrixXd> slide(const Eigen::MatrixXd& ep, double fs,
                                   double window_s, double shift_s);

enum class State { R, Ao, Idle, Task };

std::string to_string(State s);

struct StateInterval {
  double start_s = 0;
  double end_s = 0;
  State state = State::R;
};

// Per-trial protocol: contiguous, non-overlapping state intervals from 0.
class ProtocolTimeline {
 public:
  ProtocolTimeline(std::vector<StateInterval> intervals, Session session,
                   Transition transition);

  // R 0-4 s, AO 4-8 s, idle 8-9 s, task 9-13 s.
  static ProtocolTimeline standard(Session session, Transition transition);

  State state_at(double t_s) const;  // intervals are half-open [start, end)
  double end_s() const { return intervals_.back().end_s; }
  const std::vector<StateInterval>& intervals() const { return intervals_; }
  Session session() const { return session_; }
  Transition transition() const { return transition_; }

 private:
  std::vector<StateInterval> intervals_;
  Session session_;
  Transition transition_;
};

}  // namespace bci
