#include "bci/core.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace bci {

std::string to_string(ChannelKind k) {
  switch (k) {
    case ChannelKind::Eeg: return "EEG";
    case ChannelKind::Eog: return "EOG";
    case ChannelKind::Emg: return "EMG";
  }
  return "?";
}

std::string to_string(Session s) {
  return s == Session::Mi ? "MI" : "ME";
}

std::string to_string(Transition t) {
  switch (t) {
    case Transition::SitToStand: return "sit_to_stand";
    case Transition::StandToSit: return "stand_to_sit";
    case Transition::None: return "none";
  }
  return "?";
}

std::string to_string(EventLabel l) {
  switch (l) {
    case EventLabel::TrialStart: return "trial_start";
    case EventLabel::RestOnset: return "rest_onset";
    case EventLabel::AoOnset: return "ao_onset";
    case EventLabel::IdleOnset: return "idle_onset";
    case EventLabel::AudioCue: return "audio_cue";
    case EventLabel::TaskOnset: return "task_onset";
    case EventLabel::MovementOnset: return "movement_onset";
  }
  return "?";
}

std::string to_string(ClassLabel c) {
  switch (c) {
    case ClassLabel::R: return "R";
    case ClassLabel::Ao: return "AO";
    case ClassLabel::Mi: return "MI";
    case ClassLabel::Mrcp: return "MRCP";
  }
  return "?";
}

std::string to_string(State s) {
  switch (s) {
    case State::R: return "R";
    case State::Ao: return "AO";
    case State::Idle: return "IDLE";
    case State::Task: return "TASK";
  }
  return "?";
}

ChannelKind parse_channel_kind(const std::string& s) {
  if (s == "EEG") return ChannelKind::Eeg;
  if (s == "EOG") return ChannelKind::Eog;
  if (s == "EMG") return ChannelKind::Emg;
  raise(ErrorKind::Validation, "unknown channel kind '" + s + "'");
}

Session parse_session(const std::string& s) {
  if (s == "MI") return Session::Mi;
  if (s == "ME") return Session::Me;
  raise(ErrorKind::Validation, "unknown session '" + s + "' (expected MI or ME)");
}

Transition parse_transition(const std::string& s) {
  if (s == "sit_to_stand") return Transition::SitToStand;
  if (s == "stand_to_sit") return Transition::StandToSit;
  if (s == "none") return Transition::None;
  raise(ErrorKind::Validation, "unknown transition '" + s + "'");
}

EventLabel parse_event_label(const std::string& s) {
  if (s == "trial_start") return EventLabel::TrialStart;
  if (s == "rest_onset") return EventLabel::RestOnset;
  if (s == "ao_onset") return EventLabel::AoOnset;
  if (s == "idle_onset") return EventLabel::IdleOnset;
  if (s == "audio_cue") return EventLabel::AudioCue;
  if (s == "task_onset") return EventLabel::TaskOnset;
  if (s == "movement_onset") return EventLabel::MovementOnset;
  raise(ErrorKind::Validation, "unknown event label '" + s + "'");
}

ClassLabel parse_class_label(const std::string& s) {
  if (s == "R") return ClassLabel::R;
  if (s == "AO") return ClassLabel::Ao;
  if (s == "MI") return ClassLabel::Mi;
  if (s == "MRCP") return ClassLabel::Mrcp;
  raise(ErrorKind::Validation, "unknown class label '" + s + "'");
}

const std::vector<std::string>& standard_montage() {
  static const std::vector<std::string> montage = {
      "FCz", "C3", "Cz", "C4", "CP3", "CPz", "CP4", "P3", "Pz", "P4", "POz"};
  return montage;
}

Recording::Recording(std::string id, std::vector<ChannelMeta> channels,
                     double fs, Eigen::MatrixXd data, std::vector<Event> events,
                     const RecordingOptions& opts)
    : id_(std::move(id)),
      channels_(std::move(channels)),
      fs_(fs),
      data_(std::move(data)),
      events_(std::move(events)) {
  require(fs_ > 0, ErrorKind::Validation,
          "recording '" + id_ + "': fs must be positive");
  require(static_cast<Eigen::Index>(channels_.size()) == data_.rows(),
          ErrorKind::Validation,
          "recording '" + id_ + "': channel metadata does not match data rows");

  std::set<std::string> names;
  for (const auto& ch : channels_) {
    require(names.insert(ch.name).second, ErrorKind::Validation,
            "recording '" + id_ + "': duplicate channel name '" + ch.name + "'");
    if (opts.validate_montage && ch.kind == ChannelKind::Eeg) {
      const auto& m = standard_montage();
      require(std::find(m.begin(), m.end(), ch.name) != m.end(),
              ErrorKind::Validation,
              "recording '" + id_ + "': EEG channel '" + ch.name +
                  "' not in the standard montage");
    }
  }

  std::int64_t prev = -1;
  for (const auto& ev : events_) {
    require(ev.sample >= 0 && ev.sample < n_samples(), ErrorKind::Validation,
            "recording '" + id_ + "': event '" + to_string(ev.label) +
                "' at sample " + std::to_string(ev.sample) + " out of range");
    require(ev.sample >= prev, ErrorKind::Validation,
            "recording '" + id_ + "': events not sorted by sample");
    prev = ev.sample;
  }
}

int Recording::channel_index(const std::string& name) const {
  for (std::size_t i = 0; i < channels_.size(); ++i)
    if (channels_[i].name == name) return static_cast<int>(i);
  return -1;
}

std::optional<Event> Recording::first_event(EventLabel label) const {
  for (const auto& ev : events_)
    if (ev.label == label) return ev;
  return std::nullopt;
}

Recording Recording::select_kind(ChannelKind kind) const {
  std::vector<ChannelMeta> meta;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < n_channels(); ++i) {
    if (channels_[static_cast<std::size_t>(i)].kind == kind) {
      meta.push_back(channels_[static_cast<std::size_t>(i)]);
      rows.push_back(i);
    }
  }
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), n_samples());
  for (std::size_t r = 0; r < rows.size(); ++r)
    sub.row(static_cast<Eigen::Index>(r)) = data_.row(rows[r]);
  return Recording(id_, std::move(meta), fs_, std::move(sub), events_);
}

Recording Recording::with_data(Eigen::MatrixXd data) const {
  return Recording(id_, channels_, fs_, std::move(data), events_);
}

void EpochSet::validate() const {
  require(labels.size() == trials.size(), ErrorKind::Validation,
          "epoch set: labels/trials length mismatch");
  require(fs > 0, ErrorKind::Validation, "epoch set: fs must be positive");
  if (trials.empty()) return;
  const std::size_t n_windows = trials.front().size();
  Eigen::Index nc = -1, ns = -1;
  for (const auto& trial : trials) {
    require(trial.size() == n_windows, ErrorKind::Validation,
            "epoch set: ragged window counts across trials");
    for (const auto& w : trial) {
      if (nc < 0) { nc = w.rows(); ns = w.cols(); }
      require(w.rows() == nc && w.cols() == ns, ErrorKind::Validation,
              "epoch set: inconsistent window dimensions");
    }
  }
}

int window_count(double duration_s, double window_s, double shift_s) {
  require(shift_s > 0, ErrorKind::Validation, "window shift must be positive");
  require(window_s > 0, ErrorKind::Validation, "window length must be positive");
  require(window_s <= duration_s + 1e-9, ErrorKind::Size,
          "window of " + std::to_string(window_s) + " s longer than epoch of " +
              std::to_string(duration_s) + " s");
  return static_cast<int>(
             std::floor((duration_s - window_s) / shift_s + 1e-9)) + 1;
}

Eigen::MatrixXd epoch(const Recording& rec, const Event& anchor,
                      double start_s, double end_s) {
  const std::int64_t count = time_to_sample(end_s - start_s, rec.fs());
  require(count > 0, ErrorKind::Range,
          "recording '" + rec.id() + "': zero-length epoch at anchor '" +
              to_string(anchor.label) + "' (start " + std::to_string(start_s) +
              " s, end " + std::to_string(end_s) + " s)");

  const std::int64_t first = anchor.sample + time_to_sample(start_s, rec.fs());
  require(first >= 0 && first + count <= rec.n_samples(), ErrorKind::Range,
          "recording '" + rec.id() + "': epoch [" + std::to_string(start_s) +
              ", " + std::to_string(end_s) + ") s at anchor '" +
              to_string(anchor.label) + "' (sample " +
              std::to_string(anchor.sample) + ") outside the recording");

  return rec.data().middleCols(first, count);
}

std::vector<Eigen::MatrixXd> slide(const Eigen::MatrixXd& ep, double fs,
                                   double window_s, double shift_s) {
  require(fs > 0, ErrorKind::Validation, "slide: fs must be positive");
  const double duration_s = double(ep.cols()) / fs;
  const int count = window_count(duration_s, window_s, shift_s);
  const std::int64_t win_n = time_to_sample(window_s, fs);
  require(win_n > 0 && win_n <= ep.cols(), ErrorKind::Size,
          "slide: window does not fit the epoch");

  std::vector<Eigen::MatrixXd> windows;
  windows.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    std::int64_t start = time_to_sample(k * shift_s, fs);
    start = std::min<std::int64_t>(start, ep.cols() - win_n);
    windows.push_back(ep.middleCols(start, win_n));
  }
  return windows;
}

ProtocolTimeline::ProtocolTimeline(std::vector<StateInterval> intervals,
                                   Session session, Transition transition)
    : intervals_(std::move(intervals)),
      session_(session),
      transition_(transition) {
  require(!intervals_.empty(), ErrorKind::Validation, "timeline: no intervals");
  require(std::abs(intervals_.front().start_s) < 1e-12, ErrorKind::Validation,
          "timeline: must start at 0");
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    require(intervals_[i].end_s > intervals_[i].start_s, ErrorKind::Validation,
            "timeline: empty interval");
    if (i > 0)
      require(std::abs(intervals_[i].start_s - intervals_[i - 1].end_s) < 1e-12,
              ErrorKind::Validation, "timeline: intervals not contiguous");
  }
}

ProtocolTimeline ProtocolTimeline::standard(Session session,
                                            Transition transition) {
  return ProtocolTimeline({{0.0, 4.0, State::R},
                           {4.0, 8.0, State::Ao},
                           {8.0, 9.0, State::Idle},
                           {9.0, 13.0, State::Task}},
                          session, transition);
}

State ProtocolTimeline::state_at(double t_s) const {
  for (const auto& iv : intervals_)
    if (t_s >= iv.start_s && t_s < iv.end_s) return iv.state;
  // Clamp: times at or past the end belong to the last interval.
  if (t_s >= intervals_.back().end_s) return intervals_.back().state;
  return intervals_.front().state;
}

}  // namespace bci
