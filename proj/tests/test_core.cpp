#include <doctest.h>

#include <random>

#include "bci/core.hpp"

using namespace bci;

namespace {

Recording make_recording(int n_channels, int n_samples, double fs,
                         std::vector<Event> events = {}) {
  std::vector<ChannelMeta> meta;
  for (int i = 0; i < n_channels; ++i)
    meta.push_back({"ch" + std::to_string(i), ChannelKind::Eeg, "uV"});
  Eigen::MatrixXd data(n_channels, n_samples);
  for (int c = 0; c < n_channels; ++c)
    for (int s = 0; s < n_samples; ++s) data(c, s) = c * 1000.0 + s;
  return Recording("rec", std::move(meta), fs, std::move(data),
                   std::move(events));
}

// Oracle: count window start times k*shift with k*shift + window <= duration,
// walked one by one instead of the closed form.
int enumerate_windows(double duration_s, double window_s, double shift_s) {
  int count = 0;
  for (int k = 0;; ++k) {
    const double start = k * shift_s;
    if (start + window_s > duration_s + 1e-9) break;
    ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("window count matches the paper's tensor arithmetic") {
  CHECK(window_count(4.0, 2.0, 0.2) == 11);
  CHECK(window_count(2.5, 1.0, 0.5) == 4);
  CHECK(window_count(13.0, 2.0, 0.2) == 56);
  CHECK(window_count(9.0, 1.0, 0.5) == 17);
}

TEST_CASE("window count equals exhaustive enumeration on random triples") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dur(0.5, 30.0);
  std::uniform_real_distribution<double> frac(0.05, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double d = dur(rng);
    const double w = frac(rng) * d;
    const double s = frac(rng) * w + 1e-3;
    CHECK(window_count(d, w, s) == enumerate_windows(d, w, s));
  }
}

TEST_CASE("epoch extraction around an anchor") {
  const double fs = 250.0;
  auto rec = make_recording(3, 5000, fs);
  Event onset{2000, EventLabel::MovementOnset, Transition::SitToStand};

  SUBCASE("MRCP epoch spans 625 samples") {
    auto ep = epoch(rec, onset, -1.5, 1.0);
    CHECK(ep.cols() == 625);
    CHECK(ep.rows() == 3);
    // channel order preserved, window starts 1.5 s before the anchor
    CHECK(ep(0, 0) == doctest::Approx(2000.0 - 375.0));
    CHECK(ep(2, 0) == doctest::Approx(2000.0 + 2000.0 - 375.0));
  }

  SUBCASE("AO epoch 4-6.5 s spans 625 samples") {
    Event start{0, EventLabel::TrialStart, Transition::None};
    auto ep = epoch(rec, start, 4.0, 6.5);
    CHECK(ep.cols() == 625);
    CHECK(ep(0, 0) == doctest::Approx(1000.0));
  }

  SUBCASE("degenerate interval is an error") {
    CHECK_THROWS_AS(epoch(rec, onset, 1.0, 1.0), Error);
  }

  SUBCASE("epoch past the end names the recording and anchor") {
    try {
      epoch(rec, onset, 0.0, 100.0);
      FAIL("expected range error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Range);
      CHECK(std::string(e.what()).find("rec") != std::string::npos);
      CHECK(std::string(e.what()).find("movement_onset") != std::string::npos);
    }
  }
}

TEST_CASE("slide produces the documented window counts") {
  const double fs = 250.0;
  auto rec = make_recording(2, 1000, fs);
  Event start{0, EventLabel::TrialStart, Transition::None};
  auto ep = epoch(rec, start, 0.0, 4.0);

  auto windows = slide(ep, fs, 2.0, 0.2);
  CHECK(windows.size() == 11);
  CHECK(windows[0].cols() == 500);
  CHECK(windows[0].rows() == 2);
  // shift is 50 samples at 250 Hz
  CHECK(windows[1](0, 0) == doctest::Approx(ep(0, 50)));

  CHECK_THROWS_AS(slide(ep, fs, 5.0, 0.2), Error);
}

TEST_CASE("concatenating windows at shift == window length rebuilds the epoch") {
  const double fs = 100.0;
  auto rec = make_recording(2, 600, fs);
  Event start{0, EventLabel::TrialStart, Transition::None};
  auto ep = epoch(rec, start, 0.0, 6.0);
  auto windows = slide(ep, fs, 1.0, 1.0);
  REQUIRE(windows.size() == 6);
  Eigen::MatrixXd rebuilt(ep.rows(), ep.cols());
  Eigen::Index col = 0;
  for (const auto& w : windows) {
    rebuilt.middleCols(col, w.cols()) = w;
    col += w.cols();
  }
  CHECK((rebuilt - ep).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("recording invariants") {
  SUBCASE("fs must be positive") {
    CHECK_THROWS_AS(make_recording(1, 10, 0.0), Error);
  }
  SUBCASE("duplicate channel names rejected") {
    std::vector<ChannelMeta> meta = {{"Cz", ChannelKind::Eeg, "uV"},
                                     {"Cz", ChannelKind::Eeg, "uV"}};
    CHECK_THROWS_AS(Recording("r", meta, 100.0, Eigen::MatrixXd::Zero(2, 10), {}),
                    Error);
  }
  SUBCASE("montage validation catches unknown EEG names when enabled") {
    std::vector<ChannelMeta> meta = {{"XX7", ChannelKind::Eeg, "uV"}};
    RecordingOptions opts;
    opts.validate_montage = true;
    CHECK_THROWS_AS(
        Recording("r", meta, 100.0, Eigen::MatrixXd::Zero(1, 10), {}, opts),
        Error);
    // same name passes as EMG
    meta[0].kind = ChannelKind::Emg;
    CHECK_NOTHROW(
        Recording("r", meta, 100.0, Eigen::MatrixXd::Zero(1, 10), {}, opts));
  }
  SUBCASE("events must be sorted and in range") {
    CHECK_THROWS_AS(
        make_recording(1, 10, 100.0,
                       {{5, EventLabel::AudioCue, Transition::None},
                        {2, EventLabel::TaskOnset, Transition::None}}),
        Error);
    CHECK_THROWS_AS(make_recording(
                        1, 10, 100.0,
                        {{99, EventLabel::AudioCue, Transition::None}}),
                    Error);
  }
}

TEST_CASE("protocol timeline") {
  auto tl = ProtocolTimeline::standard(Session::Mi, Transition::SitToStand);
  CHECK(tl.state_at(0.0) == State::R);
  CHECK(tl.state_at(3.999) == State::R);
  CHECK(tl.state_at(4.0) == State::Ao);
  CHECK(tl.state_at(8.5) == State::Idle);
  CHECK(tl.state_at(9.0) == State::Task);
  CHECK(tl.state_at(13.0) == State::Task);
  CHECK(tl.end_s() == doctest::Approx(13.0));

  SUBCASE("intervals must be contiguous from zero") {
    CHECK_THROWS_AS(ProtocolTimeline({{0.0, 1.0, State::R}, {2.0, 3.0, State::Ao}},
                                     Session::Mi, Transition::None),
                    Error);
    CHECK_THROWS_AS(ProtocolTimeline({{1.0, 2.0, State::R}}, Session::Mi,
                                     Transition::None),
                    Error);
  }
}

TEST_CASE("enum round trips used by the bundle format") {
  for (auto label : {EventLabel::TrialStart, EventLabel::RestOnset,
                     EventLabel::AoOnset, EventLabel::IdleOnset,
                     EventLabel::AudioCue, EventLabel::TaskOnset,
                     EventLabel::MovementOnset})
    CHECK(parse_event_label(to_string(label)) == label);
  for (auto c : {ClassLabel::R, ClassLabel::Ao, ClassLabel::Mi, ClassLabel::Mrcp})
    CHECK(parse_class_label(to_string(c)) == c);
  CHECK(parse_transition(to_string(Transition::SitToStand)) ==
        Transition::SitToStand);
}
