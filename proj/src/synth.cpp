#include "bci/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "bci/dsp.hpp"

namespace bci::synth {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTrialEnd = 13.0;

// Baseline amplitudes in microvolts before noise_level scaling.
constexpr double kNoiseSd = 8.0;
constexpr double kAlphaAmp = 10.0;
constexpr double kBlinkAmp = 120.0;
constexpr double kEogNoiseSd = 5.0;
constexpr double kEmgQuietSd = 8.0;

// Paul Kellet's economy pink-noise filter; good enough 1/f texture.
class PinkNoise {
 public:
  explicit PinkNoise(std::mt19937_64& rng) : rng_(rng) {}
  double next() {
    const double w = gauss_(rng_);
    b0_ = 0.99765 * b0_ + w * 0.0990460;
    b1_ = 0.96300 * b1_ + w * 0.2965164;
    b2_ = 0.57000 * b2_ + w * 1.0526913;
    return 0.55 * (b0_ + b1_ + b2_ + w * 0.1848);
  }

 private:
  std::mt19937_64& rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
  double b0_ = 0, b1_ = 0, b2_ = 0;
};

// Central-parietal weighting over the standard montage order.
Eigen::VectorXd alpha_profile() {
  Eigen::VectorXd g(11);
  g << 0.6, 0.8, 1.0, 0.8, 0.7, 0.9, 0.7, 0.5, 0.6, 0.5, 0.45;
  return g;
}

Eigen::VectorXd mrcp_profile() {
  Eigen::VectorXd g(11);
  g << 0.9, 0.55, 1.0, 0.55, 0.6, 0.85, 0.6, 0.3, 0.45, 0.3, 0.25;
  return g;
}

Eigen::VectorXd blink_leak_profile(std::mt19937_64& rng) {
  Eigen::VectorXd g(11);
  g << 0.18, 0.10, 0.12, 0.10, 0.06, 0.07, 0.06, 0.03, 0.03, 0.03, 0.02;
  std::uniform_real_distribution<double> jitter(0.85, 1.15);
  for (int i = 0; i < 11; ++i) g(i) *= jitter(rng);
  return g;
}

// Linear crossfade of width 2*half around each state boundary.
double state_gain(double t, double db_contrast, Session session) {
  const double half = 0.1;
  const double attenuation = std::pow(10.0, -db_contrast / 40.0);
  const double boost =
      session == Session::Mi ? std::pow(10.0, db_contrast / 40.0) : 1.0;
  // piecewise targets: R 1, AO att, idle 1, task boost
  struct Node { double at; double before, after; };
  const Node nodes[] = {{4.0, 1.0, attenuation},
                        {8.0, attenuation, 1.0},
                        {9.0, 1.0, boost},
                        {kTrialEnd, boost, 1.0}};
  for (const auto& node : nodes) {
    if (t < node.at - half) {
      if (node.at == 4.0) return node.before;
      continue;
    }
    if (t <= node.at + half) {
      const double u = (t - (node.at - half)) / (2.0 * half);
      return node.before + (node.after - node.before) * u;
    }
  }
  if (t < 4.0 - half) return 1.0;
  if (t > kTrialEnd + half) return 1.0;
  // between boundaries: return the settled value of the last passed node
  if (t < 8.0 - half) return attenuation;
  if (t < 9.0 - half) return 1.0;
  if (t < kTrialEnd - half) return session == Session::Mi
                                        ? std::pow(10.0, db_contrast / 40.0)
                                        : 1.0;
  return 1.0;
}

// Negative ramp into the onset, positive rebound after it, zero elsewhere.
double mrcp_template(double t, double onset_s, double amp) {
  const double u = t - onset_s;
  if (u < -1.5 || u > 1.0) return 0.0;
  if (u <= 0.0) {
    const double x = (u + 1.5) / 1.5;  // 0..1
    return -amp * x * x * (3.0 - 2.0 * x);
  }
  if (u <= 0.3) {
    const double x = u / 0.3;
    return -amp + (amp + 0.35 * amp) * x;
  }
  const double x = (u - 0.3) / 0.7;
  return 0.35 * amp * (1.0 - x * x * (3.0 - 2.0 * x));
}

double blink_template(double u) {           // u in seconds from blink centre
  const double width = 0.35;
  if (std::abs(u) > width / 2) return 0.0;
  const double c = std::cos(kPi * u / width);
  return c * c;
}

}  // namespace

void Spec::validate() const {
  require(has_seed, ErrorKind::Validation, "synth: seed is mandatory");
  require(subjects >= 1 && trials >= 1, ErrorKind::Validation,
          "synth: need at least one subject and trial");
  require(fs_eeg > 0 && fs_emg >= 250.0, ErrorKind::Validation,
          "synth: bad sampling rates (EMG must be >= 250 Hz)");
  require(std::isfinite(erd_ers_db), ErrorKind::Validation,
          "synth: ERD/ERS depth must be finite");
  require(erd_band_lo_hz > 0 && erd_band_hi_hz > erd_band_lo_hz &&
              erd_band_hi_hz < 125.0,
          ErrorKind::Validation,
          "synth: ERD band must sit below the 250 Hz pipeline Nyquist");
  require(emg_burst_latency_mean_s > 0.05 &&
              emg_burst_latency_mean_s < kTrialEnd - 9.0 - 1.2,
          ErrorKind::Validation,
          "synth: burst latency must land inside the task window");
  require(noise_level > 0, ErrorKind::Validation, "synth: noise level <= 0");
  require(pre_roll_s >= 1.5, ErrorKind::Validation,
          "synth: need at least 1.5 s of pre-roll");
}

std::vector<SubjectData> generate(const Spec& spec) {
  spec.validate();
  std::vector<SubjectData> out;

  const Eigen::VectorXd g_alpha = alpha_profile();
  const Eigen::VectorXd g_mrcp = mrcp_profile();
  const double duration = spec.pre_roll_s + kTrialEnd + spec.post_roll_s;
  const auto n_eeg = static_cast<Eigen::Index>(std::llround(duration * spec.fs_eeg));
  const auto n_emg = static_cast<Eigen::Index>(std::llround(duration * spec.fs_emg));

  std::vector<ChannelMeta> eeg_meta;
  for (const auto& name : standard_montage())
    eeg_meta.push_back({name, ChannelKind::Eeg, "uV"});
  eeg_meta.push_back({"EOG1", ChannelKind::Eog, "uV"});
  eeg_meta.push_back({"EOG2", ChannelKind::Eog, "uV"});

  const std::vector<std::string> emg_names = {"RF_L", "RF_R", "TA_L",
                                              "TA_R", "GL_L", "GL_R"};
  std::vector<ChannelMeta> emg_meta;
  for (const auto& name : emg_names)
    emg_meta.push_back({name, ChannelKind::Emg, "uV"});

  // one quiet-carrier filter for all EMG channels
  const auto emg_band = dsp::design(
      {2, dsp::FilterKind::Bandpass, 20.0, 120.0, spec.fs_emg});

  for (int subj = 0; subj < spec.subjects; ++subj) {
    SubjectData subject;
    subject.subject = "S" + std::to_string(subj + 1);
    std::mt19937_64 rng(spec.seed + 0x9e3779b97f4a7c15ull *
                                        static_cast<std::uint64_t>(subj + 1));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    subject.blink_leak = blink_leak_profile(rng);

    for (int trial = 0; trial < spec.trials; ++trial) {
      TrialTruth truth;

      const double alpha_freq =
          0.5 * (spec.erd_band_lo_hz + spec.erd_band_hi_hz) +
          0.6 * (uniform(rng) - 0.5);
      const double alpha_phase = 2.0 * kPi * uniform(rng);

      double onset_s = -1.0;
      if (spec.session == Session::Me) {
        std::normal_distribution<double> latency(spec.emg_burst_latency_mean_s,
                                                 spec.emg_burst_latency_sd_s);
        const double lat = std::clamp(latency(rng), 0.25, 2.5);
        onset_s = 9.0 + lat;
        truth.movement_onset_s = onset_s;
        truth.movement_onset_emg_sample =
            time_to_sample(onset_s + spec.pre_roll_s, spec.fs_emg);
      }

      // blink times over the whole recording
      std::vector<double> blink_times;
      {
        double at = -spec.pre_roll_s + 0.3;
        while (true) {
          const double gap = -std::log(1.0 - uniform(rng)) /
                             std::max(spec.blink_rate_hz, 1e-9);
          at += gap;
          if (at > kTrialEnd + spec.post_roll_s - 0.3) break;
          blink_times.push_back(at);
          truth.blink_times_s.push_back(at);
        }
      }

      // --- EEG/EOG ---
      Eigen::MatrixXd eeg(13, n_eeg);
      std::vector<PinkNoise> pink;
      pink.reserve(11);
      for (int c = 0; c < 11; ++c) pink.emplace_back(rng);

      Eigen::VectorXd blink_signal = Eigen::VectorXd::Zero(n_eeg);
      for (Eigen::Index i = 0; i < n_eeg; ++i) {
        const double tt = double(i) / spec.fs_eeg - spec.pre_roll_s;
        double b = 0;
        for (double bt : blink_times) b += blink_template(tt - bt);
        blink_signal(i) = kBlinkAmp * b;
      }

      for (Eigen::Index i = 0; i < n_eeg; ++i) {
        const double tt = double(i) / spec.fs_eeg - spec.pre_roll_s;
        const double gain = state_gain(tt, spec.erd_ers_db, spec.session);
        const double rhythm =
            kAlphaAmp * gain *
            std::sin(2.0 * kPi * alpha_freq * tt + alpha_phase);
        const double mrcp = spec.session == Session::Me
                                ? mrcp_template(tt, onset_s, spec.mrcp_amp_uv)
                                : 0.0;
        for (int c = 0; c < 11; ++c) {
          eeg(c, i) = spec.noise_level * kNoiseSd * pink[static_cast<std::size_t>(c)].next() +
                      g_alpha(c) * rhythm + g_mrcp(c) * mrcp +
                      subject.blink_leak(c) * blink_signal(i);
        }
        eeg(11, i) = blink_signal(i) + kEogNoiseSd * gauss(rng);
        eeg(12, i) = 0.75 * blink_signal(i) + kEogNoiseSd * gauss(rng);
      }

      const auto sample_eeg = [&](double trial_time) {
        return time_to_sample(trial_time + spec.pre_roll_s, spec.fs_eeg);
      };
      std::vector<Event> eeg_events = {
          {sample_eeg(0.0), EventLabel::TrialStart, spec.transition},
          {sample_eeg(0.0), EventLabel::RestOnset, spec.transition},
          {sample_eeg(4.0), EventLabel::AoOnset, spec.transition},
          {sample_eeg(8.0), EventLabel::IdleOnset, spec.transition},
          {sample_eeg(9.0), EventLabel::AudioCue, spec.transition},
          {sample_eeg(9.0), EventLabel::TaskOnset, spec.transition},
      };

      std::ostringstream id;
      id << subject.subject << "_" << to_string(spec.session) << "_"
         << to_string(spec.transition) << "_trial"
         << (trial < 9 ? "0" : "") << trial + 1;

      RecordingOptions eeg_opts;
      eeg_opts.validate_montage = true;
      Recording eeg_rec(id.str() + "_eeg", eeg_meta, spec.fs_eeg,
                        std::move(eeg), std::move(eeg_events), eeg_opts);

      // --- EMG ---
      Eigen::MatrixXd emg(6, n_emg);
      std::uniform_real_distribution<double> channel_jitter(0.0, 0.04);
      for (int c = 0; c < 6; ++c) {
        std::vector<double> carrier(static_cast<std::size_t>(n_emg));
        for (auto& v : carrier) v = gauss(rng);
        carrier = dsp::filtfilt(carrier, emg_band);
        // normalize the carrier to unit sd so snr means what it says
        double ss = 0;
        for (double v : carrier) ss += v * v;
        const double carrier_sd = std::sqrt(ss / double(carrier.size()));

        const double burst_start =
            spec.session == Session::Me ? onset_s + channel_jitter(rng) : -1.0;
        for (Eigen::Index i = 0; i < n_emg; ++i) {
          const double tt = double(i) / spec.fs_emg - spec.pre_roll_s;
          double level = spec.noise_level * kEmgQuietSd;
          if (spec.session == Session::Me && tt >= burst_start &&
              tt <= kTrialEnd) {
            const double attack = std::min(1.0, (tt - burst_start) / 0.01);
            level *= 1.0 + (spec.emg_burst_snr - 1.0) * attack;
          }
          emg(c, i) = level * carrier[static_cast<std::size_t>(i)] / carrier_sd;
        }
      }

      const auto sample_emg = [&](double trial_time) {
        return time_to_sample(trial_time + spec.pre_roll_s, spec.fs_emg);
      };
      std::vector<Event> emg_events = {
          {sample_emg(0.0), EventLabel::TrialStart, spec.transition},
          {sample_emg(9.0), EventLabel::AudioCue, spec.transition},
      };
      Recording emg_rec(id.str() + "_emg", emg_meta, spec.fs_emg,
                        std::move(emg), std::move(emg_events));

      subject.trials.push_back(
          {std::move(eeg_rec), std::move(emg_rec), std::move(truth)});
    }
    out.push_back(std::move(subject));
  }
  return out;
}

std::string truth_json(const SubjectData& subject, const Spec& spec) {
  nlohmann::json doc;
  doc["subject"] = subject.subject;
  doc["session"] = to_string(spec.session);
  doc["transition"] = to_string(spec.transition);
  doc["seed"] = spec.seed;
  doc["blink_leak"] = std::vector<double>(
      subject.blink_leak.data(),
      subject.blink_leak.data() + subject.blink_leak.size());
  doc["trials"] = nlohmann::json::array();
  for (const auto& t : subject.trials) {
    nlohmann::json jt;
    jt["movement_onset_s"] = t.truth.movement_onset_s;
    jt["movement_onset_emg_sample"] = t.truth.movement_onset_emg_sample;
    jt["blink_times_s"] = t.truth.blink_times_s;
    doc["trials"].push_back(jt);
  }
  return doc.dump(2) + "\n";
}

std::vector<std::filesystem::path> write_subject(
    const std::filesystem::path& dir, const SubjectData& subject,
    const Spec& spec) {
  const std::filesystem::path base =
      dir / subject.subject /
      (to_string(spec.session) + "_" + to_string(spec.transition));
  std::filesystem::create_directories(base);

  io::BundleMeta meta;
  meta.subject = subject.subject;
  meta.session = spec.session;
  meta.transition = spec.transition;

  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < subject.trials.size(); ++i) {
    std::ostringstream stem;
    stem << "trial_" << (i < 9 ? "0" : "") << i + 1;
    meta.standard_montage = true;
    io::write_bundle(base / (stem.str() + "_eeg"), subject.trials[i].eeg, meta);
    meta.standard_montage = false;
    io::write_bundle(base / (stem.str() + "_emg"), subject.trials[i].emg, meta);
    for (const char* suffix : {"_eeg.json", "_eeg.f32", "_eeg.events",
                               "_emg.json", "_emg.f32", "_emg.events"})
      written.push_back(base / (stem.str() + suffix));
  }
  io::atomic_write(base / "truth.json", truth_json(subject, spec));
  written.push_back(base / "truth.json");
  return written;
}

}  // namespace bci::synth
