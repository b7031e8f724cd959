#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bci/bundle.hpp"
#include "bci/core.hpp"

namespace bci::synth {

// Synthetic protocol recordings with state-dependent band power, MRCP
// templates, EMG bursts and ocular leakage. Ground truth goes into a
// sidecar file, never into the recordings themselves.
struct Spec {
  int subjects = 1;
  int trials = 15;
  Session session = Session::Mi;
  Transition transition = Transition::SitToStand;
  double fs_eeg = 1200.0;  // EEG/EOG acquisition rate
  double fs_emg = 250.0;
  double erd_band_lo_hz = 8.0;
  double erd_band_hi_hz = 12.0;
  // AO-to-task band-power contrast in dB, split symmetrically around rest
  double erd_ers_db = 6.0;
  double mrcp_amp_uv = 8.0;
  double emg_burst_latency_mean_s = 0.8;  // after the audio cue
  double emg_burst_latency_sd_s = 0.15;
  double emg_burst_snr = 3.0;  // burst amplitude over quiet sd
  double blink_rate_hz = 0.15;
  double noise_level = 1.0;
  std::uint64_t seed = 0;  // mandatory; generation never self-seeds
  bool has_seed = false;

  // recordings span [-pre_roll, 13 + post_roll] around the trial
  double pre_roll_s = 1.5;
  double post_roll_s = 0.5;

  void validate() const;
};

struct TrialTruth {
  double movement_onset_s = -1;               // trial time; -1 in MI session
  std::int64_t movement_onset_emg_sample = -1;  // recording sample at fs_emg
  std::vector<double> blink_times_s;          // trial time
};

struct Trial {
  Recording eeg;  // 11 EEG + 2 EOG channels at fs_eeg
  Recording emg;  // 6 EMG channels at fs_emg
  TrialTruth truth;
};

struct SubjectData {
  std::string subject;
  std::vector<Trial> trials;
  Eigen::VectorXd blink_leak;  // ground-truth blink mixing into EEG channels
};

std::vector<SubjectData> generate(const Spec& spec);

std::string truth_json(const SubjectData& subject, const Spec& spec);

// Writes trial_NN_eeg.* / trial_NN_emg.* bundles plus truth.json into
// dir/<subject>/<session>_<transition>/ and returns the written files.
std::vector<std::filesystem::path> write_subject(
    const std::filesystem::path& dir, const SubjectData& subject,
    const Spec& spec);

}  // namespace bci::synth
