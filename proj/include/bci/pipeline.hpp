#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bci/bundle.hpp"
#include "bci/config.hpp"
#include "bci/core.hpp"
#include "bci/eval.hpp"
#include "bci/ica.hpp"
#include "bci/onset.hpp"

namespace bci::pipeline {

enum class Task { RVsAo, AoVsMi, AoVsMrcp };

std::string to_string(Task t);
Task parse_task(const std::string& s);  // r_ao | ao_mi | ao_mrcp

struct TrialRecordings {
  Recording eeg;  // EEG + EOG channels, raw acquisition rate
  Recording emg;  // EMG channels (used by the ME session)
};

struct Config {
  Session session = Session::Mi;
  Task task = Task::AoVsMi;
  Transition transition = Transition::SitToStand;
  double target_fs = 250.0;

  bool ica_enabled = true;
  double ica_threshold = 0.7;
  std::uint64_t ica_seed = 0;

  onset::Config onset;

  std::vector<fbcsp::BandSpec> bands;  // empty -> session default bank
  fbcsp::Options fbcsp;
  svm::GridSpec grid;

  double window_s = 0;  // 0 -> session default (2 s MI / 1 s ME)
  double shift_s = 0;   // 0 -> session default (0.2 s MI / 0.5 s ME)

  int arm_count = 5;
  bool idle_counts_as_ao = true;
  bool irreversible_cascade = true;

  // Fills session defaults and checks task/session compatibility.
  void normalize();
};

Config config_from_kv(const bci::Config& kv);

// MI: 50 Hz notch, 1-40 Hz bandpass, resample to target_fs.
// ME: 0.05 Hz highpass, 50 Hz notch, resample to target_fs.
// Event samples are rescaled onto the new rate.
Recording preprocess_eeg(const Recording& raw, Session session,
                         double target_fs);

// Per-channel envelope + threshold detection fused by earliest onset.
struct OnsetReport {
  std::vector<onset::Result> per_channel;
  std::optional<std::int64_t> fused;  // sample at the EMG rate
  std::string fusion_rule = "earliest";
};
OnsetReport detect_movement_onset(const Recording& emg,
                                  const onset::Config& cfg);

struct FoldData {
  std::vector<eval::TrialEpochs> trials;
  std::optional<ica::Decomposition> ica;  // fitted on the training folds
};

// Epochs for one fold with ICA fitted on the training trials only and
// applied everywhere. `test_index` < 0 trains the decomposition on all
// trials (used by the final `train` step).
FoldData build_fold(const std::vector<TrialRecordings>& trials,
                    std::ptrdiff_t test_index, const Config& config);

struct LoocvRunReport {
  eval::LoocvReport report;
  std::vector<std::string> fold_notes;
};

LoocvRunReport run_loocv(const std::vector<TrialRecordings>& trials,
                         const Config& config);

struct StreamRunReport {
  std::vector<eval::StreamReport> per_trial;
  eval::ConfusionCounts totals;
  eval::Rates rates;
};

// LOOCV-style classifier testing: every trial is streamed through models
// trained on the other trials.
StreamRunReport run_stream(const std::vector<TrialRecordings>& trials,
                           const Config& config);

struct TrainedModels {
  eval::FbcspSvmClassifier stage1;  // R/AO (MI) or AO/MRCP (ME)
  eval::FbcspSvmClassifier stage2;  // AO/MI, unused in ME
  bool has_stage2 = false;
};

TrainedModels train_full(const std::vector<TrialRecordings>& trials,
                         const Config& config);

std::string serialize_models(const TrainedModels& models, const Config& config);
TrainedModels deserialize_models(const std::string& json_text);

// trial_NN_eeg/_emg bundles under a dataset directory, sorted by trial.
std::vector<TrialRecordings> load_trials(const std::filesystem::path& dir);

// Line-oriented report bodies.
std::string fold_table_text(const eval::LoocvReport& report);
std::string stream_raster_text(const StreamRunReport& report);
std::string stream_rates_text(const StreamRunReport& report);

}  // namespace bci::pipeline
