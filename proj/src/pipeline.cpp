#include "bci/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bci/dsp.hpp"

namespace bci::pipeline {

using nlohmann::json;

std::string to_string(Task t) {
  switch (t) {
    case Task::RVsAo: return "r_ao";
    case Task::AoVsMi: return "ao_mi";
    case Task::AoVsMrcp: return "ao_mrcp";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  if (s == "r_ao") return Task::RVsAo;
  if (s == "ao_mi") return Task::AoVsMi;
  if (s == "ao_mrcp") return Task::AoVsMrcp;
  raise(ErrorKind::Validation, "unknown task '" + s + "'");
}

void Config::normalize() {
  if (session == Session::Me) {
    require(task == Task::AoVsMrcp, ErrorKind::Validation,
            "task " + to_string(task) + " is not defined for the ME session");
  } else {
    require(task != Task::AoVsMrcp, ErrorKind::Validation,
            "task ao_mrcp is not defined for the MI session");
  }
  if (bands.empty())
    bands = session == Session::Mi ? fbcsp::mi_bands() : fbcsp::me_bands();
  if (window_s <= 0) window_s = session == Session::Mi ? 2.0 : 1.0;
  if (shift_s <= 0) shift_s = session == Session::Mi ? 0.2 : 0.5;
  require(target_fs > 0, ErrorKind::Validation, "target fs must be positive");
}

Config config_from_kv(const bci::Config& kv) {
  static const std::set<std::string> allowed = {
      "session", "task", "transition", "target_fs_hz",
      "ica", "ica_threshold", "ica_seed",
      "onset_h", "onset_e", "onset_reference_s",
      "bands", "csp_pairs", "csp_shrinkage", "select_features", "k_best",
      "kernels", "c_values", "gammas", "cv_folds", "cv_seed", "svm_tol",
      "standardize", "window_s", "shift_s",
      "arm_count", "idle_counts_as_ao", "irreversible_cascade",
  };
  kv.assert_only(allowed);

  Config cfg;
  cfg.session = parse_session(kv.get_string("session", "MI"));
  cfg.task = parse_task(kv.get_string(
      "task", cfg.session == Session::Mi ? "ao_mi" : "ao_mrcp"));
  cfg.transition = parse_transition(kv.get_string("transition", "sit_to_stand"));
  cfg.target_fs = kv.get_double("target_fs_hz", 250.0);

  cfg.ica_enabled = kv.get_bool("ica", true);
  cfg.ica_threshold = kv.get_double("ica_threshold", 0.7);
  cfg.ica_seed = kv.get_uint64("ica_seed", 0);

  cfg.onset.h = kv.get_double("onset_h", 10.0);
  cfg.onset.e = kv.get_int("onset_e", 5);
  cfg.onset.reference_window_s = kv.get_double("onset_reference_s", 2.0);

  if (kv.has("bands")) {
    cfg.bands.clear();
    for (const auto& item : kv.get_strings("bands")) {
      const auto dash = item.find('-');
      require(dash != std::string::npos, ErrorKind::Config,
              "bands: expected lo-hi pairs, got '" + item + "'");
      cfg.bands.push_back(
          {std::stod(item.substr(0, dash)), std::stod(item.substr(dash + 1))});
    }
  }
  cfg.fbcsp.m = kv.get_int("csp_pairs", 2);
  cfg.fbcsp.csp.shrinkage = kv.get_double("csp_shrinkage", 1e-6);
  cfg.fbcsp.select_features = kv.get_bool("select_features", false);
  cfg.fbcsp.k_best = kv.get_int("k_best", 8);

  if (kv.has("kernels")) {
    cfg.grid.kernels.clear();
    for (const auto& k : kv.get_strings("kernels"))
      cfg.grid.kernels.push_back(svm::parse_kernel(k));
  }
  if (kv.has("c_values")) cfg.grid.c_values = kv.get_doubles("c_values");
  if (kv.has("gammas")) {
    cfg.grid.gammas.clear();
    for (const auto& g : kv.get_strings("gammas")) {
      if (g == "auto") cfg.grid.gammas.push_back(std::nullopt);
      else cfg.grid.gammas.push_back(std::stod(g));
    }
  }
  cfg.grid.folds = kv.get_int("cv_folds", 10);
  cfg.grid.seed = kv.get_uint64("cv_seed", 0);
  cfg.grid.train.tol = kv.get_double("svm_tol", 1e-3);
  cfg.grid.standardize = kv.get_bool("standardize", true);

  cfg.window_s = kv.get_double("window_s", 0.0);
  cfg.shift_s = kv.get_double("shift_s", 0.0);
  cfg.arm_count = kv.get_int("arm_count", 5);
  cfg.idle_counts_as_ao = kv.get_bool("idle_counts_as_ao", true);
  cfg.irreversible_cascade = kv.get_bool("irreversible_cascade", true);

  cfg.normalize();
  return cfg;
}

Recording preprocess_eeg(const Recording& raw, Session session,
                         double target_fs) {
  const double fs = raw.fs();
  Eigen::MatrixXd data = raw.data();

  if (session == Session::Mi) {
    data = dsp::filtfilt(data, dsp::design({2, dsp::FilterKind::Notch, 50.0, 0.0, fs}));
    data = dsp::filtfilt(data, dsp::design({2, dsp::FilterKind::Bandpass, 1.0, 40.0, fs}));
  } else {
    data = dsp::filtfilt(data, dsp::design({2, dsp::FilterKind::Highpass, 0.05, 0.0, fs}));
    data = dsp::filtfilt(data, dsp::design({2, dsp::FilterKind::Notch, 50.0, 0.0, fs}));
  }

  if (std::abs(fs - target_fs) < 1e-9)
    return raw.with_data(std::move(data));

  data = dsp::resample(data, fs, target_fs);
  std::vector<Event> events = raw.events();
  for (auto& ev : events)
    ev.sample = std::llround(double(ev.sample) * target_fs / fs);
  return Recording(raw.id(), raw.channels(), target_fs, std::move(data),
                   std::move(events));
}

OnsetReport detect_movement_onset(const Recording& emg,
                                  const onset::Config& cfg) {
  const auto cue = emg.first_event(EventLabel::AudioCue);
  require(cue.has_value(), ErrorKind::Validation,
          "onset: recording '" + emg.id() + "' has no audio_cue event");
  OnsetReport report;
  std::vector<double> row(static_cast<std::size_t>(emg.n_samples()));
  for (Eigen::Index c = 0; c < emg.n_channels(); ++c) {
    for (Eigen::Index i = 0; i < emg.n_samples(); ++i)
      row[static_cast<std::size_t>(i)] = emg.data()(c, i);
    const auto env = dsp::envelope(row, emg.fs());
    report.per_channel.push_back(onset::detect(env, emg.fs(), cue->sample, cfg));
  }
  report.fused = onset::fuse(report.per_channel);
  return report;
}

namespace {

struct ClassSpec {
  ClassLabel label;
  EventLabel anchor;
  double start_s, end_s;
};

// negative class first, positive second
std::pair<ClassSpec, ClassSpec> task_classes(Task task) {
  switch (task) {
    case Task::RVsAo:
      return {{ClassLabel::R, EventLabel::RestOnset, 0.0, 4.0},
              {ClassLabel::Ao, EventLabel::AoOnset, 0.0, 4.0}};
    case Task::AoVsMi:
      return {{ClassLabel::Ao, EventLabel::AoOnset, 0.0, 4.0},
              {ClassLabel::Mi, EventLabel::TaskOnset, 0.0, 4.0}};
    case Task::AoVsMrcp:
      return {{ClassLabel::Ao, EventLabel::TrialStart, 4.0, 6.5},
              {ClassLabel::Mrcp, EventLabel::MovementOnset, -1.5, 1.0}};
  }
  raise(ErrorKind::Validation, "bad task");
}

Eigen::MatrixXd eeg_rows(const Recording& rec) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c)
    if (rec.channels()[static_cast<std::size_t>(c)].kind == ChannelKind::Eeg)
      rows.push_back(c);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), rec.n_samples());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = rec.data().row(rows[r]);
  return out;
}

Eigen::MatrixXd eog_rows(const Recording& rec) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c)
    if (rec.channels()[static_cast<std::size_t>(c)].kind == ChannelKind::Eog)
      rows.push_back(c);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), rec.n_samples());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = rec.data().row(rows[r]);
  return out;
}

struct CleanTrial {
  Recording eeg_only;                   // cleaned, EEG channels only
  std::optional<Event> movement_onset;  // at the preprocessed rate (ME)
};

eval::ClassifierConfig classifier_config(const Config& config) {
  eval::ClassifierConfig cc;
  cc.fs = config.target_fs;
  cc.bands = config.bands;
  cc.fbcsp = config.fbcsp;
  cc.grid = config.grid;
  return cc;
}

}  // namespace

FoldData build_fold(const std::vector<TrialRecordings>& trials,
                    std::ptrdiff_t test_index, const Config& config) {
  require(!trials.empty(), ErrorKind::Size, "pipeline: no trials");

  std::vector<Recording> preprocessed;
  std::vector<std::optional<Event>> onsets;
  preprocessed.reserve(trials.size());
  for (const auto& t : trials) {
    preprocessed.push_back(preprocess_eeg(t.eeg, config.session, config.target_fs));
    if (config.session == Session::Me) {
      const auto report = detect_movement_onset(t.emg, config.onset);
      require(report.fused.has_value(), ErrorKind::Degenerate,
              "pipeline: no movement onset detected in '" + t.emg.id() + "'");
      const double onset_time = double(*report.fused) / t.emg.fs();
      onsets.emplace_back(Event{time_to_sample(onset_time, config.target_fs),
                                EventLabel::MovementOnset, config.transition});
    } else {
      onsets.emplace_back(std::nullopt);
    }
  }

  // eye-artifact correction fitted on the training trials only
  std::optional<ica::Decomposition> dec;
  if (config.ica_enabled) {
    Eigen::Index total = 0, n_eeg = 0;
    for (std::size_t i = 0; i < preprocessed.size(); ++i) {
      if (static_cast<std::ptrdiff_t>(i) == test_index) continue;
      total += preprocessed[i].n_samples();
      n_eeg = eeg_rows(preprocessed[i]).rows();
    }
    Eigen::MatrixXd train_eeg(n_eeg, total);
    Eigen::MatrixXd train_eog(2, total);
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < preprocessed.size(); ++i) {
      if (static_cast<std::ptrdiff_t>(i) == test_index) continue;
      const Eigen::MatrixXd eeg = eeg_rows(preprocessed[i]);
      const Eigen::MatrixXd eog = eog_rows(preprocessed[i]);
      require(eog.rows() == 2, ErrorKind::Validation,
              "pipeline: ICA cleaning expects two EOG channels");
      train_eeg.middleCols(at, eeg.cols()) = eeg;
      train_eog.middleCols(at, eog.cols()) = eog;
      at += eeg.cols();
    }
    auto fitted = ica::fit(train_eeg, static_cast<int>(n_eeg), config.ica_seed);
    const Eigen::MatrixXd sources = ica::sources(fitted, train_eeg);
    ica::flag_ocular(fitted, sources, train_eog, config.ica_threshold);
    dec = std::move(fitted);
  }

  const auto [neg_spec, pos_spec] = task_classes(config.task);

  FoldData fold;
  fold.ica = dec;
  for (std::size_t i = 0; i < preprocessed.size(); ++i) {
    const auto& rec = preprocessed[i];
    Eigen::MatrixXd eeg = eeg_rows(rec);
    if (dec) eeg = ica::reconstruct(*dec, eeg);

    std::vector<ChannelMeta> meta;
    for (const auto& ch : rec.channels())
      if (ch.kind == ChannelKind::Eeg) meta.push_back(ch);
    std::vector<Event> events = rec.events();
    if (onsets[i]) events.push_back(*onsets[i]);
    std::sort(events.begin(), events.end(),
              [](const Event& a, const Event& b) { return a.sample < b.sample; });
    Recording clean(rec.id(), std::move(meta), rec.fs(), std::move(eeg),
                    std::move(events));

    eval::TrialEpochs te;
    for (const auto* spec : {&neg_spec, &pos_spec}) {
      const auto anchor = clean.first_event(spec->anchor);
      require(anchor.has_value(), ErrorKind::Validation,
              "pipeline: trial '" + clean.id() + "' lacks event '" +
                  to_string(spec->anchor) + "'");
      const Eigen::MatrixXd ep = epoch(clean, *anchor, spec->start_s, spec->end_s);
      auto windows = slide(ep, clean.fs(), config.window_s, config.shift_s);
      auto& dst = spec->label == neg_spec.label ? te.negative : te.positive;
      dst = std::move(windows);
    }
    fold.trials.push_back(std::move(te));
  }
  return fold;
}

LoocvRunReport run_loocv(const std::vector<TrialRecordings>& trials,
                         const Config& config) {
  require(trials.size() >= 3, ErrorKind::Size, "loocv: need at least 3 trials");
  const auto [neg_spec, pos_spec] = task_classes(config.task);

  eval::LoocvOptions opts;
  opts.classifier = classifier_config(config);
  opts.negative_label = neg_spec.label;
  opts.positive_label = pos_spec.label;

  LoocvRunReport out;
  std::vector<double> accs;
  for (std::size_t f = 0; f < trials.size(); ++f) {
    eval::FoldResult result;
    try {
      const FoldData fold = build_fold(trials, static_cast<std::ptrdiff_t>(f), config);
      result = eval::run_fold(fold.trials, f, opts);
    } catch (const Error& e) {
      result.fold = static_cast<int>(f);
      result.failed = true;
      result.message = e.what();
    }
    if (result.failed) {
      ++out.report.n_failed;
      out.fold_notes.push_back("fold " + std::to_string(f) + ": " + result.message);
    } else {
      accs.push_back(result.accuracy);
    }
    out.report.folds.push_back(std::move(result));
  }
  require(!accs.empty(), ErrorKind::Convergence, "loocv: every fold failed");
  double mean = 0;
  for (double a : accs) mean += a;
  mean /= double(accs.size());
  out.report.mean_accuracy = mean;
  if (accs.size() > 1) {
    double ss = 0;
    for (double a : accs) ss += (a - mean) * (a - mean);
    out.report.standard_error =
        std::sqrt(ss / double(accs.size() - 1) / double(accs.size()));
  }
  return out;
}

namespace {

Eigen::MatrixXd stream_matrix(const Recording& clean, double start_s,
                              double end_s) {
  const auto anchor = clean.first_event(EventLabel::TrialStart);
  require(anchor.has_value(), ErrorKind::Validation,
          "stream: trial '" + clean.id() + "' lacks trial_start");
  return epoch(clean, *anchor, start_s, end_s);
}

// Cleaned EEG-only recordings for one fold (shares the ICA logic above but
// keeps whole recordings for streaming).
std::vector<Recording> cleaned_recordings(
    const std::vector<TrialRecordings>& trials, std::ptrdiff_t test_index,
    const Config& config, const std::optional<ica::Decomposition>& dec) {
  std::vector<Recording> out;
  for (const auto& t : trials) {
    Recording rec = preprocess_eeg(t.eeg, config.session, config.target_fs);
    Eigen::MatrixXd eeg = eeg_rows(rec);
    if (dec) eeg = ica::reconstruct(*dec, eeg);
    std::vector<ChannelMeta> meta;
    for (const auto& ch : rec.channels())
      if (ch.kind == ChannelKind::Eeg) meta.push_back(ch);
    out.emplace_back(rec.id(), std::move(meta), rec.fs(), std::move(eeg),
                     rec.events());
  }
  (void)test_index;
  return out;
}

}  // namespace

StreamRunReport run_stream(const std::vector<TrialRecordings>& trials,
                           const Config& config) {
  require(trials.size() >= 3, ErrorKind::Size, "stream: need at least 3 trials");
  const auto timeline = ProtocolTimeline::standard(config.session, config.transition);

  StreamRunReport out;
  for (std::size_t f = 0; f < trials.size(); ++f) {
    const FoldData fold = build_fold(trials, static_cast<std::ptrdiff_t>(f), config);
    const auto cleaned = cleaned_recordings(trials, static_cast<std::ptrdiff_t>(f),
                                            config, fold.ica);

    std::vector<Eigen::MatrixXd> train_r, train_ao, train_pos;
    const auto [neg_spec, pos_spec] = task_classes(config.task);
    for (std::size_t t = 0; t < fold.trials.size(); ++t) {
      if (t == f) continue;
      for (const auto& w : fold.trials[t].negative) train_r.push_back(w);
      for (const auto& w : fold.trials[t].positive) train_pos.push_back(w);
    }

    eval::StreamParams params;
    params.window_s = config.window_s;
    params.shift_s = config.shift_s;
    params.arm_count = config.arm_count;
    params.irreversible = config.irreversible_cascade;
    params.idle_counts_as_ao = config.idle_counts_as_ao;

    const auto cc = classifier_config(config);
    if (config.session == Session::Mi) {
      require(config.task == Task::AoVsMi, ErrorKind::Validation,
              "stream: the MI cascade needs task ao_mi");
      // stage 1 additionally needs R windows: rebuild them from this fold
      Config stage1_cfg = config;
      stage1_cfg.task = Task::RVsAo;
      const FoldData fold_r = build_fold(trials, static_cast<std::ptrdiff_t>(f), stage1_cfg);
      std::vector<Eigen::MatrixXd> r_neg, r_pos;
      for (std::size_t t = 0; t < fold_r.trials.size(); ++t) {
        if (t == f) continue;
        for (const auto& w : fold_r.trials[t].negative) r_neg.push_back(w);
        for (const auto& w : fold_r.trials[t].positive) r_pos.push_back(w);
      }
      const auto stage1 = eval::train_classifier(r_neg, r_pos, ClassLabel::R,
                                                 ClassLabel::Ao, cc);
      const auto stage2 = eval::train_classifier(
          train_r, train_pos, ClassLabel::Ao, ClassLabel::Mi, cc);

      params.stream_start_s = 0.0;
      const Eigen::MatrixXd stream = stream_matrix(cleaned[f], 0.0, 13.0);
      out.per_trial.push_back(eval::cascade_stream(stream, config.target_fs,
                                                   stage1.classifier,
                                                   stage2.classifier, timeline,
                                                   params));
    } else {
      const auto model = eval::train_classifier(
          train_r, train_pos, ClassLabel::Ao, ClassLabel::Mrcp, cc);
      params.stream_start_s = 4.0;
      const Eigen::MatrixXd stream = stream_matrix(cleaned[f], 4.0, 13.0);
      out.per_trial.push_back(eval::me_stream(stream, config.target_fs,
                                              model.classifier, timeline,
                                              params));
    }
    out.totals.tp += out.per_trial.back().counts.tp;
    out.totals.fp += out.per_trial.back().counts.fp;
    out.totals.tn += out.per_trial.back().counts.tn;
    out.totals.fn += out.per_trial.back().counts.fn;
  }
  out.rates = eval::metrics(out.totals);
  return out;
}

TrainedModels train_full(const std::vector<TrialRecordings>& trials,
                         const Config& config) {
  const auto cc = classifier_config(config);
  TrainedModels models;

  const FoldData fold = build_fold(trials, -1, config);
  std::vector<Eigen::MatrixXd> neg, pos;
  for (const auto& t : fold.trials) {
    for (const auto& w : t.negative) neg.push_back(w);
    for (const auto& w : t.positive) pos.push_back(w);
  }
  const auto [neg_spec, pos_spec] = task_classes(config.task);

  if (config.session == Session::Mi && config.task == Task::AoVsMi) {
    Config stage1_cfg = config;
    stage1_cfg.task = Task::RVsAo;
    const FoldData fold_r = build_fold(trials, -1, stage1_cfg);
    std::vector<Eigen::MatrixXd> r_neg, r_pos;
    for (const auto& t : fold_r.trials) {
      for (const auto& w : t.negative) r_neg.push_back(w);
      for (const auto& w : t.positive) r_pos.push_back(w);
    }
    models.stage1 = eval::train_classifier(r_neg, r_pos, ClassLabel::R,
                                           ClassLabel::Ao, cc)
                        .classifier;
    models.stage2 =
        eval::train_classifier(neg, pos, ClassLabel::Ao, ClassLabel::Mi, cc)
            .classifier;
    models.has_stage2 = true;
  } else {
    models.stage1 = eval::train_classifier(neg, pos, neg_spec.label,
                                           pos_spec.label, cc)
                        .classifier;
    models.has_stage2 = false;
  }
  return models;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                    .get<double>();
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  return v;
}

json classifier_to_json(const eval::FbcspSvmClassifier& c) {
  json doc;
  doc["negative_class"] = to_string(c.negative_class);
  doc["positive_class"] = to_string(c.positive_class);
  doc["fs"] = c.features.fs;
  doc["m"] = c.features.options.m;
  doc["selected"] = c.features.selected;
  doc["bands"] = json::array();
  for (std::size_t b = 0; b < c.features.bands.size(); ++b) {
    json band;
    band["lo_hz"] = c.features.bands[b].lo_hz;
    band["hi_hz"] = c.features.bands[b].hi_hz;
    band["projection"] = matrix_to_json(c.features.filters[b].projection);
    band["eigenvalues"] = vector_to_json(c.features.filters[b].eigenvalues);
    json sections = json::array();
    for (const auto& s : c.features.band_filters[b].sections)
      sections.push_back({s.b0, s.b1, s.b2, s.a1, s.a2});
    band["sos"] = sections;
    band["max_pole_radius"] = c.features.band_filters[b].max_pole_radius;
    doc["bands"].push_back(band);
  }
  doc["standardized"] = c.standardized;
  if (c.standardized) {
    doc["scaler_mean"] = vector_to_json(c.scaler.mean);
    doc["scaler_scale"] = vector_to_json(c.scaler.scale);
  }
  json svm;
  svm["kernel"] = svm::to_string(c.model.kernel.kind);
  svm["gamma"] = c.model.gamma;
  svm["coef0"] = c.model.kernel.coef0;
  svm["c"] = c.model.c;
  svm["bias"] = c.model.bias;
  svm["support_vectors"] = matrix_to_json(c.model.support_vectors);
  svm["dual_coef"] = vector_to_json(c.model.dual_coef);
  doc["svm"] = svm;
  return doc;
}

eval::FbcspSvmClassifier classifier_from_json(const json& doc) {
  eval::FbcspSvmClassifier c;
  c.negative_class = parse_class_label(doc.at("negative_class"));
  c.positive_class = parse_class_label(doc.at("positive_class"));
  c.features.fs = doc.at("fs").get<double>();
  c.features.options.m = doc.at("m").get<int>();
  c.features.selected = doc.at("selected").get<std::vector<int>>();
  for (const auto& band : doc.at("bands")) {
    c.features.bands.push_back(
        {band.at("lo_hz").get<double>(), band.at("hi_hz").get<double>()});
    csp::Filters filters;
    filters.projection = matrix_from_json(band.at("projection"));
    filters.eigenvalues = vector_from_json(band.at("eigenvalues"));
    filters.m = c.features.options.m;
    c.features.filters.push_back(std::move(filters));
    dsp::IIRCoefficients coeffs;
    for (const auto& s : band.at("sos"))
      coeffs.sections.push_back({s[0].get<double>(), s[1].get<double>(),
                                 s[2].get<double>(), s[3].get<double>(),
                                 s[4].get<double>()});
    coeffs.max_pole_radius = band.at("max_pole_radius").get<double>();
    c.features.band_filters.push_back(std::move(coeffs));
  }
  c.standardized = doc.at("standardized").get<bool>();
  if (c.standardized) {
    c.scaler.mean = vector_from_json(doc.at("scaler_mean"));
    c.scaler.scale = vector_from_json(doc.at("scaler_scale"));
  }
  const auto& svm_doc = doc.at("svm");
  c.model.kernel.kind = svm::parse_kernel(svm_doc.at("kernel"));
  c.model.gamma = svm_doc.at("gamma").get<double>();
  c.model.kernel.gamma = c.model.gamma;
  c.model.kernel.coef0 = svm_doc.at("coef0").get<double>();
  c.model.c = svm_doc.at("c").get<double>();
  c.model.bias = svm_doc.at("bias").get<double>();
  c.model.support_vectors = matrix_from_json(svm_doc.at("support_vectors"));
  c.model.dual_coef = vector_from_json(svm_doc.at("dual_coef"));
  return c;
}

}  // namespace

std::string serialize_models(const TrainedModels& models, const Config& config) {
  json doc;
  doc["session"] = to_string(config.session);
  doc["task"] = to_string(config.task);
  doc["transition"] = to_string(config.transition);
  doc["stage1"] = classifier_to_json(models.stage1);
  if (models.has_stage2) doc["stage2"] = classifier_to_json(models.stage2);
  return doc.dump(2) + "\n";
}

TrainedModels deserialize_models(const std::string& json_text) {
  TrainedModels models;
  try {
    const json doc = json::parse(json_text);
    models.stage1 = classifier_from_json(doc.at("stage1"));
    if (doc.contains("stage2")) {
      models.stage2 = classifier_from_json(doc.at("stage2"));
      models.has_stage2 = true;
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::Io, std::string("model file: ") + e.what());
  }
  return models;
}

std::vector<TrialRecordings> load_trials(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorKind::Io,
          "dataset directory '" + dir.string() + "' does not exist");
  std::vector<std::string> stems;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 9 && name.substr(name.size() - 9) == "_eeg.json")
      stems.push_back(name.substr(0, name.size() - 9));
  }
  std::sort(stems.begin(), stems.end());
  require(!stems.empty(), ErrorKind::Io,
          "no trial bundles under '" + dir.string() + "'");

  std::vector<TrialRecordings> trials;
  for (const auto& stem : stems) {
    auto eeg = io::read_bundle(dir / (stem + "_eeg"));
    auto emg = io::read_bundle(dir / (stem + "_emg"));
    trials.push_back({std::move(eeg.recording), std::move(emg.recording)});
  }
  return trials;
}

std::string fold_table_text(const eval::LoocvReport& report) {
  std::ostringstream out;
  out << "# fold  accuracy  n_test  kernel  C  gamma  cv_accuracy  status\n";
  for (const auto& f : report.folds) {
    out << f.fold + 1 << "  ";
    if (f.failed) {
      out << "-  " << f.n_test << "  -  -  -  -  FAILED(" << f.message << ")\n";
      continue;
    }
    out << f.accuracy << "  " << f.n_test << "  "
        << svm::to_string(f.selected.kernel.kind) << "  " << f.selected.c
        << "  ";
    if (f.selected.kernel.kind == svm::KernelKind::Linear) out << "-";
    else if (f.selected.kernel.gamma) out << *f.selected.kernel.gamma;
    else out << "auto";
    out << "  " << f.cv_accuracy << "  ok\n";
  }
  out << "mean " << report.mean_accuracy << "\n";
  out << "se " << report.standard_error << "\n";
  return out.str();
}

std::string stream_raster_text(const StreamRunReport& report) {
  std::ostringstream out;
  out << "# one row per trial; per-window decoded class (R / A=AO / M=MI or "
         "P=MRCP)\n";
  for (const auto& trial : report.per_trial) {
    for (const auto c : trial.decisions) {
      switch (c) {
        case ClassLabel::R: out << 'R'; break;
        case ClassLabel::Ao: out << 'A'; break;
        case ClassLabel::Mi: out << 'M'; break;
        case ClassLabel::Mrcp: out << 'P'; break;
      }
    }
    out << "\n";
  }
  return out.str();
}

std::string stream_rates_text(const StreamRunReport& report) {
  std::ostringstream out;
  const auto print_rate = [&out](const char* name, const eval::Rate& r) {
    out << name << " ";
    if (r.defined()) out << 100.0 * r.value();
    else out << "undefined";
    out << "\n";
  };
  out << "# per-trial TP FP TN FN then pooled rates (percent)\n";
  for (std::size_t i = 0; i < report.per_trial.size(); ++i) {
    const auto& c = report.per_trial[i].counts;
    out << "trial " << i + 1 << " " << c.tp << " " << c.fp << " " << c.tn
        << " " << c.fn;
    if (report.per_trial[i].switch_window)
      out << " switch_window " << *report.per_trial[i].switch_window;
    out << "\n";
  }
  print_rate("TPR", report.rates.tpr);
  print_rate("FPR", report.rates.fpr);
  print_rate("FNR", report.rates.fnr);
  return out.str();
}

}  // namespace bci::pipeline
