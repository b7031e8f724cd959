#include "bci/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace bci::eval {

Rates metrics(const ConfusionCounts& c) {
  require(c.tp >= 0 && c.fp >= 0 && c.tn >= 0 && c.fn >= 0,
          ErrorKind::Validation, "metrics: negative counts");
  Rates r;
  r.tpr = {c.tp, c.tp + c.fn};
  r.fpr = {c.fp, c.fp + c.tn};
  r.fnr = {c.fn, c.fn + c.tp};
  return r;
}

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16, kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

struct MeanVar {
  double mean = 0, var = 0;  // unbiased variance
  std::size_t n = 0;
};

MeanVar mean_var(std::span<const double> x) {
  MeanVar mv;
  mv.n = x.size();
  for (double v : x) mv.mean += v;
  mv.mean /= double(mv.n);
  for (double v : x) mv.var += (v - mv.mean) * (v - mv.mean);
  mv.var /= double(mv.n - 1);
  return mv;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  require(a > 0 && b > 0, ErrorKind::Validation, "ibeta: bad parameters");
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_tailed_p(double t, double df) {
  require(df > 0, ErrorKind::Validation, "p-value: df must be positive");
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

WelchResult welch_t(std::span<const double> a, std::span<const double> b) {
  require(a.size() >= 2 && b.size() >= 2, ErrorKind::Size,
          "welch: need at least two observations per set");
  const auto ma = mean_var(a);
  const auto mb = mean_var(b);
  const double sa = ma.var / double(ma.n);
  const double sb = mb.var / double(mb.n);
  require(sa + sb > 0, ErrorKind::Degenerate,
          "welch: zero variance in both sets");

  WelchResult r;
  r.t = (ma.mean - mb.mean) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) /
         (sa * sa / double(ma.n - 1) + sb * sb / double(mb.n - 1));
  r.p = student_t_two_tailed_p(r.t, r.df);
  return r;
}

WelchResult welch_t_paired(std::span<const double> a,
                           std::span<const std::string> keys_a,
                           std::span<const double> b,
                           std::span<const std::string> keys_b) {
  require(a.size() == keys_a.size() && b.size() == keys_b.size(),
          ErrorKind::Shape, "welch: key count mismatch");
  require(a.size() == b.size(), ErrorKind::Shape,
          "welch: paired sets must have equal size");

  std::multimap<std::string, double> rhs;
  for (std::size_t i = 0; i < b.size(); ++i) rhs.emplace(keys_b[i], b[i]);
  std::vector<double> aligned_a(a.begin(), a.end());
  std::vector<double> aligned_b;
  std::vector<std::size_t> order(a.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return keys_a[i] < keys_a[j];
  });
  std::vector<double> sorted_a;
  for (std::size_t i : order) {
    auto it = rhs.find(keys_a[i]);
    require(it != rhs.end(), ErrorKind::Validation,
            "welch: no partner for key '" + keys_a[i] + "'");
    sorted_a.push_back(a[i]);
    aligned_b.push_back(it->second);
    rhs.erase(it);
  }
  // alignment only: the statistic itself stays the unequal-variance form
  return welch_t(sorted_a, aligned_b);
}

ClassLabel FbcspSvmClassifier::classify(const Eigen::MatrixXd& window) const {
  Eigen::VectorXd f = fbcsp::transform(features, window);
  if (standardized) f = scaler.apply(f);
  const auto pred = svm::predict(model, f.transpose());
  return pred.labels(0) > 0 ? positive_class : negative_class;
}

TrainedClassifier train_classifier(
    const std::vector<Eigen::MatrixXd>& negative_windows,
    const std::vector<Eigen::MatrixXd>& positive_windows,
    ClassLabel negative_label, ClassLabel positive_label,
    const ClassifierConfig& config) {
  require(!negative_windows.empty() && !positive_windows.empty(),
          ErrorKind::Size, "train: both classes need windows");

  TrainedClassifier out;
  out.classifier.negative_class = negative_label;
  out.classifier.positive_class = positive_label;
  out.classifier.features = fbcsp::fit(negative_windows, positive_windows,
                                       config.fs, config.bands, config.fbcsp);

  const auto n_neg = static_cast<Eigen::Index>(negative_windows.size());
  const auto n_pos = static_cast<Eigen::Index>(positive_windows.size());
  Eigen::MatrixXd x(n_neg + n_pos, out.classifier.features.feature_dim());
  Eigen::VectorXi y(n_neg + n_pos);
  for (Eigen::Index i = 0; i < n_neg; ++i) {
    x.row(i) = fbcsp::transform(out.classifier.features,
                                negative_windows[static_cast<std::size_t>(i)])
                   .transpose();
    y(i) = -1;
  }
  for (Eigen::Index i = 0; i < n_pos; ++i) {
    x.row(n_neg + i) =
        fbcsp::transform(out.classifier.features,
                         positive_windows[static_cast<std::size_t>(i)])
            .transpose();
    y(n_neg + i) = 1;
  }

  out.grid = svm::grid_search(x, y, config.grid);

  Eigen::MatrixXd x_final = x;
  out.classifier.standardized = config.grid.standardize;
  if (config.grid.standardize) {
    out.classifier.scaler.fit(x);
    x_final = out.classifier.scaler.apply(x);
  }
  out.classifier.model = svm::train(x_final, y, out.grid.best.c,
                                    out.grid.best.kernel, config.grid.train);
  return out;
}

namespace {

struct Scorer {
  ConfusionCounts counts;
  // positive = MI (cascade) or MRCP (me stream); idle handling per params
  void score(ClassLabel predicted, State truth, ClassLabel positive,
             bool idle_counts_as_ao) {
    if (truth == State::Idle && !idle_counts_as_ao) return;
    const bool truth_positive = truth == State::Task;
    const bool predicted_positive = predicted == positive;
    if (predicted_positive && truth_positive) ++counts.tp;
    else if (predicted_positive && !truth_positive) ++counts.fp;
    else if (!predicted_positive && truth_positive) ++counts.fn;
    else ++counts.tn;
  }
};

}  // namespace

StreamReport cascade_stream(const Eigen::MatrixXd& stream, double fs,
                            const WindowClassifier& stage1,
                            const WindowClassifier& stage2,
                            const ProtocolTimeline& timeline,
                            const StreamParams& params) {
  const auto windows = slide(stream, fs, params.window_s, params.shift_s);
  StreamReport report;
  Scorer scorer;
  bool armed = false;
  int run = 0;

  for (std::size_t k = 0; k < windows.size(); ++k) {
    ClassLabel decision;
    if (!armed) {
      decision = stage1.classify(windows[k]);
      if (decision == ClassLabel::Ao) {
        if (++run >= params.arm_count) {
          armed = true;  // stage 2 takes over from the next window
          report.switch_window = static_cast<int>(k);
          run = 0;
        }
      } else {
        run = 0;
      }
    } else {
      decision = stage2.classify(windows[k]);
      if (!params.irreversible) {
        if (decision == ClassLabel::Ao) {
          if (++run >= params.arm_count) {
            armed = false;
            run = 0;
          }
        } else {
          run = 0;
        }
      }
    }
    report.decisions.push_back(decision);

    const double midpoint =
        params.stream_start_s + double(k) * params.shift_s + params.window_s / 2.0;
    scorer.score(decision, timeline.state_at(midpoint), ClassLabel::Mi,
                 params.idle_counts_as_ao);
  }
  report.counts = scorer.counts;
  report.rates = metrics(report.counts);
  return report;
}

StreamParams me_stream_defaults() {
  StreamParams p;
  p.window_s = 1.0;
  p.shift_s = 0.5;
  p.stream_start_s = 4.0;
  return p;
}

StreamReport me_stream(const Eigen::MatrixXd& stream, double fs,
                       const WindowClassifier& model,
                       const ProtocolTimeline& timeline,
                       const StreamParams& params) {
  const auto windows = slide(stream, fs, params.window_s, params.shift_s);
  StreamReport report;
  Scorer scorer;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const ClassLabel decision = model.classify(windows[k]);
    report.decisions.push_back(decision);
    const double midpoint =
        params.stream_start_s + double(k) * params.shift_s + params.window_s / 2.0;
    scorer.score(decision, timeline.state_at(midpoint), ClassLabel::Mrcp,
                 params.idle_counts_as_ao);
  }
  report.counts = scorer.counts;
  report.rates = metrics(report.counts);
  return report;
}

FoldResult run_fold(const std::vector<TrialEpochs>& trials,
                    std::size_t test_index, const LoocvOptions& opts) {
  require(test_index < trials.size(), ErrorKind::Range,
          "loocv: test index out of range");
  FoldResult result;
  result.fold = static_cast<int>(test_index);

  std::vector<Eigen::MatrixXd> train_neg, train_pos;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    if (t == test_index) continue;
    for (const auto& w : trials[t].negative) train_neg.push_back(w);
    for (const auto& w : trials[t].positive) train_pos.push_back(w);
  }

  const auto& test = trials[test_index];
  result.n_test = static_cast<int>(test.negative.size() + test.positive.size());

  try {
    const auto trained =
        train_classifier(train_neg, train_pos, opts.negative_label,
                         opts.positive_label, opts.classifier);
    result.selected = trained.grid.best;
    result.cv_accuracy = trained.grid.best_accuracy;

    int correct = 0;
    for (const auto& w : test.negative)
      if (trained.classifier.classify(w) == opts.negative_label) ++correct;
    for (const auto& w : test.positive)
      if (trained.classifier.classify(w) == opts.positive_label) ++correct;
    result.accuracy = result.n_test > 0
                          ? double(correct) / double(result.n_test)
                          : 0.0;
  } catch (const Error& e) {
    result.failed = true;
    result.message = e.what();
  }
  return result;
}

LoocvReport loocv(const std::vector<TrialEpochs>& trials,
                  const LoocvOptions& opts) {
  require(trials.size() >= 3, ErrorKind::Size,
          "loocv: need at least three trials");
  LoocvReport report;
  std::vector<double> accs;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    report.folds.push_back(run_fold(trials, t, opts));
    const auto& fold = report.folds.back();
    if (fold.failed) ++report.n_failed;
    else accs.push_back(fold.accuracy);
  }
  require(!accs.empty(), ErrorKind::Convergence, "loocv: every fold failed");
  report.mean_accuracy =
      std::accumulate(accs.begin(), accs.end(), 0.0) / double(accs.size());
  if (accs.size() > 1) {
    double ss = 0;
    for (double a : accs)
      ss += (a - report.mean_accuracy) * (a - report.mean_accuracy);
    report.standard_error =
        std::sqrt(ss / double(accs.size() - 1) / double(accs.size()));
  }
  return report;
}

GrandAverage grand_average(const std::vector<Eigen::MatrixXd>& epochs) {
  require(!epochs.empty(), ErrorKind::Size, "grand average: no epochs");
  const Eigen::Index rows = epochs.front().rows();
  const Eigen::Index cols = epochs.front().cols();
  for (const auto& e : epochs)
    require(e.rows() == rows && e.cols() == cols, ErrorKind::Shape,
            "grand average: epoch shapes differ");

  GrandAverage out;
  out.mean = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& e : epochs) out.mean += e;
  out.mean /= double(epochs.size());

  out.se = Eigen::MatrixXd::Zero(rows, cols);
  if (epochs.size() > 1) {
    for (const auto& e : epochs)
      out.se += (e - out.mean).cwiseProduct(e - out.mean);
    out.se = (out.se / double(epochs.size() - 1)).cwiseSqrt() /
             std::sqrt(double(epochs.size()));
    out.se_defined = true;
  }
  return out;
}

}  // namespace bci::eval
