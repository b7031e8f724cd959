#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bci/core.hpp"
#include "bci/csp.hpp"
#include "bci/error.hpp"
#include "bci/svm.hpp"

namespace bci::eval {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Exact rational rate so identities like TPR + FNR = 1 can be checked
// without floating-point slack. den == 0 encodes "undefined", never 0.
struct Rate {
  std::int64_t num = 0, den = 0;
  bool defined() const { return den > 0; }
  double value() const { return double(num) / double(den); }
};

struct Rates {
  Rate tpr, fpr, fnr;
};

// TPR = TP/(TP+FN), FPR = FP/(FP+TN), FNR = FN/(FN+TP).
Rates metrics(const ConfusionCounts& counts);

struct WelchResult {
  double t = 0;
  double df = 0;
  double p = 1;  // two-tailed
};

// Welch two-sample t with Welch-Satterthwaite degrees of freedom; the
// two-tailed p comes from the regularized incomplete beta function.
WelchResult welch_t(std::span<const double> a, std::span<const double> b);

// Pairing aligns observations by key (multisets must match); the variance
// treatment stays unequal, so t and df equal the unpaired call.
WelchResult welch_t_paired(std::span<const double> a,
                           std::span<const std::string> keys_a,
                           std::span<const double> b,
                           std::span<const std::string> keys_b);

double student_t_two_tailed_p(double t, double df);
double regularized_incomplete_beta(double a, double b, double x);

// A fitted two-class window decoder used by the streaming evaluators.
class WindowClassifier {
 public:
  virtual ~WindowClassifier() = default;
  virtual ClassLabel classify(const Eigen::MatrixXd& window) const = 0;
};

// FBCSP features -> optional z-score -> SVM, mapping the -1/+1 decision to
// the negative/positive class label.
class FbcspSvmClassifier final : public WindowClassifier {
 public:
  fbcsp::Model features;
  svm::Standardizer scaler;
  bool standardized = false;
  svm::Model model;
  ClassLabel negative_class = ClassLabel::R;
  ClassLabel positive_class = ClassLabel::Ao;

  ClassLabel classify(const Eigen::MatrixXd& window) const override;
};

struct TrainedClassifier {
  FbcspSvmClassifier classifier;
  svm::GridResult grid;
};

struct ClassifierConfig {
  double fs = 250.0;
  std::vector<fbcsp::BandSpec> bands;
  fbcsp::Options fbcsp;
  svm::GridSpec grid;
};

// Fit FBCSP on the training windows, grid-search the SVM, train the final
// model with the winning hyperparameters on all training windows.
TrainedClassifier train_classifier(
    const std::vector<Eigen::MatrixXd>& negative_windows,
    const std::vector<Eigen::MatrixXd>& positive_windows,
    ClassLabel negative_label, ClassLabel positive_label,
    const ClassifierConfig& config);

struct StreamParams {
  double window_s = 2.0;
  double shift_s = 0.2;
  int arm_count = 5;            // consecutive AO decisions that arm stage 2
  bool irreversible = true;     // reversible mode exists for ablation only
  bool idle_counts_as_ao = true;
  double stream_start_s = 0.0;  // protocol time of the first stream sample
};

struct StreamReport {
  std::vector<ClassLabel> decisions;
  std::optional<int> switch_window;  // window whose decision armed stage 2
  ConfusionCounts counts;
  Rates rates;
};

// Two-stage pseudo-online decoding over a continuous trial. Stage 1 decodes
// R/AO; after arm_count consecutive AO decisions the machine switches to
// stage 2 (AO/MI) from the next window on, permanently unless
// irreversible == false (then arm_count consecutive stage-2 AO decisions
// drop back to stage 1). Windows are scored against the protocol state at
// their midpoint with MI detection as the positive class.
StreamReport cascade_stream(const Eigen::MatrixXd& stream, double fs,
                            const WindowClassifier& stage1,
                            const WindowClassifier& stage2,
                            const ProtocolTimeline& timeline,
                            const StreamParams& params = {});

// Single-stage AO/MRCP variant for the ME session (1 s window, 0.5 s shift,
// stream from 4 s by default); MRCP detection is the positive class.
StreamReport me_stream(const Eigen::MatrixXd& stream, double fs,
                       const WindowClassifier& model,
                       const ProtocolTimeline& timeline,
                       const StreamParams& params);

StreamParams me_stream_defaults();

// One trial's windows for a two-class task; every trial carries windows of
// both classes.
struct TrialEpochs {
  std::vector<Eigen::MatrixXd> negative;
  std::vector<Eigen::MatrixXd> positive;
};

struct LoocvOptions {
  ClassifierConfig classifier;
  ClassLabel negative_label = ClassLabel::Ao;
  ClassLabel positive_label = ClassLabel::Mi;
};

struct FoldResult {
  int fold = -1;
  double accuracy = 0;
  int n_test = 0;
  bool failed = false;
  std::string message;
  svm::Candidate selected;
  double cv_accuracy = 0;
};

struct LoocvReport {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0;
  double standard_error = 0;
  int n_failed = 0;
};

// Train on every trial except `test_index`, score window accuracy on the
// held-out trial. Training failures are reported in the result, not thrown.
FoldResult run_fold(const std::vector<TrialEpochs>& trials,
                    std::size_t test_index, const LoocvOptions& opts);

LoocvReport loocv(const std::vector<TrialEpochs>& trials,
                  const LoocvOptions& opts);

struct GrandAverage {
  Eigen::MatrixXd mean;  // channels x samples
  Eigen::MatrixXd se;
  bool se_defined = false;  // false for a single trial
};

GrandAverage grand_average(const std::vector<Eigen::MatrixXd>& epochs);

}  // namespace bci::eval
