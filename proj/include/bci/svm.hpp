#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bci/error.hpp"

namespace bci::svm {

enum class KernelKind { Linear, Rbf, Sigmoid };

std::string to_string(KernelKind k);
KernelKind parse_kernel(const std::string& s);

struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  std::optional<double> gamma;  // nullopt means "auto" = 1 / feature_dim
  double coef0 = 0.0;           // sigmoid only

  double resolved_gamma(Eigen::Index dim) const {
    return gamma ? *gamma : 1.0 / double(dim);
  }
};

struct TrainOptions {
  double tol = 1e-3;
  int max_iter_per_sample = 100;  // cap = 100 * n pair updates
  bool track_objective = false;
  std::size_t cache_bytes = 64ull << 20;  // kernel cache bound
};

struct Model {
  Eigen::MatrixXd support_vectors;  // nsv x d
  Eigen::VectorXd dual_coef;         // alpha_i * y_i, |coef| > 1e-12
  double bias = 0;
  KernelSpec kernel;
  double gamma = 0;  // resolved value used at fit time
  double c = 0;
  int iterations = 0;
  double final_violation = 0;
  bool converged = true;
  std::vector<double> objective_trace;  // dual objective, when tracked
};

// Two-class C-SVC via sequential minimal optimization with maximal-violating-
// pair working-set selection. Labels must be +-1 with both classes present.
// Terminates when the KKT violation drops below tol; hitting the iteration
// cap with violation > 10*tol raises Convergence.
Model train(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, double c,
            const KernelSpec& kernel, const TrainOptions& opts = {});

struct Prediction {
  Eigen::VectorXi labels;           // sign of the decision value; 0 -> -1
  Eigen::VectorXd decision_values;  // sum alpha_i y_i K(x_i, x) + b
};

Prediction predict(const Model& model, const Eigen::MatrixXd& x);

// Per-sample fold assignment; per-class counts across folds differ by at
// most one. Every class must have at least k members.
std::vector<int> stratified_kfold(const Eigen::VectorXi& y, int k,
                                  std::uint64_t seed);

// Per-dimension z-score fitted on training data only. Constant dimensions
// keep scale 1 so they pass through unchanged.
struct Standardizer {
  Eigen::VectorXd mean, scale;
  void fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

struct GridSpec {
  std::vector<KernelKind> kernels = {KernelKind::Linear, KernelKind::Rbf,
                                     KernelKind::Sigmoid};
  std::vector<double> c_values = {0.001, 0.01, 0.1, 1, 10, 25, 50, 100, 1000};
  std::vector<std::optional<double>> gammas = {std::nullopt, 0.01, 0.001,
                                               0.0001, 0.00001};
  int folds = 10;
  std::uint64_t seed = 0;
  TrainOptions train;
  bool standardize = true;
};

struct Candidate {
  KernelSpec kernel;
  double c = 1.0;
};

struct GridRow {
  Candidate candidate;
  double mean_accuracy = 0;
  bool converged = true;
};

struct GridResult {
  Candidate best;
  double best_accuracy = 0;
  std::vector<GridRow> table;
};

// Candidates enumerate kernels in listed order, then C ascending, then gamma
// in listed order; the linear kernel collapses the gamma axis. Ties keep the
// earliest candidate. Candidates whose training fails score 0, flagged.
GridResult grid_search(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                       const GridSpec& grid);

}  // namespace bci::svm
