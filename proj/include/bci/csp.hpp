#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "bci/core.hpp"
#include "bci/dsp.hpp"
#include "bci/error.hpp"

namespace bci::csp {

struct FitOptions {
  double shrinkage = 1e-6;           // Sigma <- (1-g)Sigma + g (tr/c) I
  double shrinkage_fallback = 1e-3;  // retried automatically on rank failure
};

// Spatial filters for one two-class problem. Rows of `projection` are the
// top m and bottom m whitened-space eigenvectors composed with the
// whitening transform, ordered by descending eigenvalue, each row's
// largest-magnitude entry made positive.
struct Filters {
  Eigen::MatrixXd projection;   // 2m x channels
  Eigen::VectorXd eigenvalues;  // 2m, descending, in [0, 1]
  int m = 0;
};

// Mean of trace-normalized per-trial covariances (rows centered per trial).
Eigen::MatrixXd mean_normalized_covariance(
    const std::vector<Eigen::MatrixXd>& trials);

Filters fit_cov(const Eigen::MatrixXd& sigma_a, const Eigen::MatrixXd& sigma_b,
                int m, const FitOptions& opts = {});

Filters fit(const std::vector<Eigen::MatrixXd>& class_a,
            const std::vector<Eigen::MatrixXd>& class_b, int m,
            const FitOptions& opts = {});

// f_i = log(var(w_i x) / sum_j var(w_j x)). A zero-variance projection is
// clamped to machine epsilon and reported through `degenerate`.
Eigen::VectorXd features(const Filters& filters, const Eigen::MatrixXd& window,
                         bool* degenerate = nullptr);

}  // namespace bci::csp

namespace bci::fbcsp {

struct BandSpec {
  double lo_hz = 0;
  double hi_hz = 0;
};

// 9 bands, 4 Hz wide, 4-40 Hz.
std::vector<BandSpec> mi_bands();
// 6 bands: 0.1-0.5, then 0.5 Hz wide up to 3 Hz.
std::vector<BandSpec> me_bands();

struct Options {
  int m = 2;  // filter pairs per band
  csp::FitOptions csp;
  bool select_features = false;  // mutual-information top-k, off by default
  int k_best = 8;
  int mi_bins = 10;
};

struct Model {
  std::vector<BandSpec> bands;
  std::vector<csp::Filters> filters;              // per band
  std::vector<dsp::IIRCoefficients> band_filters; // per band, zero-phase use
  double fs = 0;
  Options options;
  std::vector<int> selected;  // empty -> all features, else sorted indices

  int feature_dim() const {
    return selected.empty()
               ? options.m * 2 * static_cast<int>(bands.size())
               : static_cast<int>(selected.size());
  }
};

Model fit(const std::vector<Eigen::MatrixXd>& class_a,
          const std::vector<Eigen::MatrixXd>& class_b, double fs,
          const std::vector<BandSpec>& bands, const Options& opts = {});

// EpochSet variant: exactly two distinct labels must be present; the lower
// enum value becomes class a.
Model fit(const EpochSet& windows, const std::vector<BandSpec>& bands,
          const Options& opts = {});

Eigen::VectorXd transform(const Model& model, const Eigen::MatrixXd& window);

// Binned mutual information between one feature column and binary labels,
// used by the optional selection step; exposed for tests.
double mutual_information(const Eigen::VectorXd& feature,
                          const std::vector<int>& labels, int bins);

}  // namespace bci::fbcsp
