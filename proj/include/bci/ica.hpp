#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "bci/error.hpp"

namespace bci::ica {

// Deflation FastICA fit. Unmixing rows are unit norm; the corresponding
// mixing columns absorb the scale, so mixing * unmixing is still the
// identity on the retained subspace. Components are ordered by explained
// variance, descending.
struct Decomposition {
  Eigen::MatrixXd unmixing;          // components x channels
  Eigen::MatrixXd mixing;            // channels x components
  Eigen::VectorXd channel_mean;
  Eigen::MatrixXd component_scores;  // components x eog, |pearson r|; empty
                                     // until flag_ocular runs
  std::vector<int> rejected;         // sorted component indices
  int iterations = 0;                // fixed-point iterations, all components
};

struct FitOptions {
  double tol = 1e-6;
  int max_iter = 500;
  double contrast_a = 1.0;  // log-cosh slope
  double min_samples_per_channel = 20.0;
};

// Centered data -> (whitening matrix V, whitened data Z) with cov(Z) = I.
// Raises Rank when the covariance has fewer than n_components usable
// directions.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> whiten(
    const Eigen::MatrixXd& centered, int n_components);

Decomposition fit(const Eigen::MatrixXd& data, int n_components,
                  std::uint64_t seed, const FitOptions& opts = {});

Eigen::MatrixXd sources(const Decomposition& dec, const Eigen::MatrixXd& data);

// Component j is rejected iff max over EOG channels of |pearson r| >=
// threshold. Fills dec.component_scores and dec.rejected.
std::vector<int> flag_ocular(Decomposition& dec, const Eigen::MatrixXd& srcs,
                             const Eigen::MatrixXd& eog,
                             double threshold = 0.7);

// Back-projection with the rejected components zeroed.
Eigen::MatrixXd reconstruct(const Decomposition& dec,
                            const Eigen::MatrixXd& data);

// |r| with the convention that a constant input makes the correlation 0.
double pearson(std::span<const double> a, std::span<const double> b);
double pearson_rows(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace bci::ica
