#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "bci/error.hpp"

namespace bci::tfa {

struct ErspConfig {
  std::vector<double> freqs_hz;  // defaults to 4..40 Hz in 1 Hz steps
  int n_out_times = 200;
  double cycles_lo = 3.0;   // wavelet cycles at the lowest frequency
  double cycles_hi = 15.0;  // and at the highest, linear ramp in between
  double baseline_lo_s = -1.0;
  double baseline_hi_s = 0.0;
  double p = 0.05;
  int n_boot = 2000;
  std::uint64_t seed = 0;

  double cycles_at(double f) const;
  static std::vector<double> default_freqs();
};

struct TimeFreq {
  Eigen::MatrixXd power;        // freqs x n_out_times
  std::vector<double> times_s;  // output grid, widest-wavelet edges trimmed
};

// Complex Morlet convolution per frequency; power is the squared magnitude.
// The output time grid spans the region where the widest wavelet fits, so
// edge roll-off never leaks into the result.
TimeFreq morlet_power(std::span<const double> signal, double fs,
                      double epoch_start_s, const ErspConfig& config);

struct ErspResult {
  Eigen::MatrixXd power_db;                     // 10*log10(P / baseline)
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> significant;
  Eigen::VectorXd baseline_power;               // per frequency
  std::vector<double> times_s;
  std::vector<double> freqs_hz;
};

// Trial-averaged dB power relative to the baseline interval, with a
// two-tailed bootstrap mask: for each frequency the null resamples one
// baseline bin per trial (with replacement) and averages across trials.
ErspResult ersp(const std::vector<Eigen::VectorXd>& trials, double fs,
                double epoch_start_s, const ErspConfig& config);

}  // namespace bci::tfa
