#pragma once

#include <Eigen/Core>
#include <complex>
#include <span>
#include <vector>

#include "bci/error.hpp"

namespace bci::dsp {

enum class FilterKind { Lowpass, Highpass, Bandpass, Notch };

struct IIRSpec {
  int order = 2;  // prototype order; a bandpass of order N has 2N poles
  FilterKind kind = FilterKind::Lowpass;
  double edge_lo_hz = 0;  // single edge for lowpass/highpass, centre for notch
  double edge_hi_hz = 0;  // upper edge (bandpass only)
  double fs = 0;
  double notch_q = 30.0;
};

struct Biquad {
  double b0 = 0, b1 = 0, b2 = 0;  // numerator
  double a1 = 0, a2 = 0;          // denominator (a0 normalized to 1)
};

struct IIRCoefficients {
  std::vector<Biquad> sections;
  double max_pole_radius = 0;
};

// Butterworth via bilinear transform with frequency prewarping; notch as a
// single band-reject biquad at edge_lo_hz with quality factor notch_q.
// Throws Design when an edge reaches Nyquist or a pole lands at radius
// >= 1 - 1e-8.
IIRCoefficients design(const IIRSpec& spec);

std::complex<double> response_at(const IIRCoefficients& c, double freq_hz,
                                 double fs);
double magnitude_at(const IIRCoefficients& c, double freq_hz, double fs);

// Forward-backward zero-phase filtering with odd-symmetric reflection
// padding (3 * max(6 * sections, 100) samples per edge, clamped to the
// signal length minus one). Effective magnitude response is |H|^2.
std::vector<double> filtfilt(std::span<const double> x,
                             const IIRCoefficients& c);
Eigen::MatrixXd filtfilt(const Eigen::MatrixXd& x, const IIRCoefficients& c);

// Rational polyphase resampling: upsample by L, zero-phase 8th-order
// Butterworth anti-alias lowpass at 0.9x the lower Nyquist, downsample by M.
// Output length is round(n * fs_to / fs_from).
std::vector<double> resample(std::span<const double> x, double fs_from,
                             double fs_to);
Eigen::MatrixXd resample(const Eigen::MatrixXd& x, double fs_from,
                         double fs_to);

// Teager-Kaiser energy operator psi[n] = x[n]^2 - x[n-1]*x[n+1];
// endpoints replicate the nearest interior value.
std::vector<double> tkeo(std::span<const double> x);

// EMG linear envelope: tkeo -> bandpass 15-124 Hz -> |.| -> lowpass 3 Hz,
// all zero-phase. Ringing below zero is preserved, not clamped.
std::vector<double> envelope(std::span<const double> emg, double fs);

}  // namespace bci::dsp
