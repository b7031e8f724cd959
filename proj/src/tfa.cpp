#include "bci/tfa.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

namespace bci::tfa {

namespace {

constexpr double kPi = std::numbers::pi;

struct Wavelet {
  std::vector<std::complex<double>> taps;  // unit energy
  int half = 0;                            // taps.size() == 2*half + 1
};

Wavelet make_wavelet(double freq_hz, double cycles, double fs) {
  Wavelet w;
  const double sigma_t = cycles / (2.0 * kPi * freq_hz);
  w.half = static_cast<int>(std::lround(4.0 * sigma_t * fs));
  w.taps.resize(static_cast<std::size_t>(2 * w.half + 1));
  double energy = 0;
  for (int k = -w.half; k <= w.half; ++k) {
    const double t = double(k) / fs;
    const std::complex<double> tap =
        std::polar(std::exp(-t * t / (2.0 * sigma_t * sigma_t)),
                   2.0 * kPi * freq_hz * t);
    w.taps[static_cast<std::size_t>(k + w.half)] = tap;
    energy += std::norm(tap);
  }
  const double scale = 1.0 / std::sqrt(energy);
  for (auto& tap : w.taps) tap *= scale;
  return w;
}

void validate(const ErspConfig& config) {
  require(!config.freqs_hz.empty(), ErrorKind::Validation, "ersp: no frequencies");
  require(std::is_sorted(config.freqs_hz.begin(), config.freqs_hz.end()),
          ErrorKind::Validation, "ersp: frequencies must ascend");
  require(config.freqs_hz.front() > 0, ErrorKind::Validation,
          "ersp: frequencies must be positive");
  require(config.n_out_times >= 2, ErrorKind::Validation,
          "ersp: need at least two output times");
  require(config.cycles_lo >= 1.0 && config.cycles_hi >= 1.0,
          ErrorKind::Validation, "ersp: cycles must be >= 1");
  require(config.p > 0 && config.p < 1, ErrorKind::Validation,
          "ersp: p must lie in (0, 1)");
}

}  // namespace

double ErspConfig::cycles_at(double f) const {
  const double lo = freqs_hz.front(), hi = freqs_hz.back();
  if (hi <= lo) return cycles_lo;
  return cycles_lo + (cycles_hi - cycles_lo) * (f - lo) / (hi - lo);
}

std::vector<double> ErspConfig::default_freqs() {
  std::vector<double> f;
  for (double v = 4.0; v <= 40.0 + 1e-9; v += 1.0) f.push_back(v);
  return f;
}

TimeFreq morlet_power(std::span<const double> signal, double fs,
                      double epoch_start_s, const ErspConfig& config) {
  validate(config);
  const auto n = static_cast<int>(signal.size());
  require(n >= 2, ErrorKind::Size, "morlet: empty signal");

  std::vector<Wavelet> wavelets;
  wavelets.reserve(config.freqs_hz.size());
  int widest = 0;
  for (double f : config.freqs_hz) {
    wavelets.push_back(make_wavelet(f, config.cycles_at(f), fs));
    widest = std::max(widest, wavelets.back().half);
  }
  // the widest wavelet must fit inside the epoch
  require(2 * widest + 1 <= n, ErrorKind::Size,
          "morlet: wavelet at " + std::to_string(config.freqs_hz.front()) +
              " Hz (" + std::to_string(2 * widest + 1) +
              " samples) longer than the epoch (" + std::to_string(n) +
              " samples)");

  const int valid_lo = widest;
  const int valid_hi = n - 1 - widest;  // inclusive

  TimeFreq out;
  out.power.resize(static_cast<Eigen::Index>(config.freqs_hz.size()),
                   config.n_out_times);
  out.times_s.resize(static_cast<std::size_t>(config.n_out_times));

  std::vector<int> cols(static_cast<std::size_t>(config.n_out_times));
  for (int c = 0; c < config.n_out_times; ++c) {
    const double frac = double(c) / double(config.n_out_times - 1);
    cols[static_cast<std::size_t>(c)] =
        valid_lo + static_cast<int>(std::lround(frac * (valid_hi - valid_lo)));
    out.times_s[static_cast<std::size_t>(c)] =
        epoch_start_s + double(cols[static_cast<std::size_t>(c)]) / fs;
  }

  for (std::size_t fi = 0; fi < wavelets.size(); ++fi) {
    const Wavelet& w = wavelets[fi];
    for (int c = 0; c < config.n_out_times; ++c) {
      const int center = cols[static_cast<std::size_t>(c)];
      std::complex<double> acc(0.0, 0.0);
      for (int k = -w.half; k <= w.half; ++k)
        acc += signal[static_cast<std::size_t>(center + k)] *
               std::conj(w.taps[static_cast<std::size_t>(k + w.half)]);
      out.power(static_cast<Eigen::Index>(fi), c) = std::norm(acc);
    }
  }
  return out;
}

ErspResult ersp(const std::vector<Eigen::VectorXd>& trials, double fs,
                double epoch_start_s, const ErspConfig& config) {
  validate(config);
  require(trials.size() >= 2, ErrorKind::Size, "ersp: need at least two trials");
  const Eigen::Index len = trials.front().size();
  for (const auto& t : trials)
    require(t.size() == len, ErrorKind::Shape, "ersp: trial lengths differ");

  const auto n_freqs = static_cast<Eigen::Index>(config.freqs_hz.size());
  std::vector<Eigen::MatrixXd> per_trial;
  per_trial.reserve(trials.size());
  TimeFreq grid;
  for (const auto& t : trials) {
    grid = morlet_power(std::span<const double>(t.data(),
                                                static_cast<std::size_t>(t.size())),
                        fs, epoch_start_s, config);
    per_trial.push_back(grid.power);
  }

  Eigen::MatrixXd mean_power =
      Eigen::MatrixXd::Zero(n_freqs, config.n_out_times);
  for (const auto& p : per_trial) mean_power += p;
  mean_power /= double(per_trial.size());

  std::vector<int> baseline_cols;
  for (int c = 0; c < config.n_out_times; ++c) {
    const double t = grid.times_s[static_cast<std::size_t>(c)];
    if (t >= config.baseline_lo_s && t < config.baseline_hi_s)
      baseline_cols.push_back(c);
  }
  require(baseline_cols.size() >= 2, ErrorKind::Validation,
          "ersp: baseline [" + std::to_string(config.baseline_lo_s) + ", " +
              std::to_string(config.baseline_hi_s) +
              ") s covers fewer than two output bins inside the epoch");

  ErspResult out;
  out.freqs_hz = config.freqs_hz;
  out.times_s = grid.times_s;
  out.baseline_power.resize(n_freqs);
  out.power_db.resize(n_freqs, config.n_out_times);
  out.significant.resize(n_freqs, config.n_out_times);

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick_col(0, baseline_cols.size() - 1);
  std::vector<double> null_values(static_cast<std::size_t>(config.n_boot));

  for (Eigen::Index f = 0; f < n_freqs; ++f) {
    double base = 0;
    for (int c : baseline_cols) base += mean_power(f, c);
    base /= double(baseline_cols.size());
    require(base > 0, ErrorKind::Degenerate,
            "ersp: zero baseline power at " +
                std::to_string(config.freqs_hz[static_cast<std::size_t>(f)]) +
                " Hz");
    out.baseline_power(f) = base;

    for (Eigen::Index c = 0; c < config.n_out_times; ++c)
      out.power_db(f, c) = 10.0 * std::log10(mean_power(f, c) / base);

    // null: draw one baseline bin per trial, average across trials
    for (int b = 0; b < config.n_boot; ++b) {
      double acc = 0;
      for (const auto& p : per_trial)
        acc += p(f, baseline_cols[pick_col(rng)]);
      null_values[static_cast<std::size_t>(b)] = acc / double(per_trial.size());
    }
    std::sort(null_values.begin(), null_values.end());
    const auto lo_idx = static_cast<std::size_t>(
        std::floor(config.p / 2.0 * double(config.n_boot - 1)));
    const auto hi_idx = static_cast<std::size_t>(
        std::ceil((1.0 - config.p / 2.0) * double(config.n_boot - 1)));
    const double lo = null_values[lo_idx];
    const double hi = null_values[hi_idx];
    for (Eigen::Index c = 0; c < config.n_out_times; ++c)
      out.significant(f, c) = mean_power(f, c) < lo || mean_power(f, c) > hi;
  }
  return out;
}

}  // namespace bci::tfa
