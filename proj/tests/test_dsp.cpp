#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "bci/dsp.hpp"

using namespace bci;
using namespace bci::dsp;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> sine(double freq_hz, double fs, double duration_s,
                         double amplitude = 1.0, double phase = 0.0) {
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amplitude * std::sin(2.0 * kPi * freq_hz * double(i) / fs + phase);
  return x;
}

double rms(std::span<const double> x, std::size_t lo, std::size_t hi) {
  double acc = 0;
  for (std::size_t i = lo; i < hi; ++i) acc += x[i] * x[i];
  return std::sqrt(acc / double(hi - lo));
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::min(a.size(), b.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) { ma += a[i]; mb += b[i]; }
  ma /= double(n); mb /= double(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Lag of the cross-correlation peak between x and y over central samples.
int xcorr_peak_lag(std::span<const double> x, std::span<const double> y,
                   int max_lag) {
  const auto n = static_cast<int>(std::min(x.size(), y.size()));
  const int lo = n / 4, hi = 3 * n / 4;
  int best_lag = -max_lag - 1;
  double best = -std::numeric_limits<double>::infinity();
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0;
    for (int i = lo; i < hi; ++i) acc += x[static_cast<std::size_t>(i)] *
                                         y[static_cast<std::size_t>(i + lag)];
    if (acc > best) { best = acc; best_lag = lag; }
  }
  return best_lag;
}

// Oracle: analog Butterworth magnitude at the bilinear-prewarped frequency.
// With prewarped band edges the digital response equals the analog prototype
// response at w(f) = 2 fs tan(pi f / fs), so this is computable before any
// digital design exists.
double analog_bandpass_magnitude(int order, double lo_hz, double hi_hz,
                                 double f_hz, double fs) {
  const auto warp = [fs](double f) { return 2.0 * fs * std::tan(kPi * f / fs); };
  const double wl = warp(lo_hz), wh = warp(hi_hz), w = warp(f_hz);
  const double xi = (w * w - wl * wh) / ((wh - wl) * w);
  return 1.0 / std::sqrt(1.0 + std::pow(xi, 2.0 * order));
}

double analog_lowpass_magnitude(int order, double cut_hz, double f_hz,
                                double fs) {
  const auto warp = [fs](double f) { return 2.0 * fs * std::tan(kPi * f / fs); };
  const double ratio = warp(f_hz) / warp(cut_hz);
  return 1.0 / std::sqrt(1.0 + std::pow(ratio, 2.0 * order));
}

// Independent stability re-check straight from the published coefficients.
double max_root_radius(const IIRCoefficients& c) {
  double worst = 0;
  for (const auto& q : c.sections) {
    const std::complex<double> disc =
        std::sqrt(std::complex<double>(q.a1 * q.a1 - 4.0 * q.a2, 0.0));
    worst = std::max({worst, std::abs((-q.a1 + disc) / 2.0),
                      std::abs((-q.a1 - disc) / 2.0)});
  }
  return worst;
}

}  // namespace

TEST_CASE("design hits the documented endpoint gains") {
  SUBCASE("lowpass passes DC") {
    auto c = design({2, FilterKind::Lowpass, 3.0, 0.0, 250.0});
    CHECK(magnitude_at(c, 0.0, 250.0) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("bandpass kills DC and Nyquist") {
    auto c = design({2, FilterKind::Bandpass, 4.0, 8.0, 250.0});
    CHECK(magnitude_at(c, 0.0, 250.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(magnitude_at(c, 125.0, 250.0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("highpass passes Nyquist") {
    auto c = design({2, FilterKind::Highpass, 0.05, 0.0, 250.0});
    CHECK(magnitude_at(c, 125.0, 250.0) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("designed magnitude matches the analog prototype oracle") {
  // 8-12 Hz band at 250 Hz, probed at 9.8 Hz (close to the geometric centre)
  auto c = design({2, FilterKind::Bandpass, 8.0, 12.0, 250.0});
  const double expected = analog_bandpass_magnitude(2, 8.0, 12.0, 9.8, 250.0);
  CHECK(magnitude_at(c, 9.8, 250.0) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(magnitude_at(c, 9.8, 250.0) >= 0.95);

  // a couple of off-centre probes
  for (double f : {5.0, 8.0, 10.0, 12.0, 20.0}) {
    const double want = analog_bandpass_magnitude(2, 8.0, 12.0, f, 250.0);
    CHECK(magnitude_at(c, f, 250.0) == doctest::Approx(want).epsilon(1e-9));
  }

  auto lp = design({8, FilterKind::Lowpass, 30.0, 0.0, 250.0});
  for (double f : {1.0, 15.0, 30.0, 60.0, 100.0}) {
    const double want = analog_lowpass_magnitude(8, 30.0, f, 250.0);
    CHECK(magnitude_at(lp, f, 250.0) == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("design rejects edges at or beyond Nyquist") {
  CHECK_THROWS_AS(design({2, FilterKind::Lowpass, 125.0, 0.0, 250.0}), Error);
  CHECK_THROWS_AS(design({2, FilterKind::Bandpass, 4.0, 130.0, 250.0}), Error);
  CHECK_THROWS_AS(design({2, FilterKind::Bandpass, 8.0, 8.0, 250.0}), Error);
}

TEST_CASE("numerically stiff bands raise a design error instead of garbage") {
  IIRSpec s{2, FilterKind::Bandpass, 0.1, 0.1 + 1e-7, 250.0};
  try {
    design(s);
    FAIL("expected a design error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Design);
  }
  // the ME bank's 0.1-0.5 Hz band is stiff but must remain designable
  auto c = design({2, FilterKind::Bandpass, 0.1, 0.5, 250.0});
  CHECK(c.max_pole_radius < 1.0 - 1e-8);
}

TEST_CASE("random valid specs always design stable filters") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> order_dist(1, 8);
  std::uniform_int_distribution<int> kind_dist(0, 3);
  for (int i = 0; i < 500; ++i) {
    IIRSpec s;
    s.fs = 50.0 + 3950.0 * u(rng);
    s.order = order_dist(rng);
    const double nyq = s.fs / 2;
    switch (kind_dist(rng)) {
      case 0:
        s.kind = FilterKind::Lowpass;
        s.edge_lo_hz = nyq * (0.002 + 0.99 * u(rng));
        break;
      case 1:
        s.kind = FilterKind::Highpass;
        s.edge_lo_hz = nyq * (0.002 + 0.99 * u(rng));
        break;
      case 2: {
        s.kind = FilterKind::Bandpass;
        const double lo = nyq * (0.002 + 0.9 * u(rng));
        const double hi = lo + (nyq * 0.995 - lo) * (0.05 + 0.9 * u(rng));
        s.edge_lo_hz = lo;
        s.edge_hi_hz = hi;
        break;
      }
      default:
        s.kind = FilterKind::Notch;
        s.edge_lo_hz = nyq * (0.01 + 0.98 * u(rng));
        s.notch_q = 1.0 + 99.0 * u(rng);
        break;
    }
    const auto c = design(s);
    CHECK(c.max_pole_radius < 1.0 - 1e-8);
    CHECK(max_root_radius(c) < 1.0 - 1e-9);
  }
}

TEST_CASE("filtfilt is zero-phase and applies |H|^2") {
  const double fs = 250.0;

  SUBCASE("constant survives a lowpass") {
    auto c = design({2, FilterKind::Lowpass, 3.0, 0.0, fs});
    std::vector<double> x(1000, 2.5);
    auto y = filtfilt(x, c);
    for (double v : y) CHECK(v == doctest::Approx(2.5).epsilon(1e-6));
  }

  SUBCASE("6 Hz sine through the 4-8 Hz band") {
    auto c = design({2, FilterKind::Bandpass, 4.0, 8.0, fs});
    auto x = sine(6.0, fs, 10.0);
    auto y = filtfilt(x, c);
    CHECK(xcorr_peak_lag(x, y, 30) == 0);
    const double expected = std::pow(magnitude_at(c, 6.0, fs), 2.0);
    const double measured =
        rms(y, y.size() / 4, 3 * y.size() / 4) * std::numbers::sqrt2;
    CHECK(measured == doctest::Approx(expected).epsilon(0.02));
  }

  SUBCASE("50 Hz notch removes at least 30 dB") {
    auto c = design({2, FilterKind::Notch, 50.0, 0.0, fs, 30.0});
    auto x = sine(50.0, fs, 10.0);
    auto y = filtfilt(x, c);
    const double in = rms(x, x.size() / 4, 3 * x.size() / 4);
    const double out = rms(y, y.size() / 4, 3 * y.size() / 4);
    CHECK(out / in <= std::pow(10.0, -30.0 / 20.0));
  }

  SUBCASE("empty signal is a size error") {
    auto c = design({2, FilterKind::Lowpass, 3.0, 0.0, fs});
    std::vector<double> empty;
    CHECK_THROWS_AS(filtfilt(empty, c), Error);
  }
}

TEST_CASE("filtfilt time-reversal symmetry and linearity") {
  const double fs = 250.0;
  auto c = design({2, FilterKind::Bandpass, 4.0, 8.0, fs});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(1500), y(1500);
  for (auto& v : x) v = g(rng);
  for (auto& v : y) v = g(rng);

  SUBCASE("time reversal") {
    auto fwd = filtfilt(x, c);
    std::vector<double> xr(x.rbegin(), x.rend());
    auto rev = filtfilt(xr, c);
    std::reverse(rev.begin(), rev.end());
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(fwd[i] == doctest::Approx(rev[i]).epsilon(1e-9));
  }

  SUBCASE("linearity") {
    const double a = 2.25, b = -0.75;
    std::vector<double> mix(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];
    auto fm = filtfilt(mix, c);
    auto fx = filtfilt(x, c);
    auto fy = filtfilt(y, c);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(fm[i] == doctest::Approx(a * fx[i] + b * fy[i]).epsilon(1e-9));
  }
}

TEST_CASE("resample") {
  SUBCASE("duration is preserved 1200 -> 250") {
    std::vector<double> x(1200, 1.0);
    auto y = resample(x, 1200.0, 250.0);
    CHECK(y.size() == 250);
  }

  SUBCASE("identity when rates match") {
    auto x = sine(10.0, 250.0, 1.0);
    auto y = resample(x, 250.0, 250.0);
    REQUIRE(y.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
  }

  SUBCASE("10 Hz sine lands on the analytic 250 Hz grid") {
    auto x = sine(10.0, 1200.0, 2.0);
    auto y = resample(x, 1200.0, 250.0);
    auto ref = sine(10.0, 250.0, 2.0);
    REQUIRE(y.size() == ref.size());
    CHECK(pearson(y, ref) > 0.99);
  }

  SUBCASE("round trip correlates > 0.999 for band-limited input") {
    const double fs = 250.0;
    std::vector<double> x(1000, 0.0);
    for (double f : {3.0, 11.0, 27.0, 40.0}) {
      auto s = sine(f, fs, 4.0, 1.0, 0.3 * f);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += s[i];
    }
    auto up = resample(x, fs, 1200.0);
    auto back = resample(up, 1200.0, fs);
    REQUIRE(back.size() == x.size());
    CHECK(pearson(back, x) > 0.999);
  }
}

TEST_CASE("teager-kaiser energy operator") {
  SUBCASE("constant maps to zero") {
    std::vector<double> x(100, 3.7);
    for (double v : tkeo(x)) CHECK(v == doctest::Approx(0.0));
  }

  SUBCASE("ramp maps to one") {
    std::vector<double> x(100);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = double(i);
    auto psi = tkeo(x);
    for (std::size_t i = 1; i + 1 < x.size(); ++i)
      CHECK(psi[i] == doctest::Approx(1.0));
  }

  SUBCASE("sine maps to the constant A^2 sin^2(Omega)") {
    const double amp = 1.7, omega = 0.35;
    std::vector<double> x(400);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = amp * std::sin(omega * double(i) + 0.2);
    auto psi = tkeo(x);
    const double expected = amp * amp * std::sin(omega) * std::sin(omega);
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
      CHECK(psi[i] == doctest::Approx(expected).epsilon(1e-9));
      lo = std::min(lo, psi[i]);
      hi = std::max(hi, psi[i]);
    }
    CHECK(hi - lo < 1e-9);  // interior is exactly flat
    CHECK(psi.front() == psi[1]);
    CHECK(psi.back() == psi[psi.size() - 2]);
  }

  SUBCASE("too short is a size error") {
    std::vector<double> x = {1.0, 2.0};
    CHECK_THROWS_AS(tkeo(x), Error);
  }
}

TEST_CASE("EMG envelope") {
  const double fs = 250.0;

  SUBCASE("zero in, zero out") {
    std::vector<double> x(2500, 0.0);
    for (double v : envelope(x, fs)) CHECK(v == doctest::Approx(0.0));
  }

  SUBCASE("DC offset dies in the TKEO") {
    std::vector<double> x(2500, 5.0);
    for (double v : envelope(x, fs))
      CHECK(std::abs(v) < 1e-9);
  }

  SUBCASE("envelope peaks near the centre of a modulated noise burst") {
    // EMG-like burst: 40-80 Hz noise under a Hann profile centred at 5 s.
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    const double dur = 10.0, b_lo = 4.0, b_hi = 6.0;
    const auto n = static_cast<std::size_t>(dur * fs);
    std::vector<double> carrier(n);
    for (auto& v : carrier) v = g(rng);
    carrier = filtfilt(carrier, design({2, FilterKind::Bandpass, 40.0, 80.0, fs}));
    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = double(i) / fs;
      if (t >= b_lo && t < b_hi) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * (t - b_lo) / (b_hi - b_lo));
        x[i] = 2.0 * w * carrier[i];
      }
    }
    auto env = envelope(x, fs);
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < env.size(); ++i)
      if (env[i] > env[argmax]) argmax = i;
    const double t_max = double(argmax) / fs;
    CHECK(t_max >= b_lo);
    CHECK(t_max <= b_hi);
    CHECK(std::abs(t_max - 0.5 * (b_lo + b_hi)) <= 0.25);
  }
}
