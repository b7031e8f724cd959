#include "bci/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>

namespace bci::dsp {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;
constexpr double kMaxPoleRadius = 1.0 - 1e-8;

struct Zpk {
  std::vector<cplx> zeros;
  std::vector<cplx> poles;
  double gain = 1.0;
};

// Analog Butterworth prototype: N poles on the unit circle in the left
// half-plane, no zeros, unity DC gain.
Zpk butterworth_prototype(int order) {
  Zpk zpk;
  zpk.poles.reserve(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    const double theta = kPi * (2.0 * k + order + 1.0) / (2.0 * order);
    zpk.poles.emplace_back(std::cos(theta), std::sin(theta));
  }
  return zpk;
}

double prewarp(double freq_hz, double fs) {
  return 2.0 * fs * std::tan(kPi * freq_hz / fs);
}

void lp_to_lp(Zpk& zpk, double w) {
  for (auto& p : zpk.poles) p *= w;
  zpk.gain *= std::pow(w, double(zpk.poles.size() - zpk.zeros.size()));
  for (auto& z : zpk.zeros) z *= w;
}

void lp_to_hp(Zpk& zpk, double w) {
  // H(w/s): poles invert, one zero at the origin per pole. For the all-pole
  // prototype the gain correction prod(-z)/prod(-p) has magnitude one.
  cplx prod_p(1.0, 0.0);
  for (auto& p : zpk.poles) {
    prod_p *= -p;
    p = w / p;
  }
  zpk.gain /= prod_p.real();
  zpk.zeros.assign(zpk.poles.size(), cplx(0.0, 0.0));
}

void lp_to_bp(Zpk& zpk, double w_lo, double w_hi) {
  const double bw = w_hi - w_lo;
  const double w0_sq = w_lo * w_hi;
  std::vector<cplx> poles;
  poles.reserve(zpk.poles.size() * 2);
  for (const auto& p : zpk.poles) {
    const cplx half = p * bw * 0.5;
    const cplx disc = std::sqrt(half * half - w0_sq);
    poles.push_back(half + disc);
    poles.push_back(half - disc);
  }
  zpk.gain *= std::pow(bw, double(zpk.poles.size() - zpk.zeros.size()));
  zpk.zeros.assign(zpk.poles.size(), cplx(0.0, 0.0));
  zpk.poles = std::move(poles);
}

void bilinear(Zpk& zpk, double fs) {
  const double fs2 = 2.0 * fs;
  cplx num(1.0, 0.0), den(1.0, 0.0);
  for (auto& z : zpk.zeros) {
    num *= fs2 - z;
    z = (fs2 + z) / (fs2 - z);
  }
  for (auto& p : zpk.poles) {
    den *= fs2 - p;
    p = (fs2 + p) / (fs2 - p);
  }
  zpk.gain *= (num / den).real();
  // Degree deficiency maps zeros at infinity to z = -1.
  while (zpk.zeros.size() < zpk.poles.size()) zpk.zeros.emplace_back(-1.0, 0.0);
}

// Group a digital zpk into second-order sections. Poles are processed
// nearest the unit circle first and paired with the closest remaining zeros;
// an odd design leaves one real pole in a trailing first-order section.
// The overall gain lands in the first section.
IIRCoefficients zpk_to_sos(const Zpk& zpk) {
  std::vector<cplx> pole_reps;   // one per conjugate pair
  std::vector<cplx> real_poles;
  for (const auto& p : zpk.poles) {
    if (p.imag() > 1e-12) pole_reps.push_back(p);
    else if (p.imag() >= -1e-12) real_poles.push_back(p);
  }
  std::sort(real_poles.begin(), real_poles.end(),
            [](const cplx& a, const cplx& b) { return std::abs(a) > std::abs(b); });

  std::vector<cplx> zeros = zpk.zeros;  // all real (+-1) or conjugate pairs
  auto take_nearest = [&zeros](const cplx& ref) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < zeros.size(); ++i) {
      const double d = std::abs(zeros[i] - ref);
      if (d < best_d) { best_d = d; best = i; }
    }
    cplx z = zeros[best];
    zeros.erase(zeros.begin() + static_cast<std::ptrdiff_t>(best));
    return z;
  };

  struct PolePair { cplx p1, p2; bool first_order; };
  std::vector<PolePair> pairs;
  for (const auto& p : pole_reps) pairs.push_back({p, std::conj(p), false});
  // real poles pair among themselves; an odd count leaves a 1st-order tail
  std::size_t i = 0;
  for (; i + 1 < real_poles.size(); i += 2)
    pairs.push_back({real_poles[i], real_poles[i + 1], false});
  std::optional<cplx> lone;
  if (i < real_poles.size()) lone = real_poles[i];

  std::sort(pairs.begin(), pairs.end(), [](const PolePair& a, const PolePair& b) {
    return std::max(std::abs(a.p1), std::abs(a.p2)) >
           std::max(std::abs(b.p1), std::abs(b.p2));
  });

  IIRCoefficients out;
  out.max_pole_radius = 0;
  for (const auto& pr : pairs) {
    out.max_pole_radius =
        std::max({out.max_pole_radius, std::abs(pr.p1), std::abs(pr.p2)});
    const cplx z1 = take_nearest(pr.p1);
    const cplx z2 = std::abs(z1.imag()) > 1e-12 ? take_nearest(std::conj(z1))
                                                : take_nearest(pr.p2);
    Biquad bq;
    bq.b0 = 1.0;
    bq.b1 = -(z1 + z2).real();
    bq.b2 = (z1 * z2).real();
    bq.a1 = -(pr.p1 + pr.p2).real();
    bq.a2 = (pr.p1 * pr.p2).real();
    out.sections.push_back(bq);
  }
  if (lone) {
    out.max_pole_radius = std::max(out.max_pole_radius, std::abs(*lone));
    Biquad bq;
    bq.b0 = 1.0;
    if (!zeros.empty()) bq.b1 = -take_nearest(*lone).real();
    bq.a1 = -lone->real();
    out.sections.push_back(bq);
  }

  out.sections.front().b0 *= zpk.gain;
  out.sections.front().b1 *= zpk.gain;
  out.sections.front().b2 *= zpk.gain;
  return out;
}

IIRCoefficients design_notch(const IIRSpec& spec) {
  const double f0 = spec.edge_lo_hz;
  require(f0 > 0 && f0 < spec.fs / 2, ErrorKind::Design,
          "notch centre must lie strictly inside (0, fs/2)");
  require(spec.notch_q > 0, ErrorKind::Design, "notch Q must be positive");
  const double w0 = 2.0 * kPi * f0 / spec.fs;
  const double alpha = std::sin(w0) / (2.0 * spec.notch_q);
  const double a0 = 1.0 + alpha;
  Biquad bq;
  bq.b0 = 1.0 / a0;
  bq.b1 = -2.0 * std::cos(w0) / a0;
  bq.b2 = 1.0 / a0;
  bq.a1 = -2.0 * std::cos(w0) / a0;
  bq.a2 = (1.0 - alpha) / a0;
  IIRCoefficients out;
  out.sections.push_back(bq);
  const double disc = bq.a1 * bq.a1 - 4.0 * bq.a2;
  out.max_pole_radius =
      disc < 0 ? std::sqrt(bq.a2)
               : std::max(std::abs((-bq.a1 + std::sqrt(disc)) / 2.0),
                          std::abs((-bq.a1 - std::sqrt(disc)) / 2.0));
  return out;
}

// One biquad step, direct form II transposed. State carries across calls.
inline double biquad_step(const Biquad& c, double x, double& s1, double& s2) {
  const double y = c.b0 * x + s1;
  s1 = c.b1 * x - c.a1 * y + s2;
  s2 = c.b2 * x - c.a2 * y;
  return y;
}

// Steady-state section state for a unit-level input, used to suppress the
// start-up transient (scaled by the actual first sample at run time).
struct SectionZi {
  double s1 = 0, s2 = 0;
};

std::vector<SectionZi> steady_state(const IIRCoefficients& c) {
  std::vector<SectionZi> zi(c.sections.size());
  double level = 1.0;  // DC level entering each section
  for (std::size_t i = 0; i < c.sections.size(); ++i) {
    const Biquad& q = c.sections[i];
    const double denom = 1.0 + q.a1 + q.a2;
    const double h1 = (q.b0 + q.b1 + q.b2) / denom;
    zi[i].s2 = (q.b2 - q.a2 * h1) * level;
    zi[i].s1 = (q.b1 + q.b2 - (q.a1 + q.a2) * h1) * level;
    level *= h1;
  }
  return zi;
}

void sos_filter_inplace(std::vector<double>& x, const IIRCoefficients& c,
                        const std::vector<SectionZi>& zi, double scale) {
  for (std::size_t s = 0; s < c.sections.size(); ++s) {
    double s1 = zi[s].s1 * scale;
    double s2 = zi[s].s2 * scale;
    const Biquad& q = c.sections[s];
    for (double& v : x) v = biquad_step(q, v, s1, s2);
  }
}

// Continued-fraction rational approximation of fs_to/fs_from.
std::pair<std::int64_t, std::int64_t> to_ratio(double fs_to, double fs_from) {
  const double target = fs_to / fs_from;
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double x = target;
  for (int i = 0; i < 64; ++i) {
    const auto a = static_cast<std::int64_t>(std::floor(x));
    const std::int64_t p2 = a * p1 + p0;
    const std::int64_t q2 = a * q1 + q0;
    if (q2 > 100000) break;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    if (std::abs(double(p1) / double(q1) - target) < 1e-12 * target) break;
    const double frac = x - double(a);
    if (frac < 1e-15) break;
    x = 1.0 / frac;
  }
  require(q1 > 0 && p1 > 0, ErrorKind::Validation, "resample: bad rate ratio");
  return {p1, q1};  // L, M
}

}  // namespace

IIRCoefficients design(const IIRSpec& spec) {
  require(spec.fs > 0, ErrorKind::Design, "design: fs must be positive");
  if (spec.kind == FilterKind::Notch) return design_notch(spec);

  require(spec.order >= 1, ErrorKind::Design, "design: order must be >= 1");
  const double nyq = spec.fs / 2;
  std::ostringstream band;

  Zpk zpk = butterworth_prototype(spec.order);
  switch (spec.kind) {
    case FilterKind::Lowpass:
    case FilterKind::Highpass: {
      const double f = spec.edge_lo_hz;
      band << f << " Hz";
      require(f > 0 && f < nyq, ErrorKind::Design,
              "design: edge " + band.str() + " not strictly inside (0, " +
                  std::to_string(nyq) + ") at fs " + std::to_string(spec.fs));
      const double w = prewarp(f, spec.fs);
      if (spec.kind == FilterKind::Lowpass) lp_to_lp(zpk, w);
      else lp_to_hp(zpk, w);
      break;
    }
    case FilterKind::Bandpass: {
      band << spec.edge_lo_hz << "-" << spec.edge_hi_hz << " Hz";
      require(spec.edge_lo_hz > 0 && spec.edge_hi_hz < nyq &&
                  spec.edge_lo_hz < spec.edge_hi_hz,
              ErrorKind::Design,
              "design: band " + band.str() + " not strictly inside (0, " +
                  std::to_string(nyq) + ") at fs " + std::to_string(spec.fs));
      lp_to_bp(zpk, prewarp(spec.edge_lo_hz, spec.fs),
               prewarp(spec.edge_hi_hz, spec.fs));
      break;
    }
    case FilterKind::Notch:
      break;  // handled above
  }
  bilinear(zpk, spec.fs);
  IIRCoefficients out = zpk_to_sos(zpk);
  require(out.max_pole_radius < kMaxPoleRadius, ErrorKind::Design,
          "design: band " + band.str() + " yields pole radius " +
              std::to_string(out.max_pole_radius) +
              "; too stiff for a stable realization");
  return out;
}

std::complex<double> response_at(const IIRCoefficients& c, double freq_hz,
                                 double fs) {
  const cplx z = std::polar(1.0, -2.0 * kPi * freq_hz / fs);
  cplx h(1.0, 0.0);
  const cplx z2 = z * z;
  for (const auto& q : c.sections)
    h *= (q.b0 + q.b1 * z + q.b2 * z2) / (1.0 + q.a1 * z + q.a2 * z2);
  return h;
}

double magnitude_at(const IIRCoefficients& c, double freq_hz, double fs) {
  return std::abs(response_at(c, freq_hz, fs));
}

std::vector<double> odd_extension(std::span<const double> x,
                                  std::ptrdiff_t pad) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> ext;
  ext.reserve(static_cast<std::size_t>(n + 2 * pad));
  for (std::ptrdiff_t i = pad; i >= 1; --i)
    ext.push_back(2.0 * x[0] - x[static_cast<std::size_t>(i)]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::ptrdiff_t i = 1; i <= pad; ++i)
    ext.push_back(2.0 * x[static_cast<std::size_t>(n - 1)] -
                  x[static_cast<std::size_t>(n - 1 - i)]);
  return ext;
}

std::vector<double> filtfilt(std::span<const double> x,
                             const IIRCoefficients& c) {
  require(!x.empty(), ErrorKind::Size, "filtfilt: empty signal");
  require(!c.sections.empty(), ErrorKind::Validation, "filtfilt: no sections");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());

  const std::ptrdiff_t want =
      3 * std::max<std::ptrdiff_t>(6 * static_cast<std::ptrdiff_t>(c.sections.size()), 100);
  const std::ptrdiff_t pad = std::min(want, n - 1);

  const auto ext = odd_extension(x, pad);
  const auto zi = steady_state(c);

  // Run forward-backward and backward-forward and average. The residual
  // start-up transients of the two orders are mirror images, so the mean is
  // bit-exact under time reversal of the input.
  std::vector<double> fb = ext;
  sos_filter_inplace(fb, c, zi, fb.front());
  std::reverse(fb.begin(), fb.end());
  sos_filter_inplace(fb, c, zi, fb.front());
  std::reverse(fb.begin(), fb.end());

  std::vector<double> bf = ext;
  std::reverse(bf.begin(), bf.end());
  sos_filter_inplace(bf, c, zi, bf.front());
  std::reverse(bf.begin(), bf.end());
  sos_filter_inplace(bf, c, zi, bf.front());

  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        0.5 * (fb[static_cast<std::size_t>(pad + i)] +
               bf[static_cast<std::size_t>(pad + i)]);
  return out;
}

Eigen::MatrixXd filtfilt(const Eigen::MatrixXd& x, const IIRCoefficients& c) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index i = 0; i < x.cols(); ++i) row[static_cast<std::size_t>(i)] = x(r, i);
    const auto filtered = filtfilt(row, c);
    for (Eigen::Index i = 0; i < x.cols(); ++i) out(r, i) = filtered[static_cast<std::size_t>(i)];
  }
  return out;
}

std::vector<double> resample(std::span<const double> x, double fs_from,
                             double fs_to) {
  require(fs_from > 0 && fs_to > 0, ErrorKind::Validation,
          "resample: rates must be positive");
  require(!x.empty(), ErrorKind::Size, "resample: empty signal");
  if (std::abs(fs_from - fs_to) < 1e-12 * fs_from)
    return std::vector<double>(x.begin(), x.end());

  const auto [l, m] = to_ratio(fs_to, fs_from);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  const auto out_len = static_cast<std::size_t>(
      std::llround(double(n) * fs_to / fs_from));

  const double fs_mid = fs_from * double(l);
  IIRSpec aa;
  aa.order = 8;
  aa.kind = FilterKind::Lowpass;
  aa.edge_lo_hz = 0.45 * std::min(fs_from, fs_to);  // 0.9 x lower Nyquist
  aa.fs = fs_mid;
  const auto coeffs = design(aa);

  // Reflect-pad the *original* signal before zero-stuffing so the filter
  // transient decays inside the guard, sized from the actual pole radius.
  const double settle_mid = std::log(1e-9) / std::log(coeffs.max_pole_radius);
  const auto pad = std::min<std::ptrdiff_t>(
      n - 1,
      static_cast<std::ptrdiff_t>(settle_mid / double(l)) + 8);
  const auto padded = odd_extension(x, pad);

  // Zero-stuff by L (gain L restores the passband level).
  std::vector<double> up(padded.size() * static_cast<std::size_t>(l), 0.0);
  for (std::size_t i = 0; i < padded.size(); ++i)
    up[i * static_cast<std::size_t>(l)] = padded[i] * double(l);

  const auto filtered = filtfilt(up, coeffs);

  std::vector<double> out;
  out.reserve(out_len);
  const std::size_t offset = static_cast<std::size_t>(pad * l);
  for (std::size_t k = 0; k < out_len; ++k) {
    const std::size_t idx =
        std::min(offset + k * static_cast<std::size_t>(m), filtered.size() - 1);
    out.push_back(filtered[idx]);
  }
  return out;
}

Eigen::MatrixXd resample(const Eigen::MatrixXd& x, double fs_from,
                         double fs_to) {
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  Eigen::MatrixXd out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index i = 0; i < x.cols(); ++i) row[static_cast<std::size_t>(i)] = x(r, i);
    const auto res = resample(row, fs_from, fs_to);
    if (r == 0) out.resize(x.rows(), static_cast<Eigen::Index>(res.size()));
    for (std::size_t i = 0; i < res.size(); ++i) out(r, static_cast<Eigen::Index>(i)) = res[i];
  }
  return out;
}

std::vector<double> tkeo(std::span<const double> x) {
  require(x.size() >= 3, ErrorKind::Size, "tkeo: need at least 3 samples");
  std::vector<double> psi(x.size());
  for (std::size_t i = 1; i + 1 < x.size(); ++i)
    psi[i] = x[i] * x[i] - x[i - 1] * x[i + 1];
  psi.front() = psi[1];
  psi.back() = psi[psi.size() - 2];
  return psi;
}

std::vector<double> envelope(std::span<const double> emg, double fs) {
  require(fs >= 250.0, ErrorKind::Validation,
          "envelope: fs must be >= 250 Hz so the 15-124 Hz band fits");
  auto e = tkeo(emg);

  IIRSpec bp{2, FilterKind::Bandpass, 15.0, 124.0, fs};
  e = filtfilt(e, design(bp));
  for (double& v : e) v = std::abs(v);

  IIRSpec lp{2, FilterKind::Lowpass, 3.0, 0.0, fs};
  return filtfilt(e, design(lp));
}

}  // namespace bci::dsp
