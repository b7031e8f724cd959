#include "bci/onset.hpp"

#include <algorithm>
#include <cmath>

#include "bci/core.hpp"

namespace bci::onset {

Result detect(std::span<const double> envelope, double fs,
              std::int64_t cue_sample, const Config& config) {
  require(config.h > 0, ErrorKind::Validation, "onset: h must be positive");
  require(config.e >= 1, ErrorKind::Validation, "onset: E must be >= 1");
  const std::int64_t ref_n = time_to_sample(config.reference_window_s, fs);
  require(ref_n >= 2, ErrorKind::Validation,
          "onset: reference window too short");
  require(cue_sample >= ref_n, ErrorKind::Range,
          "onset: reference window does not fit before the cue");
  require(cue_sample < static_cast<std::int64_t>(envelope.size()),
          ErrorKind::Range, "onset: cue beyond the envelope");

  // reference stats over [cue - ref, cue), cue sample excluded
  double mu = 0;
  for (std::int64_t i = cue_sample - ref_n; i < cue_sample; ++i)
    mu += envelope[static_cast<std::size_t>(i)];
  mu /= double(ref_n);
  double ss = 0;
  for (std::int64_t i = cue_sample - ref_n; i < cue_sample; ++i) {
    const double d = envelope[static_cast<std::size_t>(i)] - mu;
    ss += d * d;
  }
  const double sigma = std::sqrt(ss / double(ref_n - 1));
  require(sigma > 0, ErrorKind::Degenerate,
          "onset: flat reference window (sigma = 0)");

  Result res;
  res.mean = mu;
  res.sd = sigma;
  res.threshold = mu + config.h * sigma;

  int run = 0;
  for (std::size_t i = static_cast<std::size_t>(cue_sample);
       i < envelope.size(); ++i) {
    if (envelope[i] > res.threshold) {
      if (++run > config.e) {  // "more than E" reads literally as >= E+1
        res.onset_sample = static_cast<std::int64_t>(i) - config.e;
        break;
      }
    } else {
      run = 0;
    }
  }
  return res;
}

std::optional<std::int64_t> fuse(const std::vector<Result>& per_channel) {
  std::optional<std::int64_t> earliest;
  for (const auto& r : per_channel)
    if (r.onset_sample && (!earliest || *r.onset_sample < *earliest))
      earliest = r.onset_sample;
  return earliest;
}

}  // namespace bci::onset
