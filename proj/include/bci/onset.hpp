#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bci/error.hpp"

namespace bci::onset {

struct Config {
  double h = 10.0;                 // threshold multiplier in T = mu + h*sigma
  int e = 5;                       // onset needs a run of MORE than e samples
  double reference_window_s = 2.0; // ends at the audio cue, half-open
};

struct Result {
  std::optional<std::int64_t> onset_sample;
  double threshold = 0;  // T = mu + h*sigma, exactly
  double mean = 0;       // reference mean
  double sd = 0;         // unbiased (n-1) reference standard deviation
};

// Scan the envelope from the cue onward for the first run of strictly more
// than config.e consecutive samples above T. Reference statistics come from
// [cue - reference_window_s, cue). A flat reference (sigma = 0) is an error.
Result detect(std::span<const double> envelope, double fs,
              std::int64_t cue_sample, const Config& config = {});

// Earliest onset across channels; empty when no channel fires.
std::optional<std::int64_t> fuse(const std::vector<Result>& per_channel);

}  // namespace bci::onset
