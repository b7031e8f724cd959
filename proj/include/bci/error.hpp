#pragma once

#include <stdexcept>
#include <string>

namespace bci {

// Categories map 1:1 to CLI exit codes; keep the list short and stable.
enum class ErrorKind {
  Validation,      // bad arguments / broken type invariants
  Range,           // index or interval outside the data
  Size,            // too short / empty input
  Shape,           // dimension mismatch between operands
  Design,          // filter design not realizable
  Rank,            // rank-deficient / singular matrix
  Convergence,     // iterative solver gave up
  Label,           // class labels unusable (single class, unknown label)
  Stratification,  // k-fold cannot stratify
  Degenerate,      // zero-variance / undefined statistic
  Io,              // file system and parse failures
  Config,          // config file problems
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) raise(kind, msg);
}

}  // namespace bci
