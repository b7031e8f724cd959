#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bci/config.hpp"
#include "bci/core.hpp"

namespace bci::io {

// A recording bundle is a file triple sharing one stem:
//   <stem>.json    header (channels, fs, subject, session, transition)
//   <stem>.f32     payload, little-endian float32, channel-major
//   <stem>.events  one event per line: sample,label,transition
struct BundleMeta {
  std::string subject = "S1";
  Session session = Session::Mi;
  Transition transition = Transition::None;
  bool standard_montage = false;
};

struct Bundle {
  Recording recording;
  BundleMeta meta;
};

void write_bundle(const std::filesystem::path& stem, const Recording& rec,
                  const BundleMeta& meta);
Bundle read_bundle(const std::filesystem::path& stem);

// Commit-through-temp write: the final file either has the full content or
// does not exist.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

std::string hash_file(const std::filesystem::path& path);  // "fnv1a64:<hex>"

// Provenance record every subcommand drops next to its outputs.
struct Manifest {
  std::string command;
  std::string version;
  std::uint64_t seed = 0;
  Config config;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::string> outputs;
};

void write_manifest(const std::filesystem::path& path, const Manifest& m);

}  // namespace bci::io
