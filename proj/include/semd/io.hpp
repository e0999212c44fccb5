// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats and config parsing.
//
// Feature-map file ("FMAP"): magic, u32 version, u32 H/W/C, then H*W*C
// little-endian float32 values, row-major with channels fastest. Storage is
// float32; everything in memory is double.
//
// Checkpoint file ("SEMD"): magic, u32 version, topology descriptor, u64
// parameter count, parameters as little-endian float64 in topology order.
//
// Run config: line-oriented key=value text; unknown keys are rejected and
// every malformed line is reported with its line number.

#pragma once

#include "semd/core.hpp"
#include "semd/encoder.hpp"
#include "semd/train.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace semd {

struct IoError : std::runtime_error {
  enum class Code {
    kBadMagic,
    kBadVersion,
    kTruncated,
    kNonFinite,
    kBadTopology,
    kFileAccess,
  };
  IoError(Code error_code, const std::string& message)
      : std::runtime_error(message), code(error_code) {}
  Code code;
};

inline constexpr std::uint32_t kFmapVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

FeatureMap read_fmap(const std::filesystem::path& path);
// Atomic (write-temp-then-rename); payload is the map cast to float32.
void write_fmap(const FeatureMap& map, const std::filesystem::path& path);

EncoderParams read_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const EncoderParams& params, const std::filesystem::path& path);

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& message) : std::runtime_error(message) {}
};

// Recognized keys: lambda, iterations, grid_sizes, momentum, seed, steps,
// batch, lr, loss_mix, small_view. Blank lines and '#' comments are skipped.
// All problems are collected and reported together, each with its line.
TrainConfig parse_run_config(const std::string& text);
TrainConfig read_run_config(const std::filesystem::path& path);

// Loss history CSV with fixed columns step,lr,emd_ab,emd_ba,vec_ab,vec_ba,total.
void write_history_csv(const std::vector<StepRecord>& history,
                       const std::filesystem::path& path);

// Grid CSV (one line per row); values printed with round-trip precision.
void write_grid_csv(const Matrix& grid, const std::filesystem::path& path);

// Write-temp-then-rename text output.
void write_text_atomic(const std::string& text, const std::filesystem::path& path);

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

}  // namespace semd
