// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace avsr {

// Dimension or temporal-alignment violations. Messages name the offending
// shapes so the caller can see both sides.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid layer/stream/run configuration (bad mode tag, probability outside
// [0,1], missing prerequisite checkpoint, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API contract violations: non-scalar loss to backward(), both modalities
// absent, mismatched prediction/label counts.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file (WAV, clip tensor, PGM, checkpoint).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Degenerate numeric input: zero-power waveform, empty WER reference.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint incompatible with the running configuration.
struct VersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced NaN/inf loss.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Curriculum filtering left nothing to train on.
struct SchedulingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace avsr
