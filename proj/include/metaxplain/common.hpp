#pragma once

#include <stdexcept>
#include <string>

namespace metaxplain {

// Shape mismatch in a numeric primitive. Message names the operation and the
// offending shapes.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Schema-level problems: unknown node/relation types, non-composing meta-paths.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse (e.g. backward on a detached tensor).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
struct TrainingDivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An explainer's internal optimization diverged.
struct ExplanationFailedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset / manifest / checkpoint parsing failures.
struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Experiment protocol violated (e.g. node removal isolates every train node).
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or generator parameters.
struct ParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad runtime input (NaN scores, empty test set, ...).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace metaxplain
