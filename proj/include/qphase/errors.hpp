#pragma once

#include <stdexcept>
#include <string>

namespace qphase {

// Bad or inconsistent user-supplied configuration (dimensions, ranges, keys).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inputs outside the mathematical domain of an operation (non-finite points,
// densities with no support at a sample, ...).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fock-space truncation too small for the requested evaluation.
struct CutoffError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Lindblad term outside the supported symbolic expansion.
struct UnsupportedTermError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure during a solve or an optimization (non-finite loss,
// singular systems without usable fallback).
struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Explicit time step so large the linearized density update lost its sign
// on every sample.
struct StepTooLargeError : NumericsError {
  using NumericsError::NumericsError;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qphase
