#pragma once

// Command-level drivers behind the CLI: each turns a validated RunConfig into
// a rendered JSON report (plus a CSV eigenvalue table for spectral runs) and
// the process exit code the caller should propagate.  Configuration problems
// throw ConfigError and numerical-construction problems throw BuildError;
// tolerance failures are reported inside the document and through the exit
// code instead of by exception.

#include <string>

#include "grslab/config.hpp"

namespace grs {

struct RunOutput {
  int exit_code = 0;     // 0: all tested checks pass, 1: at least one failed
  std::string json;      // full report document, newline-terminated
  std::string csv;       // eigenvalue table (spectral runs), empty otherwise
  std::string csv_path;  // where the caller should write it; empty: nowhere
};

// Identity verification: entropy data, the structural identity suite, the
// commutator suite over seeded generated fields, the divergence-image chain,
// a cross-resolution convergence table when several resolutions are given,
// and a refinement study of the finite-difference curvature backend.
RunOutput run_verify(const RunConfig& cfg);

// Spectral survey: drift-Laplacian and weighted-Lichnerowicz spectra with
// residuals and classification, the spectral-gap check, matrix-quality
// diagnostics, a commutation trend over truncation levels, and a CSV table.
RunOutput run_spectrum(const RunConfig& cfg);

// Linear-stability analysis on an exact shrinker model: stability-system
// assembly, the instability scan with its two second-variation paths, the
// sufficiency classification, image-sector kernel checks, and eigentensor
// cross-relations, folded into a final verdict.
RunOutput run_stability(const RunConfig& cfg);

}  // namespace grs
