#pragma once
// Run configuration: tolerance table, flat key=value config-file parsing with
// section prefixes (model., grid., tol., out.), and command-line overrides.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "grslab/kernels.hpp"
#include "grslab/model.hpp"

namespace grs {

// Every tolerance a report can test a number against.  All entries must be
// positive; fd_order is a lower bound on an observed convergence order.
struct ToleranceTable {
  double closed_form_sup = 1e-8;  // identity residual sup bound on closed-form models
  double fd_sup = 1e-4;           // identity residual sup bound on finite-difference models
  double quadrature_norm = 1e-9;  // Gram / orthonormality defect bound
  double eigen_residual = 1e-8;   // matrix eigenpair residual bound
  double gap = 1e-6;              // eigenvalue match slack and spectral-gap slack
  double cluster_rel = 1e-6;      // eigenvalue clustering, relative to spectral radius
  double match_rel = 1e-6;        // transversal classification slack
  double nu2_pair_rel = 1e-6;     // two-path second-variation relative agreement
  double unstable = 1e-6;         // second variation above this certifies instability
  double kernel_sup = 1e-6;       // |N(adjoint image)| bound
  double ric_kernel_sup = 1e-8;   // |N(Ric)| bound
  double relation = 1e-5;         // N-eigentensor consistency relation bound
  double upsilon_rel = 1e-6;      // potential-solve relative residual bound
  double pairing_asym = 1e-7;     // field-level stability-operator pairing asymmetry
  double fd_order = 1.8;          // minimum observed finite-difference convergence order
};

struct RunConfig {
  std::string model_spec = "s2";
  std::vector<std::vector<int>> resolutions;  // empty: model default
  int L = -1;                                 // basis truncation; -1: per-model default
  std::uint64_t seed = 1;                     // generated-field sampling seed
  ExecPolicy policy = ExecPolicy::OpenMP;
  ToleranceTable tol;
  std::string out_json;  // empty: write the JSON document to stdout
  std::string out_csv;   // empty: derive from out_json when a CSV is produced
};

// Command-line values that override config-file entries.
struct CliOverrides {
  std::optional<std::string> config_path;
  std::optional<std::string> model_spec;
  std::optional<std::string> res;  // e.g. "12x24" or "12x24,24x48"
  std::optional<int> L;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

// Parses the optional config file, applies CLI overrides, validates.
// Throws ConfigError on malformed input.
RunConfig load_config(const CliOverrides& cli);

// Applies one config-file line (already split into key and value).
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

// "12x24,24x48" -> {{12,24},{24,48}}.
std::vector<std::vector<int>> parse_resolutions(const std::string& text);

// Truncation level used when the config leaves L unset.
int default_truncation(const ManifoldModel& m);

// Rejects resolutions that alias the basis: every axis needs at least
// max(2L+6, 8) nodes, and the list must match the chart axis count.
void validate_resolution(const ManifoldModel& m, const std::vector<int>& per_axis, int L);

// Effective configuration as ordered key/value text, for the report echo.
std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& cfg);

}  // namespace grs
