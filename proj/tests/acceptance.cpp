// Acceptance harness: exercises the full pipeline on the model fixtures and
// prints one timed pass/fail line per criterion.  Exits nonzero if any
// criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "grslab/fields.hpp"
#include "grslab/galerkin.hpp"
#include "grslab/models.hpp"
#include "grslab/quadrature.hpp"
#include "grslab/run.hpp"
#include "grslab/stability.hpp"
#include "grslab/weighted.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace grs;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Collects the first failure of a criterion with a short note.
struct Crit {
  bool ok = true;
  std::string note;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      note = what;
    }
  }
  void require_close(double got, double want, double tol, const std::string& what) {
    require(std::abs(got - want) <= tol,
            what + ": got " + std::to_string(got) + ", want " + std::to_string(want));
  }
  void require_below(double got, double bound, const std::string& what) {
    require(got < bound, what + " = " + std::to_string(got) + " exceeds " + std::to_string(bound));
  }
};

RunConfig make_cfg(const std::string& spec, int L,
                   std::vector<std::vector<int>> res = {}, std::uint64_t seed = 1) {
  RunConfig cfg;
  cfg.model_spec = spec;
  cfg.L = L;
  cfg.resolutions = std::move(res);
  cfg.seed = seed;
  return cfg;
}

const json* find_entry(const json& doc, const std::string& name) {
  for (const auto& entry : doc.at("results"))
    if (entry.value("name", "") == name) return &entry;
  return nullptr;
}

// Cached pipeline runs shared between criteria.
struct Ctx {
  std::map<std::string, std::pair<RunOutput, json>> stability_runs;

  const std::pair<RunOutput, json>& stability(const std::string& spec, int L) {
    auto it = stability_runs.find(spec);
    if (it == stability_runs.end()) {
      RunOutput out = run_stability(make_cfg(spec, L));
      json doc = json::parse(out.json);
      it = stability_runs.emplace(spec, std::make_pair(std::move(out), std::move(doc))).first;
    }
    return it->second;
  }
};

struct FixtureData {
  const char* spec;
  double tau;
  double potential;
  double curvature;
  double entropy;
};

const FixtureData kFixtures[] = {
    {"s2", oracle::kS2Tau, oracle::kS2F, oracle::kS2R, oracle::kS2Entropy},
    {"s3", oracle::kS3Tau, oracle::kS3F, oracle::kS3R, oracle::kS3Entropy},
    {"s2xs2", oracle::kS2xS2Tau, oracle::kS2xS2F, oracle::kS2xS2R, oracle::kS2xS2Entropy},
};

void criterion_fixtures(Crit& c) {
  for (const FixtureData& fx : kFixtures) {
    const auto t0 = std::chrono::steady_clock::now();
    const ManifoldModel m = build_model(fx.spec);
    const QuadratureGrid grid = build_grid(m, default_resolution(m));
    const std::vector<int> check = check_nodes(m, grid, 64);

    c.require_close(m.tau, fx.tau, 1e-12, std::string(fx.spec) + " tau");
    EvalContext ctx(m, grid.nodes[static_cast<std::size_t>(check.front())]);
    c.require_close(ctx.potential(0).value(), fx.potential, 1e-10,
                    std::string(fx.spec) + " potential");
    c.require_close(ctx.scalar_curvature(0).value(), fx.curvature, 1e-10,
                    std::string(fx.spec) + " scalar curvature");

    const EntropyReport ent = entropy_report(m, grid, check);
    c.require_close(ent.entropy, fx.entropy, 1e-9, std::string(fx.spec) + " entropy");
    c.require_below(ent.shrinker_residual_sup, 1e-8, std::string(fx.spec) + " soliton residual");
    c.require_below(ent.minimizer_residual1, 1e-8, std::string(fx.spec) + " stationarity residual");
    c.require_below(ent.minimizer_residual2, 1e-8, std::string(fx.spec) + " mean identity residual");

    const double dt = seconds_since(t0);
    c.require(dt < 10.0, std::string(fx.spec) + " fixture arithmetic took " +
                             std::to_string(dt) + " s (limit 10 s)");
  }
}

void criterion_identity_suite(Crit& c) {
  for (const char* spec : {"s2", "s3", "s2xs2", "ellipsoid"}) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunOutput out = run_verify(make_cfg(spec, 1));
    const double dt = seconds_since(t0);

    c.require(out.exit_code == 0, std::string(spec) + " verify exited " +
                                      std::to_string(out.exit_code));
    const json doc = json::parse(out.json);
    c.require(doc.at("verdict") == "pass", std::string(spec) + " verify verdict not pass");

    const json* suite = find_entry(doc, "identity_suite");
    c.require(suite != nullptr, std::string(spec) + " has no identity suite");
    if (suite) {
      c.require(suite->at("generated_fields") == 20,
                std::string(spec) + " ran fewer than 20 generated fields");
      for (const auto& e : suite->at("entries")) {
        if (e.value("skipped", false)) continue;
        c.require(e.at("pass") == true,
                  std::string(spec) + " identity " + e.at("key").get<std::string>() + " failed");
        if (std::string("ellipsoid") == spec) {
          const std::string key = e.at("key").get<std::string>();
          if (key == "G1" || key == "G2")
            c.require_below(e.at("value").get<double>(), 1e-4, spec + (" " + key));
        }
      }
    }
    const json* fd = find_entry(doc, "fd_backend_refinement");
    c.require(fd != nullptr && fd->at("observed_order").get<double>() >= 1.8,
              std::string(spec) + " finite-difference refinement order below 1.8");

    c.require(dt < 60.0, std::string(spec) + " identity suite took " + std::to_string(dt) +
                             " s (limit 60 s)");
  }
}

void criterion_spectral_gap(Crit& c) {
  struct GapCase {
    const char* spec;
    double lambda1;
    double bound;
    int factor_n[2];
    double factor_r[2];
    int factors;
  };
  const GapCase cases[] = {
      {"s2", -2.0, -1.0, {2, 0}, {1.0, 0.0}, 1},
      {"s3", -3.0, -2.0, {3, 0}, {1.0, 0.0}, 1},
      {"s2xs2", -2.0, -1.0, {2, 2}, {1.0, 1.0}, 2},
  };
  const auto t0 = std::chrono::steady_clock::now();
  for (const GapCase& gc : cases) {
    const RunOutput out = run_spectrum(make_cfg(gc.spec, 1));
    c.require(out.exit_code == 0, std::string(gc.spec) + " spectrum exited " +
                                      std::to_string(out.exit_code));
    const json doc = json::parse(out.json);

    const json* gap = find_entry(doc, "spectral_gap");
    c.require(gap != nullptr, std::string(gc.spec) + " has no spectral gap entry");
    if (gap) {
      c.require_close(gap->at("lambda1").get<double>(), gc.lambda1, 1e-6,
                      std::string(gc.spec) + " lambda1");
      c.require_close(gap->at("bound").get<double>(), gc.bound, 1e-12,
                      std::string(gc.spec) + " gap bound");
      c.require(gap->at("pass") == true, std::string(gc.spec) + " gap check failed");
    }

    // Every reported eigenvalue must sit on the harmonic grid of the model.
    const json* spec_entry = find_entry(doc, "scalar_spectrum");
    c.require(spec_entry != nullptr, std::string(gc.spec) + " has no scalar spectrum");
    if (spec_entry) {
      const int cap = spec_entry->at("degree_cap").get<int>();
      std::vector<double> candidates;
      if (gc.factors == 1) {
        for (int l = 0; l <= cap; ++l)
          candidates.push_back(oracle::sphere_eigenvalue(gc.factor_n[0], gc.factor_r[0], l));
      } else {
        for (int l1 = 0; l1 <= cap; ++l1)
          for (int l2 = 0; l1 + l2 <= cap; ++l2)
            candidates.push_back(oracle::sphere_eigenvalue(gc.factor_n[0], gc.factor_r[0], l1) +
                                 oracle::sphere_eigenvalue(gc.factor_n[1], gc.factor_r[1], l2));
      }
      for (const auto& v : spec_entry->at("eigenvalues")) {
        const double ev = v.get<double>();
        double best = 1e300;
        for (double cand : candidates) best = std::min(best, std::abs(ev - cand));
        c.require(best < 1e-6, std::string(gc.spec) + " eigenvalue " + std::to_string(ev) +
                                   " is " + std::to_string(best) + " from the harmonic grid");
      }
    }
  }
  const double dt = seconds_since(t0);
  c.require(dt < 30.0, "spectral gap runs took " + std::to_string(dt) + " s (limit 30 s)");
}

void criterion_kernel(Crit& c) {
  for (const FixtureData& fx : kFixtures) {
    const ManifoldModel m = build_model(fx.spec);
    const QuadratureGrid grid = build_grid(m, default_resolution(m));
    const std::vector<int> check = check_nodes(m, grid, m.dim() >= 4 ? 128 : 64);
    const ScalarSystem scalars = assemble_scalar_system(m, grid, 3);

    const OperatorApplication on_ric = stability_operator_apply(m, grid, scalars, ricci_field());
    c.require_below(sup_field_norm(m, grid, check, on_ric.field), 1e-8,
                    std::string(fx.spec) + " |N(Ric)|");

    const FieldFamily omegas = one_form_family(m, 1);
    for (int i = 0; i < omegas.count(); ++i) {
      const TensorField h = weighted_divergence_adjoint(omegas.fields[static_cast<std::size_t>(i)]);
      const OperatorApplication app = stability_operator_apply(m, grid, scalars, h);
      const double sup = sup_field_norm(m, grid, check, app.field);
      if (!(sup < 1e-6)) {
        c.require(false, std::string(fx.spec) + " |N(adjoint image)| = " + std::to_string(sup) +
                             " for generator " + omegas.provenance[static_cast<std::size_t>(i)]);
        break;
      }
    }
  }
}

void criterion_witness(Crit& c, Ctx& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& [out, doc] = ctx.stability("s2xs2", 1);
  const double dt = seconds_since(t0);

  c.require(out.exit_code == 0, "product stability exited " + std::to_string(out.exit_code));
  c.require(doc.at("verdict") == "unstable", "product verdict is not unstable");

  const json* scan = find_entry(doc, "necessary_scan");
  c.require(scan != nullptr && scan->at("scanned") == 1, "scan did not isolate one direction");
  if (scan && !scan->at("rows").empty()) {
    const json& row = scan->at("rows").front();
    c.require_close(row.at("nu2_direct").get<double>(), oracle::kWitnessSecondVariation, 1e-6,
                    "direct second variation");
    c.require_close(row.at("nu2_closed").get<double>(), oracle::kWitnessSecondVariation, 1e-6,
                    "closed-form second variation");
    c.require(row.at("unstable") == true, "witness row not marked unstable");
    c.require_below(std::abs(row.at("ric_pairing").get<double>()), 1e-8,
                    "witness curvature pairing");

    // The direction must be the difference of the two factor metrics.
    double c0 = 0.0, c1 = 0.0;
    int extras = 0;
    for (const auto& gc : row.at("generator_coefficients")) {
      const std::string g = gc.at("generator").get<std::string>();
      if (g == "metric[0]")
        c0 = gc.at("c").get<double>();
      else if (g == "metric[1]")
        c1 = gc.at("c").get<double>();
      else
        ++extras;
    }
    c.require(extras == 0, "witness direction mixes extra generators");
    c.require_close(c0, 1.0, 1e-9, "witness coefficient on the first factor metric");
    c.require_close(c1, -1.0, 1e-9, "witness coefficient on the second factor metric");
  }

  // Independent field-level confirmation of the witness direction.
  const ManifoldModel m = build_model("s2xs2");
  const QuadratureGrid grid = build_grid(m, default_resolution(m));
  const std::vector<int> check = check_nodes(m, grid, 128);
  const TensorField h = difference(factor_metric_field(0), factor_metric_field(1));
  c.require_below(sup_field_norm(m, grid, check, weighted_lichnerowicz(h)), 1e-8,
                  "witness Lichnerowicz residual");
  c.require_below(std::abs(integrate_dm(m, grid, inner_product_field(ricci_field(), h))), 1e-8,
                  "witness curvature pairing (field level)");

  c.require(dt < 60.0, "product stability run took " + std::to_string(dt) + " s (limit 60 s)");
}

void criterion_two_path(Crit& c, Ctx& ctx) {
  int scanned_total = 0;
  for (const auto& [spec, L] : std::vector<std::pair<std::string, int>>{
           {"s2", 2}, {"s3", 1}, {"s2xs2", 1}}) {
    const auto& [out, doc] = ctx.stability(spec, L);
    (void)out;
    const json* scan = find_entry(doc, "necessary_scan");
    c.require(scan != nullptr, spec + " has no scan entry");
    if (!scan) continue;
    for (const auto& row : scan->at("rows")) {
      ++scanned_total;
      c.require(row.at("pair_gap_rel").at("pass") == true,
                spec + " two-path agreement failed on " + row.at("tag").get<std::string>());
      c.require_below(row.at("pair_gap_rel").at("value").get<double>(), 1e-6,
                      spec + " two-path relative gap");
    }
  }
  c.require(scanned_total >= 1, "no eigendirection was scanned anywhere");
}

void criterion_relation(Crit& c, Ctx& ctx) {
  int rows_total = 0;
  for (const auto& [spec, L] : std::vector<std::pair<std::string, int>>{
           {"s2", 2}, {"s3", 1}, {"s2xs2", 1}}) {
    const auto& [out, doc] = ctx.stability(spec, L);
    (void)out;
    const json* rel = find_entry(doc, "eigentensor_relation");
    c.require(rel != nullptr, spec + " has no eigentensor relation entry");
    if (!rel) continue;
    for (const auto& row : rel->at("rows")) {
      ++rows_total;
      c.require_below(row.at("relation_residual").at("value").get<double>(), 1e-5,
                      spec + " relation residual at N-eigenvalue " +
                          std::to_string(row.at("n_eigenvalue").get<double>()));
      c.require(row.at("div_n_norm").at("pass") == true,
                spec + " image-divergence check failed");
    }
  }
  c.require(rows_total >= 1, "no nonzero stability eigenpair was tested");
}

void collect_quality(const json& node, Crit& c, int& blocks) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      if (it.key() == "matrix_quality" && it.value().is_object()) {
        ++blocks;
        for (const auto& [name, check] : it.value().items()) {
          if (!check.is_object() || !check.contains("value")) continue;
          c.require(check.at("pass") == true, "matrix quality check " + name + " failed");
          c.require_below(check.at("value").get<double>(), 1e-8, "matrix defect " + name);
        }
      }
      collect_quality(it.value(), c, blocks);
    }
  } else if (node.is_array()) {
    for (const auto& v : node) collect_quality(v, c, blocks);
  }
}

void criterion_adjointness(Crit& c, Ctx& ctx) {
  // Field level: the three defining pairings, by quadrature on the sphere.
  const ManifoldModel m = build_model("s2");
  const QuadratureGrid grid = build_grid(m, default_resolution(m));
  const TensorField x = scalar_field(m.ambient[0]);
  const TensorField y = scalar_field(m.ambient[1]);
  const TensorField z = scalar_field(m.ambient[2]);
  const TensorField a = sum(x, scalar_times(y, z));
  const TensorField b = difference(z, scalar_times(x, x));
  const TensorField omega = scalar_times(z, differential(x));
  const TensorField h = sum(sym_product(differential(x), differential(y)),
                            scalar_times(z, metric_field()));

  const double grad_div =
      integrate_dm(m, grid, inner_product_field(differential(a), omega)) +
      integrate_dm(m, grid, scalar_times(a, weighted_divergence(omega)));
  c.require_below(std::abs(grad_div), 1e-8, "gradient/divergence pairing defect");

  const double adj_div =
      integrate_dm(m, grid, inner_product_field(weighted_divergence_adjoint(omega), h)) -
      integrate_dm(m, grid, inner_product_field(omega, weighted_divergence(h)));
  c.require_below(std::abs(adj_div), 1e-8, "adjoint/divergence pairing defect");

  const double lap_grad =
      integrate_dm(m, grid, scalar_times(b, drift_laplacian(a))) +
      integrate_dm(m, grid, inner_product_field(differential(a), differential(b)));
  c.require_below(std::abs(lap_grad), 1e-8, "drift-Laplacian/gradient pairing defect");

  // Matrix level: every assembled system in the cached stability reports.
  int blocks = 0;
  for (const auto& [spec, pr] : ctx.stability_runs) {
    (void)spec;
    collect_quality(pr.second, c, blocks);
  }
  c.require(blocks >= 3, "expected matrix-quality blocks from every assembled system");
}

struct CliRun {
  int exit_code = -1;
  std::string out;
};

CliRun run_cli(const std::string& args) {
  const std::string cmd = std::string(GRSLAB_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  CliRun r;
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void criterion_determinism(Crit& c) {
  // Library level: identical configuration must reproduce identical bytes.
  const RunOutput s1 = run_spectrum(make_cfg("s2", 1, {{12, 24}}, 7));
  const RunOutput s2 = run_spectrum(make_cfg("s2", 1, {{12, 24}}, 7));
  c.require(s1.json == s2.json, "spectrum JSON differs between identical runs");
  c.require(s1.csv == s2.csv, "spectrum CSV differs between identical runs");

  const RunOutput v1 = run_verify(make_cfg("s2", 1, {{8, 16}}, 3));
  const RunOutput v2 = run_verify(make_cfg("s2", 1, {{8, 16}}, 3));
  c.require(v1.json == v2.json, "verify JSON differs between identical runs");

  // Tool level: the shipped binary must agree with itself byte for byte.
  const fs::path dir = fs::temp_directory_path() / "grslab_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path out = dir / "det.json";
  const fs::path csv = dir / "det.csv";
  const std::string args =
      "spectrum --model s2 --L 1 --res 12x24 --seed 7 --out " + out.string();

  const CliRun first = run_cli(args);
  c.require(first.exit_code == 0, "first tool run exited " + std::to_string(first.exit_code));
  const std::string json_bytes = slurp(out);
  const std::string csv_bytes = slurp(csv);
  const CliRun second = run_cli(args);
  c.require(second.exit_code == 0, "second tool run exited " + std::to_string(second.exit_code));
  c.require(slurp(out) == json_bytes, "tool JSON differs between identical runs");
  c.require(slurp(csv) == csv_bytes, "tool CSV differs between identical runs");
  c.require(!json_bytes.empty() && !csv_bytes.empty(), "tool wrote empty reports");
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* what;
    void (*fn)(Crit&, Ctx&);
  };
  // Wrap the context-free criteria to one signature.
  static const Entry entries[] = {
      {1, "soliton fixture constants and equation residuals",
       [](Crit& c, Ctx&) { criterion_fixtures(c); }},
      {2, "identity suite over generated fields on every model",
       [](Crit& c, Ctx&) { criterion_identity_suite(c); }},
      {3, "weighted spectral gap against the harmonic spectra",
       [](Crit& c, Ctx&) { criterion_spectral_gap(c); }},
      {4, "stability operator annihilates the gauge image and the curvature direction",
       [](Crit& c, Ctx&) { criterion_kernel(c); }},
      {5, "product instability witness found autonomously",
       [](Crit& c, Ctx& x) { criterion_witness(c, x); }},
      {6, "two-path second-variation agreement on scanned directions",
       [](Crit& c, Ctx& x) { criterion_two_path(c, x); }},
      {7, "spectral consistency relation for stability eigenpairs",
       [](Crit& c, Ctx& x) { criterion_relation(c, x); }},
      {8, "adjointness pairings and matrix symmetry defects",
       [](Crit& c, Ctx& x) { criterion_adjointness(c, x); }},
      {9, "byte-identical reports for identical configuration",
       [](Crit& c, Ctx&) { criterion_determinism(c); }},
  };

  Ctx ctx;
  int failures = 0;
  for (const Entry& e : entries) {
    Crit crit;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      e.fn(crit, ctx);
    } catch (const std::exception& ex) {
      crit.require(false, std::string("exception: ") + ex.what());
    }
    const double dt = seconds_since(t0);
    if (crit.ok) {
      std::printf("criterion %d: PASS (%.1f s) - %s\n", e.id, dt, e.what);
    } else {
      ++failures;
      std::printf("criterion %d: FAIL (%.1f s) - %s [%s]\n", e.id, dt, e.what,
                  crit.note.c_str());
    }
    std::fflush(stdout);
  }

  std::printf("%d/9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
