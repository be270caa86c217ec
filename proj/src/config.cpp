#include "grslab/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

#include "grslab/errors.hpp"
#include "grslab/report.hpp"

namespace grs {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& value) {
  const char* first = value.data();
  const char* last = value.data() + value.size();
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("config value for '" + key + "' is not a number: '" + value + "'");
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  const char* first = value.data();
  const char* last = value.data() + value.size();
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("config value for '" + key + "' is not an integer: '" + value + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  const char* first = value.data();
  const char* last = value.data() + value.size();
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("config value for '" + key + "' is not an unsigned integer: '" + value +
                      "'");
  return out;
}

struct TolEntry {
  const char* name;
  double ToleranceTable::* member;
};

constexpr TolEntry kTolEntries[] = {
    {"closed_form_sup", &ToleranceTable::closed_form_sup},
    {"fd_sup", &ToleranceTable::fd_sup},
    {"quadrature_norm", &ToleranceTable::quadrature_norm},
    {"eigen_residual", &ToleranceTable::eigen_residual},
    {"gap", &ToleranceTable::gap},
    {"cluster_rel", &ToleranceTable::cluster_rel},
    {"match_rel", &ToleranceTable::match_rel},
    {"nu2_pair_rel", &ToleranceTable::nu2_pair_rel},
    {"unstable", &ToleranceTable::unstable},
    {"kernel_sup", &ToleranceTable::kernel_sup},
    {"ric_kernel_sup", &ToleranceTable::ric_kernel_sup},
    {"relation", &ToleranceTable::relation},
    {"upsilon_rel", &ToleranceTable::upsilon_rel},
    {"pairing_asym", &ToleranceTable::pairing_asym},
    {"fd_order", &ToleranceTable::fd_order},
};

std::string render_resolutions(const std::vector<std::vector<int>>& res) {
  if (res.empty()) return "default";
  std::string out;
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (i > 0) out += ',';
    for (std::size_t a = 0; a < res[i].size(); ++a) {
      if (a > 0) out += 'x';
      out += std::to_string(res[i][a]);
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<int>> parse_resolutions(const std::string& text) {
  std::vector<std::vector<int>> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string entry = trim(text.substr(pos, comma - pos));
    if (entry.empty()) throw ConfigError("empty resolution entry in '" + text + "'");
    std::vector<int> axes;
    std::size_t p = 0;
    while (p <= entry.size()) {
      const std::size_t x = std::min(entry.find('x', p), entry.size());
      const std::string num = entry.substr(p, x - p);
      const long long v = parse_int("grid.res", num);
      if (v < 1 || v > 100000) throw ConfigError("per-axis resolution out of range: '" + num + "'");
      axes.push_back(static_cast<int>(v));
      if (x == entry.size()) break;
      p = x + 1;
    }
    out.push_back(std::move(axes));
    if (comma == text.size()) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("resolution list is empty");
  return out;
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "model.spec") {
    cfg.model_spec = value;
    return;
  }
  if (key == "model.seed") {
    cfg.seed = parse_u64(key, value);
    return;
  }
  if (key == "grid.res") {
    cfg.resolutions = parse_resolutions(value);
    return;
  }
  if (key == "grid.L") {
    const long long v = parse_int(key, value);
    if (v < 0 || v > 4)
      throw ConfigError("grid.L must be between 0 and 4; got " + std::to_string(v));
    cfg.L = static_cast<int>(v);
    return;
  }
  if (key == "grid.exec") {
    cfg.policy = parse_exec_policy(value);
    return;
  }
  if (key == "out.json") {
    cfg.out_json = value;
    return;
  }
  if (key == "out.csv") {
    cfg.out_csv = value;
    return;
  }
  if (key.rfind("tol.", 0) == 0) {
    const std::string name = key.substr(4);
    for (const auto& e : kTolEntries) {
      if (name == e.name) {
        const double v = parse_double(key, value);
        if (!(v > 0.0)) throw ConfigError("tolerance '" + key + "' must be positive");
        cfg.tol.*(e.member) = v;
        return;
      }
    }
    throw ConfigError("unknown tolerance key '" + key + "'");
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig load_config(const CliOverrides& cli) {
  RunConfig cfg;

  if (cli.config_path) {
    std::ifstream f(*cli.config_path);
    if (!f) throw ConfigError("cannot read config file: " + *cli.config_path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      const std::string text = trim(line);
      if (text.empty() || text[0] == '#') continue;
      const std::size_t eq = text.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) +
                          " is not key=value: " + text);
      apply_config_entry(cfg, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    }
  }

  if (cli.model_spec) cfg.model_spec = *cli.model_spec;
  if (cli.res) cfg.resolutions = parse_resolutions(*cli.res);
  if (cli.L) {
    if (*cli.L < 0 || *cli.L > 4)
      throw ConfigError("--L must be between 0 and 4; got " + std::to_string(*cli.L));
    cfg.L = *cli.L;
  }
  if (cli.seed) cfg.seed = *cli.seed;
  if (cli.out) cfg.out_json = *cli.out;

  if (cfg.model_spec.empty()) throw ConfigError("model spec is empty");
  return cfg;
}

int default_truncation(const ManifoldModel& m) { return m.dim() >= 4 ? 1 : 2; }

void validate_resolution(const ManifoldModel& m, const std::vector<int>& per_axis, int L) {
  const std::size_t axes = m.chart.axes.size();
  if (per_axis.size() != axes)
    throw ConfigError("resolution lists " + std::to_string(per_axis.size()) +
                      " axes but the model chart has " + std::to_string(axes));
  const int need = std::max(2 * L + 6, 8);
  long long total = 1;
  for (std::size_t a = 0; a < per_axis.size(); ++a) {
    if (per_axis[a] < need)
      throw ConfigError("axis " + std::to_string(a) + " has " + std::to_string(per_axis[a]) +
                        " nodes; basis degree " + std::to_string(L) + " needs at least " +
                        std::to_string(need) + " to avoid aliasing");
    total *= per_axis[a];
    if (total > 1000000) throw ConfigError("grid exceeds 1e6 nodes; choose a smaller resolution");
  }
}

std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("model.spec", cfg.model_spec);
  out.emplace_back("model.seed", std::to_string(cfg.seed));
  out.emplace_back("grid.res", render_resolutions(cfg.resolutions));
  out.emplace_back("grid.L", cfg.L < 0 ? std::string("default") : std::to_string(cfg.L));
  out.emplace_back("grid.exec", cfg.policy == ExecPolicy::Serial ? "serial" : "openmp");
  out.emplace_back("out.json", cfg.out_json.empty() ? "-" : cfg.out_json);
  out.emplace_back("out.csv", cfg.out_csv.empty() ? "-" : cfg.out_csv);
  for (const auto& e : kTolEntries)
    out.emplace_back(std::string("tol.") + e.name, format_number(cfg.tol.*(e.member)));
  return out;
}

}  // namespace grs
