// qperc — batch front end for the transport-through-random-lattices library.
//
// Subcommands:
//   sweep  survival plateaus over a range of bond counts B, with p05 crossings
//   scan   p05 crossings for a list of lattice geometries (aspect-ratio scan)
//   ptmap  disorder-averaged participation-ratio map of the trap-free lattice
//   curve  survival curves P(t), Pi(t) for one realization (sampled or forced)
//
// Every run writes the requested artifact atomically plus a sidecar
// `<output>.meta.json` recording the fully resolved configuration, tool
// version and wall time, so any output can be reproduced from its sidecar
// alone.  Progress goes to stderr; data only to files (or stdout when no
// output path is given).
//
// Exit codes: 0 success, 2 configuration error, 3 computation error.

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qperc/io.hpp"
#include "qperc/qperc.hpp"

namespace {

using nlohmann::ordered_json;

struct Options {
  std::string config_path;
  int nx = 2;
  int ny = 24;
  int R = 1000;
  std::uint64_t seed = 42;
  double gamma = 1.0;
  std::string b_selection = "all";  // sweep: "all" | "a:b" | comma list
  std::string mode = "nested";
  std::string specs;                // scan: "24x2,12x4,..."
  int b_single = -1;                // ptmap / curve
  int r_index = 0;                  // curve: realization index
  std::string bonds;                // curve: "jx,jy-kx,ky;..." override
  std::string time_grid = "0:100:0.5";
  int threads = 0;                  // 0: resolve from env / hardware
  std::string output;
  std::string format = "csv";
};

int parse_int(std::string_view s, const std::string& field) {
  int value = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument(field + ": expected an integer, got '" +
                                std::string(s) + "'");
  return value;
}

double parse_number(std::string_view s, const std::string& field) {
  double value = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument(field + ": expected a number, got '" +
                                std::string(s) + "'");
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

// "all" -> empty (the ensemble expands it to 0..B_max); "a:b" -> inclusive
// range; otherwise a comma-separated list.
std::vector<int> parse_b_selection(const std::string& text) {
  std::vector<int> bs;
  if (text == "all" || text.empty()) return bs;
  if (text.find(':') != std::string::npos) {
    const auto ends = split(text, ':');
    if (ends.size() != 2)
      throw std::invalid_argument("B: range must be 'lo:hi', got '" + text +
                                  "'");
    const int lo = parse_int(ends[0], "B");
    const int hi = parse_int(ends[1], "B");
    if (lo > hi)
      throw std::invalid_argument("B: empty range '" + text + "'");
    for (int b = lo; b <= hi; ++b) bs.push_back(b);
    return bs;
  }
  for (const std::string& tok : split(text, ',')) bs.push_back(parse_int(tok, "B"));
  return bs;
}

std::vector<qperc::LatticeSpec> parse_specs(const std::string& text) {
  std::vector<qperc::LatticeSpec> specs;
  for (const std::string& tok : split(text, ',')) {
    const auto dims = split(tok, 'x');
    if (dims.size() != 2)
      throw std::invalid_argument("specs: expected 'NXxNY', got '" + tok +
                                  "'");
    specs.emplace_back(parse_int(dims[0], "specs"),
                       parse_int(dims[1], "specs"));
  }
  if (specs.empty()) throw std::invalid_argument("specs: empty list");
  return specs;
}

// "jx,jy-kx,ky;..." — endpoints are 1-based lattice coordinates.  Bonds are
// normalized to ascending node order and checked against the universe rules
// (in range, nearest neighbor, no duplicates).
std::vector<qperc::Bond> parse_bonds(const std::string& text,
                                     const qperc::LatticeSpec& spec) {
  std::vector<qperc::Bond> bonds;
  std::set<std::pair<int, int>> seen;
  for (const std::string& tok : split(text, ';')) {
    const auto ends = split(tok, '-');
    if (ends.size() != 2)
      throw std::invalid_argument("bonds: expected 'jx,jy-kx,ky', got '" +
                                  tok + "'");
    const auto j = split(ends[0], ',');
    const auto k = split(ends[1], ',');
    if (j.size() != 2 || k.size() != 2)
      throw std::invalid_argument("bonds: expected 'jx,jy-kx,ky', got '" +
                                  tok + "'");
    int jx = parse_int(j[0], "bonds"), jy = parse_int(j[1], "bonds");
    int kx = parse_int(k[0], "bonds"), ky = parse_int(k[1], "bonds");
    for (auto [x, y] : {std::pair{jx, jy}, std::pair{kx, ky}})
      if (x < 1 || x > spec.nx || y < 1 || y > spec.ny)
        throw std::invalid_argument("bonds: endpoint out of range in '" + tok +
                                    "'");
    if (std::abs(jx - kx) + std::abs(jy - ky) != 1)
      throw std::invalid_argument("bonds: '" + tok +
                                  "' is not a nearest-neighbor pair");
    if (spec.node_index(jx, jy) > spec.node_index(kx, ky)) {
      std::swap(jx, kx);
      std::swap(jy, ky);
    }
    if (!seen.insert({spec.node_index(jx, jy), spec.node_index(kx, ky)})
             .second)
      throw std::invalid_argument("bonds: duplicate bond '" + tok + "'");
    bonds.push_back({static_cast<std::int16_t>(jx),
                     static_cast<std::int16_t>(jy),
                     static_cast<std::int16_t>(kx),
                     static_cast<std::int16_t>(ky)});
  }
  return bonds;
}

struct TimeGrid {
  double start = 0.0, stop = 0.0, step = 0.0;
};

TimeGrid parse_time_grid(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3)
    throw std::invalid_argument("t: expected 'start:stop:step', got '" + text +
                                "'");
  TimeGrid g{parse_number(parts[0], "t"), parse_number(parts[1], "t"),
             parse_number(parts[2], "t")};
  if (!(g.start >= 0.0) || !(g.stop >= g.start) || !(g.step > 0.0))
    throw std::invalid_argument("t: need 0 <= start <= stop and step > 0");
  return g;
}

// Config files mirror the flag names; flags given on the command line win.
void apply_config_file(const std::string& path, const std::string& command,
                       Options& opt) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("config: cannot read '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw std::invalid_argument("config: invalid JSON in '" + path +
                                "': " + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "command") {
      if (value.get<std::string>() != command)
        throw std::invalid_argument(
            "config: field 'command' (" + value.get<std::string>() +
            ") does not match the invoked subcommand '" + command + "'");
    } else if (key == "nx") {
      opt.nx = value.get<int>();
    } else if (key == "ny") {
      opt.ny = value.get<int>();
    } else if (key == "R") {
      opt.R = value.get<int>();
    } else if (key == "seed") {
      opt.seed = value.get<std::uint64_t>();
    } else if (key == "gamma") {
      opt.gamma = value.get<double>();
    } else if (key == "B") {
      if (value.is_number_integer()) {
        opt.b_single = value.get<int>();
        opt.b_selection = std::to_string(opt.b_single);
      } else if (value.is_array()) {
        std::string list;
        for (const auto& v : value) {
          if (!list.empty()) list += ',';
          list += std::to_string(v.get<int>());
        }
        opt.b_selection = list;
      } else {
        opt.b_selection = value.get<std::string>();
      }
    } else if (key == "mode") {
      opt.mode = value.get<std::string>();
    } else if (key == "specs") {
      opt.specs = value.get<std::string>();
    } else if (key == "r") {
      opt.r_index = value.get<int>();
    } else if (key == "bonds") {
      if (value.is_array()) {
        std::string text;
        for (const auto& b : value) {
          if (!text.empty()) text += ';';
          text += std::to_string(b.at(0).get<int>()) + "," +
                  std::to_string(b.at(1).get<int>()) + "-" +
                  std::to_string(b.at(2).get<int>()) + "," +
                  std::to_string(b.at(3).get<int>());
        }
        opt.bonds = text;
      } else {
        opt.bonds = value.get<std::string>();
      }
    } else if (key == "t") {
      opt.time_grid = value.get<std::string>();
    } else if (key == "threads") {
      opt.threads = value.get<int>();
    } else if (key == "output") {
      opt.output = value.get<std::string>();
    } else if (key == "format") {
      opt.format = value.get<std::string>();
    } else {
      throw std::invalid_argument("config: unknown field '" + key + "'");
    }
  }
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (requested < 0)
    throw std::invalid_argument("threads: must be positive");
  if (const char* env = std::getenv("QPERC_THREADS")) {
    const int n = parse_int(env, "QPERC_THREADS");
    if (n < 1)
      throw std::invalid_argument("QPERC_THREADS: must be positive");
    return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

bool want_json(const std::string& format) {
  if (format == "json") return true;
  if (format == "csv") return false;
  throw std::invalid_argument("format: expected 'csv' or 'json', got '" +
                              format + "'");
}

void emit(const std::string& output, const std::string& artifact,
          ordered_json meta) {
  if (output.empty()) {
    std::cout << artifact;
    return;
  }
  qperc::write_file_atomic(output, artifact);
  meta["output"] = output;
  qperc::write_file_atomic(output + ".meta.json", meta.dump(2) + "\n");
  std::cerr << "qperc: wrote " << output << " and " << output << ".meta.json"
            << std::endl;
}

ordered_json base_meta(const std::string& command, double wall_seconds) {
  return {{"tool", "qperc"},
          {"version", qperc::kVersion},
          {"schema", command + " " + std::string(qperc::kSchemaVersion)},
          {"command", command},
          {"wall_time_seconds", wall_seconds}};
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

int run_sweep(const Options& opt) {
  qperc::EnsembleConfig cfg{qperc::LatticeSpec(opt.nx, opt.ny)};
  cfg.R = opt.R;
  cfg.seed = opt.seed;
  cfg.gamma = opt.gamma;
  cfg.B_values = parse_b_selection(opt.b_selection);
  if (opt.mode == "nested")
    cfg.nested = true;
  else if (opt.mode == "independent")
    cfg.nested = false;
  else
    throw std::invalid_argument(
        "mode: expected 'nested' or 'independent', got '" + opt.mode + "'");
  cfg.threads = resolve_threads(opt.threads);

  const int nb = cfg.B_values.empty()
                     ? cfg.spec.bond_universe_size() + 1
                     : static_cast<int>(cfg.B_values.size());
  std::cerr << "qperc: sweep " << opt.nx << "x" << opt.ny << " R=" << cfg.R
            << " B-values=" << nb << " mode=" << opt.mode
            << " threads=" << cfg.threads << std::endl;

  Stopwatch watch;
  const qperc::SweepResult res = qperc::sweep(cfg);
  const double wall = watch.seconds();
  std::cerr << "qperc: sweep finished in " << wall << " s" << std::endl;

  ordered_json meta = base_meta("sweep", wall);
  meta["config"] = {{"nx", opt.nx},       {"ny", opt.ny},
                    {"R", cfg.R},         {"seed", cfg.seed},
                    {"gamma", cfg.gamma}, {"B", opt.b_selection},
                    {"mode", opt.mode},   {"threads", cfg.threads},
                    {"format", opt.format}};
  meta["crossings"] = {{"rw", qperc::crossing_json(res.rw)},
                       {"qw", qperc::crossing_json(res.qw)}};
  const std::string artifact = want_json(opt.format)
                                   ? qperc::sweep_json(res).dump(2) + "\n"
                                   : qperc::sweep_csv(res);
  emit(opt.output, artifact, std::move(meta));
  return 0;
}

int run_scan(const Options& opt) {
  if (opt.specs.empty())
    throw std::invalid_argument("specs: required for 'scan'");
  const auto specs = parse_specs(opt.specs);
  if (opt.mode != "nested" && opt.mode != "independent")
    throw std::invalid_argument(
        "mode: expected 'nested' or 'independent', got '" + opt.mode + "'");
  const int threads = resolve_threads(opt.threads);
  std::cerr << "qperc: scan over " << specs.size() << " geometries, R=" << opt.R
            << " threads=" << threads << std::endl;

  Stopwatch watch;
  const auto rows = qperc::aspect_ratio_scan(specs, opt.R, opt.seed, opt.gamma,
                                             threads, opt.mode == "nested");
  const double wall = watch.seconds();
  std::cerr << "qperc: scan finished in " << wall << " s" << std::endl;

  ordered_json meta = base_meta("scan", wall);
  meta["config"] = {{"specs", opt.specs}, {"R", opt.R},
                    {"seed", opt.seed},   {"gamma", opt.gamma},
                    {"mode", opt.mode},   {"threads", threads},
                    {"format", opt.format}};
  const std::string artifact = want_json(opt.format)
                                   ? qperc::scan_json(rows).dump(2) + "\n"
                                   : qperc::scan_csv(rows);
  emit(opt.output, artifact, std::move(meta));
  return 0;
}

int run_ptmap(const Options& opt) {
  if (opt.b_single < 0)
    throw std::invalid_argument("B: required for 'ptmap' (bonds per realization)");
  qperc::EnsembleConfig cfg{qperc::LatticeSpec(opt.nx, opt.ny)};
  cfg.R = opt.R;
  cfg.seed = opt.seed;
  cfg.threads = resolve_threads(opt.threads);
  std::cerr << "qperc: ptmap " << opt.nx << "x" << opt.ny << " B="
            << opt.b_single << " R=" << cfg.R << " threads=" << cfg.threads
            << std::endl;

  Stopwatch watch;
  const Eigen::MatrixXd xi = qperc::participation_map(cfg, opt.b_single);
  const double wall = watch.seconds();
  std::cerr << "qperc: ptmap finished in " << wall << " s" << std::endl;

  ordered_json meta = base_meta("ptmap", wall);
  meta["config"] = {{"nx", opt.nx},     {"ny", opt.ny},
                    {"B", opt.b_single}, {"R", cfg.R},
                    {"seed", cfg.seed}, {"threads", cfg.threads},
                    {"format", opt.format}};
  const std::string artifact = want_json(opt.format)
                                   ? qperc::ptmap_json(xi).dump(2) + "\n"
                                   : qperc::ptmap_csv(xi);
  emit(opt.output, artifact, std::move(meta));
  return 0;
}

int run_curve(const Options& opt) {
  const qperc::LatticeSpec spec(opt.nx, opt.ny);
  std::vector<qperc::Bond> bonds;
  ordered_json provenance;
  if (!opt.bonds.empty()) {
    bonds = parse_bonds(opt.bonds, spec);
    provenance = {{"bonds_override", opt.bonds}};
  } else {
    if (opt.b_single < 0)
      throw std::invalid_argument("B: required for 'curve' unless --bonds is given");
    const qperc::Realization real =
        qperc::sample_realization(spec, opt.b_single, opt.seed, opt.r_index);
    bonds = qperc::resolve_bonds(real);
    provenance = qperc::realization_json(real);
  }
  const TimeGrid grid = parse_time_grid(opt.time_grid);
  std::cerr << "qperc: curve " << opt.nx << "x" << opt.ny << " |bonds|="
            << bonds.size() << " t=" << opt.time_grid << std::endl;

  Stopwatch watch;
  const Eigen::MatrixXd a = qperc::build_connectivity(spec, bonds);
  const qperc::TrappedOperators ops = qperc::make_trapped(spec, a, opt.gamma);
  const auto [classical, quantum] = qperc::survival_curves_stepped(
      ops, spec, grid.start, grid.stop, grid.step);
  const double wall = watch.seconds();

  ordered_json meta = base_meta("curve", wall);
  meta["config"] = {{"nx", opt.nx},        {"ny", opt.ny},
                    {"B", opt.b_single},   {"seed", opt.seed},
                    {"r", opt.r_index},    {"gamma", opt.gamma},
                    {"t", opt.time_grid},  {"format", opt.format}};
  meta["realization"] = provenance;
  const std::string artifact =
      want_json(opt.format) ? qperc::curve_json(classical, quantum).dump(2) + "\n"
                            : qperc::curve_csv(classical, quantum);
  emit(opt.output, artifact, std::move(meta));
  return 0;
}

void add_common_flags(CLI::App* cmd, Options& opt, bool lattice_dims) {
  cmd->add_option("--config", opt.config_path,
                  "JSON config file (flags override its values)");
  if (lattice_dims) {
    cmd->add_option("--nx", opt.nx, "lattice extent in the transport direction (>= 2)");
    cmd->add_option("--ny", opt.ny, "lattice extent across the transport direction (>= 1)");
  }
  cmd->add_option("--seed", opt.seed, "master seed for the ensemble stream");
  cmd->add_option("--threads", opt.threads,
                  "worker threads (default: QPERC_THREADS, then hardware)");
  cmd->add_option("-o,--output", opt.output,
                  "output path (default: artifact to stdout, no sidecar)");
  cmd->add_option("--format", opt.format, "artifact format: csv | json");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qperc — coherent vs incoherent transport through random "
               "bond lattices with traps"};
  app.set_version_flag("--version", std::string(qperc::kVersion));
  app.require_subcommand(1);

  Options opt;

  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "survival plateaus and p05 crossings over a range of B");
  add_common_flags(sweep_cmd, opt, true);
  sweep_cmd->add_option("--R", opt.R, "realizations per B value");
  sweep_cmd->add_option("--gamma", opt.gamma, "trapping rate at the last column");
  sweep_cmd->add_option("--B", opt.b_selection,
                        "bond counts: 'all', 'lo:hi', or comma list");
  sweep_cmd->add_option("--mode", opt.mode,
                        "subset sampling: nested | independent");

  CLI::App* scan_cmd = app.add_subcommand(
      "scan", "p05 crossings for a list of lattice geometries");
  add_common_flags(scan_cmd, opt, false);
  scan_cmd->add_option("--specs", opt.specs,
                       "comma list of geometries, e.g. '24x2,7x7,2x24'");
  scan_cmd->add_option("--R", opt.R, "realizations per B value");
  scan_cmd->add_option("--gamma", opt.gamma, "trapping rate at the last column");
  scan_cmd->add_option("--mode", opt.mode,
                       "subset sampling: nested | independent");

  CLI::App* ptmap_cmd = app.add_subcommand(
      "ptmap", "disorder-averaged participation map of the trap-free lattice");
  add_common_flags(ptmap_cmd, opt, true);
  ptmap_cmd->add_option("--B", opt.b_single, "bonds per realization");
  ptmap_cmd->add_option("--R", opt.R, "realizations to average");

  CLI::App* curve_cmd = app.add_subcommand(
      "curve", "survival curves for a single realization");
  add_common_flags(curve_cmd, opt, true);
  curve_cmd->add_option("--B", opt.b_single,
                        "bonds to sample (ignored with --bonds)");
  curve_cmd->add_option("--r", opt.r_index, "realization index within the stream");
  curve_cmd->add_option("--gamma", opt.gamma, "trapping rate at the last column");
  curve_cmd->add_option("--bonds", opt.bonds,
                        "explicit bond list 'jx,jy-kx,ky;...' (bypasses sampling)");
  curve_cmd->add_option("--t", opt.time_grid, "time grid 'start:stop:step'");

  // The config file must be applied before CLI11 stores flag values (flags
  // override the file), so --config is located with a manual pre-scan.
  std::string command;
  try {
    std::string config_path;
    for (int i = 1; i < argc; ++i) {
      const std::string arg = argv[i];
      if (command.empty() && !arg.empty() && arg[0] != '-') command = arg;
      if (arg == "--config" && i + 1 < argc)
        config_path = argv[i + 1];
      else if (arg.rfind("--config=", 0) == 0)
        config_path = arg.substr(9);
    }
    if (!config_path.empty()) {
      if (command.empty())
        throw std::invalid_argument("config: a subcommand is required");
      apply_config_file(config_path, command, opt);
    }
  } catch (const std::exception& e) {
    std::cerr << "qperc: " << e.what() << std::endl;
    return 2;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sweep_cmd->parsed()) return run_sweep(opt);
    if (scan_cmd->parsed()) return run_scan(opt);
    if (ptmap_cmd->parsed()) return run_ptmap(opt);
    return run_curve(opt);
  } catch (const qperc::ComputationError& e) {
    std::cerr << "qperc: computation error: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "qperc: config error: " << e.what() << std::endl;
    return 2;
  }
}
