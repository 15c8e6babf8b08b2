// Acceptance gate: one check per shipped claim, each printing a single
// PASS/FAIL line with the measured values next to the required band.  The
// process exits nonzero if any check fails.
//
// Usage: qperc_acceptance <path-to-qperc-cli> [--fast]
//
// The headline reproduction checks (1, 2, 8) exercise the CLI end to end —
// subprocess, CSV artifact, sidecar metadata — exactly as a user would run
// them.  The numerical-equivalence checks (4-7) call the library directly.
// --fast shrinks the ensembles for quick iteration; its verdicts are
// informational only and the banner says so.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qperc/io.hpp"
#include "qperc/qperc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Tally {
  int passed = 0;
  int failed = 0;

  void report(int criterion, bool ok, const std::string& detail) {
    std::printf("criterion %d [%s] %s\n", criterion, ok ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    (ok ? passed : failed) += 1;
  }
};

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

int run_cli(const std::string& cmd) {
  std::fprintf(stderr, "+ %s\n", cmd.c_str());
  return std::system(cmd.c_str());
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct SweepArtifact {
  bool ok = false;
  int rows = 0;
  bool rw_found = false, qw_found = false;
  int b05_rw = -1, b05_qw = -1;
  double p05_rw = NAN, p05_qw = NAN;
};

SweepArtifact load_sweep(const fs::path& csv) {
  SweepArtifact art;
  const std::string text = read_file(csv);
  if (text.empty()) return art;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#' && line.find("B,p,") != 0) ++art.rows;

  std::ifstream meta(csv.string() + ".meta.json");
  if (!meta) return art;
  json j = json::parse(meta, nullptr, false);
  if (j.is_discarded()) return art;
  const auto& rw = j["crossings"]["rw"];
  const auto& qw = j["crossings"]["qw"];
  art.rw_found = rw.value("found", false);
  art.qw_found = qw.value("found", false);
  if (art.rw_found) {
    art.b05_rw = rw["B05"].get<int>();
    art.p05_rw = rw["p05"].get<double>();
  }
  if (art.qw_found) {
    art.b05_qw = qw["B05"].get<int>();
    art.p05_qw = qw["p05"].get<double>();
  }
  art.ok = true;
  return art;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: qperc_acceptance <qperc-cli> [--fast]\n");
    return 2;
  }
  const fs::path cli = argv[1];
  const bool fast = argc > 2 && std::string(argv[2]) == "--fast";
  if (!fs::exists(cli)) {
    std::fprintf(stderr, "qperc_acceptance: CLI not found at %s\n",
                 cli.string().c_str());
    return 2;
  }

  const fs::path work =
      fs::temp_directory_path() / "qperc_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  const int sweep_R = fast ? 60 : 1000;
  const int scan_R = fast ? 40 : 250;
  std::printf("qperc acceptance%s: CLI=%s work=%s\n",
              fast ? " (FAST MODE — informational only)" : "",
              cli.string().c_str(), work.string().c_str());
  std::fflush(stdout);

  Tally tally;

  // ---- criterion 1: portrait sweep 2x24, nested, R=1000 -------------------
  const fs::path portrait = work / "portrait.csv";
  {
    const std::string cmd = q(cli) + " sweep --nx 2 --ny 24 --R " +
                            std::to_string(sweep_R) +
                            " --seed 42 --mode nested --threads 1 -o " +
                            q(portrait);
    const int rc = run_cli(cmd);
    const SweepArtifact art = load_sweep(portrait);
    const bool rw_ok = art.rw_found && std::abs(art.b05_rw - 22) <= 2 &&
                       std::abs(art.p05_rw - 0.314) <= 0.03;
    const bool qw_ok = art.qw_found && std::abs(art.b05_qw - 56) <= 3 &&
                       std::abs(art.p05_qw - 0.80) <= 0.04;
    tally.report(
        1, rc == 0 && art.ok && art.rows == 71 && rw_ok && qw_ok,
        "portrait 2x24 R=" + std::to_string(sweep_R) + ": rows=" +
            std::to_string(art.rows) + " B05_rw=" + std::to_string(art.b05_rw) +
            " (need 22±2), p05_rw=" + fmt(art.p05_rw) +
            " (need 0.314±0.03); B05_qw=" + std::to_string(art.b05_qw) +
            " (need 56±3), p05_qw=" + fmt(art.p05_qw) + " (need 0.80±0.04)");
  }

  // ---- criterion 2: landscape sweep 24x2, R=1000 ---------------------------
  {
    const fs::path landscape = work / "landscape.csv";
    const std::string cmd = q(cli) + " sweep --nx 24 --ny 2 --R " +
                            std::to_string(sweep_R) +
                            " --seed 42 --mode nested --threads 1 -o " +
                            q(landscape);
    const int rc = run_cli(cmd);
    const SweepArtifact art = load_sweep(landscape);
    const bool rw_ok = art.rw_found && std::abs(art.p05_rw - 0.757) <= 0.03;
    const bool gap_ok = art.rw_found && art.qw_found &&
                        art.p05_qw > art.p05_rw &&
                        art.p05_qw <= art.p05_rw + 0.06;
    tally.report(2, rc == 0 && art.ok && rw_ok && gap_ok,
                 "landscape 24x2 R=" + std::to_string(sweep_R) + ": p05_rw=" +
                     fmt(art.p05_rw) + " (need 0.757±0.03), p05_qw=" +
                     fmt(art.p05_qw) + " (need in (p05_rw, p05_rw+0.06])");
  }

  // ---- criterion 3: aspect-ratio scan --------------------------------------
  {
    const fs::path scan = work / "scan.csv";
    const std::string cmd =
        q(cli) + " scan --specs 24x2,12x4,7x7,4x12,2x24 --R " +
        std::to_string(scan_R) + " --seed 42 --threads 1 -o " + q(scan);
    const int rc = run_cli(cmd);
    // rows arrive sorted by AR: 24x2, 12x4, 7x7, 4x12, 2x24
    std::vector<double> rw, qw;
    std::istringstream in(read_file(scan));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.find("nx,") == 0) continue;
      std::vector<std::string> cells;
      std::istringstream row(line);
      std::string cell;
      while (std::getline(row, cell, ',')) cells.push_back(cell);
      if (cells.size() >= 6 && !cells[3].empty() && !cells[5].empty()) {
        rw.push_back(std::stod(cells[3]));
        qw.push_back(std::stod(cells[5]));
      }
    }
    bool order_ok = rw.size() == 5;
    for (size_t i = 0; i < rw.size() && order_ok; ++i)
      order_ok = qw[i] >= rw[i];
    const bool have = rw.size() == 5;
    const double rw_square = have ? rw[2] : NAN;
    const double rw_edge_min = have ? std::min(rw[0], rw[4]) : NAN;
    const bool min_ok = have && rw_square <= rw_edge_min + 0.05;
    const bool rise_ok = have && qw[4] > qw[2];
    std::string rws = "rw={", qws = "qw={";
    for (size_t i = 0; i < rw.size(); ++i) {
      rws += (i ? "," : "") + fmt(rw[i]);
      qws += (i ? "," : "") + fmt(qw[i]);
    }
    tally.report(3, rc == 0 && order_ok && min_ok && rise_ok,
                 "scan R=" + std::to_string(scan_R) + ": " + rws + "} " + qws +
                     "} qw>=rw everywhere=" + (order_ok ? "yes" : "no") +
                     ", rw(7x7)<=min(edge)+0.05=" + (min_ok ? "yes" : "no") +
                     ", qw(2x24)>qw(7x7)=" + (rise_ok ? "yes" : "no"));
  }

  // ---- criterion 4: chain limit --------------------------------------------
  {
    bool ok = true;
    std::string detail = "chains ny=1:";
    for (int nx : {5, 10, 20}) {
      qperc::EnsembleConfig cfg{qperc::LatticeSpec(nx, 1)};
      cfg.R = fast ? 40 : 100;
      cfg.seed = 42;
      const qperc::SweepResult res = qperc::sweep(cfg);
      const int bmax = cfg.spec.bond_universe_size();
      const bool chain_ok = res.rw.found && res.qw.found &&
                            res.rw.B05 == bmax && res.qw.B05 == bmax &&
                            res.rw.p05 == 1.0 && res.qw.p05 == 1.0;
      ok = ok && chain_ok;
      detail += " nx=" + std::to_string(nx) + " p05_rw=" + fmt(res.rw.p05) +
                " p05_qw=" + fmt(res.qw.p05) + ";";
    }
    tally.report(4, ok, detail + " (need exactly 1.0 everywhere)");
  }

  // ---- criterion 5: classical LTB vs cluster oracle ------------------------
  {
    const auto t0 = std::chrono::steady_clock::now();
    const int per_cell = fast ? 120 : 1200;
    double worst = 0.0;
    long count = 0;
    for (const qperc::LatticeSpec spec :
         {qperc::LatticeSpec(2, 24), qperc::LatticeSpec(24, 2),
          qperc::LatticeSpec(7, 7)}) {
      const int bmax = spec.bond_universe_size();
      for (const double frac : {0.25, 0.5, 0.75}) {
        const int b = static_cast<int>(std::lround(frac * bmax));
        for (int r = 0; r < per_cell; ++r) {
          const auto real = qperc::sample_realization(spec, b, 42, r);
          const Eigen::MatrixXd a = qperc::build_connectivity(real);
          const auto ops = qperc::make_trapped(spec, a, 1.0);
          const auto s = qperc::decompose_symmetric(ops.classical);
          const double lt = qperc::ltb_classical(s, spec);
          const double oracle =
              qperc::ltb_classical_oracle(qperc::clusters(real), spec);
          worst = std::max(worst, std::abs(lt - oracle));
          ++count;
        }
      }
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    tally.report(5, worst < 1e-9 && (fast || count >= 10000) && wall <= 120.0,
                 "oracle equivalence: realizations=" + std::to_string(count) +
                     " max|ltb-oracle|=" + fmt(worst) +
                     " (need <1e-9 each, >=1e4 total), wall=" + fmt(wall) +
                     "s (need <=120)");
  }

  // ---- criterion 6: spectral vs windowed time average ----------------------
  {
    const qperc::LatticeSpec spec(4, 4);
    const int bmax = spec.bond_universe_size();
    qperc::SplitMix64 draw(qperc::stream_key(999, 0, 0));
    double worst = 0.0;
    int checked = 0, defective = 0;
    for (std::uint64_t i = 0; checked < 50 && i < 200; ++i) {
      const int b = static_cast<int>(draw.uniform_below(bmax + 1));
      const auto real = qperc::sample_realization(spec, b, 4242, i);
      const auto ops =
          qperc::make_trapped(spec, qperc::build_connectivity(real), 1.0);
      const auto s = qperc::decompose_biorthogonal(ops.quantum);
      if (s.defective) {
        ++defective;  // rate gated by criterion 7; skip the spectral compare
        continue;
      }
      const double spectral = qperc::ltb_quantum(s, spec);
      const double t0 = qperc::window_start(s);
      const double windowed =
          qperc::windowed_ltb_quantum(ops, spec, t0, t0 + 200.0, 0.5);
      worst = std::max(worst, std::abs(spectral - windowed));
      ++checked;
    }
    tally.report(6, checked == 50 && worst < 1e-3,
                 "4x4 Γ=1 spectral vs windowed: realizations=" +
                     std::to_string(checked) + " max|diff|=" + fmt(worst) +
                     " (need <1e-3), defective skipped=" +
                     std::to_string(defective));
  }

  // ---- criterion 7: conservation + residual suite ---------------------------
  {
    const qperc::LatticeSpec spec(4, 4);
    const int bmax = spec.bond_universe_size();
    qperc::SplitMix64 draw(qperc::stream_key(777, 0, 0));
    double worst_cons = 0.0, worst_resid = 0.0, worst_complete = 0.0;
    int defective = 0;
    const int total = 100;
    for (int i = 0; i < total; ++i) {
      const int b = static_cast<int>(draw.uniform_below(bmax + 1));
      const auto real = qperc::sample_realization(spec, b, 2026, i);
      const Eigen::MatrixXd a = qperc::build_connectivity(real);

      // Γ=0: probability conserved for both walkers.
      const auto free = qperc::make_trapped(spec, a, 0.0);
      for (const double t : {0.0, 1.0, 10.0, 100.0}) {
        for (int l : spec.source_nodes()) {
          Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(spec.node_count());
          e0(l) = 1.0;
          const Eigen::VectorXcd psi =
              qperc::propagate_direct(free, e0, t, qperc::Walker::quantum);
          const Eigen::VectorXcd rho =
              qperc::propagate_direct(free, e0, t, qperc::Walker::classical);
          worst_cons = std::max(worst_cons,
                                std::abs(psi.squaredNorm() - 1.0));
          worst_cons = std::max(worst_cons,
                                std::abs(rho.real().sum() - 1.0));
        }
      }

      // Γ=1: residuals whenever the decomposition is declared sound.
      const auto ops = qperc::make_trapped(spec, a, 1.0);
      const auto s = qperc::decompose_biorthogonal(ops.quantum);
      if (s.defective) {
        ++defective;
        continue;
      }
      worst_resid = std::max(worst_resid, s.max_residual);
      worst_complete = std::max(worst_complete, s.completeness_residual);
    }
    const double rate = double(defective) / total;
    tally.report(
        7,
        worst_cons < 1e-10 && worst_resid < 1e-8 && worst_complete < 1e-8 &&
            rate < 0.01,
        "Γ=0 conservation max|Δ|=" + fmt(worst_cons) +
            " (need <1e-10); residuals: eigen=" + fmt(worst_resid) +
            " completeness=" + fmt(worst_complete) +
            " (need <1e-8); defective rate=" + fmt(rate) + " (need <0.01)");
  }

  // ---- criterion 8: byte-identical CSVs across thread counts ----------------
  {
    const fs::path portrait2 = work / "portrait_t2.csv";
    const std::string cmd = q(cli) + " sweep --nx 2 --ny 24 --R " +
                            std::to_string(sweep_R) +
                            " --seed 42 --mode nested --threads 2 -o " +
                            q(portrait2);
    const int rc = run_cli(cmd);
    const std::string a = read_file(portrait);
    const std::string b = read_file(portrait2);
    tally.report(8, rc == 0 && !a.empty() && a == b,
                 "determinism: threads=1 vs threads=2 CSVs " +
                     std::string(a == b && !a.empty() ? "byte-identical"
                                                      : "DIFFER") +
                     " (" + std::to_string(a.size()) + " bytes)");
  }

  std::printf("acceptance summary: %d passed, %d failed%s\n", tally.passed,
              tally.failed, fast ? " (FAST MODE — informational only)" : "");
  return tally.failed == 0 ? 0 : 1;
}
