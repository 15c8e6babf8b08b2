#pragma once

// Deterministic, locale-independent output.  Floats are rendered by
// std::to_chars with 17 significant digits (general format), so every value
// round-trips and two runs with identical configs produce byte-identical
// files.  Files are written atomically (temp + rename) so readers never see
// a partial artifact.
//
// Requires the vendored nlohmann json.hpp on the include path (the qperc
// simulation headers themselves do not).

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

#include <json.hpp>

#include "qperc/ensemble.hpp"
#include "qperc/lattice.hpp"
#include "qperc/transport.hpp"
#include "qperc/version.hpp"

namespace qperc {

inline std::string format_double(double x) {
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  if (res.ec != std::errc())
    throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : ".";
  std::error_code ec;
  fs::create_directories(dir, ec);  // best effort; open() reports failures
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("write_file_atomic: cannot open " +
                               tmp.string());
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out)
      throw std::runtime_error("write_file_atomic: short write to " +
                               tmp.string());
  }
  fs::rename(tmp, path);
}

namespace detail {

inline std::string schema_line(std::string_view command) {
  std::string s = "# qperc ";
  s += command;
  s += ' ';
  s += kSchemaVersion;
  s += '\n';
  return s;
}

}  // namespace detail

inline std::string sweep_csv(const SweepResult& res) {
  std::string out = detail::schema_line("sweep");
  out += "B,p,mean_P_inf,stderr_P,mean_Pi_inf,stderr_Pi,defective\n";
  for (const BRow& r : res.rows) {
    out += std::to_string(r.B);
    out += ',';
    out += format_double(r.p);
    out += ',';
    out += format_double(r.mean_P_inf);
    out += ',';
    out += format_double(r.stderr_P);
    out += ',';
    out += format_double(r.mean_Pi_inf);
    out += ',';
    out += format_double(r.stderr_Pi);
    out += ',';
    out += std::to_string(r.defective);
    out += '\n';
  }
  return out;
}

inline std::string scan_csv(const std::vector<ScanRow>& rows) {
  std::string out = detail::schema_line("scan");
  out += "nx,ny,ar,p05_rw,B05_rw,p05_qw,B05_qw\n";
  for (const ScanRow& r : rows) {
    out += std::to_string(r.nx);
    out += ',';
    out += std::to_string(r.ny);
    out += ',';
    out += format_double(r.ar);
    out += ',';
    if (r.rw.found) {
      out += format_double(r.rw.p05);
      out += ',';
      out += std::to_string(r.rw.B05);
    } else {
      out += ',';  // crossing absent: fields left empty
    }
    out += ',';
    if (r.qw.found) {
      out += format_double(r.qw.p05);
      out += ',';
      out += std::to_string(r.qw.B05);
    } else {
      out += ',';
    }
    out += '\n';
  }
  return out;
}

// Long form (j outer, n inner) so any plotting tool can pivot to a map.
inline std::string ptmap_csv(const Eigen::MatrixXd& xi) {
  std::string out = detail::schema_line("ptmap");
  out += "j,n,xi\n";
  for (Eigen::Index j = 0; j < xi.rows(); ++j)
    for (Eigen::Index n = 0; n < xi.cols(); ++n) {
      out += std::to_string(j);
      out += ',';
      out += std::to_string(n);
      out += ',';
      out += format_double(xi(j, n));
      out += '\n';
    }
  return out;
}

inline std::string curve_csv(const SurvivalCurve& classical,
                             const SurvivalCurve& quantum) {
  std::string out = detail::schema_line("curve");
  out += "t,P,Pi\n";
  for (size_t i = 0; i < classical.times.size(); ++i) {
    out += format_double(classical.times[i]);
    out += ',';
    out += format_double(classical.values[i]);
    out += ',';
    out += format_double(quantum.values[i]);
    out += '\n';
  }
  return out;
}

inline nlohmann::ordered_json crossing_json(const Crossing& c) {
  nlohmann::ordered_json j;
  j["found"] = c.found;
  if (c.found) {
    j["B05"] = c.B05;
    j["p05"] = c.p05;
    j["p05_interp"] = c.p05_interp;
  }
  return j;
}

inline nlohmann::ordered_json sweep_json(const SweepResult& res) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const BRow& r : res.rows)
    rows.push_back({{"B", r.B},
                    {"p", r.p},
                    {"mean_P_inf", r.mean_P_inf},
                    {"stderr_P", r.stderr_P},
                    {"mean_Pi_inf", r.mean_Pi_inf},
                    {"stderr_Pi", r.stderr_Pi},
                    {"defective", r.defective}});
  return {{"schema", std::string("sweep ") + std::string(kSchemaVersion)},
          {"rows", rows},
          {"crossings",
           {{"rw", crossing_json(res.rw)}, {"qw", crossing_json(res.qw)}}}};
}

inline nlohmann::ordered_json scan_json(const std::vector<ScanRow>& rows) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const ScanRow& r : rows) {
    nlohmann::ordered_json row = {{"nx", r.nx}, {"ny", r.ny}, {"ar", r.ar}};
    row["rw"] = crossing_json(r.rw);
    row["qw"] = crossing_json(r.qw);
    out.push_back(row);
  }
  return {{"schema", std::string("scan ") + std::string(kSchemaVersion)},
          {"rows", out}};
}

inline nlohmann::ordered_json ptmap_json(const Eigen::MatrixXd& xi) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index j = 0; j < xi.rows(); ++j)
    for (Eigen::Index n = 0; n < xi.cols(); ++n)
      rows.push_back({{"j", j}, {"n", n}, {"xi", xi(j, n)}});
  return {{"schema", std::string("ptmap ") + std::string(kSchemaVersion)},
          {"rows", rows}};
}

inline nlohmann::ordered_json curve_json(const SurvivalCurve& classical,
                                         const SurvivalCurve& quantum) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (size_t i = 0; i < classical.times.size(); ++i)
    rows.push_back({{"t", classical.times[i]},
                    {"P", classical.values[i]},
                    {"Pi", quantum.values[i]}});
  return {{"schema", std::string("curve ") + std::string(kSchemaVersion)},
          {"rows", rows}};
}

// Debug record sufficient to reconstruct a realization exactly.
inline nlohmann::ordered_json realization_json(const Realization& real) {
  nlohmann::ordered_json bonds = nlohmann::ordered_json::array();
  for (const Bond& b : resolve_bonds(real))
    bonds.push_back({b.jx, b.jy, b.kx, b.ky});
  return {{"nx", real.spec.nx}, {"ny", real.spec.ny}, {"B", real.B},
          {"seed", real.seed},  {"r", real.r},        {"bonds", bonds}};
}

}  // namespace qperc
