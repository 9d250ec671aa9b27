#pragma once

// Run configuration (JSON) and the CSV / binary field formats of the CLI.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "csda/adjoint.hpp"
#include "csda/planning.hpp"
#include "csda/solver.hpp"

#include <json.hpp>

namespace csda {

struct TrotterParams {
  int n_split = 16;
  double t_max = 20.0;
  int n_t = 32;
  int taylor = 8;
};

struct RunConfig {
  Domain domain = Domain::ball({0, 0, 0}, 1.0);
  GridSpec grid;
  nlohmann::json sigma;     // per-species total cross sections
  nlohmann::json kernel;    // kernel selection
  nlohmann::json stopping;  // per-species stopping powers
  nlohmann::json f_spec, g_spec;
  nlohmann::json varsigma;  // dose weights
  std::string method = "source_iteration";
  double tol = 1e-10;
  int max_iter = 200;
  double h_ray = 0.0;
  TrotterParams trotter;
  uint64_t seed = 1;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// Assemble the full problem a config describes.
struct ConfiguredProblem {
  PhaseGrid grid;
  Problem problem;
  DoseModel dose_model;
};
ConfiguredProblem build_problem(const RunConfig& cfg);

Prescription parse_prescription(const nlohmann::json& j,
                                const PhaseGrid& grid);

// --- CSV / binary formats -------------------------------------------------

void write_field_csv(std::ostream& os, const PhaseGrid& grid, const Field& f);
Field read_field_csv(std::istream& is, const PhaseGrid& grid);

void write_boundary_csv(std::ostream& os, const PhaseGrid& grid,
                        const BoundaryField& g);
BoundaryField read_boundary_csv(std::istream& is, const PhaseGrid& grid,
                                Orientation orient);

void write_dose_csv(std::ostream& os, const PhaseGrid& grid,
                    const std::vector<double>& d);

// Row-major dump: magic "CSDK", u32 version, u32 dims
// (species, nx, nw, nE), then doubles. CSV stays the canonical format.
void write_field_binary(std::ostream& os, const PhaseGrid& grid,
                        const Field& f);
Field read_field_binary(std::istream& is, const PhaseGrid& grid);

nlohmann::json report_to_json(const SolveReport& report);

}  // namespace csda
