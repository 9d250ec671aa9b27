#include "csda/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "csda/hadamard.hpp"
#include "csda/xsection.hpp"

namespace csda {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw std::invalid_argument("config: " + what);
}

Vec3 parse_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) config_error("expected [x,y,z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Domain parse_domain(const json& j) {
  if (!j.contains("shape")) config_error("missing key 'shape' in domain");
  const std::string shape = j.at("shape").get<std::string>();
  if (shape == "ball")
    return Domain::ball(parse_vec3(j.at("center")),
                        j.at("radius").get<double>());
  if (shape == "box")
    return Domain::box(parse_vec3(j.at("lo")), parse_vec3(j.at("hi")));
  config_error("unknown domain shape '" + shape + "'");
}

// S(E) = a + b E, the affine stopping-power family of the benchmarks.
std::function<double(double)> parse_stopping_fn(const json& j) {
  const std::string type = j.value("type", "affine");
  if (type == "affine") {
    const double a = j.value("a", 1.0);
    const double b = j.value("b", 0.0);
    return [a, b](double E) { return a + b * E; };
  }
  config_error("unknown stopping type '" + type + "'");
}

}  // namespace

RunConfig parse_config(const json& j) {
  RunConfig cfg;
  if (!j.contains("domain")) config_error("missing key 'domain'");
  cfg.domain = parse_domain(j.at("domain"));
  if (!j.contains("grid")) config_error("missing key 'grid'");
  const json& g = j.at("grid");
  cfg.grid.nx = g.value("nx", 8);
  cfg.grid.n_theta = g.value("n_theta", 4);
  cfg.grid.n_phi = g.value("n_phi", 8);
  cfg.grid.n_E = g.value("n_E", 6);
  cfg.grid.E0 = g.value("E0", 0.01);
  cfg.grid.Em = g.value("Em", 1.0);
  cfg.grid.n_surf = g.value("n_surf", 12);
  cfg.grid.species = j.value("species", 1);
  cfg.sigma = j.value("sigma", json::array());
  cfg.kernel = j.value("kernel", json{{"type", "zero"}});
  cfg.stopping = j.value("stopping", json::array());
  cfg.f_spec = j.value("f", json{{"preset", "zero"}});
  cfg.g_spec = j.value("g", json{{"preset", "zero"}});
  cfg.varsigma = j.value("varsigma", json::array());
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    cfg.method = s.value("method", "source_iteration");
    cfg.tol = s.value("tol", 1e-10);
    cfg.max_iter = s.value("max_iter", 200);
    cfg.h_ray = s.value("h_ray", 0.0);
    if (s.contains("trotter")) {
      const json& t = s.at("trotter");
      cfg.trotter.n_split = t.value("n_split", 16);
      cfg.trotter.t_max = t.value("t_max", 20.0);
      cfg.trotter.n_t = t.value("n_t", 32);
      cfg.trotter.taylor = t.value("taylor", 8);
    }
  }
  cfg.seed = j.value("seed", uint64_t(1));
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) config_error("cannot open '" + path + "'");
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    config_error(std::string("parse failure: ") + e.what());
  }
  return parse_config(j);
}

namespace {

KernelSet build_kernels(const RunConfig& cfg, const PhaseGrid& grid) {
  const std::string type = cfg.kernel.value("type", "zero");
  const int ns = grid.species();
  if (type == "zero") return KernelSet::zero(ns);
  if (type == "constant") {
    const double s0 = cfg.kernel.value("s0", 0.01);
    if (s0 < 0.0) config_error("kernel s0 must be nonnegative");
    return KernelSet::constant(ns, s0);
  }
  if (type == "compton") {
    // Photon->photon Klein-Nishina with the mollified angular delta.
    const double sigma0 = cfg.kernel.value("sigma0", 1.0);
    const double eps = cfg.kernel.value("epsilon", 0.2);
    const double E0 = grid.E0();
    KernelSet ks = KernelSet::zero(ns);
    ks.entry(0, 0).fn = [sigma0, eps, E0](const Vec3&, const Vec3& wp,
                                          const Vec3& w, double Ep,
                                          double E) {
      const ComptonKinematics kin = compton_kinematics(Ep, E, E0);
      if (!kin.chi) return 0.0;
      return sigma0 * kin.sigma_hat *
             mollified_delta_cosine(eps, dot(wp, w), kin.mu);
    };
    if (ns == 3) {
      ks.entry(0, 1).fn = [sigma0, eps, E0](const Vec3&, const Vec3& wp,
                                            const Vec3& w, double Ep,
                                            double E) {
        const ComptonRecoilKinematics kin =
            compton_recoil_kinematics(Ep, E, E0);
        if (!kin.chi || kin.mu > 1.0) return 0.0;
        return sigma0 * kin.sigma_hat *
               mollified_delta_cosine(eps, dot(wp, w), kin.mu);
      };
    }
    return ks;
  }
  if (type == "moller") {
    const double sigma0 = cfg.kernel.value("sigma0", 1.0);
    const double eps = cfg.kernel.value("epsilon", 0.2);
    MollerModel model{[sigma0](const Vec3&) { return sigma0; }, eps};
    const int target = ns == 3 ? 1 : 0;  // electron channel
    KernelSet ks = KernelSet::zero(ns);
    // Restricted (E' >= 2E) mollified Moller kernel; the coefficients enter
    // the stopping power / absorption instead.
    const CsdaCoefficients cc = csda_reduce_moller(
        model, grid.x(0), 0.5 * (grid.E0() + grid.Em()), grid.Em(),
        grid.E0());
    ks.entry(target, target).fn = cc.restricted_kernel;
    return ks;
  }
  if (type == "table") {
    const std::string path = cfg.kernel.value("path", "");
    std::ifstream is(path);
    if (!is) config_error("cannot open kernel table '" + path + "'");
    std::vector<double> Ep, E, mu, val;
    std::string line;
    std::getline(is, line);  // header Ep,E,mu,value
    std::vector<std::array<double, 4>> rows;
    while (std::getline(is, line)) {
      std::array<double, 4> r{};
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &r[0], &r[1], &r[2],
                      &r[3]) == 4)
        rows.push_back(r);
    }
    const auto uniq = [&](int col) {
      std::vector<double> u;
      for (const auto& r : rows)
        if (u.empty() || r[col] > u.back()) u.push_back(r[col]);
      return u;
    };
    Ep = uniq(0);
    // E and mu cycle; recover their sizes from the row structure.
    std::vector<double> allE, allmu;
    for (const auto& r : rows) {
      allE.push_back(r[1]);
      allmu.push_back(r[2]);
    }
    std::sort(allE.begin(), allE.end());
    allE.erase(std::unique(allE.begin(), allE.end()), allE.end());
    std::sort(allmu.begin(), allmu.end());
    allmu.erase(std::unique(allmu.begin(), allmu.end()), allmu.end());
    for (const auto& r : rows) val.push_back(r[3]);
    if (val.size() != Ep.size() * allE.size() * allmu.size())
      config_error("kernel table is not a full (Ep,E,mu) lattice");
    auto table =
        std::make_shared<TableKernel>(Ep, allE, allmu, std::move(val));
    KernelSet ks = KernelSet::zero(ns);
    ks.entry(0, 0).fn = [table](const Vec3&, const Vec3& wp, const Vec3& w,
                                double Ep_, double E_) {
      return (*table)(Ep_, E_, dot(wp, w));
    };
    return ks;
  }
  config_error("unknown kernel type '" + type + "'");
}

double field_preset_value(const json& spec, const Vec3& x, const Vec3&,
                          double) {
  const std::string preset = spec.value("preset", "zero");
  if (preset == "zero") return 0.0;
  if (preset == "constant") return spec.value("value", 1.0);
  if (preset == "gaussian") {
    const Vec3 c = spec.contains("center") ? parse_vec3(spec.at("center"))
                                           : Vec3{0, 0, 0};
    const double w = spec.value("width", 0.3);
    const double v = spec.value("value", 1.0);
    const double r2 = dot(x - c, x - c);
    return v * std::exp(-r2 / (w * w));
  }
  config_error("unknown field preset '" + preset + "'");
}

}  // namespace

ConfiguredProblem build_problem(const RunConfig& cfg) {
  PhaseGrid grid(cfg.domain, cfg.grid);
  const int ns = grid.species();

  ScatterData scatter;
  scatter.Sigma.resize(ns);
  for (int s = 0; s < ns; ++s) {
    double sv = 1.0;
    if (cfg.sigma.is_array() && s < static_cast<int>(cfg.sigma.size()))
      sv = cfg.sigma[s].get<double>();
    else if (cfg.sigma.is_number())
      sv = cfg.sigma.get<double>();
    if (sv < 0.0) config_error("sigma must be nonnegative");
    scatter.Sigma[s] = [sv](const Vec3&, const Vec3&, double) { return sv; };
  }

  std::vector<std::optional<StoppingPower>> stopping(ns);
  for (int s = 0; s < ns; ++s) {
    json sp;
    if (cfg.stopping.is_array() && s < static_cast<int>(cfg.stopping.size()))
      sp = cfg.stopping[s];
    if (sp.is_null() || sp.value("type", "none") == "none") continue;
    stopping[s] = StoppingPower::from_function(parse_stopping_fn(sp),
                                               grid.E0(), grid.Em());
  }
  if (ns == 3 && !(stopping[1] && stopping[2]))
    config_error("three-species runs need stopping powers for species 2,3");

  Field f(grid);
  for (int s = 0; s < ns; ++s) {
    json spec = cfg.f_spec;
    if (cfg.f_spec.is_array() && s < static_cast<int>(cfg.f_spec.size()))
      spec = cfg.f_spec[s];
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k)
          f.at(s, ix, a, k) =
              field_preset_value(spec, grid.x(ix), grid.omega(a), grid.E(k));
  }

  BoundaryField g(grid, Orientation::Inflow);
  for (int s = 0; s < ns; ++s) {
    json spec = cfg.g_spec;
    if (cfg.g_spec.is_array() && s < static_cast<int>(cfg.g_spec.size()))
      spec = cfg.g_spec[s];
    const bool charged = stopping[s].has_value();
    const double E0 = grid.E0(), Em = grid.Em();
    g.fill(s, [&](const Vec3& y, const Vec3& w, double E) {
      double v = field_preset_value(spec, y, w, E);
      // Charged-species data must vanish at the cutoff energy.
      if (charged) v *= (Em - E) / (Em - E0);
      return v;
    });
    if (charged) {
      const int kl = grid.n_energy() - 1;
      (void)kl;
    }
  }
  // Zero the discrete Em slice of charged species exactly.
  for (int s = 0; s < ns; ++s)
    if (stopping[s])
      for (int b = 0; b < g.n_surf(); ++b)
        for (int a = 0; a < grid.n_angular(); ++a)
          g.at(s, b, a, grid.n_energy() - 1) = 0.0;

  DoseModel dm;
  dm.varsigma.resize(ns);
  for (int s = 0; s < ns; ++s) {
    double v = 1.0;
    if (cfg.varsigma.is_array() && s < static_cast<int>(cfg.varsigma.size()))
      v = cfg.varsigma[s].get<double>();
    dm.varsigma[s] = [v](const Vec3&, double) { return v; };
  }

  RaySettings rs;
  rs.h_ray = cfg.h_ray;
  Problem problem(cfg.domain, grid, std::move(scatter),
                  build_kernels(cfg, grid), std::move(stopping), std::move(f),
                  std::move(g), rs);
  return ConfiguredProblem{grid, std::move(problem), std::move(dm)};
}

Prescription parse_prescription(const json& j, const PhaseGrid& grid) {
  Prescription pres;
  pres.region.assign(grid.n_spatial(), Region::Normal);
  pres.target.assign(grid.n_spatial(), 0.0);
  const double dT = j.value("d_T", 0.0);
  const double dC = j.value("d_C", 0.0);
  const double dN = j.value("d_N", 0.0);
  Domain targetDom = Domain::ball({0, 0, 0}, 0.0 + 1e-12);
  bool haveT = false, haveC = false;
  Domain critDom = targetDom;
  if (j.contains("regions")) {
    const json& r = j.at("regions");
    if (r.contains("T")) {
      targetDom = parse_domain(r.at("T"));
      haveT = true;
    }
    if (r.contains("C")) {
      critDom = parse_domain(r.at("C"));
      haveC = true;
    }
  }
  for (int ix = 0; ix < grid.n_spatial(); ++ix) {
    if (haveT && targetDom.contains(grid.x(ix))) {
      pres.region[ix] = Region::Target;
      pres.target[ix] = dT;
    } else if (haveC && critDom.contains(grid.x(ix))) {
      pres.region[ix] = Region::Critical;
      pres.target[ix] = dC;
    } else {
      pres.region[ix] = Region::Normal;
      pres.target[ix] = dN;
    }
  }
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    pres.cT = w.value("cT", 1.0);
    pres.cC = w.value("cC", 1.0);
    pres.cN = w.value("cN", 1.0);
    pres.creg = w.value("c", 1e-2);
  }
  if (!(pres.cT > 0) || !(pres.cC > 0) || !(pres.cN > 0) || !(pres.creg > 0))
    config_error("prescription weights must be positive");
  return pres;
}

// --- CSV / binary ----------------------------------------------------------

void write_field_csv(std::ostream& os, const PhaseGrid& grid, const Field& f) {
  os << "species,ix,iw,iE,value\n";
  char buf[64];
  for (int s = 0; s < grid.species(); ++s)
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k) {
          std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.17g\n", s, ix, a, k,
                        f.at(s, ix, a, k));
          os << buf;
        }
}

Field read_field_csv(std::istream& is, const PhaseGrid& grid) {
  Field f(grid);
  std::string line;
  std::getline(is, line);  // header
  int s, ix, a, k;
  double v;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%d,%lf", &s, &ix, &a, &k, &v) !=
        5)
      throw std::invalid_argument("field csv: bad row '" + line + "'");
    f.at(s, ix, a, k) = v;
  }
  return f;
}

void write_boundary_csv(std::ostream& os, const PhaseGrid& grid,
                        const BoundaryField& g) {
  os << "species,ib,iw,iE,value\n";
  char buf[64];
  for (int s = 0; s < grid.species(); ++s)
    for (int b = 0; b < g.n_surf(); ++b)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k) {
          std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.17g\n", s, b, a, k,
                        g.at(s, b, a, k));
          os << buf;
        }
}

BoundaryField read_boundary_csv(std::istream& is, const PhaseGrid& grid,
                                Orientation orient) {
  BoundaryField g(grid, orient);
  std::string line;
  std::getline(is, line);
  int s, b, a, k;
  double v;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%d,%lf", &s, &b, &a, &k, &v) != 5)
      throw std::invalid_argument("boundary csv: bad row '" + line + "'");
    g.at(s, b, a, k) = v;
  }
  return g;
}

void write_dose_csv(std::ostream& os, const PhaseGrid& grid,
                    const std::vector<double>& d) {
  os << "ix,x,y,z,value\n";
  char buf[128];
  for (int ix = 0; ix < grid.n_spatial(); ++ix) {
    const Vec3& x = grid.x(ix);
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", ix, x.x,
                  x.y, x.z, d[ix]);
    os << buf;
  }
}

void write_field_binary(std::ostream& os, const PhaseGrid& grid,
                        const Field& f) {
  os.write("CSDK", 4);
  const uint32_t version = 1;
  const uint32_t dims[4] = {static_cast<uint32_t>(grid.species()),
                            static_cast<uint32_t>(grid.n_spatial()),
                            static_cast<uint32_t>(grid.n_angular()),
                            static_cast<uint32_t>(grid.n_energy())};
  os.write(reinterpret_cast<const char*>(&version), 4);
  os.write(reinterpret_cast<const char*>(dims), 16);
  os.write(reinterpret_cast<const char*>(f.data().data()),
           static_cast<std::streamsize>(f.size() * sizeof(double)));
}

Field read_field_binary(std::istream& is, const PhaseGrid& grid) {
  char magic[4];
  is.read(magic, 4);
  if (std::string(magic, 4) != "CSDK")
    throw std::invalid_argument("binary field: bad magic");
  uint32_t version, dims[4];
  is.read(reinterpret_cast<char*>(&version), 4);
  is.read(reinterpret_cast<char*>(dims), 16);
  Field f(grid);
  if (dims[0] != static_cast<uint32_t>(grid.species()) ||
      dims[1] != static_cast<uint32_t>(grid.n_spatial()) ||
      dims[2] != static_cast<uint32_t>(grid.n_angular()) ||
      dims[3] != static_cast<uint32_t>(grid.n_energy()))
    throw std::invalid_argument("binary field: dims do not match grid");
  is.read(reinterpret_cast<char*>(f.data().data()),
          static_cast<std::streamsize>(f.size() * sizeof(double)));
  return f;
}

nlohmann::json report_to_json(const SolveReport& r) {
  return json{{"iterations", r.iterations},
              {"residuals", r.residuals},
              {"converged", r.converged},
              {"contraction_estimate", r.contraction_estimate},
              {"apriori_ratio", r.apriori_ratio},
              {"c", r.c},
              {"c_prime", r.c_prime},
              {"C", r.C},
              {"M1", r.M1},
              {"M2", r.M2}};
}

}  // namespace csda
