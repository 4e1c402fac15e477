// pwave: plane-wave manifold toolkit front end.
// Configs in, JSON reports and CSV curves out. Exit codes: 0 ok, 1 check
// failure, 2 bad config/usage.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pwave/analysis.hpp"
#include "pwave/errors.hpp"
#include "pwave/families.hpp"
#include "pwave/flows.hpp"
#include "pwave/geometry.hpp"
#include "pwave/tensor.hpp"

using ojson = nlohmann::ordered_json;
namespace families = pwave::families;
namespace geometry = pwave::geometry;
namespace flows = pwave::flows;
namespace analysis = pwave::analysis;

namespace {

// --- serialization: every floating number at 17 significant digits ---------

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void dump_json(const ojson& j, std::string& out, int depth) {
  const std::string pad(2 * static_cast<std::size_t>(depth), ' ');
  const std::string pad1(2 * static_cast<std::size_t>(depth + 1), ' ');
  switch (j.type()) {
    case ojson::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, val] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad1 + ojson(key).dump() + ": ";
        dump_json(val, out, depth + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case ojson::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool scalars = true;
      for (const auto& v : j) scalars = scalars && !v.is_structured();
      out += "[";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += scalars ? ", " : ",";
        if (!scalars) out += "\n" + pad1;
        first = false;
        dump_json(v, out, depth + 1);
      }
      if (!scalars) out += "\n" + pad;
      out += "]";
      return;
    }
    case ojson::value_t::number_float:
      out += fmt17(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

void print_json(const ojson& j) {
  std::string out;
  dump_json(j, out, 0);
  std::cout << out << "\n";
}

ojson vec_json(std::span<const double> v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(x);
  return a;
}

ojson matrix_json(const Eigen::MatrixXd& m) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// sparse entry list {i: [indices], v: value}, exact zeros dropped
ojson tensor_json(const pwave::tensor::Tensor& t) {
  ojson entries = ojson::array();
  std::vector<int> idx(static_cast<std::size_t>(t.rank()));
  for (std::size_t q = 0; q < t.size(); ++q) {
    const double v = t.data()[q];
    if (v == 0.0) continue;
    t.unflat(q, idx);
    ojson e;
    e["i"] = idx;
    e["v"] = v;
    entries.push_back(std::move(e));
  }
  return entries;
}

// --- small input helpers ----------------------------------------------------

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t next = text.find(',', pos);
    if (next == std::string::npos) next = text.size();
    const std::string tok = text.substr(pos, next - pos);
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw pwave::ConfigError("bad number '" + tok + "' in list '" + text + "'");
    }
    if (next == text.size()) break;
    pos = next + 1;
  }
  return out;
}

std::vector<double> parse_point(const std::string& text, int dim, const char* what) {
  std::vector<double> p = parse_csv_doubles(text);
  if (static_cast<int>(p.size()) != dim)
    throw pwave::ConfigError(std::string(what) + " needs " + std::to_string(dim) +
                             " coordinates, got " + std::to_string(p.size()));
  return p;
}

std::vector<std::vector<double>> sample_points(int dim, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(count),
                                       std::vector<double>(static_cast<std::size_t>(dim)));
  for (auto& p : pts)
    for (auto& x : p) x = unif(rng);
  return pts;
}

ojson spec_summary(const families::ManifoldSpec& spec) {
  ojson s;
  s["family"] = families::family_name(spec.family);
  s["dim"] = spec.dim;
  s["signature"] = ojson::array({spec.signature.first, spec.signature.second});
  return s;
}

// --- verify suites ----------------------------------------------------------

struct CheckRecord {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<std::string> notes;
};

// tol_override: NaN means "use the default"
CheckRecord make_check(std::string name, double residual, double def_tol, double tol_override) {
  CheckRecord r;
  r.name = std::move(name);
  r.residual = residual;
  r.tolerance = std::isnan(tol_override) ? def_tol : tol_override;
  r.pass = residual <= r.tolerance;
  return r;
}

void suite_ricci(const families::ManifoldSpec& spec, unsigned seed, double tol,
                 std::vector<CheckRecord>& out) {
  std::mt19937_64 rng(seed);
  double rho_max = 0.0, tau_max = 0.0;
  for (const auto& p : sample_points(spec.dim, 25, rng)) {
    const geometry::CurvatureJet jet = geometry::nabla_r(spec, p, 0);
    const Eigen::MatrixXd rho = geometry::ricci(jet);
    rho_max = std::max(rho_max, rho.cwiseAbs().maxCoeff());
    tau_max = std::max(tau_max, std::abs(geometry::scalar_curvature(jet)));
  }
  out.push_back(make_check("ricci.max_abs", rho_max, 1e-9, tol));
  out.push_back(make_check("scalar.max_abs", tau_max, 1e-9, tol));
}

void suite_vsi(const families::ManifoldSpec& spec, unsigned seed, double tol,
               std::vector<CheckRecord>& out) {
  std::mt19937_64 rng(seed);
  const auto pts = sample_points(spec.dim, 5, rng);
  for (const char* name : {"tau", "rho2", "R2", "gradR2"}) {
    const analysis::WeylSchema schema = analysis::WeylSchema::builtin(name);
    double worst = 0.0;
    for (const auto& p : pts)
      worst = std::max(worst, std::abs(analysis::weyl_eval(spec, p, schema)));
    out.push_back(make_check(std::string("weyl.") + name, worst, 1e-8, tol));
  }
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const analysis::WeylSchema schema = analysis::random_schema(rng);
    for (int j = 0; j < 2; ++j)
      worst = std::max(worst, std::abs(analysis::weyl_eval(spec, pts[static_cast<std::size_t>(j)],
                                                           schema)));
  }
  out.push_back(make_check("weyl.random10", worst, 1e-8, tol));
}

void suite_nilpotency(const families::ManifoldSpec& spec, unsigned seed, double tol,
                      std::vector<CheckRecord>& out) {
  std::mt19937_64 rng(seed);
  const auto pts = sample_points(spec.dim, 1, rng);
  const analysis::NilpotencyReport rep = analysis::nilpotency_report(spec, pts[0], 100, seed);
  out.push_back(make_check("nilpotent.jacobi", rep.jacobi_residual, 1e-8, tol));
  out.push_back(make_check("nilpotent.szabo", rep.szabo_residual, 1e-8, tol));
  out.push_back(make_check("nilpotent.skew", rep.skew_residual, 1e-8, tol));
}

void suite_planewave(const families::ManifoldSpec& spec, unsigned seed, double tol,
                     std::vector<CheckRecord>& out) {
  const geometry::PlaneWaveReport rep =
      geometry::is_plane_wave_form(spec, 20, seed, std::isnan(tol) ? 1e-6 : tol);
  CheckRecord r;
  r.name = "plane_wave_form";
  r.residual = static_cast<double>(rep.violations.size());
  r.tolerance = 0.0;
  r.pass = rep.ok;
  r.notes = rep.violations;
  out.push_back(std::move(r));
}

void suite_holonomy(const families::ManifoldSpec& spec, unsigned seed, double tol,
                    std::vector<CheckRecord>& out) {
  double uni = 0.0, met = 0.0;
  std::vector<double> base(static_cast<std::size_t>(spec.dim), 0.0);
  for (int i = 0; i < 10; ++i) {
    const flows::SmoothLoop loop = flows::fourier_loop(spec.dim, base, seed + 1000u * i, 0.5);
    const flows::HolonomyElement h = flows::holonomy_loop(spec, loop.sample(2000));
    uni = std::max(uni, h.unipotent_residual);
    met = std::max(met, h.metric_residual);
  }
  out.push_back(make_check("holonomy.unipotent", uni, 1e-7, tol));
  out.push_back(make_check("holonomy.metric", met, 1e-7, tol));
}

void suite_oracle(const families::ManifoldSpec& spec, unsigned seed, double tol,
                  std::vector<CheckRecord>& out) {
  std::mt19937_64 rng(seed);
  const geometry::MetricFun gfun = [&spec](std::span<const double> x) {
    return families::metric_at(spec, x).g;
  };
  double worst = 0.0;
  for (const auto& p : sample_points(spec.dim, 25, rng)) {
    const pwave::tensor::Tensor sym = geometry::curvature_at(spec, p);
    const pwave::tensor::Tensor fd = geometry::fd_pipeline(gfun, p, 0).lowered[0];
    double diff = 0.0;
    for (std::size_t q = 0; q < sym.size(); ++q)
      diff = std::max(diff, std::abs(sym.data()[q] - fd.data()[q]));
    worst = std::max(worst, diff);
  }
  out.push_back(make_check("oracle.curvature", worst, 1e-6, tol));
}

// --- subcommand bodies -------------------------------------------------------

int cmd_info(const std::string& config) {
  const families::ManifoldSpec spec = families::build_from_file(config);
  ojson j = spec_summary(spec);
  j["coords"] = spec.coords;
  j["warnings"] = spec.warnings;
  print_json(j);
  return 0;
}

int cmd_eval(const std::string& config, const std::string& point_csv) {
  const families::ManifoldSpec spec = families::build_from_file(config);
  const std::vector<double> p = parse_point(point_csv, spec.dim, "--point");
  const geometry::CurvatureJet jet = geometry::nabla_r(spec, p, 1);
  ojson j;
  j["point"] = vec_json(p);
  j["g"] = matrix_json(jet.metric.g);
  j["gamma"] = tensor_json(families::christoffel_at(spec, p));
  j["R"] = tensor_json(jet.lowered[0]);
  j["nablaR"] = tensor_json(jet.lowered[1]);
  print_json(j);
  return 0;
}

int emit_curve(const families::ManifoldSpec& spec, const flows::Curve& curve,
               const std::string& out_path) {
  if (out_path.empty()) {
    flows::write_curve_csv(curve, std::cout);
    return 0;
  }
  flows::write_curve_csv(curve, out_path);
  ojson j;
  j["out"] = out_path;
  j["nodes"] = curve.nodes();
  j["residual"] = flows::max_geodesic_residual(spec, curve);
  print_json(j);
  return 0;
}

int cmd_geodesic(const std::string& config, const std::string& from, const std::string& to,
                 const std::string& point, const std::string& velocity, double t1, int steps,
                 const std::string& method, const std::string& out_path) {
  const families::ManifoldSpec spec = families::build_from_file(config);
  const flows::Integrator integ =
      method == "rk4" ? flows::Integrator::RK4 : flows::Integrator::Quadrature;
  if (!from.empty() || !to.empty()) {
    if (from.empty() || to.empty())
      throw pwave::ConfigError("boundary problem needs both --from and --to");
    const auto p = parse_point(from, spec.dim, "--from");
    const auto q = parse_point(to, spec.dim, "--to");
    return emit_curve(spec, flows::geodesic_bvp(spec, p, q, steps).curve, out_path);
  }
  if (point.empty() || velocity.empty())
    throw pwave::ConfigError("initial-value problem needs --point and --velocity");
  const auto x0 = parse_point(point, spec.dim, "--point");
  const auto v0 = parse_point(velocity, spec.dim, "--velocity");
  return emit_curve(spec, flows::geodesic_ivp(spec, x0, v0, t1, steps, integ), out_path);
}

flows::Curve load_or_build_curve(const families::ManifoldSpec& spec, const std::string& curve_path,
                                 const std::string& from, const std::string& to, int steps) {
  if (!curve_path.empty()) {
    flows::Curve c = flows::read_curve_csv(curve_path);
    if (c.dim() != spec.dim) throw pwave::ConfigError("curve dimension does not match manifold");
    return c;
  }
  if (from.empty() || to.empty())
    throw pwave::ConfigError("need --curve or a --from/--to geodesic");
  const auto p = parse_point(from, spec.dim, "--from");
  const auto q = parse_point(to, spec.dim, "--to");
  return flows::geodesic_bvp(spec, p, q, steps).curve;
}

int cmd_transport(const std::string& config, const std::string& curve_path,
                  const std::string& from, const std::string& to, const std::string& vector_csv,
                  int steps) {
  const families::ManifoldSpec spec = families::build_from_file(config);
  const flows::Curve curve = load_or_build_curve(spec, curve_path, from, to, steps);
  const int m = spec.dim;

  // transported frame, row i = where the i-th coordinate vector lands
  Eigen::MatrixXd frame(m, m);
  for (int i = 0; i < m; ++i) {
    std::vector<double> e(static_cast<std::size_t>(m), 0.0);
    e[static_cast<std::size_t>(i)] = 1.0;
    const auto values = flows::parallel_transport(spec, curve, e);
    for (int j = 0; j < m; ++j) frame(i, j) = values.back()[static_cast<std::size_t>(j)];
  }
  double triangular = 0.0;
  for (int i = 0; i < m; ++i) {
    triangular = std::max(triangular, std::abs(frame(i, i) - 1.0));
    for (int j = 0; j < i; ++j) triangular = std::max(triangular, std::abs(frame(i, j)));
  }
  const auto g0 = families::metric_at(spec, curve.x.front());
  const auto g1 = families::metric_at(spec, curve.x.back());
  const double drift = (frame * g1.g * frame.transpose() - g0.g).cwiseAbs().maxCoeff();

  ojson j;
  j["nodes"] = curve.nodes();
  j["frame_final"] = matrix_json(frame);
  j["triangular_residual"] = triangular;
  j["metric_drift"] = drift;
  if (!vector_csv.empty()) {
    const auto a0 = parse_point(vector_csv, m, "--vector");
    const auto values = flows::parallel_transport(spec, curve, a0);
    j["vector_final"] = vec_json(values.back());
  }
  print_json(j);
  return 0;
}

int cmd_holonomy(const std::string& config, const std::string& point_csv,
                 const std::string& curve_path, int loops, unsigned seed, int steps,
                 double amplitude, double tol) {
  const families::ManifoldSpec spec = families::build_from_file(config);
  std::vector<double> base(static_cast<std::size_t>(spec.dim), 0.0);
  if (!point_csv.empty()) base = parse_point(point_csv, spec.dim, "--point");

  double uni = 0.0, met = 0.0;
  ojson first_matrix;
  int count = 0;
  if (!curve_path.empty()) {
    flows::Curve c = flows::read_curve_csv(curve_path);
    if (c.dim() != spec.dim) throw pwave::ConfigError("curve dimension does not match manifold");
    const flows::HolonomyElement h = flows::holonomy_loop(spec, c);
    uni = h.unipotent_residual;
    met = h.metric_residual;
    first_matrix = matrix_json(h.matrix);
    count = 1;
  } else {
    for (int i = 0; i < loops; ++i) {
      const flows::SmoothLoop loop =
          flows::fourier_loop(spec.dim, base, seed + 1000u * static_cast<unsigned>(i), amplitude);
      const flows::HolonomyElement h = flows::holonomy_loop(spec, loop.sample(steps));
      if (i == 0) first_matrix = matrix_json(h.matrix);
      uni = std::max(uni, h.unipotent_residual);
      met = std::max(met, h.metric_residual);
      ++count;
    }
  }

  const bool pass = uni <= tol && met <= tol;
  ojson j;
  j["loops"] = count;
  j["max_unipotent_residual"] = uni;
  j["max_metric_residual"] = met;
  j["tolerance"] = tol;
  j["matrix"] = first_matrix;
  j["status"] = pass ? "pass" : "fail";
  print_json(j);
  return pass ? 0 : 1;
}

int cmd_weyl(const std::string& config, const std::string& point_csv, const std::string& schema,
             const std::string& id) {
  const families::ManifoldSpec spec = families::build_from_file(config);
  const std::vector<double> p = parse_point(point_csv, spec.dim, "--point");
  if (schema.empty() == id.empty())
    throw pwave::ConfigError("give exactly one of --schema or --id");
  const analysis::WeylSchema ws =
      id.empty() ? analysis::WeylSchema::parse(schema) : analysis::WeylSchema::builtin(id);
  ojson j;
  j["value"] = analysis::weyl_eval(spec, p, ws);
  print_json(j);
  return 0;
}

int cmd_invariant(const std::string& config, const std::string& id,
                  const std::vector<std::string>& point_csvs) {
  const families::ManifoldSpec spec = families::build_from_file(config);
  if (point_csvs.empty()) throw pwave::ConfigError("--point is required");
  std::vector<std::vector<double>> pts;
  for (const auto& text : point_csvs) pts.push_back(parse_point(text, spec.dim, "--point"));
  const analysis::HomogeneityReport rep = analysis::homogeneity_probe(spec, id, pts);
  ojson j;
  if (rep.values.size() == 1) {
    j[id] = rep.values[0];
  } else {
    j[id] = rep.values;
    j["spread"] = rep.spread;
  }
  print_json(j);
  return 0;
}

int cmd_verify(const std::string& config, const std::string& suite, unsigned seed, double tol,
               bool tol_set) {
  const auto t0 = std::chrono::steady_clock::now();
  const families::ManifoldSpec spec = families::build_from_file(config);
  const double tol_override = tol_set ? tol : std::numeric_limits<double>::quiet_NaN();

  const std::vector<std::string> known = {"ricci", "vsi", "nilpotency", "planewave",
                                          "holonomy", "oracle"};
  std::vector<std::string> run;
  if (suite == "all") run = known;
  else if (std::find(known.begin(), known.end(), suite) != known.end()) run = {suite};
  else throw pwave::ConfigError("unknown suite '" + suite + "'");

  std::vector<CheckRecord> checks;
  for (const auto& s : run) {
    if (s == "ricci") suite_ricci(spec, seed, tol_override, checks);
    else if (s == "vsi") suite_vsi(spec, seed, tol_override, checks);
    else if (s == "nilpotency") suite_nilpotency(spec, seed, tol_override, checks);
    else if (s == "planewave") suite_planewave(spec, seed, tol_override, checks);
    else if (s == "holonomy") suite_holonomy(spec, seed, tol_override, checks);
    else if (s == "oracle") suite_oracle(spec, seed, tol_override, checks);
  }

  bool all_pass = true;
  ojson records = ojson::array();
  for (const auto& c : checks) {
    all_pass = all_pass && c.pass;
    ojson r;
    r["name"] = c.name;
    r["status"] = c.pass ? "pass" : "fail";
    r["residual"] = c.residual;
    r["tolerance"] = c.tolerance;
    if (!c.notes.empty()) r["notes"] = c.notes;
    records.push_back(std::move(r));
  }

  ojson j;
  j["command"] = "verify";
  j["config"] = config;
  j["suite"] = suite;
  j["seed"] = seed;
  j["manifold"] = spec_summary(spec);
  j["checks"] = records;
  j["status"] = all_pass ? "pass" : "fail";
  print_json(j);

  // timing goes to stderr so stdout stays bit-identical run to run
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  std::fprintf(stderr, "verify: %zu checks in %.2fs\n", checks.size(), dt.count());
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plane-wave manifold toolkit"};
  app.require_subcommand(1);

  std::string config, point, from, to, velocity, vector_csv, out_path, curve_path;
  std::string schema, id, suite = "all", method = "quad";
  std::vector<std::string> points;
  double t1 = 1.0, tol = 0.0, amplitude = 0.5;
  int steps = 2000, loops = 10;
  unsigned seed = 0;

  auto* info = app.add_subcommand("info", "manifold summary");
  info->add_option("--config", config)->required();

  auto* eval = app.add_subcommand("eval", "metric, connection and curvature at a point");
  eval->add_option("--config", config)->required();
  eval->add_option("--point", point)->required();

  auto* geo = app.add_subcommand("geodesic", "integrate a geodesic, CSV out");
  geo->add_option("--config", config)->required();
  geo->add_option("--from", from);
  geo->add_option("--to", to);
  geo->add_option("--point", point);
  geo->add_option("--velocity", velocity);
  geo->add_option("--t1", t1);
  geo->add_option("--steps", steps);
  geo->add_option("--method", method)->check(CLI::IsMember({"quad", "rk4"}));
  geo->add_option("--out", out_path);

  auto* tra = app.add_subcommand("transport", "parallel transport along a curve");
  tra->add_option("--config", config)->required();
  tra->add_option("--curve", curve_path);
  tra->add_option("--from", from);
  tra->add_option("--to", to);
  tra->add_option("--vector", vector_csv);
  tra->add_option("--steps", steps);

  auto* hol = app.add_subcommand("holonomy", "frame transport around closed loops");
  hol->add_option("--config", config)->required();
  hol->add_option("--point", point);
  hol->add_option("--curve", curve_path);
  hol->add_option("--loops", loops);
  hol->add_option("--seed", seed);
  hol->add_option("--steps", steps);
  hol->add_option("--amplitude", amplitude);
  hol->add_option("--tol", tol)->default_val(1e-7);

  auto* wey = app.add_subcommand("weyl", "evaluate a full-contraction schema");
  wey->add_option("--config", config)->required();
  wey->add_option("--point", point)->required();
  wey->add_option("--schema", schema);
  wey->add_option("--id", id);

  auto* inv = app.add_subcommand("invariant", "evaluate a named invariant at points");
  inv->add_option("--config", config)->required();
  inv->add_option("--id", id)->required();
  inv->add_option("--point", points)->required();

  auto* ver = app.add_subcommand("verify", "run property suites");
  ver->add_option("--config", config)->required();
  ver->add_option("--suite", suite);
  ver->add_option("--seed", seed);
  auto* tol_opt = ver->add_option("--tol", tol);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (*info) return cmd_info(config);
    if (*eval) return cmd_eval(config, point);
    if (*geo) return cmd_geodesic(config, from, to, point, velocity, t1, steps, method, out_path);
    if (*tra) return cmd_transport(config, curve_path, from, to, vector_csv, steps);
    if (*hol) return cmd_holonomy(config, point, curve_path, loops, seed, steps, amplitude, tol);
    if (*wey) return cmd_weyl(config, point, schema, id);
    if (*inv) return cmd_invariant(config, id, points);
    if (*ver) return cmd_verify(config, suite, seed, tol, tol_opt->count() > 0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
