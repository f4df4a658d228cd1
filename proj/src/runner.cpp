// SPDX-License-Identifier: Apache-2.0
#include "kspec/runner.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kspec/acceptance.hpp"
#include "kspec/collision.hpp"
#include "kspec/dispersion.hpp"
#include "kspec/linalg.hpp"
#include "kspec/nonlinear.hpp"
#include "kspec/norms.hpp"
#include "kspec/semigroup.hpp"
#include "kspec/symbols.hpp"

namespace kspec {

namespace fs = std::filesystem;

const std::string& config_schema() {
  static const std::string schema = R"json({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "kspec run configuration",
  "type": "object",
  "additionalProperties": false,
  "required": ["command"],
  "properties": {
    "command": {"enum": ["assemble", "spectrum", "branches", "gapscan", "propagate", "decay", "norms", "nonlinear", "verify-all"]},
    "seed": {"type": "integer", "minimum": 0},
    "output_dir": {"type": "string"},
    "cache_dir": {"type": "string"},
    "kernel": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "gamma": {"type": "number"},
        "s": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "d": {"type": "integer", "minimum": 1},
        "b_amplitude": {"type": "number", "exclusiveMinimum": 0},
        "theta_floor": {"type": "number", "exclusiveMinimum": 0},
        "backend": {"enum": ["dirichlet_quadrature", "maxwell_diagonal"]},
        "cutoff": {"type": "boolean"}
      }
    },
    "basis": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "N": {"type": "integer", "minimum": 2, "maximum": 16},
        "quad_order": {"type": "integer", "minimum": 0}
      }
    },
    "quadrature": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "n_center": {"type": "integer", "minimum": 0},
        "n_radial": {"type": "integer", "minimum": 0},
        "n_polar": {"type": "integer", "minimum": 0},
        "n_azimuth": {"type": "integer", "minimum": 0},
        "n_sigma_azimuth": {"type": "integer", "minimum": 0},
        "gl_per_panel": {"type": "integer", "minimum": 1},
        "theta_floor": {"type": "number", "minimum": 0},
        "check_convergence": {"type": "boolean"},
        "tolerance": {"type": "number", "exclusiveMinimum": 0}
      }
    },
    "symbols": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "K0": {"type": "number", "exclusiveMinimum": 0},
        "weighted": {"type": "boolean"},
        "pad": {"type": "integer", "minimum": 0},
        "n_x": {"type": "integer", "minimum": 1},
        "n_eta": {"type": "integer", "minimum": 1}
      }
    },
    "spectrum": {
      "type": "object", "additionalProperties": false,
      "properties": {"r": {"type": "array", "items": {"type": "number", "minimum": 0}}}
    },
    "branches": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "r_max": {"type": "number", "exclusiveMinimum": 0},
        "n": {"type": "integer", "minimum": 4},
        "min_overlap": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}
      }
    },
    "gapscan": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "r_max": {"type": "number", "minimum": 10},
        "resolvent": {"type": "boolean"},
        "resolvent_samples": {"type": "integer", "minimum": 1}
      }
    },
    "propagate": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "r": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "times": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "k_ibp": {"type": "integer", "minimum": 2},
        "tail_tol": {"type": "number", "exclusiveMinimum": 0}
      }
    },
    "decay": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "profile": {"enum": ["gaussian", "critical_lp"]},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "m": {"type": "number", "minimum": 0},
        "p": {"type": "number", "minimum": 1, "maximum": 2},
        "h": {"enum": ["psi0", "energy"]},
        "t_lo": {"type": "number", "exclusiveMinimum": 0},
        "t_hi": {"type": "number", "exclusiveMinimum": 0},
        "n_times": {"type": "integer", "minimum": 4},
        "regularizing_k": {"type": "integer", "minimum": 2}
      }
    },
    "norms": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "l": {"type": "number"},
        "refine": {"type": "boolean"}
      }
    },
    "nonlinear": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "model": {"enum": ["single_mode_triple", "periodic_box_1d_x"]},
        "spacing": {"type": "number", "exclusiveMinimum": 0},
        "modes": {"type": "integer", "minimum": 1, "maximum": 8},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "n_iter": {"type": "integer", "minimum": 2},
        "m": {"type": "number"},
        "delta": {"type": "number", "minimum": 0},
        "epsilon": {"type": "number", "exclusiveMinimum": 0}
      }
    },
    "acceptance": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "only": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 13}},
        "norms_N": {"type": "integer", "minimum": 2}
      }
    }
  }
})json";
  return schema;
}

namespace {

void check_node(const json& node, const json& schema, const std::string& path) {
  auto fail = [&](const std::string& what) { throw ConfigError("config " + (path.empty() ? "/" : path) + ": " + what); };
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || e == node;
    if (!found) fail("value " + node.dump() + " not in " + schema["enum"].dump());
  }
  if (schema.contains("type")) {
    const std::string t = schema["type"];
    const bool ok = (t == "object" && node.is_object()) || (t == "array" && node.is_array()) ||
                    (t == "string" && node.is_string()) || (t == "boolean" && node.is_boolean()) ||
                    (t == "integer" && node.is_number_integer()) || (t == "number" && node.is_number());
    if (!ok) fail("expected " + t);
  }
  if (node.is_number()) {
    const double v = node.get<double>();
    if (schema.contains("minimum") && v < schema["minimum"].get<double>()) fail("below minimum " + schema["minimum"].dump());
    if (schema.contains("maximum") && v > schema["maximum"].get<double>()) fail("above maximum " + schema["maximum"].dump());
    if (schema.contains("exclusiveMinimum") && v <= schema["exclusiveMinimum"].get<double>())
      fail("must exceed " + schema["exclusiveMinimum"].dump());
    if (schema.contains("exclusiveMaximum") && v >= schema["exclusiveMaximum"].get<double>())
      fail("must be below " + schema["exclusiveMaximum"].dump());
  }
  if (node.is_object()) {
    if (schema.contains("required"))
      for (const auto& k : schema["required"])
        if (!node.contains(k.get<std::string>())) fail("missing required key '" + k.get<std::string>() + "'");
    const json props = schema.value("properties", json::object());
    for (const auto& [k, v] : node.items()) {
      if (props.contains(k))
        check_node(v, props[k], path + "/" + k);
      else if (schema.value("additionalProperties", true) == false)
        fail("unknown key '" + k + "'");
    }
  }
  if (node.is_array() && schema.contains("items"))
    for (size_t i = 0; i < node.size(); ++i) check_node(node[i], schema["items"], path + "/" + std::to_string(i));
}

json default_config() {
  return json::parse(R"json({
    "seed": 1,
    "output_dir": "kspec-out",
    "cache_dir": ".kspec-cache",
    "kernel": {"gamma": 0.0, "s": 0.5, "d": 3, "b_amplitude": 1.0, "theta_floor": 0.001,
               "backend": "maxwell_diagonal", "cutoff": false},
    "basis": {"N": 6, "quad_order": 0},
    "quadrature": {"n_center": 0, "n_radial": 0, "n_polar": 0, "n_azimuth": 0, "n_sigma_azimuth": 0,
                   "gl_per_panel": 4, "theta_floor": 0.0, "check_convergence": true, "tolerance": 1e-4},
    "symbols": {"K0": 10.0, "weighted": true, "pad": 2, "n_x": 14, "n_eta": 14},
    "spectrum": {"r": [0.0, 0.1, 1.0, 10.0]},
    "branches": {"r_max": 0.05, "n": 25, "min_overlap": 0.7},
    "gapscan": {"r_max": 12.0, "resolvent": false, "resolvent_samples": 100},
    "propagate": {"r": [0.1, 1.0, 5.0], "times": [0.5, 1.0, 2.0, 3.0, 4.0, 5.0], "k_ibp": 2, "tail_tol": 1e-10},
    "decay": {"profile": "gaussian", "width": 0.5, "m": 0.0, "p": 1.0, "h": "psi0",
              "t_lo": 10.0, "t_hi": 100.0, "n_times": 31, "regularizing_k": 2},
    "norms": {"refine": true},
    "nonlinear": {"model": "single_mode_triple", "spacing": 0.5, "modes": 3, "dt": 0.05, "T": 10.0,
                  "n_iter": 7, "m": 2.0, "delta": 0.0},
    "acceptance": {"only": [], "norms_N": 4}
  })json");
}

CollisionKernelSpec kernel_from(const json& k) {
  CollisionKernelSpec spec;
  spec.gamma = k["gamma"];
  spec.s = k["s"];
  spec.d = k["d"];
  spec.b_amplitude = k["b_amplitude"];
  spec.theta_floor = k["theta_floor"];
  spec.backend = backend_from_name(k["backend"]);
  spec.cutoff = k["cutoff"];
  return spec;
}

AssemblyOptions assembly_from(const json& q) {
  AssemblyOptions ao;
  ao.grid.n_center = q["n_center"];
  ao.grid.n_radial = q["n_radial"];
  ao.grid.n_polar = q["n_polar"];
  ao.grid.n_azimuth = q["n_azimuth"];
  ao.grid.n_sigma_azimuth = q["n_sigma_azimuth"];
  ao.grid.gl_per_panel = q["gl_per_panel"];
  ao.grid.theta_floor = q["theta_floor"];
  ao.check_convergence = q["check_convergence"];
  ao.tolerance = q["tolerance"];
  return ao;
}

std::string num(double v) { return CsvWriter::num(v); }

// The linearized operator with its split and weighted Gram, assembled or loaded from the cache.
struct Workspace {
  json cfg;
  fs::path out;
  Manifest manifest;
  HermiteBasis basis;
  CollisionKernelSpec spec;
  AssemblyOptions aopt;
  LinearizedOperator op;
  WeightedGram gram;
  bool weighted = true;
  bool cache_hit = false;
  std::string cache_key;
  fs::path cache_dir;
  std::unique_ptr<DispersionContext> ctx;

  unsigned long long seed() const { return cfg["seed"].get<unsigned long long>(); }

  void emit_json(const std::string& rel, const json& j) {
    write_json(out / rel, j);
    manifest.add_file(out, rel);
  }
  void emit_csv(const std::string& rel, const CsvWriter& w) {
    w.save(out / rel);
    manifest.add_file(out, rel);
  }

  json cache_identity() const {
    return {{"kind", "linearized_operator"},
            {"code_version", kCodeVersion},
            {"kernel", to_json(spec)},
            {"basis", {{"d", basis.dim_v}, {"N", basis.max_degree}, {"quad_order", basis.quad_order}}},
            {"grid", to_json(aopt.grid)},
            {"check_convergence", aopt.check_convergence},
            {"tolerance", aopt.tolerance}};
  }

  void build_operator(std::ostream& log) {
    const json id = cache_identity();
    cache_key = OperatorCache::key(id);
    const OperatorCache cache(cache_dir);
    if (cache.contains(cache_key)) {
      Mat L;
      const json side = cache.load(cache_key, id, L);
      op = LinearizedOperator{};
      op.L = L;
      op.basis = basis;
      op.kernel = spec;
      const json& c = side.at("convergence");
      op.convergence.checked = c["checked"];
      op.convergence.converged = c["converged"];
      op.convergence.max_change = c["max_change"];
      op.convergence.tolerance = c["tolerance"];
      op.quadrature_tolerance = side.at("quadrature_tolerance");
      cache_hit = true;
      log << "cache hit " << cache_key << "\n";
    } else {
      op = spec.backend == CollisionBackend::maxwell_diagonal ? assemble_L_maxwell_diagonal(basis, spec)
                                                               : assemble_L(basis, spec, aopt);
      cache.store(cache_key, id, op.L,
                  {{"basis", to_json(basis)},
                   {"convergence", to_json(op.convergence)},
                   {"quadrature_tolerance", op.quadrature_tolerance}});
      // Reload so the in-memory matrix is exactly what the cache holds.
      op.L = read_matrix(cache.matrix_path(cache_key));
      log << "cache miss " << cache_key << ", assembled and stored\n";
    }
    if (!op.convergence.converged)
      log << "warning: sigma-grid doubling changed entries by " << op.convergence.max_change << "\n";
    const json& sy = cfg["symbols"];
    weighted = sy["weighted"];
    if (weighted) {
      GalerkinSymbolOptions go;
      go.pad = sy["pad"];
      go.n_x = sy["n_x"];
      go.n_eta = sy["n_eta"];
      gram = weighted_gram(basis, SymbolParams{spec.gamma, spec.s, sy["K0"].get<double>()}, 1, go);
      apply_split(op, &gram.M_a);
    } else {
      gram = WeightedGram{Mat::Identity(basis.size(), basis.size()), Mat::Identity(basis.size(), basis.size()), 1.0, 0.0};
      apply_split(op, nullptr);
    }
  }

  const DispersionContext& dispersion() {
    if (!ctx) ctx = std::make_unique<DispersionContext>(make_dispersion_context(op, weighted ? &gram.M_a : nullptr));
    return *ctx;
  }

  json operator_summary() const {
    return {{"nu0_disc", op.nu0_disc}, {"nu1_disc", op.nu1_disc}, {"C1_disc", op.C1_disc},
            {"nu0_weighted", op.nu0_weighted}, {"spectral_gap", spectral_gap(op)}};
  }
};

std::vector<double> as_vector(const json& a) { return a.get<std::vector<double>>(); }

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void cmd_assemble(Workspace& ws, json& summary) {
  const OperatorCache cache(ws.cache_dir);
  fs::create_directories(ws.out);
  fs::copy_file(cache.matrix_path(ws.cache_key), ws.out / "L.kspc", fs::copy_options::overwrite_existing);
  ws.manifest.add_file(ws.out, "L.kspc");
  write_matrix(ws.out / "A.kspc", ws.op.A);
  ws.manifest.add_file(ws.out, "A.kspc");
  write_matrix(ws.out / "K.kspc", ws.op.K);
  ws.manifest.add_file(ws.out, "K.kspc");
  if (ws.weighted) {
    write_matrix(ws.out / "M_a.kspc", ws.gram.M_a);
    ws.manifest.add_file(ws.out, "M_a.kspc");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (ws.op.L + ws.op.L.transpose()), Eigen::EigenvaluesOnly);
  const Vec ev = es.eigenvalues();
  const double tol = 10.0 * std::max(ws.op.quadrature_tolerance, 1e-10);
  int n_kernel = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) n_kernel += std::abs(ev(i)) <= tol;
  Eigen::JacobiSVD<Mat> svd(ws.op.K);
  const Vec sv = svd.singularValues();
  const int d2 = ws.basis.dim_v + 2;
  json j = ws.operator_summary();
  j["kernel"] = to_json(ws.spec);
  j["grid"] = to_json(ws.aopt.grid);
  j["convergence"] = to_json(ws.op.convergence);
  j["quadrature_tolerance"] = ws.op.quadrature_tolerance;
  j["n_kernel_eigenvalues"] = n_kernel;
  j["kernel_tolerance"] = tol;
  j["lambda_max"] = ev.maxCoeff();
  j["symmetry_defect"] = (ws.op.L - ws.op.L.transpose()).norm() / ws.op.L.norm();
  j["K_rank_ratio"] = sv.size() > d2 ? sv(d2) / sv(0) : 0.0;
  j["eigenvalues"] = vec_json(ev);
  ws.emit_json("operator.json", j);
  ws.emit_json("basis.json", to_json(ws.basis));
  summary = ws.operator_summary();
  summary["n_kernel_eigenvalues"] = n_kernel;
}

void cmd_spectrum(Workspace& ws, json& summary) {
  const DispersionContext& ctx = ws.dispersion();
  CsvWriter csv({"r", "k", "re_lambda", "im_lambda"});
  json per = json::array();
  for (double r : as_vector(ws.cfg["spectrum"]["r"])) {
    const Spectrum sp = spectrum(build_mode_operator(ctx, r));
    for (Eigen::Index k = 0; k < sp.values.size(); ++k)
      csv.row({num(r), std::to_string(k), num(sp.values(k).real()), num(sp.values(k).imag())});
    const FourierModeOperator m = build_mode_operator(ctx, r);
    per.push_back({{"r", r},
                   {"max_re", sp.values.real().maxCoeff()},
                   {"numerical_abscissa", numerical_abscissa(m.B_hat)},
                   {"condition", sp.condition},
                   {"defective", sp.defective}});
  }
  ws.emit_csv("spectrum.csv", csv);
  ws.emit_json("spectrum.json", {{"modes", per}});
  summary["modes"] = per;
}

json branch_summary(Workspace& ws, BranchSet& bs) {
  const json& bc = ws.cfg["branches"];
  bs.fit = fit_asymptotics(bs, bc["r_max"]);
  const ReducedT rt = reduced_T_matrix(ws.dispersion(), 0.0, 0.0);
  Vec Tdiag(rt.T.rows());
  for (Eigen::Index j = 0; j < Tdiag.size(); ++j) Tdiag(j) = rt.T(j, j).real();
  double det_max = 0.0;
  for (Eigen::Index k = 0; k < bs.r_grid.size(); ++k) {
    if (bs.r_grid(k) <= 0.0) continue;
    for (Eigen::Index j = 0; j < bs.lambda.cols(); ++j) {
      double scale = 1.0;
      const cplx det = dispersion_determinant(ws.dispersion(), bs.r_grid(k), bs.lambda(k, j), &scale);
      det_max = std::max(det_max, std::abs(det) / scale);
    }
  }
  return {{"labels", bs.labels},
          {"eta0", vec_json(bs.fit.eta0)},
          {"eta1", vec_json(bs.fit.eta1)},
          {"T_diag", vec_json(Tdiag)},
          {"residual_im", vec_json(bs.fit.residual_im)},
          {"residual_re", vec_json(bs.fit.residual_re)},
          {"continuity_C", bs.continuity_C},
          {"fit_r_max", bs.fit.r_max},
          {"max_relative_determinant", det_max},
          {"warnings", bs.fit.warnings}};
}

BranchSet fit_branches(Workspace& ws) {
  const json& bc = ws.cfg["branches"];
  return track_branches(ws.dispersion(), fit_grid(bc["r_max"], bc["n"]), bc["min_overlap"]);
}

void cmd_branches(Workspace& ws, json& summary) {
  BranchSet bs = fit_branches(ws);
  CsvWriter csv({"r", "j", "re_lambda", "im_lambda", "overlap"});
  for (Eigen::Index k = 0; k < bs.r_grid.size(); ++k)
    for (Eigen::Index j = 0; j < bs.lambda.cols(); ++j)
      csv.row({num(bs.r_grid(k)), std::to_string(j), num(bs.lambda(k, j).real()), num(bs.lambda(k, j).imag()),
               num(bs.overlap(k, j))});
  ws.emit_csv("branches.csv", csv);
  summary = branch_summary(ws, bs);
  ws.emit_json("branches.json", summary);
}

void cmd_gapscan(Workspace& ws, json& summary) {
  const json& gc = ws.cfg["gapscan"];
  const DispersionContext& ctx = ws.dispersion();
  const GapScanReport g = spectral_gap_scan(ctx, default_gap_grid(gc["r_max"]));
  CsvWriter csv({"r", "n_above_gap", "max_re_nonbranch"});
  for (Eigen::Index k = 0; k < g.r_grid.size(); ++k)
    csv.row({num(g.r_grid(k)), std::to_string(g.n_above[k]), num(g.max_re_nonbranch(k))});
  ws.emit_csv("gap.csv", csv);
  BranchSet bs = fit_branches(ws);
  const json br = branch_summary(ws, bs);
  summary = {{"eta0", br["eta0"]}, {"eta1", br["eta1"]},     {"y0", g.y0},         {"y1", g.y1},
             {"y1_found", g.y1_found}, {"sigma0", g.sigma0}, {"sigma1", g.sigma1}, {"tau1", g.tau1},
             {"nu1", g.nu1},         {"max_abscissa", g.max_abscissa}};
  ws.emit_json("gap.json", summary);
  if (gc["resolvent"]) {
    const ResolventBoundReport rb = resolvent_bound_check(ctx, gc["resolvent_samples"], ws.seed());
    const ResolventKReport rk = resolvent_K_decay(ctx, {1, 2, 5, 10, 20, 50}, {1, 2, 5, 10, 20, 50});
    const UniformResolventReport ur = uniform_resolvent_scan(ctx, g, gc["r_max"], 50.0, 60, 101);
    json table = json::array();
    for (const auto& e : rk.table) table.push_back({e.r, e.tau, e.norm});
    const json res = {{"bound_weighted", rb.bound_weighted},
                      {"bound_plain", rb.bound_plain},
                      {"max_weighted", rb.max_weighted},
                      {"max_plain", rb.max_plain},
                      {"bounds_hold", rb.holds},
                      {"K_decay_table", table},
                      {"K_decay_spearman", rk.spearman},
                      {"K_decay_threshold", rk.threshold_found ? json(rk.threshold) : json(nullptr)},
                      {"uniform_sup_plain", ur.sup_plain},
                      {"uniform_sup_weighted", ur.sup_weighted},
                      {"uniform_refinement_change", ur.refinement_change},
                      {"uniform_all_resolvable", ur.all_resolvable}};
    ws.emit_json("resolvent.json", res);
    summary["resolvent"] = res;
  }
}

void cmd_propagate(Workspace& ws, json& summary) {
  const json& pc = ws.cfg["propagate"];
  const DispersionContext& ctx = ws.dispersion();
  std::mt19937_64 rng(ws.seed());
  std::normal_distribution<double> nd;
  CVec f0(ctx.V1.rows());
  for (Eigen::Index i = 0; i < f0.size(); ++i) f0(i) = cplx(nd(rng), nd(rng));
  PropagatorConfig cfg;
  cfg.method = PropagatorMethod::contour;
  cfg.times = as_vector(pc["times"]);
  cfg.k_ibp = pc["k_ibp"];
  cfg.tail_tol = pc["tail_tol"];
  json per = json::array();
  double worst = 0.0;
  for (double r : as_vector(pc["r"])) {
    const FourierModeOperator mode = build_mode_operator(ctx, r);
    const ContourResult cr = propagate_contour(mode, f0, cfg);
    CsvWriter csv({"t", "err_vs_expm", "tail_estimate"});
    double w = 0.0;
    for (size_t q = 0; q < cfg.times.size(); ++q) {
      const CVec e = propagate_expm(mode, f0, cfg.times[q]);
      const double err = (cr.f[q] - e).norm() / e.norm();
      w = std::max(w, err);
      csv.row({num(cfg.times[q]), num(err), num(cr.tail_estimate[q])});
    }
    std::ostringstream name;
    name << "contour_r" << r << ".csv";
    ws.emit_csv(name.str(), csv);
    worst = std::max(worst, w);
    per.push_back({{"r", r},
                   {"file", name.str()},
                   {"sigma2", cr.sigma},
                   {"distance", cr.distance},
                   {"n_trunc", cr.n_trunc},
                   {"quad_step", cr.quad_step},
                   {"k_ibp", cfg.k_ibp},
                   {"nodes", cr.n_nodes},
                   {"residues", cr.n_residues},
                   {"max_relative_error", w}});
  }
  summary = {{"modes", per}, {"max_relative_error", worst}};
  ws.emit_json("propagate.json", summary);
}

void cmd_decay(Workspace& ws, json& summary) {
  const json& dc = ws.cfg["decay"];
  const DispersionContext& ctx = ws.dispersion();
  WholeSpaceProblem wp;
  wp.d_x = ws.basis.dim_v;
  wp.profile = dc["profile"] == "gaussian" ? Profile::gaussian : Profile::critical_lp;
  wp.width = dc["width"];
  wp.m = dc["m"];
  wp.p = dc["p"];
  wp.h = dc["h"] == "psi0" ? Vec(Vec::Unit(ws.basis.size(), 0)) : Vec(kernel_vectors(ws.basis).columns.col(wp.d_x + 1));
  const double t_lo = dc["t_lo"], t_hi = dc["t_hi"];
  if (!(t_hi > t_lo)) throw ConfigError("decay: t_hi must exceed t_lo");
  const int n = dc["n_times"];
  std::vector<double> times{0.0};
  for (int i = 0; i < n; ++i) times.push_back(t_lo * std::pow(t_hi / t_lo, double(i) / (n - 1)));
  const Trajectory tr = solve_linear_whole_space(wp, ctx, times);
  const PowerFit pf = decay_exponent_fit(tr, wp.p, t_lo, t_hi);
  CsvWriter csv({"t", "norm_l2hm", "norm_weighted_hm", "fitted_rate"});
  for (size_t i = 0; i < tr.t.size(); ++i) {
    // Local log-log slope against 1 + t by central differences inside the window.
    double rate = std::nan("");
    if (i > 1 && i + 1 < tr.t.size())
      rate = std::log(tr.norm_l2hm[i + 1] / tr.norm_l2hm[i - 1]) / std::log((1 + tr.t[i + 1]) / (1 + tr.t[i - 1]));
    csv.row({num(tr.t[i]), num(tr.norm_l2hm[i]), num(tr.norm_weighted_hm[i]), num(rate)});
  }
  ws.emit_csv("trajectory.csv", csv);
  const GapScanReport g = spectral_gap_scan(ctx, default_gap_grid());
  std::vector<double> rt;
  for (int i = 0; i <= 20; ++i) rt.push_back(0.1 * std::pow(1000.0, i / 20.0));
  const RegularizingReport rr = regularizing_check(wp, ctx, g, rt, dc["regularizing_k"]);
  summary = {{"exponent", pf.exponent},
             {"predicted", predicted_exponent(wp.d_x, wp.p)},
             {"r2", pf.r2},
             {"flagged", pf.flagged},
             {"warnings", pf.warnings},
             {"plancherel_defect", tr.plancherel_defect},
             {"tail_estimate", tr.tail_estimate},
             {"nodes", tr.n_nodes},
             {"regularizing_sup_ratio", rr.sup_ratio},
             {"sigma_bar", rr.sigma_bar}};
  ws.emit_json("decay.json", summary);
}

void cmd_norms(Workspace& ws, json& summary) {
  const json& nc = ws.cfg["norms"];
  const HermiteBasis& b = ws.basis;
  const double l_default = 0.5 * ws.spec.gamma + ws.spec.s;
  const double l = nc.value("l", l_default);
  auto level = [&](bool refined) {
    GalerkinSymbolOptions go;
    go.pad = ws.cfg["symbols"]["pad"];
    go.n_x = ws.cfg["symbols"]["n_x"];
    go.n_eta = ws.cfg["symbols"]["n_eta"];
    if (refined) {
      go.n_x += 4;
      go.n_eta += 4;
      go.pad += 2;
    }
    const WeightedGram g = weighted_gram(b, SymbolParams{ws.spec.gamma, ws.spec.s, ws.cfg["symbols"]["K0"].get<double>()}, 1, go);
    CollisionGridParams gp = default_triple_grid(b.max_degree);
    NsgOptions no;
    if (refined) {
      gp = doubled_sigma_grid(gp, ws.spec);
      gp.n_center += 1;
      no.n_v = no.n_polar = b.max_degree + 6;
      no.n_azimuth = 2 * b.max_degree + 12;
      no.gl_per_panel = 4;
    }
    return NormMatrices{g.M_a, triple_norm_matrix(b, ws.spec, gp).total(),
                        nsg_norm_matrix(b, ws.spec.gamma, ws.spec.s, no).total(), Mat()};
  };
  NormMatrices base = level(false);
  const auto family = default_norm_family(b, ws.seed());
  auto report = [&](NormMatrices m, double ll) {
    m.dirichlet_plus_weight = -ws.op.L + weight_matrix(b, 2.0 * ll);
    return norm_equivalence_report(family, m, ll);
  };
  const NormEquivalenceReport rep = report(base, l);
  const NormEquivalenceReport rep0 = report(base, 0.0);
  std::vector<std::string> header{"family_id", "norm_a", "norm_triple", "norm_nsg", "norm_dirichlet_plus_weight"};
  std::vector<std::string> keys;
  for (const auto& [k, v] : rep.ratios) {
    keys.push_back(k);
    std::string col = "ratio_" + k;
    std::replace(col.begin(), col.end(), '/', '_');
    header.push_back(col);
  }
  CsvWriter csv(header);
  auto value = [](const NormRow& r, const std::string& name) {
    if (name == "a") return r.norm_a;
    if (name == "triple") return r.norm_triple;
    if (name == "nsg") return r.norm_nsg;
    return r.norm_dirichlet_plus_weight;
  };
  for (const NormRow& r : rep.rows) {
    std::vector<std::string> cells{r.id, num(r.norm_a), num(r.norm_triple), num(r.norm_nsg),
                                   num(r.norm_dirichlet_plus_weight)};
    for (const auto& k : keys) {
      const auto slash = k.find('/');
      const double den = value(r, k.substr(slash + 1));
      cells.push_back(num(den > 0.0 ? value(r, k.substr(0, slash)) / den : std::nan("")));
    }
    csv.row(cells);
  }
  ws.emit_csv("norms.csv", csv);
  auto ranges = [](const NormEquivalenceReport& r) {
    json j = json::object();
    for (const auto& [k, v] : r.ratios) j[k] = {v.min, v.max};
    return j;
  };
  summary = {{"l", l}, {"ratios", ranges(rep)}, {"ratios_l0", ranges(rep0)}};
  summary["nsg_floor_sensitivity"] = nsg_floor_sensitivity(b, ws.spec.gamma, ws.spec.s);
  if (nc["refine"]) summary["drift"] = ratio_drift(rep, report(level(true), l));
  ws.emit_json("norms.json", summary);
}

void cmd_nonlinear(Workspace& ws, json& summary, std::ostream& log) {
  const json& nc = ws.cfg["nonlinear"];
  const DispersionContext& ctx = ws.dispersion();
  const ModeSet modes = nc["model"] == "single_mode_triple" ? single_mode_triple(nc["spacing"])
                                                              : periodic_box_1d_x(nc["spacing"], nc["modes"]);
  XNormConfig xc;
  xc.m = nc["m"];
  xc.delta = nc["delta"];
  const XNorm xn(ctx, modes, xc);
  AssemblyOptions ga = ws.aopt;
  ga.check_convergence = false;
  const GammaTensor gam = assemble_gamma_tensor(ws.basis, ws.spec, ga);
  const double dt = nc["dt"], T = nc["T"];
  const int n_iter = nc["n_iter"];
  const CMat profile = default_nonlinear_profile(modes, ws.basis.size(), ws.seed());
  const CMat unit = profile / std::sqrt(xn.value(profile));
  double eps = 0.0;
  json th = {{"dt", dt}, {"basis", {{"d", ws.basis.dim_v}, {"N", ws.basis.max_degree}}}, {"kernel_spec", to_json(ws.spec)}};
  if (nc.contains("epsilon")) {
    eps = nc["epsilon"];
    th["epsilon_star"] = nullptr;
  } else {
    const ThresholdResult t = epsilon_threshold(xn, gam, profile, dt, T, n_iter);
    th["epsilon_star"] = t.eps_star;
    th["epsilon_fail"] = t.eps_fail;
    th["above_contracted"] = t.above.contracted;
    eps = 0.5 * t.eps_star;
    log << "epsilon threshold " << t.eps_star << "\n";
  }
  const PicardResult pr = picard_solve(xn, gam, eps * unit, dt, T, n_iter);
  const EnergyRun& run = pr.solution;
  CsvWriter csv({"t", "G", "norm_l2hm", "norm_weighted", "step_gamma_constant"});
  for (size_t i = 0; i < run.t.size(); ++i)
    csv.row({num(run.t[i]), num(run.G[i]), num(run.norm_l2hm[i]), num(run.norm_weighted[i]),
             num(i == 0 ? 0.0 : run.step_gamma_constant[i - 1])});
  ws.emit_csv("run_log.csv", csv);
  th["epsilon_run"] = eps;
  th["model"] = modes.kind;
  th["T"] = T;
  th["delta"] = xn.delta();
  th["picard_ratios"] = pr.ratios;
  th["contracted"] = pr.contracted;
  th["converged"] = pr.converged;
  th["C_double_prime"] = pr.C_double_prime;
  th["certificate"] = run.certificate;
  th["lyapunov_residual"] = xn.lyapunov_residual();
  th["warnings"] = run.warnings;
  ws.emit_json("threshold.json", th);
  summary = th;
}

}  // namespace

void validate_against_schema(const json& doc) { check_node(doc, json::parse(config_schema()), ""); }

json resolve_config(const json& raw) {
  validate_against_schema(raw);
  json cfg = default_config();
  cfg.merge_patch(raw);
  validate_against_schema(cfg);
  const CollisionKernelSpec spec = kernel_from(cfg["kernel"]);
  spec.validate();
  if (spec.backend == CollisionBackend::maxwell_diagonal && spec.gamma != 0.0)
    throw ConfigError("kernel: maxwell_diagonal backend requires gamma = 0");
  if (spec.d != 3) throw ConfigError("kernel: only d = 3 is supported by the collision backends");
  if (cfg["basis"]["quad_order"] == 0) cfg["basis"]["quad_order"] = cfg["basis"]["N"].get<int>() + 1;
  if (cfg["basis"]["quad_order"].get<int>() < cfg["basis"]["N"].get<int>() + 1)
    throw ConfigError("basis: quad_order must be at least N + 1");
  XNormConfig xc;
  xc.m = cfg["nonlinear"]["m"];
  xc.delta = cfg["nonlinear"]["delta"];
  xc.validate(spec.d);
  return cfg;
}

RunResult run(const json& config, const RunOverrides& ov, std::ostream& log) {
  json raw = config;
  if (ov.command) raw["command"] = *ov.command;
  if (ov.seed) raw["seed"] = *ov.seed;
  const std::string config_hash = sha256_hex(raw.dump());
  json cfg = resolve_config(raw);
  if (ov.out_dir) cfg["output_dir"] = ov.out_dir->string();
  if (ov.cache_dir) cfg["cache_dir"] = ov.cache_dir->string();

  Workspace ws;
  ws.cfg = cfg;
  ws.out = cfg["output_dir"].get<std::string>();
  ws.cache_dir = cfg["cache_dir"].get<std::string>();
  fs::create_directories(ws.out);
  ws.manifest.add_input("config", config_hash);
  ws.manifest.set("config", cfg);
  RunResult res;
  res.out_dir = ws.out;
  const std::string command = cfg["command"];
  log << "kspec " << command << " -> " << ws.out.string() << "\n";

  if (command == "verify-all") {
    AcceptanceOptions ao;
    ao.N = cfg["basis"]["N"];
    ao.norms_N = cfg["acceptance"]["norms_N"];
    ao.seed = ws.seed();
    ao.only = cfg["acceptance"]["only"].get<std::vector<int>>();
    const auto results = run_acceptance(ao, &log);
    json arr = json::array();
    bool all = true;
    for (const auto& r : results) {
      json j = to_json(r);
      j.erase("seconds");  // keep the file byte-reproducible
      arr.push_back(j);
      all = all && r.pass;
    }
    res.summary = {{"all_pass", all}, {"criteria", arr}};
    ws.emit_json("acceptance.json", res.summary);
    res.exit_code = all ? kExitOk : kExitAcceptance;
  } else {
    ws.spec = kernel_from(cfg["kernel"]);
    ws.aopt = assembly_from(cfg["quadrature"]);
    ws.basis = build_basis(ws.spec.d, cfg["basis"]["N"], cfg["basis"]["quad_order"]);
    ws.build_operator(log);
    ws.manifest.add_input("operator_cache_key", ws.cache_key);
    if (command == "assemble")
      cmd_assemble(ws, res.summary);
    else if (command == "spectrum")
      cmd_spectrum(ws, res.summary);
    else if (command == "branches")
      cmd_branches(ws, res.summary);
    else if (command == "gapscan")
      cmd_gapscan(ws, res.summary);
    else if (command == "propagate")
      cmd_propagate(ws, res.summary);
    else if (command == "decay")
      cmd_decay(ws, res.summary);
    else if (command == "norms")
      cmd_norms(ws, res.summary);
    else if (command == "nonlinear")
      cmd_nonlinear(ws, res.summary, log);
    res.summary["cache_hit"] = ws.cache_hit;
  }
  write_json(ws.out / "manifest.json", ws.manifest.to_json());
  return res;
}

int run_guarded(const fs::path& config_path, const RunOverrides& ov, std::ostream& log, std::ostream& err) {
  std::optional<fs::path> out = ov.out_dir;
  auto report = [&](int code, const std::string& kind, const std::string& msg) {
    const json e = {{"error", kind}, {"message", msg}, {"exit_code", code}};
    err << e.dump() << "\n";
    if (out) {
      try {
        write_json(*out / "error.json", e);
      } catch (...) {
      }
    }
    return code;
  };
  try {
    json raw;
    try {
      raw = json::parse(read_text(config_path));
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!out && raw.is_object() && raw.contains("output_dir") && raw["output_dir"].is_string())
      out = fs::path(raw["output_dir"].get<std::string>());
    const RunResult r = run(raw, ov, log);
    out = r.out_dir;
    if (out) fs::remove(*out / "error.json");
    return r.exit_code;
  } catch (const CacheError& e) {
    return report(kExitConfig, "cache", e.what());
  } catch (const ConfigError& e) {
    return report(kExitConfig, "config", e.what());
  } catch (const json::exception& e) {
    return report(kExitConfig, "config", e.what());
  } catch (const NumericalError& e) {
    return report(kExitNumerical, "numerical", e.what());
  } catch (const std::exception& e) {
    return report(kExitNumerical, "internal", e.what());
  }
}

}  // namespace kspec
