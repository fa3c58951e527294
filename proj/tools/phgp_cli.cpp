// Command-line front end: benchmark data generation, effort identification,
// learning-curve / extrapolation / derivative-study experiments, and dataset
// validation. Exit codes: 0 success, 1 usage error, 2 numerical failure.

#include <CLI11.hpp>

#include <phgp/harness.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace phgp;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_value(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError("--param " + key + ": cannot parse value '" + text + "'");
  }
}

void require_file(const std::string& path, const std::string& flag) {
  if (!std::filesystem::exists(path)) throw UsageError(flag + ": no such file: " + path);
}

DerivKind deriv_from_flag(const std::string& name) {
  try {
    return deriv_kind_from_name(name);
  } catch (const std::invalid_argument&) {
    throw UsageError("--deriv: expected one of fd|gp-full|gp-train|exact, got '" + name + "'");
  }
}

std::pair<double, double> parse_window(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw UsageError("--window: expected LO:HI, got '" + text + "'");
  try {
    const double lo = std::stod(text.substr(0, colon));
    const double hi = std::stod(text.substr(colon + 1));
    return {lo, hi};
  } catch (const std::exception&) {
    throw UsageError("--window: cannot parse '" + text + "'");
  }
}

// ---- generate ----

int run_generate(const std::string& benchmark, const std::vector<std::string>& params,
                 const std::string& out, std::string system_out) {
  std::map<std::string, double> kv;
  for (const std::string& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw UsageError("--param: expected k=v, got '" + p + "'");
    const std::string key = p.substr(0, eq);
    kv[key] = parse_value(key, p.substr(eq + 1));
  }
  auto take = [&kv](const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    const double v = it->second;
    kv.erase(it);
    return v;
  };

  Trajectory traj;
  PhDaeSystem sys;
  if (benchmark == "circuit") {
    CircuitParams p;
    p.G = take("G", p.G);
    p.a = take("a", p.a);
    p.omega = take("omega", p.omega);
    p.x1_0 = take("x1_0", p.x1_0);
    p.n_steps = static_cast<Index>(take("n_steps", static_cast<double>(p.n_steps)));
    if (!kv.empty()) throw UsageError("--param: unknown circuit parameter '" + kv.begin()->first + "'");
    traj = generate_circuit(p);
    sys = circuit_system(p);
  } else if (benchmark == "pendulum") {
    PendulumParams p;
    p.m = take("m", p.m);
    p.l = take("l", p.l);
    p.g_tilde = take("g_tilde", p.g_tilde);
    p.tau = take("tau", p.tau);
    p.beta = take("beta", p.beta);
    p.alpha_0 = take("alpha_0", p.alpha_0);
    p.alpha_dot_0 = take("alpha_dot_0", p.alpha_dot_0);
    p.h = take("h", p.h);
    p.t_end = take("t_end", p.t_end);
    if (!kv.empty())
      throw UsageError("--param: unknown pendulum parameter '" + kv.begin()->first + "'");
    traj = generate_pendulum(p);
    sys = pendulum_system(p);
  } else {
    throw UsageError("--benchmark: expected circuit or pendulum, got '" + benchmark + "'");
  }

  write_trajectory_csv(out, traj);
  if (system_out.empty()) system_out = out + ".system.json";
  write_system_json(system_out, sys);
  std::cout << "wrote " << traj.n_samples() << " samples to " << out << "\n"
            << "wrote system structure to " << system_out << "\n";
  return 0;
}

// ---- identify ----

int run_identify(const std::string& data, const std::string& system, Index ntrain,
                 std::uint64_t seed, const std::string& deriv, const std::string& out) {
  require_file(data, "--data");
  require_file(system, "--system");
  Trajectory traj = read_trajectory_csv(data);
  PhDaeSystem sys = read_system_json(system);
  if (traj.state_dim() != sys.state_dim() || traj.input_dim() != sys.input_dim())
    throw UsageError("--system: dimensions disagree with the dataset");
  if (ntrain < 1 || ntrain > traj.n_samples())
    throw UsageError("--ntrain: must be in [1, " + std::to_string(traj.n_samples()) + "]");

  std::vector<Index> rows = nested_subsets(traj.n_samples(), {ntrain}, seed)[0];
  std::sort(rows.begin(), rows.end());
  Trajectory train = select_rows(traj, rows);

  IdentifyConfig config;
  config.derivative.kind = deriv_from_flag(deriv);
  EffortModel model = identify_effort(train, sys, config);

  nlohmann::json doc;
  doc["version"] = version_string;
  doc["system"] = {{"E", phgp::detail::matrix_to_json(sys.E)},
                   {"J", phgp::detail::matrix_to_json(sys.J)},
                   {"R", phgp::detail::matrix_to_json(sys.R)},
                   {"B", phgp::detail::matrix_to_json(sys.B)},
                   {"labels", sys.state_labels}};
  doc["phi"] = model.gp.scalar.phi;
  doc["v"] = std::vector<double>(model.gp.tasks.v.data(),
                                 model.gp.tasks.v.data() + model.gp.tasks.v.size());
  doc["tau"] = std::vector<double>(model.gp.tasks.tau.data(),
                                   model.gp.tasks.tau.data() + model.gp.tasks.tau.size());
  doc["noise_vars"] = std::vector<double>(model.gp.noise_vars.data(),
                                          model.gp.noise_vars.data() + model.gp.noise_vars.size());
  doc["jitter"] = model.gp.jitter;
  doc["log_marginal_likelihood"] = log_marginal_likelihood(model.gp);
  doc["n_train"] = ntrain;
  doc["seed"] = seed;
  doc["derivative_method"] = deriv_kind_name(config.derivative.kind);
  doc["train_inputs"] = phgp::detail::matrix_to_json(model.gp.inputs);
  doc["stacked_targets"] = std::vector<double>(
      model.gp.stacked_targets.data(),
      model.gp.stacked_targets.data() + model.gp.stacked_targets.size());
  doc["metadata"] = model.metadata;

  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot open for writing: " + out);
  f << doc.dump(2) << "\n";

  std::cout << "identified effort model from " << ntrain << " samples\n"
            << "  log marginal likelihood: " << log_marginal_likelihood(model.gp) << "\n"
            << "  length scale: " << model.gp.scalar.phi << "\n"
            << "  jitter: " << model.gp.jitter << "\n"
            << "wrote model to " << out << "\n";
  return 0;
}

// ---- experiment runners ----

ExperimentConfig config_from_flags(const std::string& config_path) {
  require_file(config_path, "--config");
  try {
    return load_config(config_path);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("--config: " + std::string(e.what()));
  } catch (const std::invalid_argument& e) {
    throw UsageError("--config: " + std::string(e.what()));
  }
}

void print_curve(const LearningCurveResult& r) {
  std::cout << "size";
  for (const std::string& label : r.labels) std::cout << "  z_jr:" << label;
  for (const std::string& label : r.labels) std::cout << "  z:" << label;
  std::cout << "\n";
  for (Index k = 0; k < static_cast<Index>(r.sizes.size()); ++k) {
    std::cout << r.sizes[static_cast<std::size_t>(k)];
    for (Index j = 0; j < r.zjr_mean.cols(); ++j) std::printf("  %.3e", r.zjr_mean(k, j));
    for (Index j = 0; j < r.z_mean.cols(); ++j) std::printf("  %.3e", r.z_mean(k, j));
    std::cout << "\n";
  }
}

int run_curve_cmd(const std::string& config_path, const std::string& out_dir) {
  ExperimentConfig config = config_from_flags(config_path);
  LearningCurveResult result = run_learning_curve(config);
  emit_results(result, config, out_dir);
  print_curve(result);
  std::cout << "wrote results to " << out_dir << "\n";
  return 0;
}

int run_extrapolate_cmd(const std::string& config_path, const std::string& window,
                        const std::string& out_dir) {
  ExperimentConfig config = config_from_flags(config_path);
  if (!window.empty()) config.window = parse_window(window);
  if (!config.window) throw UsageError("extrapolate needs --window or a window in the config");
  ExtrapolationResult result = run_extrapolation(config);
  emit_results(result, config, out_dir);
  std::cout << "trained on " << result.n_train << " samples from [" << result.window_lo << ", "
            << result.window_hi << "]\n";
  for (std::size_t j = 0; j < result.labels.size(); ++j)
    std::printf("  %s: inside %.3e, outside %.3e\n", result.labels[j].c_str(),
                result.inside_z[static_cast<Index>(j)], result.outside_z[static_cast<Index>(j)]);
  std::cout << "wrote results to " << out_dir << "\n";
  return 0;
}

int run_study_cmd(const std::string& config_path, const std::string& out_dir) {
  ExperimentConfig config = config_from_flags(config_path);
  DerivStudyResult study = run_derivative_study(config);
  emit_results(study, config, out_dir);
  for (const auto& [name, r] : {std::pair<const char*, const LearningCurveResult&>{
                                    "exact", study.exact},
                                {"gp_full", study.gp_full},
                                {"gp_train_only", study.gp_train_only}}) {
    std::cout << "== " << name << " ==\n";
    print_curve(r);
  }
  std::cout << "wrote results to " << out_dir << "\n";
  return 0;
}

// ---- validate ----

int run_validate(const std::string& data, const std::string& system, double tol) {
  require_file(data, "--data");
  Trajectory traj = read_trajectory_csv(data);

  PhDaeSystem sys;
  bool have_oracles = false;
  if (!system.empty()) {
    require_file(system, "--system");
    sys = read_system_json(system);
    // a matching benchmark tag upgrades the structure with its oracles
    if (auto oracle = system_for_trajectory(traj)) {
      if (oracle->E == sys.E && oracle->J == sys.J && oracle->R == sys.R && oracle->B == sys.B) {
        sys = std::move(*oracle);
        have_oracles = true;
      }
    }
  } else if (auto oracle = system_for_trajectory(traj)) {
    sys = std::move(*oracle);
    have_oracles = true;
  } else {
    throw UsageError("validate needs --system or a dataset with benchmark metadata");
  }

  int failures = 0;
  auto report = [&failures](const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << detail << "\n";
    if (!pass) ++failures;
  };

  try {
    validate_system(sys);
    report("structure", true, "J skew-symmetric, R symmetric PSD, E admissible");
  } catch (const std::exception& e) {
    report("structure", false, e.what());
  }

  const bool dims_ok =
      traj.state_dim() == sys.state_dim() && traj.input_dim() == sys.input_dim();
  report("dimensions", dims_ok,
         "dataset " + std::to_string(traj.state_dim()) + " states / " +
             std::to_string(traj.input_dim()) + " inputs");
  if (!dims_ok) return 2;

  if (have_oracles && traj.derivs) {
    double worst = 0.0;
    const MatrixXd A = sys.J - sys.R;
    for (Index i = 0; i < traj.n_samples(); ++i) {
      const VectorXd z = sys.effort(traj.states.row(i).transpose());
      const VectorXd r = sys.E * traj.derivs->row(i).transpose() - A * z -
                         sys.B * traj.inputs.row(i).transpose();
      worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
    std::ostringstream os;
    os << "max |E x' - (J-R) z - B u| = " << worst << " (tol " << tol << ")";
    report("residual", worst <= tol, os.str());
  } else {
    std::cout << "[SKIP] residual: "
              << (have_oracles ? "no derivative columns" : "no effort oracle") << "\n";
  }

  if (have_oracles) {
    DissipativityReport rep = check_dissipativity(traj, sys);
    std::ostringstream os;
    os << "max (dH/dt - y^T u) = " << rep.max_violation << " (tol " << rep.tol << ")";
    report("dissipativity", rep.pass, os.str());

    const double worst = check_compatibility(sys, traj.states);
    std::ostringstream os2;
    os2 << "max |E^T z - grad H| = " << worst << " (tol 1e-8)";
    report("compatibility", worst <= 1e-8, os2.str());
  } else {
    std::cout << "[SKIP] dissipativity: no Hamiltonian oracle\n"
              << "[SKIP] compatibility: no effort oracle\n";
  }

  return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GP-based effort identification for port-Hamiltonian DAE systems"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "integrate a benchmark and write its dataset");
  std::string gen_benchmark, gen_out, gen_system_out;
  std::vector<std::string> gen_params;
  gen->add_option("--benchmark", gen_benchmark, "circuit or pendulum")->required();
  gen->add_option("--param", gen_params, "override a benchmark parameter, k=v");
  gen->add_option("--out", gen_out, "output CSV path")->required();
  gen->add_option("--system-out", gen_system_out,
                  "output path for the system structure (default: <out>.system.json)");

  auto* ident = app.add_subcommand("identify", "fit an effort model to a dataset");
  std::string id_data, id_system, id_deriv = "fd", id_out;
  Index id_ntrain = 0;
  std::uint64_t id_seed = 0;
  ident->add_option("--data", id_data, "trajectory CSV")->required();
  ident->add_option("--system", id_system, "system structure JSON")->required();
  ident->add_option("--ntrain", id_ntrain, "number of training samples")->required();
  ident->add_option("--seed", id_seed, "selection seed (default 0)");
  ident->add_option("--deriv", id_deriv, "derivative source: fd|gp-full|gp-train|exact");
  ident->add_option("--out", id_out, "output model JSON path")->required();

  auto* curve = app.add_subcommand("learning-curve", "run a learning-curve experiment");
  std::string curve_config, curve_out;
  curve->add_option("--config", curve_config, "experiment config JSON")->required();
  curve->add_option("--out-dir", curve_out, "output directory")->required();

  auto* extrap = app.add_subcommand("extrapolate", "train inside a time window, score everywhere");
  std::string ex_config, ex_window, ex_out;
  extrap->add_option("--config", ex_config, "experiment config JSON")->required();
  extrap->add_option("--window", ex_window, "training window LO:HI (overrides the config)");
  extrap->add_option("--out-dir", ex_out, "output directory")->required();

  auto* study = app.add_subcommand("deriv-study", "compare derivative sources on one benchmark");
  std::string st_config, st_out;
  study->add_option("--config", st_config, "experiment config JSON")->required();
  study->add_option("--out-dir", st_out, "output directory")->required();

  auto* val = app.add_subcommand("validate", "check a dataset against a system structure");
  std::string val_data, val_system;
  double val_tol = 1e-6;
  val->add_option("--data", val_data, "trajectory CSV")->required();
  val->add_option("--system", val_system, "system structure JSON (default: benchmark metadata)");
  val->add_option("--tol", val_tol, "residual tolerance (default 1e-6)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version exit cleanly, parse errors are usage errors
  }

  try {
    if (gen->parsed()) return run_generate(gen_benchmark, gen_params, gen_out, gen_system_out);
    if (ident->parsed())
      return run_identify(id_data, id_system, id_ntrain, id_seed, id_deriv, id_out);
    if (curve->parsed()) return run_curve_cmd(curve_config, curve_out);
    if (extrap->parsed()) return run_extrapolate_cmd(ex_config, ex_window, ex_out);
    if (study->parsed()) return run_study_cmd(st_config, st_out);
    if (val->parsed()) return run_validate(val_data, val_system, val_tol);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
