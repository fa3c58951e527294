#pragma once

// Experiment orchestration: train/test splits, nested training subsets,
// learning curves over repetitions, the extrapolation study, the
// derivative-approximation ablation, and result serialization (CSV, JSON
// manifest, SVG plot). All randomness flows from one master seed through
// hand-rolled Fisher-Yates shuffles of the standardized mt19937_64 stream,
// so runs are reproducible across platforms.

#include <phgp/benchmarks.hpp>
#include <phgp/deriv.hpp>
#include <phgp/io.hpp>
#include <phgp/phdae.hpp>
#include <phgp/trajectory.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace phgp {

inline constexpr const char* version_string = "0.1.0";

struct ExperimentConfig {
  std::string benchmark = "circuit";  // circuit | pendulum | path to a CSV with benchmark metadata
  Index n_test = 200;
  std::vector<Index> sizes = {2, 4, 8, 16, 32, 64, 128, 256};
  int repetitions = 5;
  std::uint64_t seed = 0;
  DerivativeMethod derivative;
  std::optional<std::pair<double, double>> window;  // training-selection time window
  AdamConfig adam;
  bool intertask_diag = true;
};

inline void validate_config(const ExperimentConfig& config) {
  if (config.sizes.empty()) throw std::invalid_argument("config: sizes must be non-empty");
  for (std::size_t i = 0; i + 1 < config.sizes.size(); ++i)
    if (!(config.sizes[i] < config.sizes[i + 1]))
      throw std::invalid_argument("config: sizes must be strictly increasing");
  if (config.sizes.front() < 1) throw std::invalid_argument("config: sizes must be positive");
  if (config.repetitions < 1) throw std::invalid_argument("config: repetitions must be >= 1");
  if (config.n_test < 0) throw std::invalid_argument("config: n_test must be >= 0");
  if (config.window && !(config.window->first < config.window->second))
    throw std::invalid_argument("config: window must be a nonempty interval");
}

namespace detail {

// portable: the mt19937_64 output sequence is pinned by the standard,
// std::shuffle and the distributions are not
inline std::vector<Index> seeded_permutation(Index n, std::uint64_t seed) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::mt19937_64 gen(seed);
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(gen() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

}  // namespace detail

struct TrainTestSplit {
  Trajectory test, pool;
  std::vector<Index> test_rows, pool_rows;  // row indices into the source trajectory
};

// Uniform draw without replacement; rows are sorted back into time order.
inline TrainTestSplit split_test(const Trajectory& traj, Index n_test, std::uint64_t seed) {
  const Index n = traj.n_samples();
  if (n_test >= n) throw std::invalid_argument("split_test: n_test must be smaller than the dataset");
  if (n_test < 0) throw std::invalid_argument("split_test: n_test must be >= 0");

  std::vector<Index> perm = detail::seeded_permutation(n, seed);
  TrainTestSplit split;
  split.test_rows.assign(perm.begin(), perm.begin() + n_test);
  split.pool_rows.assign(perm.begin() + n_test, perm.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  std::sort(split.pool_rows.begin(), split.pool_rows.end());
  split.test = select_rows(traj, split.test_rows);
  split.pool = select_rows(traj, split.pool_rows);
  return split;
}

// Strictly nested index sets: a seeded permutation of the pool, subset k its
// first sizes[k] elements. Indices are pool-local.
inline std::vector<std::vector<Index>> nested_subsets(Index pool_size,
                                                      const std::vector<Index>& sizes,
                                                      std::uint64_t seed) {
  if (sizes.empty()) throw std::invalid_argument("nested_subsets: sizes must be non-empty");
  if (sizes.back() > pool_size)
    throw std::invalid_argument("nested_subsets: largest size exceeds the pool");
  std::vector<Index> perm = detail::seeded_permutation(pool_size, seed);
  std::vector<std::vector<Index>> out;
  out.reserve(sizes.size());
  for (Index s : sizes) out.emplace_back(perm.begin(), perm.begin() + s);
  return out;
}

inline VectorXd rmse(const MatrixXd& predictions, const MatrixXd& truth) {
  if (predictions.rows() != truth.rows() || predictions.cols() != truth.cols())
    throw std::invalid_argument("rmse: shape mismatch");
  if (predictions.rows() == 0) throw std::invalid_argument("rmse: no rows");
  return ((predictions - truth).array().square().colwise().mean()).sqrt().matrix().transpose();
}

// Everything a run needs after data loading and derivative construction; the
// derivative GP fit counter backs the computed-exactly-once invariant.
struct PreparedExperiment {
  ExperimentConfig config;
  PhDaeSystem system;
  Trajectory full;  // carries the config's derivative columns
  TrainTestSplit split;
  std::vector<Index> window_pool_rows;  // pool rows inside the training window (source indexing)
  MatrixXd test_truth_zjr, test_truth_z;
  int derivative_gp_fits = 0;
};

namespace detail {

inline MatrixXd oracle_efforts(const PhDaeSystem& sys, const MatrixXd& states) {
  MatrixXd Z(states.rows(), sys.effort_dim());
  for (Index i = 0; i < states.rows(); ++i)
    Z.row(i) = sys.effort(states.row(i).transpose()).transpose();
  return Z;
}

}  // namespace detail

inline std::pair<Trajectory, PhDaeSystem> load_dataset(const std::string& benchmark) {
  if (benchmark == "circuit") return {generate_circuit(), circuit_system()};
  if (benchmark == "pendulum") return {generate_pendulum(), pendulum_system()};
  Trajectory traj = read_trajectory_csv(benchmark);
  auto sys = system_for_trajectory(traj);
  if (!sys)
    throw std::invalid_argument("dataset '" + benchmark +
                                "' carries no benchmark metadata, oracles unavailable");
  return {std::move(traj), std::move(*sys)};
}

inline PreparedExperiment prepare_experiment(const ExperimentConfig& config) {
  validate_config(config);
  PreparedExperiment prep;
  prep.config = config;
  auto [traj, sys] = load_dataset(config.benchmark);
  prep.system = std::move(sys);
  prep.full = std::move(traj);
  if (!prep.system.effort)
    throw std::invalid_argument("experiment requires a benchmark with an effort oracle");

  const Index n = prep.full.n_samples();
  if (config.sizes.back() + config.n_test > n)
    throw std::invalid_argument("config: max(sizes) + n_test exceeds the dataset size");

  // derivative data construction on the full dataset; the per-subset regime
  // (gp_train_only) defers to the evaluation cells
  std::vector<bool> mask = differential_mask(prep.system);
  const Index n_masked =
      static_cast<Index>(std::count(mask.begin(), mask.end(), true));
  switch (config.derivative.kind) {
    case DerivKind::exact_oracle:
      build_derivatives(prep.full, config.derivative, &mask);  // validates oracle presence
      break;
    case DerivKind::finite_difference:
    case DerivKind::gp_full: {
      Trajectory rebuilt = prep.full;
      rebuilt.metadata.erase("derivative_method");
      build_derivatives(rebuilt, config.derivative, &mask);
      prep.full = std::move(rebuilt);
      if (config.derivative.kind == DerivKind::gp_full)
        prep.derivative_gp_fits += static_cast<int>(n_masked);
      break;
    }
    case DerivKind::gp_train_only:
      break;  // recomputed per training subset
  }

  prep.split = split_test(prep.full, config.n_test, config.seed);

  prep.window_pool_rows = prep.split.pool_rows;
  if (config.window) {
    std::vector<Index> inside;
    for (Index r : prep.split.pool_rows)
      if (prep.full.times[r] >= config.window->first && prep.full.times[r] <= config.window->second)
        inside.push_back(r);
    if (inside.empty()) throw std::invalid_argument("config: window selects no pool samples");
    prep.window_pool_rows = std::move(inside);
  }

  if (config.n_test > 0) {
    prep.test_truth_z = detail::oracle_efforts(prep.system, prep.split.test.states);
    prep.test_truth_zjr =
        prep.test_truth_z * (prep.system.J - prep.system.R).transpose();
  }
  return prep;
}

struct CellOutcome {
  bool ok = false;
  VectorXd zjr_rmse, z_rmse;  // NaN-filled on failure
  std::string error;
  double jitter = 0.0, phi = 0.0, lml = 0.0;
};

// One (repetition, size) evaluation: materialize the training subset, restore
// or rebuild its derivative data, identify, and score on the given states.
inline CellOutcome evaluate_cell(PreparedExperiment& prep, const std::vector<Index>& source_rows,
                                 const MatrixXd& eval_states, const MatrixXd& truth_zjr,
                                 const MatrixXd& truth_z, DerivKind kind) {
  const Index D = prep.system.effort_dim();
  CellOutcome cell;
  cell.zjr_rmse = VectorXd::Constant(D, std::numeric_limits<double>::quiet_NaN());
  cell.z_rmse = cell.zjr_rmse;
  try {
    std::vector<Index> rows = source_rows;
    std::sort(rows.begin(), rows.end());
    Trajectory train = select_rows(prep.full, rows);

    std::vector<bool> mask = differential_mask(prep.system);
    IdentifyConfig id;
    id.derivative = prep.config.derivative;
    id.derivative.kind = kind;
    id.adam = prep.config.adam;
    id.intertask_diag = prep.config.intertask_diag;
    if (kind == DerivKind::gp_train_only) {
      train.derivs.reset();
      train.metadata.erase("derivative_method");
      build_derivatives(train, id.derivative, &mask);
      prep.derivative_gp_fits +=
          static_cast<int>(std::count(mask.begin(), mask.end(), true));
    }

    EffortModel model = identify_effort(train, prep.system, id);

    PosteriorSummary post = predict_transformed(model, eval_states);
    Eigen::Map<const MatrixXd> zjr(post.mean.data(), eval_states.rows(), D);
    cell.zjr_rmse = rmse(zjr, truth_zjr);
    cell.z_rmse = rmse(recover_effort(model, eval_states), truth_z);
    cell.ok = true;
    cell.jitter = model.gp.jitter;
    cell.phi = model.gp.scalar.phi;
    cell.lml = log_marginal_likelihood(model.gp);
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

struct LearningCurveResult {
  std::vector<Index> sizes;
  int repetitions = 0;
  std::vector<std::string> labels;
  // raw per-repetition matrices, |sizes| x D, NaN rows where the fit failed
  std::vector<MatrixXd> zjr_raw, z_raw;
  MatrixXd zjr_mean, z_mean;  // mean over the finite repetitions per cell
  std::vector<std::map<std::string, std::string>> cells;  // rep-major cell info
  std::map<std::string, std::string> metadata;
};

namespace detail {

inline MatrixXd nan_mean(const std::vector<MatrixXd>& reps) {
  MatrixXd mean = MatrixXd::Constant(reps[0].rows(), reps[0].cols(),
                                     std::numeric_limits<double>::quiet_NaN());
  for (Index i = 0; i < mean.rows(); ++i)
    for (Index j = 0; j < mean.cols(); ++j) {
      double sum = 0.0;
      int count = 0;
      for (const MatrixXd& r : reps)
        if (std::isfinite(r(i, j))) {
          sum += r(i, j);
          ++count;
        }
      if (count > 0) mean(i, j) = sum / count;
    }
  return mean;
}

inline std::map<std::string, std::string> cell_info(int rep, Index size, const CellOutcome& cell) {
  std::map<std::string, std::string> info;
  info["rep"] = std::to_string(rep);
  info["size"] = std::to_string(size);
  info["ok"] = cell.ok ? "1" : "0";
  if (cell.ok) {
    info["jitter"] = fmt_param(cell.jitter);
    info["phi"] = fmt_param(cell.phi);
    info["lml"] = fmt_param(cell.lml);
  } else {
    info["error"] = cell.error;
  }
  return info;
}

}  // namespace detail

// Learning curve on an already-prepared experiment; the preparation (and with
// it any gp_full derivative fit) is shared between callers.
inline LearningCurveResult run_learning_curve_on(PreparedExperiment& prep) {
  const ExperimentConfig& config = prep.config;
  if (config.n_test < 1)
    throw std::invalid_argument("learning curve requires a non-empty test set");
  const Index D = prep.system.effort_dim();

  LearningCurveResult result;
  result.sizes = config.sizes;
  result.repetitions = config.repetitions;
  result.labels = prep.system.effort_labels;

  int failures = 0;
  for (int rep = 0; rep < config.repetitions; ++rep) {
    const std::uint64_t rep_seed = config.seed + static_cast<std::uint64_t>(rep);
    auto subsets = nested_subsets(static_cast<Index>(prep.window_pool_rows.size()), config.sizes,
                                  rep_seed);
    MatrixXd zjr(static_cast<Index>(config.sizes.size()), D);
    MatrixXd z(static_cast<Index>(config.sizes.size()), D);
    for (std::size_t k = 0; k < config.sizes.size(); ++k) {
      std::vector<Index> rows;
      rows.reserve(subsets[k].size());
      for (Index local : subsets[k]) rows.push_back(prep.window_pool_rows[static_cast<std::size_t>(local)]);
      CellOutcome cell = evaluate_cell(prep, rows, prep.split.test.states, prep.test_truth_zjr,
                                       prep.test_truth_z, config.derivative.kind);
      zjr.row(static_cast<Index>(k)) = cell.zjr_rmse.transpose();
      z.row(static_cast<Index>(k)) = cell.z_rmse.transpose();
      result.cells.push_back(detail::cell_info(rep, config.sizes[k], cell));
      if (!cell.ok) ++failures;
    }
    result.zjr_raw.push_back(std::move(zjr));
    result.z_raw.push_back(std::move(z));
  }
  result.zjr_mean = detail::nan_mean(result.zjr_raw);
  result.z_mean = detail::nan_mean(result.z_raw);
  result.metadata["benchmark"] = config.benchmark;
  result.metadata["derivative_method"] = deriv_kind_name(config.derivative.kind);
  result.metadata["seed"] = std::to_string(config.seed);
  result.metadata["failed_cells"] = std::to_string(failures);
  result.metadata["derivative_gp_fits"] = std::to_string(prep.derivative_gp_fits);
  return result;
}

inline LearningCurveResult run_learning_curve(const ExperimentConfig& config) {
  PreparedExperiment prep = prepare_experiment(config);
  return run_learning_curve_on(prep);
}

struct ExtrapolationResult {
  Index n_train = 0;
  double window_lo = 0.0, window_hi = 0.0;
  std::vector<std::string> labels;
  VectorXd inside_zjr, outside_zjr, inside_z, outside_z;  // per-component RMSE
  std::map<std::string, std::string> metadata;
};

// Train on sizes.back() samples drawn only from the window, evaluate the
// recovered effort (and the transformed prediction) on every dataset sample,
// and report inside/outside errors separately.
inline ExtrapolationResult run_extrapolation_on(PreparedExperiment& prep) {
  const ExperimentConfig& config = prep.config;
  if (!config.window) throw std::invalid_argument("extrapolation requires a training window");
  const Index D = prep.system.effort_dim();
  const Index n_train = config.sizes.back();

  auto subsets = nested_subsets(static_cast<Index>(prep.window_pool_rows.size()), {n_train},
                                config.seed);
  std::vector<Index> rows;
  for (Index local : subsets[0]) rows.push_back(prep.window_pool_rows[static_cast<std::size_t>(local)]);

  std::vector<Index> inside, outside;
  for (Index i = 0; i < prep.full.n_samples(); ++i) {
    if (prep.full.times[i] >= config.window->first && prep.full.times[i] <= config.window->second)
      inside.push_back(i);
    else
      outside.push_back(i);
  }
  if (outside.empty())
    throw std::invalid_argument("extrapolation window covers the whole span, nothing to test");

  std::sort(rows.begin(), rows.end());
  Trajectory train = select_rows(prep.full, rows);
  IdentifyConfig id;
  id.derivative = config.derivative;
  id.adam = config.adam;
  id.intertask_diag = config.intertask_diag;
  if (config.derivative.kind == DerivKind::gp_train_only) {
    train.derivs.reset();
    train.metadata.erase("derivative_method");
    std::vector<bool> mask = differential_mask(prep.system);
    build_derivatives(train, id.derivative, &mask);
  }
  EffortModel model = identify_effort(train, prep.system, id);

  auto score = [&](const std::vector<Index>& region, VectorXd& out_zjr, VectorXd& out_z) {
    Trajectory part = select_rows(prep.full, region);
    MatrixXd tz = detail::oracle_efforts(prep.system, part.states);
    MatrixXd tzjr = tz * (prep.system.J - prep.system.R).transpose();
    PosteriorSummary post = predict_transformed(model, part.states);
    Eigen::Map<const MatrixXd> zjr(post.mean.data(), part.n_samples(), D);
    out_zjr = rmse(zjr, tzjr);
    out_z = rmse(recover_effort(model, part.states), tz);
  };

  ExtrapolationResult result;
  result.n_train = n_train;
  result.window_lo = config.window->first;
  result.window_hi = config.window->second;
  result.labels = prep.system.effort_labels;
  score(inside, result.inside_zjr, result.inside_z);
  score(outside, result.outside_zjr, result.outside_z);
  result.metadata["benchmark"] = config.benchmark;
  result.metadata["derivative_method"] = deriv_kind_name(config.derivative.kind);
  result.metadata["seed"] = std::to_string(config.seed);
  result.metadata["n_inside"] = std::to_string(inside.size());
  result.metadata["n_outside"] = std::to_string(outside.size());
  return result;
}

inline ExtrapolationResult run_extrapolation(const ExperimentConfig& config) {
  PreparedExperiment prep = prepare_experiment(config);
  return run_extrapolation_on(prep);
}

struct DerivStudyResult {
  LearningCurveResult exact, gp_full, gp_train_only;
};

// Three learning curves with identical splits and subsets; only the
// derivative construction differs.
inline DerivStudyResult run_derivative_study(const ExperimentConfig& config) {
  DerivStudyResult study;
  for (DerivKind kind :
       {DerivKind::exact_oracle, DerivKind::gp_full, DerivKind::gp_train_only}) {
    ExperimentConfig arm = config;
    arm.derivative.kind = kind;
    PreparedExperiment prep = prepare_experiment(arm);
    LearningCurveResult r = run_learning_curve_on(prep);
    if (kind == DerivKind::exact_oracle) study.exact = std::move(r);
    else if (kind == DerivKind::gp_full) study.gp_full = std::move(r);
    else study.gp_train_only = std::move(r);
  }
  return study;
}

// ---- serialization ----

namespace detail {

inline nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  j["benchmark"] = config.benchmark;
  j["n_test"] = config.n_test;
  j["sizes"] = config.sizes;
  j["repetitions"] = config.repetitions;
  j["seed"] = config.seed;
  j["derivative_method"] = deriv_kind_name(config.derivative.kind);
  if (config.derivative.kernel_init.phi > 0.0)
    j["derivative_phi_init"] = config.derivative.kernel_init.phi;
  if (config.window) j["window"] = {config.window->first, config.window->second};
  j["adam"] = {{"learning_rate", config.adam.learning_rate},
               {"iterations", config.adam.iterations},
               {"beta1", config.adam.beta1},
               {"beta2", config.adam.beta2},
               {"eps", config.adam.eps}};
  j["intertask_diag"] = config.intertask_diag;
  return j;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{
      "benchmark", "n_test",   "sizes",          "repetitions",
      "seed",      "window",   "adam",           "derivative_method",
      "derivative_phi_init",   "intertask_diag"};
  static const std::set<std::string> known_adam{"learning_rate", "iterations",
                                                "beta1", "beta2", "eps"};
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      throw std::invalid_argument("config: unknown key \"" + item.key() + '"');
  if (j.contains("adam"))
    for (const auto& item : j["adam"].items())
      if (!known_adam.count(item.key()))
        throw std::invalid_argument("config: unknown key \"adam." + item.key() + '"');

  ExperimentConfig config;
  if (j.contains("benchmark")) config.benchmark = j["benchmark"].get<std::string>();
  if (j.contains("n_test")) config.n_test = j["n_test"].get<Index>();
  if (j.contains("sizes")) config.sizes = j["sizes"].get<std::vector<Index>>();
  if (j.contains("repetitions")) config.repetitions = j["repetitions"].get<int>();
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("derivative_method"))
    config.derivative.kind = deriv_kind_from_name(j["derivative_method"].get<std::string>());
  if (j.contains("derivative_phi_init"))
    config.derivative.kernel_init.phi = j["derivative_phi_init"].get<double>();
  if (j.contains("window")) {
    auto w = j["window"].get<std::vector<double>>();
    if (w.size() != 2) throw std::invalid_argument("config: window must have two entries");
    config.window = {w[0], w[1]};
  }
  if (j.contains("adam")) {
    const auto& a = j["adam"];
    if (a.contains("learning_rate")) config.adam.learning_rate = a["learning_rate"].get<double>();
    if (a.contains("iterations")) config.adam.iterations = a["iterations"].get<int>();
    if (a.contains("beta1")) config.adam.beta1 = a["beta1"].get<double>();
    if (a.contains("beta2")) config.adam.beta2 = a["beta2"].get<double>();
    if (a.contains("eps")) config.adam.eps = a["eps"].get<double>();
  }
  if (j.contains("intertask_diag")) config.intertask_diag = j["intertask_diag"].get<bool>();
  validate_config(config);
  return config;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  return config_from_json(nlohmann::json::parse(f));
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string curve_csv(const LearningCurveResult& r) {
  std::ostringstream os;
  os << "size,component,target,mean_rmse";
  for (int rep = 1; rep <= r.repetitions; ++rep) os << ",rep" << rep;
  os << "\n";
  const Index D = static_cast<Index>(r.labels.size());
  for (std::size_t k = 0; k < r.sizes.size(); ++k)
    for (const char* target : {"zjr", "z"}) {
      const bool is_zjr = std::string(target) == "zjr";
      const MatrixXd& mean = is_zjr ? r.zjr_mean : r.z_mean;
      const auto& raw = is_zjr ? r.zjr_raw : r.z_raw;
      for (Index j = 0; j < D; ++j) {
        os << r.sizes[k] << ',' << r.labels[static_cast<std::size_t>(j)] << ',' << target << ','
           << fmt17(mean(static_cast<Index>(k), j));
        for (int rep = 0; rep < r.repetitions; ++rep)
          os << ',' << fmt17(raw[static_cast<std::size_t>(rep)](static_cast<Index>(k), j));
        os << "\n";
      }
    }
  return os.str();
}

inline nlohmann::json curve_manifest(const LearningCurveResult& r, const ExperimentConfig& config) {
  nlohmann::json j;
  j["config"] = config_to_json(config);
  std::vector<std::uint64_t> seeds;
  for (int rep = 0; rep < config.repetitions; ++rep)
    seeds.push_back(config.seed + static_cast<std::uint64_t>(rep));
  j["repetition_seeds"] = seeds;
  j["versions"] = {{"phgp", version_string},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  j["metadata"] = r.metadata;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : r.cells) cells.push_back(cell);
  j["cells"] = cells;
  return j;
}

// log-log polyline plot, one polyline per component of the given mean matrix
inline std::string curve_svg(const std::string& title, const std::vector<Index>& sizes,
                             const MatrixXd& mean, const std::vector<std::string>& labels) {
  const double W = 640, H = 480, ML = 70, MR = 150, MT = 40, MB = 50;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  double xmin = std::log10(double(sizes.front())), xmax = std::log10(double(sizes.back()));
  double ymin = 0.0, ymax = 0.0;
  bool have = false;
  for (Index i = 0; i < mean.rows(); ++i)
    for (Index j = 0; j < mean.cols(); ++j)
      if (std::isfinite(mean(i, j)) && mean(i, j) > 0.0) {
        const double v = std::log10(mean(i, j));
        if (!have) {
          ymin = ymax = v;
          have = true;
        }
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
      }
  if (!have) {
    ymin = -1;
    ymax = 1;
  }
  if (ymax - ymin < 1e-9) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  if (xmax - xmin < 1e-9) xmax = xmin + 1.0;

  auto X = [&](double lx) { return ML + (lx - xmin) / (xmax - xmin) * (W - ML - MR); };
  auto Y = [&](double ly) { return H - MB - (ly - ymin) / (ymax - ymin) * (H - MT - MB); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"15\">"
     << title << "</text>\n";
  os << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR << "\" y2=\"" << H - MB
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\"" << H - MB
     << "\" stroke=\"black\"/>\n";

  for (Index s : sizes) {
    const double x = X(std::log10(double(s)));
    os << "<line x1=\"" << x << "\" y1=\"" << H - MB << "\" x2=\"" << x << "\" y2=\"" << H - MB + 5
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << H - MB + 20
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << s
       << "</text>\n";
  }
  for (int e = static_cast<int>(std::ceil(ymin)); e <= static_cast<int>(std::floor(ymax)); ++e) {
    const double y = Y(double(e));
    os << "<line x1=\"" << ML - 5 << "\" y1=\"" << y << "\" x2=\"" << ML << "\" y2=\"" << y
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ML - 9 << "\" y=\"" << y + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" << e
       << "</text>\n";
  }
  os << "<text x=\"" << (ML + W - MR) / 2 << "\" y=\"" << H - 8
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">training samples"
        "</text>\n";
  os << "<text x=\"16\" y=\"" << (MT + H - MB) / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate("
        "-90 16 "
     << (MT + H - MB) / 2 << ")\">RMSE</text>\n";

  for (Index j = 0; j < mean.cols(); ++j) {
    std::ostringstream pts;
    for (Index i = 0; i < mean.rows(); ++i) {
      if (!std::isfinite(mean(i, j)) || mean(i, j) <= 0.0) continue;
      pts << X(std::log10(double(sizes[static_cast<std::size_t>(i)]))) << ','
          << Y(std::log10(mean(i, j))) << ' ';
    }
    const char* color = colors[j % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
       << pts.str() << "\"/>\n";
    const double ly = MT + 16.0 * static_cast<double>(j) + 10;
    os << "<line x1=\"" << W - MR + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - MR + 34
       << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << W - MR + 40 << "\" y=\"" << ly + 4
       << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << (static_cast<std::size_t>(j) < labels.size() ? labels[static_cast<std::size_t>(j)]
                                                       : "c" + std::to_string(j + 1))
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace detail

// Writes results.csv, manifest.json, and one SVG per target family.
inline void emit_results(const LearningCurveResult& result, const ExperimentConfig& config,
                         const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  detail::write_text((dir / "results.csv").string(), detail::curve_csv(result));
  detail::write_text((dir / "manifest.json").string(),
                     detail::curve_manifest(result, config).dump(2) + "\n");
  detail::write_text((dir / "curve_zjr.svg").string(),
                     detail::curve_svg("transformed output RMSE", result.sizes, result.zjr_mean,
                                       result.labels));
  detail::write_text((dir / "curve_z.svg").string(),
                     detail::curve_svg("recovered effort RMSE", result.sizes, result.z_mean,
                                       result.labels));
}

inline void emit_results(const ExtrapolationResult& result, const ExperimentConfig& config,
                         const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  std::ostringstream os;
  os << "region,component,target,rmse\n";
  const auto row = [&](const char* region, const char* target, const VectorXd& v) {
    for (Index j = 0; j < v.size(); ++j)
      os << region << ',' << result.labels[static_cast<std::size_t>(j)] << ',' << target << ','
         << detail::fmt17(v[j]) << "\n";
  };
  row("inside", "zjr", result.inside_zjr);
  row("inside", "z", result.inside_z);
  row("outside", "zjr", result.outside_zjr);
  row("outside", "z", result.outside_z);
  detail::write_text((dir / "extrapolation.csv").string(), os.str());

  nlohmann::json j;
  j["config"] = detail::config_to_json(config);
  j["n_train"] = result.n_train;
  j["window"] = {result.window_lo, result.window_hi};
  j["metadata"] = result.metadata;
  j["versions"] = {{"phgp", version_string}};
  detail::write_text((dir / "manifest.json").string(), j.dump(2) + "\n");
}

// Per-arm CSVs plus a combined first-component plot.
inline void emit_results(const DerivStudyResult& study, const ExperimentConfig& config,
                         const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  detail::write_text((dir / "study_exact.csv").string(), detail::curve_csv(study.exact));
  detail::write_text((dir / "study_gp_full.csv").string(), detail::curve_csv(study.gp_full));
  detail::write_text((dir / "study_gp_train_only.csv").string(),
                     detail::curve_csv(study.gp_train_only));

  nlohmann::json j;
  j["config"] = detail::config_to_json(config);
  j["metadata"] = {{"exact", study.exact.metadata},
                   {"gp_full", study.gp_full.metadata},
                   {"gp_train_only", study.gp_train_only.metadata}};
  j["versions"] = {{"phgp", version_string}};
  detail::write_text((dir / "manifest.json").string(), j.dump(2) + "\n");

  const Index S = static_cast<Index>(study.exact.sizes.size());
  MatrixXd first(S, 6);
  first.col(0) = study.exact.zjr_mean.col(0);
  first.col(1) = study.exact.z_mean.col(0);
  first.col(2) = study.gp_full.zjr_mean.col(0);
  first.col(3) = study.gp_full.z_mean.col(0);
  first.col(4) = study.gp_train_only.zjr_mean.col(0);
  first.col(5) = study.gp_train_only.z_mean.col(0);
  std::vector<std::string> labels = {"exact zjr1",    "exact z1",    "gp_full zjr1",
                                     "gp_full z1",    "gp_train zjr1", "gp_train z1"};
  detail::write_text((dir / "study.svg").string(),
                     detail::curve_svg("derivative study, first component", study.exact.sizes,
                                       first, labels));
}

}  // namespace phgp
