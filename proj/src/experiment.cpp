#include "piht/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "piht/matrix_io.hpp"
#include "piht/sparsity.hpp"

namespace piht {

using nlohmann::json;

namespace {

std::string format_g17(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

// --- config parsing ---------------------------------------------------------

[[noreturn]] void parse_fail(const std::string& origin, const std::string& message) {
  throw ParseError(origin + ": " + message);
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& origin, const std::string& section) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) parse_fail(origin, "unknown key '" + it.key() + "' in " + section);
  }
}

const json& require_object(const json& obj, const char* key, const std::string& origin) {
  auto it = obj.find(key);
  if (it == obj.end()) parse_fail(origin, std::string("missing section '") + key + "'");
  if (!it->is_object()) parse_fail(origin, std::string("'") + key + "' must be an object");
  return *it;
}

double get_number(const json& obj, const char* key, const std::string& origin,
                  bool required, double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) parse_fail(origin, std::string("missing numeric field '") + key + "'");
    return fallback;
  }
  if (!it->is_number()) parse_fail(origin, std::string("'") + key + "' must be a number");
  return it->get<double>();
}

int get_int(const json& obj, const char* key, const std::string& origin,
            bool required, int fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) parse_fail(origin, std::string("missing integer field '") + key + "'");
    return fallback;
  }
  if (!it->is_number_integer()) parse_fail(origin, std::string("'") + key + "' must be an integer");
  return it->get<int>();
}

std::uint64_t get_seed(const json& obj, const char* key, const std::string& origin,
                       std::uint64_t fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
    parse_fail(origin, std::string("'") + key + "' must be a nonnegative integer");
  }
  return it->get<std::uint64_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& origin,
                       bool required, const std::string& fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) parse_fail(origin, std::string("missing string field '") + key + "'");
    return fallback;
  }
  if (!it->is_string()) parse_fail(origin, std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

ProblemSpec parse_problem(const json& obj, const std::string& origin) {
  ProblemSpec spec;
  const std::string kind = get_string(obj, "class", origin, true, "");
  if (kind == "sparse-ls") {
    spec.kind = ProblemKind::SparseLs;
    check_keys(obj, {"class", "n", "N", "k_star", "noise_std", "seed"}, origin, "problem");
    spec.dim = get_int(obj, "n", origin, true, 0);
    spec.samples = get_int(obj, "N", origin, true, 0);
    spec.true_sparsity = get_int(obj, "k_star", origin, true, 0);
    spec.noise_std = get_number(obj, "noise_std", origin, false, 0.0);
    spec.seed = get_seed(obj, "seed", origin, 0);
  } else if (kind == "logistic") {
    spec.kind = ProblemKind::Logistic;
    check_keys(obj, {"class", "n", "N", "k_star", "flip_prob", "seed"}, origin, "problem");
    spec.dim = get_int(obj, "n", origin, true, 0);
    spec.samples = get_int(obj, "N", origin, true, 0);
    spec.true_sparsity = get_int(obj, "k_star", origin, true, 0);
    spec.flip_prob = get_number(obj, "flip_prob", origin, false, 0.05);
    spec.seed = get_seed(obj, "seed", origin, 0);
  } else if (kind == "ggm-synthetic") {
    spec.kind = ProblemKind::GgmSynthetic;
    check_keys(obj, {"class", "p", "N", "true_pairs", "seed"}, origin, "problem");
    spec.dim = get_int(obj, "p", origin, true, 0);
    spec.samples = get_int(obj, "N", origin, true, 0);
    spec.true_pairs = get_int(obj, "true_pairs", origin, true, 0);
    spec.seed = get_seed(obj, "seed", origin, 0);
  } else if (kind == "ggm-file") {
    spec.kind = ProblemKind::GgmFile;
    check_keys(obj, {"class", "data_file"}, origin, "problem");
    spec.data_file = get_string(obj, "data_file", origin, true, "");
  } else {
    parse_fail(origin, "unknown problem class '" + kind + "'");
  }
  return spec;
}

SolverConfig parse_solver(const json& obj, const std::string& origin) {
  SolverConfig cfg;
  check_keys(obj,
             {"K", "alpha", "eta1", "eta2", "gamma", "delta0", "delta_max", "max_iterations",
              "seed", "stationarity_tol", "delta_stop", "mode", "accuracy"},
             origin, "solver");
  cfg.k = get_int(obj, "K", origin, true, 1);
  cfg.alpha = get_number(obj, "alpha", origin, false, cfg.alpha);
  cfg.eta1 = get_number(obj, "eta1", origin, false, cfg.eta1);
  cfg.eta2 = get_number(obj, "eta2", origin, false, cfg.eta2);
  cfg.gamma = get_number(obj, "gamma", origin, false, cfg.gamma);
  cfg.delta0 = get_number(obj, "delta0", origin, false, cfg.delta0);
  cfg.delta_max = get_number(obj, "delta_max", origin, false, cfg.delta_max);
  cfg.max_iterations = get_int(obj, "max_iterations", origin, false, cfg.max_iterations);
  cfg.seed = get_seed(obj, "seed", origin, 0);
  cfg.stationarity_tol = get_number(obj, "stationarity_tol", origin, false, cfg.stationarity_tol);
  cfg.delta_stop = get_number(obj, "delta_stop", origin, false, cfg.delta_stop);
  const std::string mode = get_string(obj, "mode", origin, false, "stochastic");
  if (mode == "full-batch") {
    cfg.mode = SolverMode::FullBatch;
  } else if (mode == "stochastic") {
    cfg.mode = SolverMode::Stochastic;
  } else {
    parse_fail(origin, "solver.mode must be 'full-batch' or 'stochastic'");
  }
  if (auto it = obj.find("accuracy"); it != obj.end()) {
    if (!it->is_object()) parse_fail(origin, "'accuracy' must be an object");
    check_keys(*it, {"eps_f", "kappa_g", "kappa_f", "pilot_size", "min_batch"}, origin,
               "solver.accuracy");
    cfg.accuracy.eps_f = get_number(*it, "eps_f", origin, false, cfg.accuracy.eps_f);
    cfg.accuracy.kappa_g = get_number(*it, "kappa_g", origin, false, cfg.accuracy.kappa_g);
    cfg.accuracy.kappa_f = get_number(*it, "kappa_f", origin, false, cfg.accuracy.kappa_f);
    cfg.accuracy.pilot_size = get_int(*it, "pilot_size", origin, false, cfg.accuracy.pilot_size);
    cfg.accuracy.min_batch = get_int(*it, "min_batch", origin, false, cfg.accuracy.min_batch);
  }
  return cfg;
}

// --- summary helpers --------------------------------------------------------

int constrained_nonzeros(const DenseVector& x, int free_prefix) {
  int count = 0;
  for (Eigen::Index i = free_prefix; i < x.size(); ++i) {
    if (x[i] != 0.0) ++count;
  }
  return count;
}

double restricted_grad_norm_at(const DenseVector& grad, const DenseVector& x,
                               int free_prefix, int k) {
  if (constrained_nonzeros(x, free_prefix) < k) return grad.norm();
  double sum = 0.0;
  for (int i = 0; i < free_prefix; ++i) sum += grad[i] * grad[i];
  for (Eigen::Index i = free_prefix; i < x.size(); ++i) {
    if (x[i] != 0.0) sum += grad[i] * grad[i];
  }
  return std::sqrt(sum);
}

const char* stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::MaxIterations: return "max-iterations";
    case StopReason::DeltaFloor: return "delta-floor";
    case StopReason::StationarityReached: return "stationarity-reached";
  }
  return "unknown";
}

}  // namespace

ExperimentConfig parse_experiment_config_text(const std::string& text,
                                              const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ParseError(origin + ": " + err.what());
  }
  if (!root.is_object()) parse_fail(origin, "top level must be an object");
  check_keys(root, {"problem", "solver", "sweep", "runs_per_setting", "start", "output_dir"},
             origin, "the top level");

  ExperimentConfig config;
  config.problem = parse_problem(require_object(root, "problem", origin), origin);
  config.solver = parse_solver(require_object(root, "solver", origin), origin);

  if (auto it = root.find("sweep"); it != root.end()) {
    if (!it->is_array()) parse_fail(origin, "'sweep' must be an array of integers");
    for (const json& v : *it) {
      if (!v.is_number_integer()) parse_fail(origin, "'sweep' must be an array of integers");
      config.sweep.push_back(v.get<int>());
    }
  }
  config.runs_per_setting = get_int(root, "runs_per_setting", origin, false, 10);
  const std::string start = get_string(root, "start", origin, false, "zeros");
  if (start == "zeros") {
    config.start = StartMode::Zeros;
  } else if (start == "random-feasible") {
    config.start = StartMode::RandomFeasible;
  } else {
    parse_fail(origin, "start must be 'zeros' or 'random-feasible'");
  }
  config.output_dir = get_string(root, "output_dir", origin, false, "piht-out");
  return config;
}

ExperimentConfig parse_experiment_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config_text(buffer.str(), path);
}

std::string experiment_config_to_json(const ExperimentConfig& config) {
  json problem;
  switch (config.problem.kind) {
    case ProblemKind::SparseLs:
      problem = {{"class", "sparse-ls"}, {"n", config.problem.dim},
                 {"N", config.problem.samples}, {"k_star", config.problem.true_sparsity},
                 {"noise_std", config.problem.noise_std},
                 {"seed", config.problem.seed}};
      break;
    case ProblemKind::Logistic:
      problem = {{"class", "logistic"}, {"n", config.problem.dim},
                 {"N", config.problem.samples}, {"k_star", config.problem.true_sparsity},
                 {"flip_prob", config.problem.flip_prob}, {"seed", config.problem.seed}};
      break;
    case ProblemKind::GgmSynthetic:
      problem = {{"class", "ggm-synthetic"}, {"p", config.problem.dim},
                 {"N", config.problem.samples}, {"true_pairs", config.problem.true_pairs},
                 {"seed", config.problem.seed}};
      break;
    case ProblemKind::GgmFile:
      problem = {{"class", "ggm-file"}, {"data_file", config.problem.data_file}};
      break;
  }
  json solver = {
      {"K", config.solver.k},
      {"alpha", config.solver.alpha},
      {"eta1", config.solver.eta1},
      {"eta2", config.solver.eta2},
      {"gamma", config.solver.gamma},
      {"delta0", config.solver.delta0},
      {"delta_max", config.solver.delta_max},
      {"max_iterations", config.solver.max_iterations},
      {"seed", config.solver.seed},
      {"stationarity_tol", config.solver.stationarity_tol},
      {"delta_stop", config.solver.delta_stop},
      {"mode", config.solver.mode == SolverMode::FullBatch ? "full-batch" : "stochastic"},
      {"accuracy",
       {{"eps_f", config.solver.accuracy.eps_f},
        {"kappa_g", config.solver.accuracy.kappa_g},
        {"kappa_f", config.solver.accuracy.kappa_f},
        {"pilot_size", config.solver.accuracy.pilot_size},
        {"min_batch", config.solver.accuracy.min_batch}}},
  };
  json root = {{"problem", problem},
               {"solver", solver},
               {"runs_per_setting", config.runs_per_setting},
               {"start", config.start == StartMode::Zeros ? "zeros" : "random-feasible"},
               {"output_dir", config.output_dir}};
  if (!config.sweep.empty()) root["sweep"] = config.sweep;
  return root.dump(2);
}

ValidationReport validate_config(const ExperimentConfig& config) {
  ValidationReport report;
  auto violation = [&report](const std::string& message) { report.violations.push_back(message); };
  auto notice = [&report](const std::string& message) { report.notices.push_back(message); };

  const SolverConfig& s = config.solver;
  if (!(s.gamma > 1.0)) {
    violation("solver.gamma must exceed 1 (delta expands on success, shrinks by 1/gamma on "
              "failure); got " + format_g17(s.gamma));
  }
  if (!(s.delta0 > 0.0) || !(s.delta0 <= s.delta_max)) {
    violation("solver.delta0 must lie in (0, delta_max]; got delta0=" + format_g17(s.delta0) +
              ", delta_max=" + format_g17(s.delta_max));
  }
  if (!(s.alpha > 0.0)) violation("solver.alpha must be positive");
  if (!(s.eta1 > 0.0)) violation("solver.eta1 must be positive");
  if (!(s.eta2 > 0.0)) violation("solver.eta2 must be positive");
  if (s.max_iterations < 0) violation("solver.max_iterations must be nonnegative");
  if (!(s.stationarity_tol > 0.0)) violation("solver.stationarity_tol must be positive");
  if (!(s.delta_stop > 0.0)) violation("solver.delta_stop must be positive");
  if (!(s.accuracy.eps_f > 0.0)) violation("solver.accuracy.eps_f must be positive");
  if (!(s.accuracy.kappa_g > 0.0)) violation("solver.accuracy.kappa_g must be positive");
  if (!(s.accuracy.kappa_f > 0.0)) violation("solver.accuracy.kappa_f must be positive");
  if (s.accuracy.pilot_size < 1) violation("solver.accuracy.pilot_size must be positive");
  if (s.accuracy.min_batch < 1) violation("solver.accuracy.min_batch must be positive");
  if (config.runs_per_setting < 1) violation("runs_per_setting must be positive");

  const ProblemSpec& p = config.problem;
  int constrained_dim = 0;
  switch (p.kind) {
    case ProblemKind::SparseLs:
    case ProblemKind::Logistic:
      if (p.dim < 1) violation("problem.n must be positive");
      if (p.samples < 1) violation("problem.N must be positive");
      if (p.true_sparsity < 1 || p.true_sparsity > p.dim) {
        violation("problem.k_star must lie in [1, n]");
      }
      if (p.kind == ProblemKind::SparseLs && p.noise_std < 0.0) {
        violation("problem.noise_std must be nonnegative");
      }
      if (p.kind == ProblemKind::Logistic && (p.flip_prob < 0.0 || p.flip_prob >= 1.0)) {
        violation("problem.flip_prob must lie in [0, 1)");
      }
      constrained_dim = p.dim;
      break;
    case ProblemKind::GgmSynthetic:
      if (p.dim < 2) violation("problem.p must be at least 2");
      if (p.samples < 1) violation("problem.N must be positive");
      constrained_dim = p.dim * (p.dim - 1) / 2;
      if (p.true_pairs < 0 || p.true_pairs > constrained_dim) {
        violation("problem.true_pairs must lie in [0, p(p-1)/2]");
      }
      break;
    case ProblemKind::GgmFile:
      if (!std::filesystem::exists(p.data_file)) {
        violation("problem.data_file does not exist: " + p.data_file);
      } else {
        try {
          const DatasetMatrix data = load_matrix_file(p.data_file);
          if (data.col_count() < 2) {
            violation("problem.data_file must have at least 2 columns");
          }
          constrained_dim = data.col_count() * (data.col_count() - 1) / 2;
        } catch (const std::exception& err) {
          violation(std::string("problem.data_file failed to load: ") + err.what());
        }
      }
      break;
  }

  std::vector<int> sweep = config.sweep.empty() ? std::vector<int>{s.k} : config.sweep;
  if (constrained_dim > 0) {
    for (int k : sweep) {
      if (k < 1 || k > constrained_dim) {
        violation("sweep value K=" + std::to_string(k) + " outside [1, " +
                  std::to_string(constrained_dim) + "]");
      }
    }
  }

  // Theory couplings are logged, never enforced.
  if (s.eta2 < 3.0 * s.accuracy.kappa_f * s.alpha) {
    notice("eta2 < 3*kappa_f*alpha (" + format_g17(s.eta2) + " < " +
           format_g17(3.0 * s.accuracy.kappa_f * s.alpha) +
           "); the summability theory assumes the reverse");
  }
  const double eps_cap = std::min(s.accuracy.kappa_f, s.eta1 * s.eta2);
  if (s.accuracy.eps_f > eps_cap) {
    notice("eps_f > min(kappa_f, eta1*eta2) (" + format_g17(s.accuracy.eps_f) + " > " +
           format_g17(eps_cap) + "); the summability theory assumes the reverse");
  }
  int max_k = 0;
  for (int k : sweep) max_k = std::max(max_k, k);
  if (max_k >= 1) {
    const double alpha_floor = std::sqrt(static_cast<double>(max_k)) /
                               (s.accuracy.kappa_f * s.delta_max);
    if (s.alpha <= alpha_floor) {
      notice("alpha <= sqrt(K)/(kappa_f*delta_max) (" + format_g17(s.alpha) +
             " <= " + format_g17(alpha_floor) + "); below the decrease-lemma bound");
    }
  }

  return report;
}

BuiltProblem build_problem(const ProblemSpec& spec) {
  BuiltProblem built;
  switch (spec.kind) {
    case ProblemKind::SparseLs: {
      SparseLsInstance inst = generate_sparse_ls(spec.dim, spec.samples, spec.true_sparsity,
                                                 spec.noise_std, spec.seed);
      built.objective = std::make_unique<LeastSquaresProblem>(std::move(inst.problem));
      built.free_prefix = 0;
      built.constrained_dim = spec.dim;
      break;
    }
    case ProblemKind::Logistic: {
      SparseLogisticInstance inst = generate_sparse_logistic(
          spec.dim, spec.samples, spec.true_sparsity, spec.flip_prob, spec.seed);
      built.objective = std::make_unique<LogisticProblem>(std::move(inst.problem));
      built.free_prefix = 0;
      built.constrained_dim = spec.dim;
      break;
    }
    case ProblemKind::GgmSynthetic: {
      SparseGgmInstance inst =
          generate_sparse_ggm(spec.dim, spec.samples, spec.true_pairs, spec.seed);
      auto problem = std::make_unique<GgmProblem>(std::move(inst.problem));
      built.free_prefix = problem->free_prefix();
      built.constrained_dim = problem->num_pairs();
      built.objective = std::move(problem);
      break;
    }
    case ProblemKind::GgmFile: {
      const DatasetMatrix data = load_matrix_file(spec.data_file);
      auto problem = std::make_unique<GgmProblem>(GgmProblem::from_samples(data.values));
      built.free_prefix = problem->free_prefix();
      built.constrained_dim = problem->num_pairs();
      built.objective = std::move(problem);
      break;
    }
  }
  return built;
}

DenseVector make_start_point(const BuiltProblem& built, StartMode mode, int k,
                             std::uint64_t seed) {
  const int dim = built.objective->dim();
  DenseVector x0 = DenseVector::Zero(dim);
  for (int i = 0; i < built.free_prefix; ++i) x0[i] = 1.0;
  if (mode == StartMode::RandomFeasible) {
    SeededSampler sampler(seed);
    const std::vector<int> support = sampler.draw_without_replacement(built.constrained_dim, k);
    const double scale = built.free_prefix > 0 ? 0.1 : 1.0;
    for (int idx : support) {
      x0[built.free_prefix + idx] = scale * sampler.rng().next_gaussian();
    }
  }
  return x0;
}

void emit_trace(const SolverResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open trace file for writing");
  out << "k,delta,accepted,rho,restricted_grad_norm,f0_estimate,fs_estimate,"
         "grad_batch,value_batch,step_norm,descent_margin,support\n";
  for (const IterationRecord& rec : result.trace) {
    out << rec.k << ',' << format_g17(rec.delta) << ',' << (rec.accepted ? 1 : 0) << ','
        << format_g17(rec.rho) << ',' << format_g17(rec.restricted_grad_norm) << ','
        << format_g17(rec.f0_estimate) << ',' << format_g17(rec.fs_estimate) << ','
        << rec.grad_batch << ',' << rec.value_batch << ',' << format_g17(rec.step_norm) << ','
        << format_g17(rec.descent_margin) << ',';
    const std::vector<int>& support = rec.support.indices();
    for (std::size_t i = 0; i < support.size(); ++i) {
      if (i > 0) out << ';';
      out << support[i] + 1;  // 1-based in files
    }
    out << '\n';
  }
  if (!out) throw ParseError(path + ": trace write failed");
}

std::vector<TraceRow> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open trace file");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty trace file");

  std::vector<TraceRow> rows;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream stream(line);
    std::string cell;
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) {
      throw ParseError(path + ": row " + std::to_string(line_number) + " has " +
                       std::to_string(cells.size()) + " cells, expected 12");
    }
    TraceRow row;
    try {
      row.k = std::stoi(cells[0]);
      row.delta = std::stod(cells[1]);
      row.accepted = std::stoi(cells[2]) != 0;
      row.rho = std::stod(cells[3]);
      row.restricted_grad_norm = std::stod(cells[4]);
      row.f0_estimate = std::stod(cells[5]);
      row.fs_estimate = std::stod(cells[6]);
      row.grad_batch = std::stoi(cells[7]);
      row.value_batch = std::stoi(cells[8]);
      row.step_norm = std::stod(cells[9]);
      row.descent_margin = std::stod(cells[10]);
      std::stringstream support_stream(cells[11]);
      std::string index_text;
      while (std::getline(support_stream, index_text, ';')) {
        if (!index_text.empty()) row.support.push_back(std::stoi(index_text) - 1);
      }
    } catch (const std::exception&) {
      throw ParseError(path + ": row " + std::to_string(line_number) + ": malformed number");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

TraceReport summarize_trace(const std::vector<TraceRow>& rows) {
  TraceReport report;
  report.iterations = static_cast<int>(rows.size());
  report.max_descent_margin = -std::numeric_limits<double>::infinity();
  for (const TraceRow& row : rows) {
    if (row.accepted) ++report.accepted;
    report.delta_square_sum += row.delta * row.delta;
    report.max_descent_margin = std::max(report.max_descent_margin, row.descent_margin);
  }
  if (!rows.empty()) {
    report.first_delta = rows.front().delta;
    report.last_delta = rows.back().delta;
    report.last_restricted_grad_norm = rows.back().restricted_grad_norm;
  }
  return report;
}

namespace {

CellResult run_cell(const ExperimentConfig& config, const BuiltProblem& built,
                    int sweep_k, int run_index, const std::string& out_dir) {
  CellResult cell;
  cell.sweep_k = sweep_k;
  cell.run_index = run_index;
  cell.seed = config.solver.seed * 1000000ULL + static_cast<std::uint64_t>(sweep_k) * 1000ULL +
              static_cast<std::uint64_t>(run_index);

  SolverConfig solver = config.solver;
  solver.k = sweep_k;
  solver.seed = cell.seed;
  solver.free_prefix = built.free_prefix;

  const DenseVector x0 = make_start_point(built, config.start, sweep_k, cell.seed);

  const auto start_time = std::chrono::steady_clock::now();
  try {
    cell.solver = piht_run(*built.objective, x0, solver);
    cell.ok = true;
  } catch (const std::exception& err) {
    cell.error = err.what();
  }
  cell.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();

  if (!cell.ok) return cell;

  cell.trace_path = out_dir + "/K" + std::to_string(sweep_k) + "_run" +
                    std::to_string(run_index) + ".trace.csv";
  emit_trace(cell.solver, cell.trace_path);

  const DenseVector& x = cell.solver.final_point;
  const DenseVector grad = built.objective->full_gradient(x);
  cell.final_objective = built.objective->full_value(x);
  cell.restricted_grad_norm = restricted_grad_norm_at(grad, x, built.free_prefix, sweep_k);
  cell.free_grad_norm = built.free_prefix > 0
                            ? grad.head(built.free_prefix).cwiseAbs().maxCoeff()
                            : 0.0;
  const int tail = built.objective->dim() - built.free_prefix;
  cell.stationarity = diagnose_stationarity(x.tail(tail), grad.tail(tail), sweep_k,
                                            solver.stationarity_tol);
  cell.final_support = nonzero_support(x.tail(tail));
  return cell;
}

void write_summary_csv(const std::string& path, const std::vector<CellResult>& cells) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open summary file for writing");
  out << "K,run,seed,status,iterations,accepted,stop_reason,final_objective,"
         "restricted_grad_norm,free_grad_norm,minimal_L,bf_residual,l_residual,"
         "support_full,delta_square_sum,final_delta\n";
  for (const CellResult& cell : cells) {
    int accepted = 0;
    for (const IterationRecord& rec : cell.solver.trace) {
      if (rec.accepted) ++accepted;
    }
    out << cell.sweep_k << ',' << cell.run_index << ',' << cell.seed << ','
        << (cell.ok ? "ok" : "failed") << ',' << cell.solver.trace.size() << ',' << accepted
        << ',' << (cell.ok ? stop_reason_name(cell.solver.stop_reason) : "-") << ','
        << format_g17(cell.final_objective) << ',' << format_g17(cell.restricted_grad_norm)
        << ',' << format_g17(cell.free_grad_norm) << ','
        << format_g17(cell.stationarity.minimal_l) << ','
        << format_g17(cell.stationarity.bf_residual) << ','
        << format_g17(cell.stationarity.l_residual) << ','
        << (cell.stationarity.support_full ? 1 : 0) << ','
        << format_g17(cell.solver.delta_square_sum) << ','
        << format_g17(cell.solver.final_delta) << '\n';
  }
}

void write_summary_json(const std::string& path, const ExperimentConfig& config,
                        const std::vector<CellResult>& cells) {
  json root;
  root["config"] = json::parse(experiment_config_to_json(config));
  json cell_array = json::array();
  for (const CellResult& cell : cells) {
    int accepted = 0;
    for (const IterationRecord& rec : cell.solver.trace) {
      if (rec.accepted) ++accepted;
    }
    json entry = {
        {"K", cell.sweep_k},
        {"run", cell.run_index},
        {"seed", cell.seed},
        {"status", cell.ok ? "ok" : "failed"},
        {"wall_time_s", cell.wall_seconds},
    };
    if (!cell.ok) {
      entry["error"] = cell.error;
    } else {
      std::vector<int> support_1based;
      for (int idx : cell.final_support.indices()) support_1based.push_back(idx + 1);
      entry["iterations"] = cell.solver.trace.size();
      entry["accepted"] = accepted;
      entry["stop_reason"] = stop_reason_name(cell.solver.stop_reason);
      entry["final_objective"] = cell.final_objective;
      entry["restricted_grad_norm"] = cell.restricted_grad_norm;
      entry["free_grad_norm"] = cell.free_grad_norm;
      entry["delta_square_sum"] = cell.solver.delta_square_sum;
      entry["final_delta"] = cell.solver.final_delta;
      entry["final_support"] = support_1based;
      entry["stationarity"] = {{"bf_residual", cell.stationarity.bf_residual},
                               {"l_residual", cell.stationarity.l_residual},
                               {"minimal_L", cell.stationarity.minimal_l},
                               {"support_full", cell.stationarity.support_full}};
      entry["warnings"] = cell.solver.warnings;
      entry["trace_file"] = std::filesystem::path(cell.trace_path).filename().string();
    }
    cell_array.push_back(std::move(entry));
  }
  root["cells"] = std::move(cell_array);

  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open summary file for writing");
  out << root.dump(2) << '\n';
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const ValidationReport validation = validate_config(config);
  if (!validation.ok()) {
    std::string message = "invalid experiment config:";
    for (const std::string& v : validation.violations) message += "\n  - " + v;
    throw InvalidInputError(message);
  }

  const std::string out_dir =
      options.output_dir_override.empty() ? config.output_dir : options.output_dir_override;
  std::filesystem::create_directories(out_dir);

  const BuiltProblem built = build_problem(config.problem);
  const std::vector<int> sweep =
      config.sweep.empty() ? std::vector<int>{config.solver.k} : config.sweep;

  struct CellSpec {
    int sweep_k;
    int run_index;
  };
  std::vector<CellSpec> specs;
  for (int k : sweep) {
    for (int run = 0; run < config.runs_per_setting; ++run) specs.push_back({k, run});
  }

  ExperimentResult result;
  result.cells.resize(specs.size());

  const int jobs = std::max(1, options.jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      result.cells[i] = run_cell(config, built, specs[i].sweep_k, specs[i].run_index, out_dir);
    }
  };
  if (jobs == 1 || specs.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const std::size_t thread_count =
        std::min(static_cast<std::size_t>(jobs), specs.size());
    pool.reserve(thread_count);
    for (std::size_t t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  result.summary_csv_path = out_dir + "/summary.csv";
  result.summary_json_path = out_dir + "/summary.json";
  write_summary_csv(result.summary_csv_path, result.cells);
  write_summary_json(result.summary_json_path, config, result.cells);

  bool any_failed = false;
  for (const CellResult& cell : result.cells) {
    if (!cell.ok) any_failed = true;
    if (!options.quiet) {
      std::ostringstream line;
      line << "cell K=" << cell.sweep_k << " run=" << cell.run_index;
      if (cell.ok) {
        line << ": " << stop_reason_name(cell.solver.stop_reason) << " after "
             << cell.solver.trace.size() << " iterations, objective "
             << format_g17(cell.final_objective);
      } else {
        line << ": FAILED (" << cell.error << ")";
      }
      std::cout << line.str() << '\n';
    }
  }
  if (!options.quiet) {
    std::cout << "summary: " << result.summary_csv_path << '\n';
  }
  result.exit_code = any_failed ? 2 : 0;
  return result;
}

}  // namespace piht
