// slipt: capacity, region, mass-point and transition computations for the
// optical SLIPT channel, plus the learner bundle export/validation.
//
// Exit codes: 0 ok, 1 numerical non-convergence, 2 configuration error,
// 3 infeasible problem.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "slipt/channel.hpp"
#include "slipt/highsnr.hpp"
#include "slipt/json_io.hpp"
#include "slipt/measure.hpp"
#include "slipt/solver.hpp"
#include "slipt/transition.hpp"

namespace fs = std::filesystem;
using namespace slipt;

namespace {

enum Exit : int { kOk = 0, kNonConvergence = 1, kConfig = 2, kInfeasible = 3 };

struct Common {
  std::string config;
  std::string out = "-";
  std::string format = "json";
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

ChannelSpec load_spec(const Common& c) {
  return c.config.empty() ? baseline_channel() : load_channel_spec(c.config);
}

void emit(const Common& c, const std::string& text) {
  if (c.out == "-" || c.out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + c.out + "'");
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string csv_number(double v) { return std::isfinite(v) ? fmt::format("{}", v) : "nan"; }

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) throw ConfigError("grid count must be >= 1");
  if (n == 1) return {lo};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  out.back() = hi;
  return out;
}

// 64-bit FNV-1a over a byte string
std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

struct SolveArgs {
  double A = 1.0;
  double epsilon = 1.0;
  double E_th = 0.0;
  std::size_t N = 201;
  double gap_tol = SolveOptions{}.gap_tol;
  std::size_t max_iterations = SolveOptions{}.max_iterations;
  double step = OutputGridConfig{}.step;

  SolveOptions options(unsigned threads) const {
    SolveOptions o;
    o.gap_tol = gap_tol;
    o.max_iterations = max_iterations;
    o.output.step = step;
    o.threads = threads;
    return o;
  }
};

void add_solver_flags(CLI::App* cmd, SolveArgs& s) {
  cmd->add_option("--N", s.N, "grid points")->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  cmd->add_option("--gap-tol", s.gap_tol, "duality gap stopping tolerance, bits");
  cmd->add_option("--max-iterations", s.max_iterations, "iteration cap");
  cmd->add_option("--y-step", s.step, "output grid step (smaller is finer)");
}

int run_pdf(const Common& c, const std::vector<double>& xs, double y_min, double y_max,
            std::size_t y_count, std::size_t terms) {
  const auto spec = load_spec(c);
  struct Row {
    double y, x, quad, hermite, last;
  };
  std::vector<Row> rows;
  for (double x : xs) {
    for (double y : linspace(y_min, y_max, y_count)) {
      Row r{y, x, conditional_pdf(y, x, spec), std::nan(""), std::nan("")};
      if (terms > 0) {
        const auto h = conditional_pdf_hermite(y, x, spec, terms);
        r.hermite = h.value;
        r.last = h.last_term;
      }
      rows.push_back(r);
    }
  }
  if (c.format == "csv") {
    std::string text = "y,x,pdf_quad,pdf_hermite,last_term\n";
    for (const auto& r : rows) {
      text += fmt::format("{},{},{},{},{}\n", csv_number(r.y), csv_number(r.x),
                          csv_number(r.quad), csv_number(r.hermite), csv_number(r.last));
    }
    emit(c, text);
  } else {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"y", r.y},
                     {"x", r.x},
                     {"pdf_quad", r.quad},
                     {"pdf_hermite", number_or_null(r.hermite)},
                     {"last_term", number_or_null(r.last)}});
    }
    emit(c, dump({{"model", to_string(spec.model)}, {"rows", arr}}));
  }
  return kOk;
}

int run_solve(const Common& c, const SolveArgs& s, std::size_t fine_factor) {
  const auto spec = load_spec(c);
  const ConstraintSet cons{s.A, s.epsilon, s.E_th};
  cons.validate();
  const InputGrid grid(s.A, s.N);
  const auto opt = s.options(c.threads);
  const DiscreteChannel channel(spec, grid, opt.output, opt.quadrature, opt.threads);
  const auto report = solve_capacity(cons, grid, channel, opt);
  if (c.format == "csv") {
    std::string text = "x,p\n";
    for (std::size_t k = 0; k < grid.N; ++k) {
      text += fmt::format("{},{}\n", grid.points[k], report.dist.pmf[k]);
    }
    emit(c, text);
    return kOk;
  }
  json j = to_json(report);
  j["constraints"] = to_json(cons);
  j["model"] = to_string(spec.model);
  if (fine_factor > 0) j["kkt_verify"] = to_json(kkt_verify(report, cons, channel, fine_factor, opt));
  emit(c, dump(j));
  return kOk;
}

int run_region(const Common& c, const SolveArgs& s, std::vector<double> thresholds,
               std::vector<std::string> models) {
  auto spec = load_spec(c);
  if (models.empty()) models.push_back(to_string(spec.model));
  std::sort(thresholds.begin(), thresholds.end());
  const ConstraintSet base{s.A, s.epsilon, 0.0};
  base.validate();
  const InputGrid grid(s.A, s.N);
  json all = json::object();
  for (const auto& name : models) {
    spec.model = channel_model_from_string(name);
    const auto pts = sweep_region(base, thresholds, grid, spec, s.options(c.threads));
    if (c.format == "csv") {
      std::string text = "E_th_J,capacity_bits,feasible\n";
      for (const auto& p : pts) {
        text += fmt::format("{},{},{}\n", p.E_th, csv_number(p.capacity_bits), p.feasible ? 1 : 0);
      }
      Common target = c;
      if (models.size() > 1 && c.out != "-" && !c.out.empty()) {
        const fs::path path(c.out);
        target.out = (path.parent_path() /
                      (path.stem().string() + "_" + name + path.extension().string()))
                         .string();
      }
      emit(target, text);
    } else {
      json arr = json::array();
      for (const auto& p : pts) arr.push_back(to_json(p));
      all[name] = arr;
    }
  }
  if (c.format != "csv") {
    emit(c, dump({{"A", s.A}, {"epsilon", s.epsilon}, {"N", s.N}, {"region", all}}));
  }
  return kOk;
}

int run_masspoints(const Common& c, const SolveArgs& s, std::vector<double> amplitudes) {
  const auto spec = load_spec(c);
  std::sort(amplitudes.begin(), amplitudes.end());
  const ConstraintSet base{amplitudes.empty() ? 1.0 : amplitudes.back(), s.epsilon, s.E_th};
  const auto rows = sweep_masspoints(amplitudes, base, spec, s.N, s.options(c.threads));
  if (c.format == "csv") {
    std::string text = "A,feasible,support_count,capacity_bits,locations,masses\n";
    for (const auto& r : rows) {
      std::vector<std::string> loc, mass;
      for (const auto& p : r.support) {
        loc.push_back(fmt::format("{}", p.location));
        mass.push_back(fmt::format("{}", p.mass));
      }
      text += fmt::format("{},{},{},{},{},{}\n", r.A, r.feasible ? 1 : 0, r.support_count,
                          csv_number(r.capacity_bits), fmt::join(loc, ";"),
                          fmt::join(mass, ";"));
    }
    emit(c, text);
  } else {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    emit(c, dump({{"epsilon", s.epsilon}, {"E_th", s.E_th}, {"N", s.N}, {"rows", arr}}));
  }
  return kOk;
}

int run_transition(const Common& c, const SolveArgs& s, double A_lo, double A_hi, double A_tol,
                   bool evidence) {
  const auto spec = load_spec(c);
  TransitionOptions opt;
  opt.N = s.N;
  opt.A_tol = A_tol;
  opt.evidence = evidence;
  opt.solve = s.options(1);
  const auto t = find_transition(s.epsilon, s.E_th, spec, A_lo, A_hi, opt);
  if (c.format == "csv") {
    emit(c, fmt::format("epsilon,E_th,found,transition_A,bracket_lo,bracket_hi\n{},{},{},{},{},{}\n",
                        t.epsilon, t.E_th, t.found ? 1 : 0, csv_number(t.transition_A),
                        csv_number(t.bracket_lo), csv_number(t.bracket_hi)));
  } else {
    emit(c, dump(to_json(t)));
  }
  return kOk;
}

int run_highsnr(const Common& c, const SolveArgs& s, bool compare) {
  const auto spec = load_spec(c);
  const ConstraintSet cons{s.A, s.epsilon, s.E_th};
  cons.validate();
  const InputGrid grid(s.A, s.N);
  const auto hs = calibrate_multipliers(cons, grid, spec);
  json j = to_json(hs);
  if (compare) {
    const auto opt = s.options(c.threads);
    const DiscreteChannel channel(spec, grid, opt.output, opt.quadrature, opt.threads);
    const auto report = solve_capacity(cons, grid, channel, opt);
    j["comparison"] = to_json(compare_to_solver(hs, report, channel));
  }
  if (c.format == "csv") {
    std::string text = "x,p\n";
    for (std::size_t k = 0; k < grid.N; ++k) {
      text += fmt::format("{},{}\n", grid.points[k], hs.dist.pmf[k]);
    }
    emit(c, text);
  } else {
    emit(c, dump(j));
  }
  return kOk;
}

int run_export(const Common& c, const SolveArgs& s, std::size_t count) {
  const auto spec = load_spec(c);
  const ConstraintSet cons{s.A, s.epsilon, s.E_th};
  cons.validate();
  if (c.out == "-" || c.out.empty()) throw ConfigError("export-learner needs --out <directory>");
  const fs::path dir(c.out);
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + (dir / name).string() + "'");
    f << text;
  };
  const auto samples = fading_sample(spec.fading, count, c.seed);
  std::string sample_text = "h\n";
  for (double h : samples) sample_text += fmt::format("{}\n", h);
  write("channel.json", dump(to_json(spec)));
  write("constraints.json", dump(to_json(cons)));
  write("fading_samples.csv", sample_text);
  write("manifest.json",
        dump({{"seed", c.seed},
              {"sample_count", count},
              {"samples_file", "fading_samples.csv"},
              {"samples_fnv1a64", fmt::format("{:016x}", fnv1a(sample_text))},
              {"channel_file", "channel.json"},
              {"constraints_file", "constraints.json"},
              {"N", s.N}}));
  return kOk;
}

int run_validate(const Common& c, const std::string& learner_path, const std::string& report_path,
                 const std::string& constraints_path) {
  const auto spec = load_spec(c);
  const json learner = read_json_file(learner_path);
  const json report_doc = read_json_file(report_path);
  const auto report = solve_report_from_json(report_doc);
  ConstraintSet cons;
  if (!constraints_path.empty()) {
    cons = constraints_from_json(read_json_file(constraints_path));
  } else if (report_doc.contains("constraints")) {
    cons = constraints_from_json(report_doc["constraints"]);
  } else {
    throw ConfigError("constraints not found; pass --constraints");
  }
  std::vector<double> samples;
  detail::read_field(learner, "samples", samples);
  if (samples.empty()) throw ConfigError("learner output holds no samples");
  const auto& grid = report.dist.grid;

  std::vector<double> binned(grid.N, 0.0);
  double mean = 0.0, eh = 0.0, peak = 0.0;
  for (double x : samples) {
    const double clamped = std::clamp(x, 0.0, grid.A);
    const auto k = static_cast<std::size_t>(std::llround(clamped / grid.spacing()));
    binned[std::min(k, grid.N - 1)] += 1.0;
    mean += x;
    eh += eh_energy(std::max(x, 0.0), spec);
    peak = std::max(peak, x);
  }
  const double n = static_cast<double>(samples.size());
  for (double& v : binned) v /= n;
  mean /= n;
  eh /= n;
  double tv = 0.0;
  for (std::size_t k = 0; k < grid.N; ++k) tv += std::abs(binned[k] - report.dist.pmf[k]);
  tv *= 0.5;

  const DiscreteChannel channel(spec, grid, OutputGridConfig{}, QuadratureConfig{}, c.threads);
  const double binned_mi = channel.mutual_information(binned);
  double estimate = std::nan("");
  detail::read_field(learner, "mi_estimate_bits", estimate, false);

  json out{{"total_variation", tv},
           {"sample_count", samples.size()},
           {"solver_capacity_bits", report.capacity_bits},
           {"binned_mi_bits", binned_mi},
           {"binned_mi_gap_bits", report.capacity_bits - binned_mi},
           {"mi_estimate_bits", number_or_null(estimate)},
           {"mi_estimate_gap_bits", number_or_null(report.capacity_bits - estimate)},
           {"residuals",
            {{"peak", std::max(peak - cons.A, 0.0)},
             {"min_below_zero", std::max(-*std::min_element(samples.begin(), samples.end()), 0.0)},
             {"average_power", mean - cons.epsilon},
             {"energy_shortfall_J", cons.E_th - eh}}},
           {"binned_pmf", to_json(InputDistribution(grid, binned))}};
  if (c.format == "csv") {
    emit(c, fmt::format("total_variation,binned_mi_gap_bits,mi_estimate_gap_bits,average_power_residual,"
                        "energy_shortfall_J\n{},{},{},{},{}\n",
                        tv, report.capacity_bits - binned_mi,
                        csv_number(report.capacity_bits - estimate), mean - cons.epsilon,
                        cons.E_th - eh));
  } else {
    emit(c, dump(out));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optical SLIPT channel capacity toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config, "channel JSON (default: reference link)");
  app.add_option("--out", common.out, "output path, - for stdout");
  app.add_option("--format", common.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--seed", common.seed, "random seed");
  app.add_option("--threads", common.threads, "worker threads")
      ->check(CLI::Range(1u, 1024u));

  SolveArgs s;

  auto* pdf = app.add_subcommand("pdf", "tabulate p(y|x)");
  std::vector<double> pdf_x{0.0};
  double y_min = -5e-6, y_max = 5e-6;
  std::size_t y_count = 201, terms = 30;
  pdf->add_option("--x", pdf_x, "input amplitudes")->delimiter(',');
  pdf->add_option("--y-min", y_min);
  pdf->add_option("--y-max", y_max);
  pdf->add_option("--y-count", y_count);
  pdf->add_option("--hermite-terms", terms, "0 disables the series columns");

  auto* solve = app.add_subcommand("solve", "constrained capacity on a grid");
  std::size_t fine_factor = 4;
  solve->add_option("--A", s.A, "peak amplitude")->required();
  solve->add_option("--epsilon", s.epsilon, "average amplitude bound")->required();
  solve->add_option("--E-th", s.E_th, "harvested energy threshold, J");
  solve->add_option("--kkt-fine", fine_factor, "refinement factor for the KKT check, 0 skips");
  add_solver_flags(solve, s);

  auto* region = app.add_subcommand("region", "capacity versus energy threshold");
  std::vector<double> thresholds;
  double e_min = 0.0, e_max = 0.0;
  std::size_t e_count = 0;
  std::vector<std::string> models;
  region->add_option("--A", s.A)->required();
  region->add_option("--epsilon", s.epsilon)->required();
  region->add_option("--E-th-list", thresholds, "thresholds, J")->delimiter(',');
  region->add_option("--E-th-min", e_min);
  region->add_option("--E-th-max", e_max);
  region->add_option("--E-th-count", e_count);
  region->add_option("--models", models, "lognormal,gaussian")->delimiter(',');
  add_solver_flags(region, s);

  auto* mass = app.add_subcommand("masspoints", "support size versus peak amplitude");
  std::vector<double> amplitudes;
  double a_min = 1.0, a_max = 10.0;
  std::size_t a_count = 0;
  mass->add_option("--A-list", amplitudes)->delimiter(',');
  mass->add_option("--A-min", a_min);
  mass->add_option("--A-max", a_max);
  mass->add_option("--A-count", a_count);
  mass->add_option("--epsilon", s.epsilon)->required();
  mass->add_option("--E-th", s.E_th);
  add_solver_flags(mass, s);

  auto* trans = app.add_subcommand("transition", "first amplitude with more than two mass points");
  double A_lo = 1.0, A_hi = 10.0, A_tol = 0.05;
  bool no_evidence = false;
  trans->add_option("--epsilon", s.epsilon)->required();
  trans->add_option("--E-th", s.E_th);
  trans->add_option("--A-lo", A_lo);
  trans->add_option("--A-hi", A_hi);
  trans->add_option("--A-tol", A_tol);
  trans->add_flag("--no-evidence", no_evidence, "skip the derivative evidence");
  add_solver_flags(trans, s);

  auto* high = app.add_subcommand("highsnr", "calibrated exponential-family input");
  bool compare = false;
  high->add_option("--A", s.A)->required();
  high->add_option("--epsilon", s.epsilon)->required();
  high->add_option("--E-th", s.E_th);
  high->add_flag("--compare", compare, "also solve and report the divergence");
  add_solver_flags(high, s);

  auto* exp = app.add_subcommand("export-learner", "write the learner input bundle");
  std::size_t sample_count = 100000;
  exp->add_option("--A", s.A)->required();
  exp->add_option("--epsilon", s.epsilon)->required();
  exp->add_option("--E-th", s.E_th);
  exp->add_option("--samples", sample_count, "fading samples to draw");
  exp->add_option("--N", s.N, "grid points the learner bins onto");

  auto* val = app.add_subcommand("validate-learner", "compare learner output to a solver report");
  std::string learner_path, report_path, constraints_path;
  val->add_option("--learner", learner_path, "learner output JSON")->required();
  val->add_option("--report", report_path, "solve report JSON")->required();
  val->add_option("--constraints", constraints_path, "constraints JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*pdf) return run_pdf(common, pdf_x, y_min, y_max, y_count, terms);
    if (*solve) return run_solve(common, s, fine_factor);
    if (*region) {
      if (thresholds.empty()) {
        if (e_count == 0) throw ConfigError("region needs --E-th-list or --E-th-count");
        thresholds = linspace(e_min, e_max, e_count);
      }
      return run_region(common, s, thresholds, models);
    }
    if (*mass) {
      if (amplitudes.empty()) {
        if (a_count == 0) throw ConfigError("masspoints needs --A-list or --A-count");
        amplitudes = linspace(a_min, a_max, a_count);
      }
      return run_masspoints(common, s, amplitudes);
    }
    if (*trans) return run_transition(common, s, A_lo, A_hi, A_tol, !no_evidence);
    if (*high) return run_highsnr(common, s, compare);
    if (*exp) return run_export(common, s, sample_count);
    if (*val) return run_validate(common, learner_path, report_path, constraints_path);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << " (max achievable energy " << e.max_energy()
              << " J)\n";
    return kInfeasible;
  } catch (const ConvergenceError& e) {
    std::cerr << "not converged: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const CalibrationError& e) {
    std::cerr << "not converged: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const ToleranceError& e) {
    std::cerr << "not converged: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}
