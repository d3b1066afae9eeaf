#pragma once

// JSON documents shared with the command line and the learner bundle.
// Non-finite numbers are written as null.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slipt/channel.hpp"
#include "slipt/error.hpp"
#include "slipt/highsnr.hpp"
#include "slipt/measure.hpp"
#include "slipt/solver.hpp"
#include "slipt/transition.hpp"

namespace slipt {

using json = nlohmann::json;

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

namespace detail {

template <class T>
void read_field(const json& j, const char* key, T& out, bool required = true) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw ConfigError(std::string("missing field '") + key + "'");
    return;
  }
  try {
    it->get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

inline const json& child(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_object()) {
    throw ConfigError(std::string("missing object '") + key + "'");
  }
  return *it;
}

}  // namespace detail

inline json to_json(const ChannelGeometry& g) {
  return {{"eta_t", g.eta_t}, {"eta_r", g.eta_r}, {"c_lambda", g.c_lambda},
          {"l", g.l},         {"theta_0", g.theta_0}, {"theta_rx", g.theta_rx},
          {"area_rx", g.area_rx}};
}

inline ChannelGeometry geometry_from_json(const json& j) {
  ChannelGeometry g;
  detail::read_field(j, "eta_t", g.eta_t);
  detail::read_field(j, "eta_r", g.eta_r);
  detail::read_field(j, "c_lambda", g.c_lambda);
  detail::read_field(j, "l", g.l);
  detail::read_field(j, "theta_0", g.theta_0);
  detail::read_field(j, "theta_rx", g.theta_rx);
  detail::read_field(j, "area_rx", g.area_rx);
  return g;
}

inline json to_json(const FadingParams& f) {
  return {{"sigma2_Xl", f.sigma2_Xl}, {"mu_Xl", f.mu_Xl}, {"normalized", f.is_normalized()}};
}

/// `mu_Xl` may be omitted when `normalized` is true.
inline FadingParams fading_from_json(const json& j) {
  FadingParams f;
  detail::read_field(j, "sigma2_Xl", f.sigma2_Xl);
  bool normalized = false;
  detail::read_field(j, "normalized", normalized, false);
  if (normalized) {
    f.mu_Xl = -f.sigma2_Xl;
    double given = f.mu_Xl;
    detail::read_field(j, "mu_Xl", given, false);
    if (given != f.mu_Xl) throw ConfigError("normalized fading requires mu_Xl = -sigma2_Xl");
  } else {
    detail::read_field(j, "mu_Xl", f.mu_Xl);
  }
  return f;
}

inline json to_json(const DeviceParams& d) {
  return {{"a", d.a},     {"R_P", d.R_P}, {"R_E", d.R_E}, {"sigma2_g", d.sigma2_g},
          {"f_E", d.f_E}, {"v_t", d.v_t}, {"T", d.T},     {"I_0", d.I_0}};
}

inline DeviceParams devices_from_json(const json& j) {
  DeviceParams d;
  detail::read_field(j, "a", d.a);
  detail::read_field(j, "R_P", d.R_P);
  detail::read_field(j, "R_E", d.R_E);
  detail::read_field(j, "sigma2_g", d.sigma2_g);
  detail::read_field(j, "f_E", d.f_E);
  detail::read_field(j, "v_t", d.v_t);
  detail::read_field(j, "T", d.T);
  detail::read_field(j, "I_0", d.I_0);
  return d;
}

/// Derived fields are written for reference and recomputed on read.
inline json to_json(const ChannelSpec& s) {
  return {{"geometry_pd", to_json(s.geometry_pd)},
          {"geometry_pv", to_json(s.geometry_pv)},
          {"fading", to_json(s.fading)},
          {"devices", to_json(s.devices)},
          {"model", to_string(s.model)},
          {"h1l", s.h1l},
          {"h2l", s.h2l},
          {"b", s.b},
          {"c", s.c}};
}

inline ChannelSpec channel_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("channel document must be a JSON object");
  std::string model = "lognormal";
  detail::read_field(j, "model", model);
  try {
    return make_channel_spec(geometry_from_json(detail::child(j, "geometry_pd")),
                             geometry_from_json(detail::child(j, "geometry_pv")),
                             fading_from_json(detail::child(j, "fading")),
                             devices_from_json(detail::child(j, "devices")),
                             channel_model_from_string(model));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid channel parameters: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

inline ChannelSpec load_channel_spec(const std::string& path) {
  return channel_spec_from_json(read_json_file(path));
}

inline json to_json(const ConstraintSet& c) {
  return {{"A", c.A}, {"epsilon", c.epsilon}, {"E_th", c.E_th}};
}

inline ConstraintSet constraints_from_json(const json& j) {
  ConstraintSet c;
  detail::read_field(j, "A", c.A);
  detail::read_field(j, "epsilon", c.epsilon);
  detail::read_field(j, "E_th", c.E_th);
  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline json to_json(const InputDistribution& d) {
  return {{"A", d.grid.A}, {"N", d.grid.N}, {"pmf", d.pmf}};
}

inline InputDistribution distribution_from_json(const json& j) {
  double A = 0.0;
  std::size_t N = 0;
  std::vector<double> pmf;
  detail::read_field(j, "A", A);
  detail::read_field(j, "N", N);
  detail::read_field(j, "pmf", pmf);
  if (pmf.size() != N) throw ShapeError("pmf length differs from N");
  return {InputGrid(A, N), std::move(pmf)};
}

inline json to_json(const MultiplierSet& m) {
  return {{"lambda1", m.lambda1}, {"lambda2", m.lambda2}, {"lambda3", m.lambda3}};
}

inline json to_json(const std::vector<SupportPoint>& support) {
  json out = json::array();
  for (const auto& s : support) out.push_back({{"location", s.location}, {"mass", s.mass}});
  return out;
}

inline json to_json(const SolveReport& r) {
  return {{"capacity_bits", r.capacity_bits},
          {"dist", to_json(r.dist)},
          {"multipliers", to_json(r.multipliers)},
          {"support", to_json(r.support)},
          {"kkt_residual", r.kkt_residual},
          {"kkt_support_gap", r.kkt_support_gap},
          {"feasible", r.feasible},
          {"iterations", r.iterations},
          {"duality_gap", r.duality_gap},
          {"avg_power", r.avg_power},
          {"avg_eh", r.avg_eh}};
}

/// Reads the fields needed downstream: capacity, distribution, support.
inline SolveReport solve_report_from_json(const json& j) {
  SolveReport r;
  detail::read_field(j, "capacity_bits", r.capacity_bits);
  r.dist = distribution_from_json(detail::child(j, "dist"));
  if (const auto it = j.find("multipliers"); it != j.end()) {
    detail::read_field(*it, "lambda1", r.multipliers.lambda1, false);
    detail::read_field(*it, "lambda2", r.multipliers.lambda2, false);
    detail::read_field(*it, "lambda3", r.multipliers.lambda3, false);
  }
  if (const auto it = j.find("support"); it != j.end() && it->is_array()) {
    for (const auto& s : *it) {
      SupportPoint p;
      detail::read_field(s, "location", p.location);
      detail::read_field(s, "mass", p.mass);
      r.support.push_back(p);
    }
  }
  detail::read_field(j, "feasible", r.feasible, false);
  return r;
}

inline json to_json(const KktRecord& k) {
  return {{"max_violation", k.max_violation},
          {"violation_location", k.violation_location},
          {"max_support_defect", k.max_support_defect},
          {"fine_points", k.fine_points}};
}

inline json to_json(const HighSnrSolution& h) {
  json j = to_json(h.dist);
  j["multipliers"] = to_json(h.multipliers);
  j["Z"] = number_or_null(h.Z);
  j["log_Z"] = h.log_Z;
  return j;
}

inline json to_json(const SolverComparison& c) {
  return {{"total_variation", c.total_variation}, {"mi_gap_bits", c.mi_gap_bits},
          {"mi_highsnr_bits", c.mi_highsnr_bits}, {"mi_solver_bits", c.mi_solver_bits},
          {"power_delta", c.power_delta},         {"eh_delta", c.eh_delta}};
}

inline json to_json(const RegionPoint& p) {
  return {{"E_th", p.E_th}, {"capacity_bits", number_or_null(p.capacity_bits)},
          {"feasible", p.feasible}};
}

inline json to_json(const MassPointRow& r) {
  return {{"A", r.A},
          {"feasible", r.feasible},
          {"support_count", r.support_count},
          {"support", to_json(r.support)},
          {"capacity_bits", number_or_null(r.capacity_bits)},
          {"multipliers", to_json(r.multipliers)}};
}

inline json to_json(const TransitionResult& t) {
  return {{"epsilon", t.epsilon},
          {"E_th", t.E_th},
          {"found", t.found},
          {"transition_A", number_or_null(t.transition_A)},
          {"bracket", {number_or_null(t.bracket_lo), number_or_null(t.bracket_hi)}},
          {"support_counts", {t.count_lo, t.count_hi}},
          {"evidence",
           {{"dI_dA_numeric", number_or_null(t.evidence.dI_dA_numeric)},
            {"dI_dA_location", number_or_null(t.evidence.dI_dA_location)},
            {"dI_dA_series", number_or_null(t.evidence.dI_dA_series)},
            {"series_last_term", number_or_null(t.evidence.series_last_term)},
            {"x1", number_or_null(t.evidence.x1)},
            {"q", number_or_null(t.evidence.q)}}}};
}

}  // namespace slipt
