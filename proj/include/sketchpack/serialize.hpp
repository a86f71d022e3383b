#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchpack/cluster.hpp"
#include "sketchpack/errors.hpp"
#include "sketchpack/metrics.hpp"
#include "sketchpack/rmt.hpp"
#include "sketchpack/theory.hpp"

namespace sketchpack {

using Json = nlohmann::json;

namespace detail {

/// Non-finite values travel as the strings "inf", "-inf", "nan".
inline Json encode_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double decode_double(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ParseError("expected a number in JSON");
}

inline Json encode_vector(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(encode_double(v(i)));
  return out;
}

inline Json encode_matrix_rows(const Matrix& m) {
  Json out = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(encode_double(m(i, j)));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace detail

inline Json to_json(const LedgerCounts& c) { return {{"count_A", c.count_A}, {"count_At", c.count_At}}; }

inline LedgerCounts ledger_from_json(const Json& j) {
  return {j.at("count_A").get<std::uint64_t>(), j.at("count_At").get<std::uint64_t>()};
}

inline Json to_json(const ErrorReport& e) {
  return {{"spectral", detail::encode_double(e.spectral)},
          {"frobenius", detail::encode_double(e.frobenius)},
          {"trace", detail::encode_double(e.trace)},
          {"relative_to_sigma", detail::encode_double(e.relative_to_sigma)},
          {"matvecs", to_json(e.matvecs)}};
}

inline ErrorReport error_report_from_json(const Json& j) {
  ErrorReport e;
  e.spectral = detail::decode_double(j.at("spectral"));
  e.frobenius = detail::decode_double(j.at("frobenius"));
  e.trace = detail::decode_double(j.at("trace"));
  e.relative_to_sigma = detail::decode_double(j.at("relative_to_sigma"));
  e.matvecs = ledger_from_json(j.at("matvecs"));
  return e;
}

inline Json to_json(const BoundReport& b) {
  Json tails = Json::object();
  for (const auto& [name, v] : b.tail_sums) tails[name] = detail::encode_double(v);
  Json q = {{"k", b.query.k},
            {"r", b.query.r},
            {"m", b.query.m},
            {"s", b.query.s},
            {"p", detail::encode_double(b.query.p)},
            {"method", to_string(b.query.method)},
            {"variant", to_string(b.query.variant)},
            {"u", detail::encode_double(b.query.u)},
            {"t", detail::encode_double(b.query.t)},
            {"spectrum_length", b.query.spectrum.size()}};
  Json out = {{"value", detail::encode_double(b.value)},
              {"relative", detail::encode_double(b.relative)},
              {"quantity", to_string(b.quantity)},
              {"query", std::move(q)},
              {"tail_sums", std::move(tails)}};
  if (b.failure_probability) out["failure_probability"] = detail::encode_double(*b.failure_probability);
  if (b.gap) out["gap"] = detail::encode_double(*b.gap);
  return out;
}

inline Json to_json(const RmtReport& r) {
  return {{"target", to_string(r.target)},
          {"kind", r.equality ? "equality" : "inequality"},
          {"estimate", detail::encode_double(r.estimate)},
          {"exact_or_bound", detail::encode_double(r.exact_or_bound)},
          {"standard_error", detail::encode_double(r.standard_error)},
          {"trials", r.trials},
          {"pass", r.pass}};
}

inline Json to_json(const ClusterResult& c) {
  Json out = {{"labels", c.labels},
              {"centers", detail::encode_matrix_rows(c.centers)},
              {"eig_report",
               {{"eigenvalues", detail::encode_vector(c.eigenvalues)},
                {"matvecs", to_json(c.matvecs)},
                {"multiplications", c.multiplications}}},
              {"objective_history", c.objective_history},
              {"kmeans_iterations", c.kmeans_iterations}};
  if (c.eigvec_subspace_error) out["eig_report"]["subspace_error"] = detail::encode_double(*c.eigvec_subspace_error);
  if (c.purity) out["purity"] = detail::encode_double(*c.purity);
  return out;
}

/// One approximation run with enough context to replay it.
struct RunRecord {
  std::string method;
  std::string input;
  std::int64_t k = 0;
  std::int64_t m_or_q = 0;
  std::int64_t r = 0;
  std::uint64_t seed = 0;
  std::string stop;
  std::uint64_t matvecs_A = 0;
  std::uint64_t matvecs_At = 0;
  double wall_seconds = 0.0;
  std::optional<ErrorReport> error;
  std::map<std::string, double> bounds;
  std::vector<std::int64_t> block_widths;

  friend bool operator==(const RunRecord& a, const RunRecord& b) {
    auto same = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
    if (a.method != b.method || a.input != b.input || a.k != b.k || a.m_or_q != b.m_or_q ||
        a.r != b.r || a.seed != b.seed || a.stop != b.stop || a.matvecs_A != b.matvecs_A ||
        a.matvecs_At != b.matvecs_At || !same(a.wall_seconds, b.wall_seconds) ||
        a.block_widths != b.block_widths || a.error.has_value() != b.error.has_value() ||
        a.bounds.size() != b.bounds.size())
      return false;
    if (a.error) {
      const auto& x = *a.error;
      const auto& y = *b.error;
      if (!same(x.spectral, y.spectral) || !same(x.frobenius, y.frobenius) || !same(x.trace, y.trace) ||
          !same(x.relative_to_sigma, y.relative_to_sigma) || !(x.matvecs == y.matvecs))
        return false;
    }
    for (const auto& [name, v] : a.bounds) {
      auto it = b.bounds.find(name);
      if (it == b.bounds.end() || !same(v, it->second)) return false;
    }
    return true;
  }
};

inline Json to_json(const RunRecord& r) {
  Json bounds = Json::object();
  for (const auto& [name, v] : r.bounds) bounds[name] = detail::encode_double(v);
  Json out = {{"method", r.method},
              {"input", r.input},
              {"k", r.k},
              {"m_or_q", r.m_or_q},
              {"r", r.r},
              {"seed", r.seed},
              {"stop", r.stop},
              {"matvecs_A", r.matvecs_A},
              {"matvecs_At", r.matvecs_At},
              {"wall_seconds", detail::encode_double(r.wall_seconds)},
              {"bounds", std::move(bounds)},
              {"block_widths", r.block_widths}};
  out["error"] = r.error ? to_json(*r.error) : Json(nullptr);
  return out;
}

inline RunRecord run_record_from_json(const Json& j) {
  try {
    RunRecord r;
    r.method = j.at("method").get<std::string>();
    r.input = j.value("input", std::string());
    r.k = j.at("k").get<std::int64_t>();
    r.m_or_q = j.at("m_or_q").get<std::int64_t>();
    r.r = j.value("r", std::int64_t{0});
    r.seed = j.at("seed").get<std::uint64_t>();
    r.stop = j.at("stop").get<std::string>();
    r.matvecs_A = j.at("matvecs_A").get<std::uint64_t>();
    r.matvecs_At = j.at("matvecs_At").get<std::uint64_t>();
    r.wall_seconds = detail::decode_double(j.at("wall_seconds"));
    if (j.contains("error") && !j.at("error").is_null()) r.error = error_report_from_json(j.at("error"));
    if (j.contains("bounds"))
      for (const auto& [name, v] : j.at("bounds").items()) r.bounds[name] = detail::decode_double(v);
    r.block_widths = j.value("block_widths", std::vector<std::int64_t>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed run record: ") + e.what());
  }
}

}  // namespace sketchpack
