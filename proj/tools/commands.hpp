#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "sketchpack/sketchpack.hpp"

namespace sketchpack::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3, kIo = 4 };

/// Thrown for argument combinations CLI11 cannot reject on its own.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Parsing helpers.

/// "fixed:m" | "fro:eps" | "trace:eps" | "residual:r,eps"
inline StopRule parse_stop(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("stop rule needs the form kind:value, got '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  try {
    std::size_t used = 0;
    if (kind == "fixed") {
      const int m = std::stoi(rest, &used);
      if (used != rest.size()) throw UsageError("bad multiplication count");
      StopRule rule = FixedMultiplications{m};
      validate(rule);
      return rule;
    }
    if (kind == "fro" || kind == "trace") {
      const double eps = std::stod(rest, &used);
      if (used != rest.size()) throw UsageError("bad tolerance");
      StopRule rule = kind == "fro" ? StopRule(FroTolerance{eps, std::nullopt})
                                    : StopRule(TraceTolerance{eps, std::nullopt});
      validate(rule);
      return rule;
    }
    if (kind == "residual") {
      const auto comma = rest.find(',');
      if (comma == std::string::npos) throw UsageError("residual stop needs residual:r,eps");
      const int r = std::stoi(rest.substr(0, comma), &used);
      if (used != comma) throw UsageError("bad residual rank");
      const std::string e = rest.substr(comma + 1);
      const double eps = std::stod(e, &used);
      if (used != e.size()) throw UsageError("bad residual tolerance");
      StopRule rule = ResidualTolerance{r, eps};
      validate(rule);
      return rule;
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("invalid stop rule '") + text + "': " + e.what());
  } catch (const std::out_of_range&) {
    throw UsageError("stop rule value out of range: " + text);
  }
  throw UsageError("unknown stop rule kind '" + kind + "'");
}

/// "3,4,5" or "3:8" (inclusive) or a mix such as "1,3:5".
inline std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        out.push_back(std::stoi(item));
      } else {
        const int lo = std::stoi(item.substr(0, colon));
        const int hi = std::stoi(item.substr(colon + 1));
        if (hi < lo) throw UsageError("empty range " + item);
        for (int v = lo; v <= hi; ++v) out.push_back(v);
      }
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception&) {
      throw UsageError("bad integer list '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("empty integer list");
  return out;
}

inline std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline BoundMethod parse_method(const std::string& s) {
  try {
    return bound_method_from_string(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline unsigned thread_cap() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SKETCHPACK_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(std::min<long>(v, 1024));
    } catch (const std::exception&) {
    }
  }
  return hw;
}

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

// ---------------------------------------------------------------------------
// Problems: the operator under test plus whatever exact facts are known.

struct ProblemArgs {
  std::string input;
  std::string kind;
  int n = 0;
  double noise = 0.0;
  std::uint64_t noise_seed = 0;
};

struct Problem {
  explicit Problem(LinearOperator o) : op(std::move(o)) {}

  LinearOperator op;
  /// Exact singular values when known (diagonal input or dense SVD).
  std::optional<Spectrum> spectrum;
  /// Explicit matrix when available.
  std::optional<Matrix> dense;
  bool diagonal = false;
  std::string description;

  /// Leading right singular vectors (eigenvectors for psd input); computed on demand.
  Matrix reference_vectors(Index r) const {
    if (diagonal) return Matrix::Identity(op.cols(), r);
    if (!dense) throw UsageError("subspace reference needs an explicit matrix");
    if (!ref_cache_ || ref_cache_->cols() < r) {
      Eigen::BDCSVD<Matrix> svd(*dense, Eigen::ComputeThinV);
      ref_cache_ = svd.matrixV();
    }
    return ref_cache_->leftCols(r);
  }

  double sigma(Index i) const {
    if (!spectrum || i >= spectrum->size()) return std::numeric_limits<double>::quiet_NaN();
    return (*spectrum)[i];
  }

 private:
  mutable std::optional<Matrix> ref_cache_;
};

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline Problem make_problem(const ProblemArgs& a, bool need_spectrum = true) {
  Problem p(diag_operator(Spectrum(Vector(Vector::Ones(1)))));
  if (!a.input.empty() && !a.kind.empty()) throw UsageError("give either --input or --kind, not both");
  Matrix dense;
  if (!a.input.empty()) {
    if (ends_with(a.input, ".csv")) {
      Spectrum s = read_spectrum_csv(a.input);
      if (a.noise == 0.0) {
        p.op = diag_operator(s);
        p.spectrum = s;
        p.diagonal = true;
        p.description = "diag:" + a.input;
        return p;
      }
      dense = Matrix(s.vector().asDiagonal());
    } else if (ends_with(a.input, ".mtx")) {
      dense = read_matrix_market(a.input);
    } else if (ends_with(a.input, ".bin")) {
      dense = read_binary_matrix(a.input);
    } else {
      throw UsageError("input must end in .csv (spectrum), .mtx or .bin");
    }
    p.description = a.input;
  } else if (!a.kind.empty()) {
    if (a.n < 1) throw UsageError("--kind needs --n >= 1");
    Spectrum s = make_spectrum(spectrum_kind_from_string(a.kind), static_cast<std::size_t>(a.n));
    p.description = a.kind + ":" + std::to_string(a.n);
    if (a.noise == 0.0) {
      p.op = diag_operator(s);
      p.spectrum = s;
      p.diagonal = true;
      return p;
    }
    dense = Matrix(s.vector().asDiagonal());
  } else {
    throw UsageError("an input is required: --input FILE or --kind NAME --n N");
  }
  if (a.noise != 0.0) {
    RngState rng(a.noise_seed);
    dense = noisy_dense(dense, a.noise, rng);
    p.description += "+noise:" + fmt(a.noise);
  }
  p.op = dense_operator(dense);
  if (need_spectrum) p.spectrum = Spectrum(singular_values(dense));
  p.dense = std::move(dense);
  return p;
}

// ---------------------------------------------------------------------------
// Running and evaluating methods.

using AnyApprox = std::variant<SVDApprox, EigApprox>;

struct MethodConfig {
  BoundMethod method = BoundMethod::rsvd;
  Index k = 10;
  StopRule stop = FixedMultiplications{2};
  Orthogonalization orth = Orthogonalization::stabilized;
  std::function<void(const AnyApprox&)> observer;
};

inline AnyApprox run_method(const LinearOperator& op, const MethodConfig& cfg, RngState& rng) {
  RunOptions ro;
  ro.orthogonalization = cfg.orth;
  NystromOptions no;
  no.orthogonalization = cfg.orth;
  if (cfg.observer) {
    ro.observer = [&](const SVDApprox& a) { cfg.observer(AnyApprox(a)); };
    no.observer = [&](const EigApprox& a) { cfg.observer(AnyApprox(a)); };
  }
  switch (cfg.method) {
    case BoundMethod::rsvd: {
      SVDApprox a = rsvd(op, cfg.k, rng, ro);
      if (cfg.observer) cfg.observer(AnyApprox(a));
      return a;
    }
    case BoundMethod::rsi: return rsi_extended(op, cfg.k, cfg.stop, rng, ro);
    case BoundMethod::rbki: return rbki_extended(op, cfg.k, cfg.stop, rng, ro);
    case BoundMethod::nyssvd: {
      EigApprox a = nyssvd(op, cfg.k, rng, no);
      if (cfg.observer) cfg.observer(AnyApprox(a));
      return a;
    }
    case BoundMethod::nyssi: return nyssi(op, cfg.k, cfg.stop, rng, no);
    case BoundMethod::nysbki: return nysbki(op, cfg.k, cfg.stop, rng, no);
  }
  throw UsageError("unknown method");
}

inline const LedgerCounts& matvecs_of(const AnyApprox& a) {
  return std::visit([](const auto& x) -> const LedgerCounts& { return x.matvecs; }, a);
}
inline int multiplications_of(const AnyApprox& a) {
  return std::visit([](const auto& x) { return x.multiplications; }, a);
}
inline std::vector<Index> widths_of(const AnyApprox& a) {
  return std::visit([](const auto& x) { return x.block_widths; }, a);
}

enum class EvalMode { automatic, dense, lanczos };

inline EvalMode parse_eval_mode(const std::string& s) {
  if (s == "auto") return EvalMode::automatic;
  if (s == "dense") return EvalMode::dense;
  if (s == "lanczos") return EvalMode::lanczos;
  throw UsageError("--eval must be auto, dense or lanczos");
}

struct Evaluation {
  ErrorReport report;
  double subspace = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// ||A - Ahat||_F^2 = ||A||_F^2 - 2 <A, Ahat> + ||Ahat||_F^2 from one block product.
inline double frobenius_by_products(const LinearOperator& op, const AnyApprox& a) {
  const auto fro = op.traits().frobenius_norm;
  if (!fro) return std::numeric_limits<double>::quiet_NaN();
  const LinearOperator eval = op.with_fresh_ledger();
  double inner = 0.0;
  double self = 0.0;
  if (const auto* s = std::get_if<SVDApprox>(&a)) {
    const Matrix av = eval.apply(s->V);
    for (Index i = 0; i < s->rank(); ++i) inner += s->S[i] * s->U.col(i).dot(av.col(i));
    self = s->S.vector().squaredNorm();
  } else {
    const auto& e = std::get<EigApprox>(a);
    const Matrix au = eval.apply(e.U);
    for (Index i = 0; i < e.rank(); ++i) inner += e.L[i] * e.U.col(i).dot(au.col(i));
    self = e.L.vector().squaredNorm();
  }
  return std::sqrt(std::max(0.0, (*fro) * (*fro) - 2.0 * inner + self));
}

}  // namespace detail

inline Evaluation evaluate(const Problem& p, const AnyApprox& a, Index r, EvalMode mode,
                           bool with_subspace, Index dense_limit = 700) {
  Evaluation out;
  const double sigma = p.sigma(r);
  bool use_dense = mode == EvalMode::dense || (mode == EvalMode::automatic && p.op.rows() <= dense_limit &&
                                                 p.op.cols() <= dense_limit);
  std::optional<Matrix> dense = p.dense;
  if (use_dense && !dense) dense = p.op.dense();
  if (use_dense && !dense) throw UsageError("dense evaluation needs an explicit matrix");
  if (use_dense) {
    out.report = std::visit([&](const auto& x) { return error_report(*dense, x, sigma); }, a);
  } else {
    NormEstimate est = std::visit([&](const auto& x) { return residual_spectral_norm(p.op, x); }, a);
    out.report.spectral = est.value;
    out.report.frobenius = detail::frobenius_by_products(p.op, a);
    out.report.trace = std::numeric_limits<double>::quiet_NaN();
    out.report.relative_to_sigma = sigma > 0 ? est.value / sigma : std::numeric_limits<double>::quiet_NaN();
    out.report.matvecs = matvecs_of(a);
  }
  if (std::isnan(sigma)) out.report.relative_to_sigma = std::numeric_limits<double>::quiet_NaN();
  if (with_subspace && r > 0) {
    const Matrix ref = p.reference_vectors(r);
    out.subspace = std::visit(
        [&](const auto& x) {
          return x.rank() >= r ? subspace_error(x, ref, r) : 1.0;
        },
        a);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output helpers.

inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::ios_base::failure("cannot open for writing: " + path);
  f << text;
  if (!f) throw std::ios_base::failure("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Commands. Each returns an exit code and writes results to `out`.

struct GenArgs {
  std::string kind;
  int n = 0;
  std::string matrix;  // empty, "diag" or "noisy"
  double noise = 0.002;
  std::uint64_t seed = 0;
  std::string format = "mtx";
  std::string out;
  int blobs = 0;
  int per_blob = 0;
  int dim = 2;
  double scale = 1.0;
  double separation = 10.0;
  std::string labels;
};

inline int cmd_gen(const GenArgs& a, std::ostream& out) {
  if (a.out.empty()) throw UsageError("gen needs --out");
  if (a.blobs > 0) {
    if (a.per_blob < 1 || a.dim < 1) throw UsageError("blobs need --per-blob >= 1 and --dim >= 1");
    RngState rng(a.seed);
    // Centers on a circle (first two coordinates) of radius `separation`.
    Matrix centers = Matrix::Zero(a.blobs, a.dim);
    for (int b = 0; b < a.blobs; ++b) {
      const double angle = 2.0 * std::numbers::pi * b / a.blobs;
      centers(b, 0) = a.separation * std::cos(angle);
      if (a.dim > 1) centers(b, 1) = a.separation * std::sin(angle);
    }
    std::vector<int> labels;
    PointSet pts = gaussian_blobs(centers, a.per_blob, a.scale, rng, &labels);
    write_points_csv(a.out, pts);
    if (!a.labels.empty()) write_labels_csv(a.labels, labels);
    out << "wrote " << pts.n() << " points to " << a.out << "\n";
    return kOk;
  }
  if (a.kind.empty() || a.n < 1) throw UsageError("gen needs --kind and --n >= 1 (or --blobs)");
  const Spectrum spec = make_spectrum(spectrum_kind_from_string(a.kind), static_cast<std::size_t>(a.n));
  if (a.matrix.empty()) {
    write_spectrum_csv(a.out, spec);
    out << "wrote " << spec.size() << " values to " << a.out << "\n";
    return kOk;
  }
  Matrix m = spec.vector().asDiagonal();
  if (a.matrix == "noisy") {
    RngState rng(a.seed);
    m = noisy_dense(m, a.noise, rng);
  } else if (a.matrix != "diag") {
    throw UsageError("--matrix must be diag or noisy");
  }
  if (a.format == "mtx") write_matrix_market(a.out, m);
  else if (a.format == "bin") write_binary_matrix(a.out, m);
  else throw UsageError("--format must be mtx or bin");
  out << "wrote " << m.rows() << "x" << m.cols() << " matrix to " << a.out << "\n";
  return kOk;
}

struct ApproxArgs {
  ProblemArgs problem;
  std::string method;
  Index k = 0;
  std::string stop = "fixed:2";
  std::uint64_t seed = 0;
  int r = 0;
  std::string orth = "stabilized";
  std::string eval = "auto";
  bool bounds = false;
  std::string out;
};

inline Orthogonalization parse_orth(const std::string& s) {
  if (s == "stabilized") return Orthogonalization::stabilized;
  if (s == "householder") return Orthogonalization::householder;
  throw UsageError("--orth must be stabilized or householder");
}

/// Bound values attached to a run record: rsvd/nyssvd expectation bounds or
/// gapless bounds at the run's multiplication count. Inapplicable ones are skipped.
inline std::map<std::string, double> bounds_for_run(const Spectrum& spec, BoundMethod method, int k, int r, int m) {
  std::map<std::string, double> out;
  BoundQuery q;
  q.spectrum = spec;
  q.k = k;
  q.r = r;
  q.m = m;
  q.method = method;
  auto add = [&](const std::string& name, auto&& fn) {
    try {
      out[name] = fn().relative;
    } catch (const BoundInapplicable&) {
    }
  };
  if (method == BoundMethod::rsvd || method == BoundMethod::nyssvd) {
    q.variant = BoundVariant::expectation;
    add("expectation_relative", [&] { return evaluate_bound(q); });
  } else {
    add("gapless_relative", [&] { return gapless_bound(q); });
    add("gapped_relative", [&] { return gapped_bound_scan(q); });
  }
  return out;
}

inline int cmd_approx(const ApproxArgs& a, std::ostream& out) {
  if (a.k < 1) throw UsageError("-k must be at least 1");
  MethodConfig cfg;
  cfg.method = parse_method(a.method);
  cfg.k = a.k;
  cfg.stop = parse_stop(a.stop);
  cfg.orth = parse_orth(a.orth);
  const EvalMode mode = parse_eval_mode(a.eval);
  Problem p = make_problem(a.problem);
  if (is_nystrom(cfg.method) && !p.op.traits().psd)
    throw UsageError(std::string(to_string(cfg.method)) + " requires a symmetric psd input; refused");
  const int r = a.r > 0 ? a.r : static_cast<int>(a.k);
  RngState rng(a.seed);
  const auto t0 = std::chrono::steady_clock::now();
  AnyApprox approx = run_method(p.op, cfg, rng);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Evaluation ev = evaluate(p, approx, r, mode, false);

  RunRecord rec;
  rec.method = a.method;
  rec.input = p.description;
  rec.k = a.k;
  rec.m_or_q = multiplications_of(approx);
  rec.r = r;
  rec.seed = a.seed;
  rec.stop = describe(cfg.stop);
  rec.matvecs_A = matvecs_of(approx).count_A;
  rec.matvecs_At = matvecs_of(approx).count_At;
  rec.wall_seconds = wall;
  rec.error = ev.report;
  for (Index w : widths_of(approx)) rec.block_widths.push_back(w);
  if (a.bounds && p.spectrum)
    rec.bounds = bounds_for_run(*p.spectrum, cfg.method, static_cast<int>(a.k), r, rec.m_or_q);
  emit(a.out, to_json(rec).dump(2) + "\n", out);
  return kOk;
}

struct SweepArgs {
  ProblemArgs problem;
  std::string methods;
  std::string ks;
  std::string ms = "1:6";
  int seeds = 10;
  std::uint64_t seed0 = 0;
  int r = 0;
  std::string orth = "stabilized";
  std::string eval = "auto";
  bool subspace = true;
  std::string out;
};

inline const char* kSweepHeader =
    "method,k,m,km,seed,matvecs_A,matvecs_At,spectral_error,relative_to_sigma,frobenius_error,"
    "subspace_error_r\n";

/// Long-format CSV, one row per (method, k, m, seed). Runs fan out over
/// (seed, method, k) with at most SKETCHPACK_THREADS workers; rows are
/// emitted in task order.
inline int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const auto names = split_names(a.methods);
  if (names.empty()) throw UsageError("sweep needs a nonempty --methods list");
  std::vector<BoundMethod> methods;
  for (const auto& n : names) methods.push_back(parse_method(n));
  const auto ks = parse_int_list(a.ks);
  const auto ms = parse_int_list(a.ms);
  if (a.seeds < 1) throw UsageError("--seeds must be at least 1");
  const EvalMode mode = parse_eval_mode(a.eval);
  const Orthogonalization orth = parse_orth(a.orth);
  const Problem p = make_problem(a.problem);
  for (BoundMethod m : methods)
    if (is_nystrom(m) && !p.op.traits().psd)
      throw UsageError(std::string(to_string(m)) + " requires a symmetric psd input; refused");
  const std::set<int> grid(ms.begin(), ms.end());
  const int m_max = *grid.rbegin();

  struct Task {
    BoundMethod method;
    int k;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (int s = 0; s < a.seeds; ++s)
    for (BoundMethod m : methods)
      for (int k : ks) tasks.push_back({m, k, a.seed0 + static_cast<std::uint64_t>(s)});
  std::vector<std::string> rows(tasks.size());
  std::vector<std::string> errors(tasks.size());

  auto run_task = [&](std::size_t t) {
    const Task& task = tasks[t];
    const int r = a.r > 0 ? a.r : task.k;
    std::ostringstream buf;
    Problem local = p;
    local.op = p.op.with_fresh_ledger();
    MethodConfig cfg;
    cfg.method = task.method;
    cfg.k = task.k;
    cfg.orth = orth;
    cfg.stop = FixedMultiplications{std::max(1, m_max)};
    const bool single = task.method == BoundMethod::rsvd || task.method == BoundMethod::nyssvd;
    cfg.observer = [&](const AnyApprox& approx) {
      const int m = multiplications_of(approx);
      if (!single && !grid.count(m)) return;
      Evaluation ev = evaluate(local, approx, r, mode, a.subspace);
      const LedgerCounts& c = matvecs_of(approx);
      buf << to_string(task.method) << "," << task.k << "," << m << "," << task.k * m << "," << task.seed
          << "," << c.count_A << "," << c.count_At << "," << fmt(ev.report.spectral) << ","
          << fmt(ev.report.relative_to_sigma) << "," << fmt(ev.report.frobenius) << "," << fmt(ev.subspace)
          << "\n";
    };
    RngState rng(task.seed);
    run_method(local.op, cfg, rng);
    rows[t] = buf.str();
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(thread_cap(), static_cast<unsigned>(tasks.size())));
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        run_task(t);
      } catch (const std::exception& e) {
        errors[t] = e.what();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t t = 0; t < tasks.size(); ++t)
    if (!errors[t].empty()) throw NumericalFailure("sweep task failed: " + errors[t]);
  std::string text = kSweepHeader;
  for (const auto& r : rows) text += r;
  emit(a.out, text, out);
  return kOk;
}

struct BoundsArgs {
  ProblemArgs problem;
  std::string methods = "rsi,rbki,nyssi,nysbki";
  std::string family = "gapless";  // sketch | gapless | gapped
  std::string variant = "expectation";
  int r = 1;
  int k = 0;
  std::string ms = "1:10";
  int s = 0;  // gapped: 0 scans s in {r+1, ..., min(k-1, r+25)}
  double p = std::numeric_limits<double>::infinity();
  double u = 8.0;
  double t = std::numbers::e * std::numbers::e;
  std::string out;
};

inline const char* kBoundsHeader =
    "method,family,variant,r,k,m,s,p,quantity,value,relative,failure_probability,gap,applicable,note\n";

inline int cmd_bounds(const BoundsArgs& a, std::ostream& out) {
  Problem prob = make_problem(a.problem);
  if (!prob.spectrum) throw UsageError("bounds need a spectrum");
  const auto names = split_names(a.methods);
  if (names.empty()) throw UsageError("bounds need a nonempty --methods list");
  if (a.family != "sketch" && a.family != "gapless" && a.family != "gapped")
    throw UsageError("--family must be sketch, gapless or gapped");
  const BoundVariant variant = [&] {
    try {
      return bound_variant_from_string(a.variant);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  const auto ms = a.family == "sketch" ? std::vector<int>{0} : parse_int_list(a.ms);
  std::string text = kBoundsHeader;
  for (const auto& name : names) {
    const BoundMethod method = parse_method(name);
    for (int m : ms) {
      BoundQuery q;
      q.spectrum = *prob.spectrum;
      q.k = a.k;
      q.r = a.r;
      q.m = m;
      q.s = a.s;
      q.p = a.p;
      q.method = method;
      q.variant = variant;
      q.u = a.u;
      q.t = a.t;
      std::ostringstream row;
      row << name << "," << a.family << "," << (a.family == "sketch" ? a.variant : "-") << "," << a.r << ","
          << a.k << "," << m << ",";
      try {
        BoundReport rep;
        if (a.family == "sketch") rep = is_nystrom(method) ? nyssvd_bound(q) : rsvd_bound(q);
        else if (a.family == "gapless") rep = gapless_bound(q);
        else rep = a.s > 0 ? gapped_bound(q) : gapped_bound_scan(q);
        row << rep.query.s << "," << fmt(a.p) << "," << to_string(rep.quantity) << "," << fmt(rep.value) << ","
            << fmt(rep.relative) << ","
            << (rep.failure_probability ? fmt(*rep.failure_probability) : std::string()) << ","
            << (rep.gap ? fmt(*rep.gap) : std::string()) << ",1,\n";
      } catch (const BoundInapplicable& e) {
        std::string note = e.what();
        std::replace(note.begin(), note.end(), ',', ';');
        row << a.s << "," << fmt(a.p) << ",,,,,,0," << note << "\n";
      }
      text += row.str();
    }
  }
  emit(a.out, text, out);
  return kOk;
}

// ---------------------------------------------------------------------------
// verify: Monte Carlo targets plus deterministic property suites.

struct VerifyArgs {
  std::string targets = "inverse_trace,inverse_trace_tail,frobenius_product,schatten4_product,"
                        "spectral_product,gaussian_product_mean,gaussian_product_tail,coupling,dominance";
  long trials = 10000;
  std::uint64_t seed = 0;
  int r = 5;
  int k = 10;
  double u = 8.0;
  double t = std::numbers::e * std::numbers::e;
  int n = 200;
  int seeds = 20;
  std::string out;
};

/// Spectral-norm error of each method on (U S V^T, Omega) and (S, V^T Omega);
/// returns the largest relative difference over seeds and methods.
inline Json coupling_suite(int n, int seeds, std::uint64_t seed0) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp25, static_cast<std::size_t>(n));
  const Index k = 10;
  double worst = 0.0;
  Json per_method = Json::object();
  for (int s = 0; s < seeds; ++s) {
    RngState rng(seed0 + static_cast<std::uint64_t>(s));
    const Matrix u = qr_econ(gaussian_matrix(rng, n, n)).Q;
    const Matrix v = qr_econ(gaussian_matrix(rng, n, n)).Q;
    const Matrix omega = gaussian_matrix(rng, n, k);
    const Matrix sdiag = spec.vector().asDiagonal();
    const LinearOperator diag = diag_operator(spec);
    const LinearOperator general = dense_operator(u * sdiag * v.transpose());
    OperatorTraits psd_traits;
    psd_traits.symmetric = true;
    psd_traits.psd = true;
    psd_traits.trace = spec.vector().sum();
    Matrix sym = u * sdiag * u.transpose();
    sym = 0.5 * (sym + sym.transpose()).eval();
    const LinearOperator psd = dense_operator(sym, psd_traits);
    const Matrix omega_v = v.transpose() * omega;
    const Matrix omega_u = u.transpose() * omega;
    const RngState nys_rng(seed0);
    auto rel = [&](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    auto record = [&](const std::string& name, double a, double b) {
      const double d = rel(a, b);
      worst = std::max(worst, d);
      per_method[name] = std::max(per_method.value(name, 0.0), d);
    };
    const Matrix dense_general = u * sdiag * v.transpose();
    for (int m : {2, 3, 4}) {
      record("rsi", schatten_error(dense_general, rsi_extended(general, omega, FixedMultiplications{m}), kInf),
             schatten_error(sdiag, rsi_extended(diag, omega_v, FixedMultiplications{m}), kInf));
      record("rbki", schatten_error(dense_general, rbki_extended(general, omega, FixedMultiplications{m}), kInf),
             schatten_error(sdiag, rbki_extended(diag, omega_v, FixedMultiplications{m}), kInf));
      record("nyssi",
             schatten_error(sym, nyssi(psd, omega, FixedMultiplications{m}, {}, nys_rng), kInf),
             schatten_error(sdiag, nyssi(diag, omega_u, FixedMultiplications{m}, {}, nys_rng), kInf));
      record("nysbki",
             schatten_error(sym, nysbki(psd, omega, FixedMultiplications{m}, {}, nys_rng), kInf),
             schatten_error(sdiag, nysbki(diag, omega_u, FixedMultiplications{m}, {}, nys_rng), kInf));
    }
    record("rsvd", schatten_error(dense_general, rsvd(general, omega), kInf),
           schatten_error(sdiag, rsvd(diag, omega_v), kInf));
    const double shift = kEpsMach * spec.vector().sum();
    record("nyssvd", schatten_error(sym, nyssvd(psd, omega, shift), kInf),
           schatten_error(sdiag, nyssvd(diag, omega_u, shift), kInf));
  }
  return {{"name", "coupling"},
          {"max_relative_difference", worst},
          {"per_method", per_method},
          {"tolerance", 1e-8},
          {"pass", worst <= 1e-8}};
}

/// Per-seed orderings with shared test matrices:
///   error(RBKI, m) <= error(RSI, m) <= error(RSVD on the first block) + 1e-10 sigma_1
///   ||A - A<M>||_p <= ||A - Pi_M A||_p + 1e-9 tr(A)
inline Json dominance_suite(int seeds, std::uint64_t seed0) {
  const int n = 300;
  const Index k = 10;
  long checks = 0;
  long violations = 0;
  for (const SpectrumKind kind : {SpectrumKind::exp25, SpectrumKind::noisy_slow}) {
    const Spectrum spec = make_spectrum(kind, n);
    const LinearOperator op = diag_operator(spec);
    const Matrix a = spec.vector().asDiagonal();
    for (int s = 0; s < seeds; ++s) {
      RngState rng(seed0 + static_cast<std::uint64_t>(s));
      const Matrix omega = gaussian_matrix(rng, n, k);
      const SVDApprox base = rsvd(op, omega);
      const SVDApprox rsi = rsi_extended(op, omega, FixedMultiplications{6});
      const SVDApprox rbki = rbki_extended(op, omega, FixedMultiplications{6});
      for (double p : {1.0, 2.0, kInf}) {
        const double e_base = schatten_error(a, base, p);
        const double e_rsi = schatten_error(a, rsi, p);
        const double e_rbki = schatten_error(a, rbki, p);
        const double slack = 1e-10 * spec[0];
        checks += 2;
        if (!(e_rbki <= e_rsi + slack)) ++violations;
        if (!(e_rsi <= e_base + slack)) ++violations;
      }
    }
  }
  for (int s = 0; s < seeds; ++s) {
    RngState rng(seed0 + 1000 + static_cast<std::uint64_t>(s));
    const int m = 50;
    const Matrix g = gaussian_matrix(rng, m, m);
    Vector decay(m);
    for (int i = 0; i < m; ++i) decay(i) = std::exp(-0.2 * i);
    Matrix a = g * decay.asDiagonal() * g.transpose();
    a = 0.5 * (a + a.transpose()).eval();
    const LinearOperator op = dense_operator(a);
    const Matrix test = gaussian_matrix(rng, m, 8);
    const EigApprox nys = nystrom_compress(op, test, 0.0);
    const Matrix q = qr_econ(test).Q;
    const Matrix proj = q * (q.transpose() * a);
    for (double p : {1.0, 2.0, kInf}) {
      ++checks;
      const double lhs = schatten_norm(singular_values(a - to_dense(nys)), p);
      const double rhs = schatten_norm(singular_values(a - proj), p);
      if (!(lhs <= rhs + 1e-9 * a.trace())) ++violations;
    }
  }
  return {{"name", "dominance"}, {"checks", checks}, {"violations", violations}, {"pass", violations == 0}};
}

inline RmtParams default_rmt_params(RmtTarget target, const VerifyArgs& a) {
  RmtParams p;
  p.r = a.r;
  p.k = a.k;
  p.u = a.u;
  p.t = a.t;
  switch (target) {
    case RmtTarget::frobenius_product:
      p.S = Vector((Vector(2) << 1.0, 2.0).finished()).asDiagonal();
      p.T = Matrix::Constant(1, 1, 3.0);
      break;
    case RmtTarget::schatten4_product:
    case RmtTarget::spectral_product:
      p.S = Vector((Vector(3) << 1.0, 0.5, 0.25).finished()).asDiagonal();
      p.T = Vector((Vector(2) << 2.0, 1.0).finished()).asDiagonal();
      break;
    case RmtTarget::gaussian_product_mean:
    case RmtTarget::gaussian_product_tail: {
      Vector d(20);
      for (int i = 0; i < 20; ++i) d(i) = std::exp(-0.1 * i);
      p.S = d.asDiagonal();
      break;
    }
    default: break;
  }
  return p;
}

inline int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  const auto names = split_names(a.targets);
  if (names.empty()) throw UsageError("verify needs a nonempty --targets list");
  Json results = Json::array();
  bool all = true;
  for (const auto& name : names) {
    Json entry;
    if (name == "coupling") {
      entry = coupling_suite(a.n, std::max(1, std::min(a.seeds, 10)), a.seed);
    } else if (name == "dominance") {
      entry = dominance_suite(a.seeds, a.seed);
    } else {
      RmtTarget target;
      try {
        target = rmt_target_from_string(name);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const RmtReport rep = mc_verify_rmt(target, default_rmt_params(target, a), a.trials,
                                          RngState(a.seed), thread_cap());
      entry = to_json(rep);
      entry["name"] = name;
      entry["tolerance"] = rep.equality ? "3 standard errors" : "estimate <= bound";
    }
    all = all && entry.at("pass").get<bool>();
    results.push_back(std::move(entry));
  }
  Json doc = {{"results", results}, {"all_pass", all}, {"seed", a.seed}};
  emit(a.out, doc.dump(2) + "\n", out);
  return kOk;
}

struct ClusterArgs {
  std::string points;
  double sigma = 0.0;
  int rank = 0;
  int clusters = 0;
  Index k = 10;
  double eps = 1e-4;
  std::string solver = "nysbki";
  std::string truth;
  bool row_normalize = false;
  bool dense_reference = false;
  std::uint64_t seed = 0;
  Index dense_cap = 8000;
  std::string out;
};

inline int cmd_cluster(const ClusterArgs& a, std::ostream& out, std::ostream& log) {
  if (!(a.sigma > 0)) throw UsageError("--sigma must be positive");
  if (a.rank < 1 || a.clusters < 1) throw UsageError("--rank and --clusters must be at least 1");
  PointSet pts = load_points(a.points);
  if (!pts.header.empty()) log << "skipped header row in " << a.points << "\n";
  ClusterOptions opts;
  if (a.solver == "nysbki") opts.solver = EigSolver::nysbki_adaptive;
  else if (a.solver == "dense") opts.solver = EigSolver::dense;
  else throw UsageError("--solver must be nysbki or dense");
  opts.block_size = a.k;
  opts.eps = a.eps;
  opts.seed = a.seed;
  opts.kmeans_seed = a.seed;
  opts.row_normalize = a.row_normalize;
  opts.dense_reference = a.dense_reference;
  opts.kernel.dense_cap = a.dense_cap;
  opts.kernel.threads = thread_cap();
  std::vector<int> truth;
  if (!a.truth.empty()) {
    truth = load_labels(a.truth);
    if (static_cast<Index>(truth.size()) != pts.n()) throw UsageError("ground truth length differs from point count");
  }
  ClusterResult res = spectral_cluster(pts, a.sigma, a.rank, a.clusters, opts, truth.empty() ? nullptr : &truth);
  emit(a.out, to_json(res).dump(2) + "\n", out);
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point shared by the executable and the tests.

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Randomized low-rank approximation toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Write spectra, matrices or point sets");
  g->add_option("--kind", gen.kind, "exp_step | exp25 | noisy_slow | flat");
  g->add_option("--n", gen.n, "Length / dimension");
  g->add_option("--matrix", gen.matrix, "diag | noisy (omit to write the spectrum CSV)");
  g->add_option("--noise", gen.noise, "Noise standard deviation for --matrix noisy");
  g->add_option("--format", gen.format, "mtx | bin");
  g->add_option("--seed", gen.seed);
  g->add_option("--blobs", gen.blobs, "Number of Gaussian blobs (point-set mode)");
  g->add_option("--per-blob", gen.per_blob);
  g->add_option("--dim", gen.dim);
  g->add_option("--scale", gen.scale, "Blob standard deviation");
  g->add_option("--separation", gen.separation, "Radius of the circle of blob centers");
  g->add_option("--labels", gen.labels, "Ground-truth label CSV (point-set mode)");
  g->add_option("--out", gen.out)->required();

  auto add_problem = [](CLI::App* sub, ProblemArgs& p) {
    sub->add_option("--input", p.input, "Spectrum .csv (diagonal), .mtx or .bin matrix");
    sub->add_option("--kind", p.kind, "Synthetic diagonal spectrum kind");
    sub->add_option("--n", p.n, "Synthetic size");
    sub->add_option("--noise", p.noise, "Add N(0, noise^2) entries (dense, non-symmetric)");
    sub->add_option("--noise-seed", p.noise_seed);
  };

  ApproxArgs ap;
  auto* a = app.add_subcommand("approx", "Run one method and report its error as JSON");
  add_problem(a, ap.problem);
  a->add_option("--method", ap.method, "rsvd | rsi | rbki | nyssvd | nyssi | nysbki")->required();
  a->add_option("-k,--k", ap.k, "Block size")->required();
  a->add_option("--stop", ap.stop, "fixed:m | fro:eps | trace:eps | residual:r,eps");
  a->add_option("--seed", ap.seed);
  a->add_option("-r,--r", ap.r, "Rank for relative_to_sigma (default k)");
  a->add_option("--orth", ap.orth, "stabilized | householder");
  a->add_option("--eval", ap.eval, "auto | dense | lanczos");
  a->add_flag("--bounds", ap.bounds, "Attach bound values");
  a->add_option("--out", ap.out);

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Error curves over methods, block sizes and depths as CSV");
  add_problem(s, sw.problem);
  s->add_option("--methods", sw.methods)->required();
  s->add_option("-k,--k", sw.ks, "Block sizes, e.g. 10,20 or 10:12")->required();
  s->add_option("--m", sw.ms, "Multiplication counts, e.g. 1:6");
  s->add_option("--seeds", sw.seeds);
  s->add_option("--seed", sw.seed0, "First seed");
  s->add_option("-r,--r", sw.r, "Rank for relative_to_sigma and subspace error (default k)");
  s->add_option("--orth", sw.orth);
  s->add_option("--eval", sw.eval, "auto | dense | lanczos");
  s->add_flag("!--no-subspace", sw.subspace, "Skip the subspace error column");
  s->add_option("--out", sw.out);

  BoundsArgs bd;
  auto* b = app.add_subcommand("bounds", "Evaluate error bounds as CSV");
  add_problem(b, bd.problem);
  b->add_option("--methods", bd.methods);
  b->add_option("--family", bd.family, "sketch | gapless | gapped");
  b->add_option("--variant", bd.variant, "expectation | tail | frobenius | spectral | schatten4 | spectral4");
  b->add_option("-r,--r", bd.r)->required();
  b->add_option("-k,--k", bd.k)->required();
  b->add_option("--m", bd.ms);
  b->add_option("--s", bd.s, "Gap index for gapped bounds (0 scans)");
  b->add_option("--p", bd.p, "Schatten index");
  b->add_option("--u", bd.u);
  b->add_option("--t", bd.t);
  b->add_option("--out", bd.out);

  VerifyArgs vf;
  auto* v = app.add_subcommand("verify", "Monte Carlo and property checks with pass/fail JSON");
  v->add_option("--targets", vf.targets);
  v->add_option("--trials", vf.trials);
  v->add_option("--seed", vf.seed);
  v->add_option("-r,--r", vf.r);
  v->add_option("-k,--k", vf.k);
  v->add_option("--u", vf.u);
  v->add_option("--t", vf.t);
  v->add_option("--n", vf.n, "Coupling suite dimension");
  v->add_option("--seeds", vf.seeds, "Seeds for the property suites");
  v->add_option("--out", vf.out);

  ClusterArgs cl;
  auto* c = app.add_subcommand("cluster", "Kernel spectral clustering of a point CSV");
  c->add_option("--points", cl.points)->required();
  c->add_option("--sigma", cl.sigma, "Kernel bandwidth")->required();
  c->add_option("--rank", cl.rank)->required();
  c->add_option("--clusters", cl.clusters)->required();
  c->add_option("-k,--k", cl.k, "Block size");
  c->add_option("--eps", cl.eps, "Residual tolerance");
  c->add_option("--solver", cl.solver, "nysbki | dense");
  c->add_option("--truth", cl.truth, "Ground-truth labels for purity");
  c->add_flag("--row-normalize", cl.row_normalize);
  c->add_flag("--dense-reference", cl.dense_reference);
  c->add_option("--seed", cl.seed);
  c->add_option("--dense-cap", cl.dense_cap);
  c->add_option("--out", cl.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*g) return cmd_gen(gen, out);
    if (*a) return cmd_approx(ap, out);
    if (*s) return cmd_sweep(sw, out);
    if (*b) return cmd_bounds(bd, out);
    if (*v) return cmd_verify(vf, out);
    if (*c) return cmd_cluster(cl, out, err);
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kIo;
  } catch (const std::ios_base::failure& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace sketchpack::cli
