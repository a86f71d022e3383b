#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "sketchpack/errors.hpp"
#include "sketchpack/linop.hpp"
#include "sketchpack/metrics.hpp"
#include "sketchpack/nystrom.hpp"
#include "sketchpack/rng.hpp"

namespace sketchpack {

/// One point per row; all coordinates finite.
struct PointSet {
  Matrix coords;
  /// Column names when the input began with a non-numeric row.
  std::vector<std::string> header;

  Index n() const noexcept { return coords.rows(); }
  Index d() const noexcept { return coords.cols(); }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// CSV with one point per line. A first row that is not fully numeric is
/// kept as the header; blank lines are ignored.
inline PointSet parse_points(std::istream& in) {
  PointSet out;
  std::vector<double> values;
  Index d = -1;
  std::size_t lineno = 0;
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    for (const auto& f : fields) {
      auto v = detail::parse_double(f);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows == 0 && out.header.empty()) {
        out.header = fields;
        continue;
      }
      throw ParseError("non-numeric field in point row", lineno);
    }
    for (double v : row)
      if (!std::isfinite(v)) throw ParseError("non-finite coordinate", lineno);
    if (d < 0) d = static_cast<Index>(row.size());
    if (static_cast<Index>(row.size()) != d)
      throw ParseError("row has " + std::to_string(row.size()) + " fields, expected " +
                           std::to_string(d),
                       lineno);
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw ParseError("no points in input");
  out.coords = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Index>(rows), d);
  return out;
}

inline PointSet load_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open points file: " + path);
  return parse_points(in);
}

/// Integer labels, one per line (first CSV field); an optional non-numeric header is skipped.
inline std::vector<int> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open labels file: " + path);
  std::vector<int> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    auto v = detail::parse_double(fields.front());
    if (!v) {
      if (out.empty() && lineno == 1) continue;
      throw ParseError("non-numeric label", lineno);
    }
    if (*v != std::floor(*v)) throw ParseError("label is not an integer", lineno);
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

/// Isotropic Gaussian clusters; point order is blob by blob.
inline PointSet gaussian_blobs(const Matrix& centers, Index per_blob, double scale, RngState& rng,
                               std::vector<int>* labels = nullptr) {
  PointSet out;
  out.coords.resize(centers.rows() * per_blob, centers.cols());
  if (labels) labels->clear();
  for (Index b = 0; b < centers.rows(); ++b) {
    for (Index i = 0; i < per_blob; ++i) {
      const Index row = b * per_blob + i;
      for (Index j = 0; j < centers.cols(); ++j)
        out.coords(row, j) = centers(b, j) + scale * rng.next_normal();
      if (labels) labels->push_back(static_cast<int>(b));
    }
  }
  return out;
}

struct KernelOptions {
  /// Largest n realized densely; above it products are formed tile by tile.
  Index dense_cap = 8000;
  Index tile = 1024;
  unsigned threads = 1;
};

namespace detail {

/// exp(-||x_i - y_j||^2 / (2 sigma^2)) for rows x_i of xs and y_j of ys.
inline Matrix kernel_block(const Matrix& xs, const Vector& xs_sq, const Matrix& ys,
                           const Vector& ys_sq, double sigma) {
  Matrix dist = -2.0 * xs * ys.transpose();
  dist.colwise() += xs_sq;
  dist.rowwise() += ys_sq.transpose();
  const double scale = -1.0 / (2.0 * sigma * sigma);
  return (dist.array().max(0.0) * scale).exp().matrix();
}

struct KernelData {
  Matrix coords;
  Vector sq;
  double sigma = 1.0;
  KernelOptions opts;
};

inline std::shared_ptr<const KernelData> make_kernel_data(const PointSet& pts, double sigma,
                                                          const KernelOptions& opts) {
  auto data = std::make_shared<KernelData>();
  data->coords = pts.coords;
  data->sq = pts.coords.rowwise().squaredNorm();
  data->sigma = sigma;
  data->opts = opts;
  return data;
}

/// Symmetric kernel matrix with unit diagonal.
inline Matrix dense_kernel(const KernelData& k) {
  const Index n = k.coords.rows();
  Matrix out = kernel_block(k.coords, k.sq, k.coords, k.sq, k.sigma);
  for (Index j = 0; j < n; ++j) {
    out(j, j) = 1.0;
    for (Index i = j + 1; i < n; ++i) out(j, i) = out(i, j);
  }
  return out;
}

/// Tiled product. Row tiles are independent work items; within a row tile the
/// column tiles are summed in a fixed order, so the result does not depend on
/// the thread count.
struct TiledKernelOp {
  std::shared_ptr<const KernelData> k;

  Index rows() const { return k->coords.rows(); }
  Index cols() const { return k->coords.rows(); }

  Matrix apply(const Matrix& x) const {
    const Index n = rows();
    const Index tile = std::max<Index>(1, k->opts.tile);
    const Index tiles = (n + tile - 1) / tile;
    Matrix out = Matrix::Zero(n, x.cols());
    auto row_tile = [&](Index ti) {
      const Index i0 = ti * tile;
      const Index bi = std::min(tile, n - i0);
      const Matrix xi = k->coords.middleRows(i0, bi);
      const Vector si = k->sq.segment(i0, bi);
      for (Index tj = 0; tj < tiles; ++tj) {
        const Index j0 = tj * tile;
        const Index bj = std::min(tile, n - j0);
        Matrix blk = kernel_block(xi, si, k->coords.middleRows(j0, bj), k->sq.segment(j0, bj), k->sigma);
        if (ti == tj)
          for (Index d = 0; d < bi; ++d) blk(d, d) = 1.0;
        out.middleRows(i0, bi).noalias() += blk * x.middleRows(j0, bj);
      }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(k->opts.threads, static_cast<unsigned>(tiles)));
    if (workers == 1) {
      for (Index ti = 0; ti < tiles; ++ti) row_tile(ti);
    } else {
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w]() {
          for (Index ti = w; ti < tiles; ti += workers) row_tile(ti);
        });
      for (auto& th : pool) th.join();
    }
    return out;
  }
  Matrix apply_adjoint(const Matrix& x) const { return apply(x); }
};

/// D^{-1/2} A D^{-1/2} around a matrix-free kernel.
struct ScaledOp {
  LinearOperator inner;
  Vector inv_sqrt_d;

  Index rows() const { return inner.rows(); }
  Index cols() const { return inner.cols(); }
  Matrix apply(const Matrix& x) const {
    return inv_sqrt_d.asDiagonal() * inner.apply(inv_sqrt_d.asDiagonal() * x);
  }
  Matrix apply_adjoint(const Matrix& x) const { return apply(x); }
};

}  // namespace detail

/// Gaussian kernel a_ij = exp(-||x_i - x_j||^2 / (2 sigma^2)); psd with unit
/// diagonal. Dense when n <= opts.dense_cap, tiled otherwise.
inline LinearOperator kernel_operator(const PointSet& pts, double sigma, const KernelOptions& opts = {}) {
  if (!(sigma > 0.0)) throw std::invalid_argument("kernel_operator: sigma must be positive");
  if (pts.n() == 0) throw std::invalid_argument("kernel_operator: empty point set");
  auto data = detail::make_kernel_data(pts, sigma, opts);
  OperatorTraits traits;
  traits.symmetric = true;
  traits.psd = true;
  traits.trace = static_cast<double>(pts.n());
  if (pts.n() <= opts.dense_cap) return dense_operator(detail::dense_kernel(*data), traits);
  return LinearOperator(detail::TiledKernelOp{data}, traits);
}

struct NormalizedKernel {
  LinearOperator op;
  /// Row sums of the kernel matrix.
  Vector degrees;
};

/// D^{-1/2} A D^{-1/2} with D = diag(A 1); degrees come from one product with
/// the all-ones vector.
inline NormalizedKernel normalized_kernel(const PointSet& pts, double sigma, const KernelOptions& opts = {}) {
  LinearOperator a = kernel_operator(pts, sigma, opts);
  const Vector degrees = a.apply(Matrix::Ones(pts.n(), 1)).col(0);
  const Vector inv_sqrt = degrees.cwiseSqrt().cwiseInverse();
  OperatorTraits traits;
  traits.symmetric = true;
  traits.psd = true;
  traits.trace = degrees.cwiseInverse().sum();
  if (auto dense = a.dense()) {
    Matrix m = inv_sqrt.asDiagonal() * (*dense) * inv_sqrt.asDiagonal();
    // Restore exact symmetry lost to rounding.
    m = 0.5 * (m + m.transpose()).eval();
    return {dense_operator(std::move(m), traits), degrees};
  }
  return {LinearOperator(detail::ScaledOp{a, inv_sqrt}, traits), degrees};
}

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;
  /// Within-cluster sum of squares after each assignment step.
  std::vector<double> objective_history;
  int iterations = 0;
  bool converged = false;
};

/// k-means++ seeding (squared-distance weighting) followed by Lloyd
/// iterations until the assignment is a fixpoint or 300 iterations. Ties go
/// to the lowest cluster id; an empty cluster keeps its previous center.
inline KMeansResult kmeans(const Matrix& rows, int c, std::uint64_t seed, int max_iterations = 300) {
  const Index n = rows.rows();
  const Index d = rows.cols();
  if (c < 1) throw std::invalid_argument("kmeans: c must be at least 1");
  if (c > n) throw std::invalid_argument("kmeans: c exceeds the number of points");
  RngState rng(seed);
  KMeansResult out;
  out.centers.resize(c, d);

  Vector best = Vector::Constant(n, std::numeric_limits<double>::infinity());
  Index first = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(n)));
  out.centers.row(0) = rows.row(first);
  for (int j = 1; j < c; ++j) {
    const auto prev = out.centers.row(j - 1);
    for (Index i = 0; i < n; ++i) best(i) = std::min(best(i), (rows.row(i) - prev).squaredNorm());
    const double total = best.sum();
    Index pick = 0;
    if (total > 0.0) {
      const double target = rng.next_uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += best(i);
        if (acc >= target && best(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(n)));
    }
    out.centers.row(j) = rows.row(pick);
  }

  out.labels.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    double objective = 0.0;
    for (Index i = 0; i < n; ++i) {
      int arg = 0;
      double dist = (rows.row(i) - out.centers.row(0)).squaredNorm();
      for (int j = 1; j < c; ++j) {
        const double dj = (rows.row(i) - out.centers.row(j)).squaredNorm();
        if (dj < dist) {
          dist = dj;
          arg = j;
        }
      }
      objective += dist;
      if (out.labels[static_cast<std::size_t>(i)] != arg) {
        out.labels[static_cast<std::size_t>(i)] = arg;
        changed = true;
      }
    }
    out.objective_history.push_back(objective);
    out.iterations = it + 1;
    if (!changed) {
      out.converged = true;
      break;
    }
    Matrix sums = Matrix::Zero(c, d);
    std::vector<Index> counts(static_cast<std::size_t>(c), 0);
    for (Index i = 0; i < n; ++i) {
      const int l = out.labels[static_cast<std::size_t>(i)];
      sums.row(l) += rows.row(i);
      ++counts[static_cast<std::size_t>(l)];
    }
    for (int j = 0; j < c; ++j)
      if (counts[static_cast<std::size_t>(j)] > 0)
        out.centers.row(j) = sums.row(j) / static_cast<double>(counts[static_cast<std::size_t>(j)]);
  }
  return out;
}

/// Fraction of points whose cluster's majority ground-truth label matches their own.
inline double purity(const std::vector<int>& labels, const std::vector<int>& truth) {
  if (labels.size() != truth.size()) throw DimensionMismatch("purity: label vectors differ in length");
  if (labels.empty()) return 1.0;
  std::map<int, std::map<int, std::size_t>> table;
  for (std::size_t i = 0; i < labels.size(); ++i) ++table[labels[i]][truth[i]];
  std::size_t hit = 0;
  for (const auto& [cluster, counts] : table) {
    std::size_t top = 0;
    for (const auto& [t, cnt] : counts) top = std::max(top, cnt);
    hit += top;
  }
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

enum class EigSolver { nysbki_adaptive, dense };

struct ClusterOptions {
  EigSolver solver = EigSolver::nysbki_adaptive;
  /// Block size and residual tolerance for the adaptive solver.
  Index block_size = 10;
  double eps = 1e-4;
  std::uint64_t seed = 0;
  std::uint64_t kmeans_seed = 0;
  /// Scale each embedded row to unit length before k-means.
  bool row_normalize = false;
  /// Compare the eigenvectors with a dense eigendecomposition (n <= dense_cap only).
  bool dense_reference = false;
  KernelOptions kernel;
  NystromOptions nystrom;
};

struct ClusterResult {
  std::vector<int> labels;
  Matrix centers;
  Vector eigenvalues;
  std::vector<double> objective_history;
  int kmeans_iterations = 0;
  LedgerCounts matvecs;
  int multiplications = 0;
  std::optional<double> eigvec_subspace_error;
  std::optional<double> purity;
};

namespace detail {

inline std::pair<Vector, Matrix> dense_top_eigen(const Matrix& m, Index r) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const Index n = m.rows();
  Vector vals(r);
  Matrix vecs(n, r);
  for (Index j = 0; j < r; ++j) {
    vals(j) = es.eigenvalues()(n - 1 - j);
    vecs.col(j) = es.eigenvectors().col(n - 1 - j);
  }
  return {vals, vecs};
}

}  // namespace detail

/// Kernel, degree normalization, top-r eigenvectors V of D^{-1/2} A D^{-1/2},
/// rescaling V <- D^{-1/2} V, then k-means on the rows of V.
inline ClusterResult spectral_cluster(const PointSet& pts, double sigma, int r, int c,
                                      const ClusterOptions& opts = {},
                                      const std::vector<int>* truth = nullptr) {
  if (r < 1) throw std::invalid_argument("spectral_cluster: r must be at least 1");
  if (c < 1) throw std::invalid_argument("spectral_cluster: c must be at least 1");
  if (r > pts.n()) throw std::invalid_argument("spectral_cluster: r exceeds the number of points");
  NormalizedKernel nk = normalized_kernel(pts, sigma, opts.kernel);
  ClusterResult out;
  Matrix v;
  std::optional<Matrix> dense = nk.op.dense();
  if (opts.solver == EigSolver::dense) {
    if (!dense) throw std::invalid_argument("spectral_cluster: dense solver needs n <= dense_cap");
    auto [vals, vecs] = detail::dense_top_eigen(*dense, r);
    out.eigenvalues = vals;
    v = vecs;
  } else {
    RngState rng(opts.seed);
    const LedgerCounts start = nk.op.ledger();
    const Index k = std::min<Index>(opts.block_size, pts.n());
    EigApprox eig = nysbki_adaptive(nk.op, k, r, opts.eps, rng, opts.nystrom);
    out.matvecs = nk.op.ledger() - start;
    out.multiplications = eig.multiplications;
    const Index keep = std::min<Index>(r, eig.rank());
    v = eig.U.leftCols(keep);
    out.eigenvalues = eig.L.vector().head(keep);
  }
  if (opts.dense_reference) {
    if (!dense) throw std::invalid_argument("spectral_cluster: dense reference needs n <= dense_cap");
    auto [vals, ref] = detail::dense_top_eigen(*dense, r);
    out.eigvec_subspace_error = subspace_error_vectors(v, ref, std::min<Index>(r, v.cols()));
  }
  Matrix embed = nk.degrees.cwiseSqrt().cwiseInverse().asDiagonal() * v;
  if (opts.row_normalize) {
    for (Index i = 0; i < embed.rows(); ++i) {
      const double nrm = embed.row(i).norm();
      if (nrm > 0.0) embed.row(i) /= nrm;
    }
  }
  KMeansResult km = kmeans(embed, c, opts.kmeans_seed);
  out.labels = std::move(km.labels);
  out.centers = std::move(km.centers);
  out.objective_history = std::move(km.objective_history);
  out.kmeans_iterations = km.iterations;
  if (truth) out.purity = purity(out.labels, *truth);
  return out;
}

}  // namespace sketchpack
