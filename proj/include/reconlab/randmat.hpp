#pragma once

// Random matrix construction and diagnostics: entry generators with bounded
// support, row-product / row-function matrices, least singular value and
// operator norm, an empirical probe of the l1-vs-l2 section ratio, and two
// exact polynomial identities that certify the row-function construction.

#include <Eigen/Dense>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "reconlab/boolfunc.hpp"
#include "reconlab/rng.hpp"

namespace reconlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Entry distributions. All are bounded by 1 in magnitude; the centered kinds
// declare a lower bound tau on their standard deviation. bernoulli01 has
// nonzero mean and is therefore NOT tau-random; callers that need the
// centered property must consult is_tau_random().
// ---------------------------------------------------------------------------
enum class EntryKind { Bernoulli01, Rademacher, UniformSymmetric };

struct TauRandomSpec {
  EntryKind kind = EntryKind::Rademacher;
  double width = 1.0;  // half-width, uniform-symmetric only; must be <= 1

  static TauRandomSpec bernoulli01() { return {EntryKind::Bernoulli01, 1.0}; }
  static TauRandomSpec rademacher() { return {EntryKind::Rademacher, 1.0}; }
  static TauRandomSpec uniform_symmetric(double w) {
    if (w <= 0.0 || w > 1.0)
      throw std::invalid_argument("uniform-symmetric width must be in (0,1]");
    return {EntryKind::UniformSymmetric, w};
  }

  bool is_tau_random() const { return kind != EntryKind::Bernoulli01; }

  double tau() const {
    switch (kind) {
      case EntryKind::Rademacher:
        return 1.0;
      case EntryKind::UniformSymmetric:
        return width / std::sqrt(3.0);
      case EntryKind::Bernoulli01:
        return 0.5;  // std dev; the mean is 1/2, so this is not a tau bound
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind) {
      case EntryKind::Bernoulli01:
        return "bernoulli01";
      case EntryKind::Rademacher:
        return "rademacher";
      case EntryKind::UniformSymmetric:
        return "uniform-symmetric(" + std::to_string(width) + ")";
    }
    return "?";
  }

  static TauRandomSpec parse(const std::string& text) {
    if (text == "bernoulli01") return bernoulli01();
    if (text == "rademacher") return rademacher();
    const std::string pfx = "uniform-symmetric(";
    if (text.rfind(pfx, 0) == 0 && text.back() == ')')
      return uniform_symmetric(
          std::stod(text.substr(pfx.size(), text.size() - pfx.size() - 1)));
    throw std::invalid_argument("unknown entry distribution: " + text);
  }
};

// d x n matrix with i.i.d. entries, filled row by row so the layout of the
// stream is part of the documented determinism contract.
inline Matrix gen_matrix(const TauRandomSpec& spec, int d, int n,
                         std::uint64_t seed) {
  if (d < 1 || n < 1) throw std::invalid_argument("gen_matrix: d,n >= 1");
  Matrix M(d, n);
  Xoshiro256ss rng(seed);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < n; ++j) {
      switch (spec.kind) {
        case EntryKind::Bernoulli01:
          M(i, j) = static_cast<double>(rng.bit());
          break;
        case EntryKind::Rademacher:
          M(i, j) = rng.rademacher();
          break;
        case EntryKind::UniformSymmetric:
          M(i, j) = rng.uniform_sym(spec.width);
          break;
      }
    }
  return M;
}

// ---------------------------------------------------------------------------
// Row-indexed tuple helpers. Row r of a k-fold construction over d rows per
// factor corresponds to the tuple (j1,...,jk), lexicographic with j1 slowest:
// r = j1*d^{k-1} + ... + jk (0-based). Repeated indices are included.
// ---------------------------------------------------------------------------
inline std::uint64_t checked_pow_rows(std::uint64_t d, int k,
                                      std::uint64_t hard_cap = 50'000'000ull) {
  std::uint64_t rows = 1;
  for (int i = 0; i < k; ++i) {
    if (rows > hard_cap / d)
      throw std::length_error("row-function matrix would exceed the row cap");
    rows *= d;
  }
  return rows;
}

inline void decode_tuple(std::uint64_t row, int d, int k, int* out) {
  for (int j = k - 1; j >= 0; --j) {
    out[j] = static_cast<int>(row % static_cast<std::uint64_t>(d));
    row /= static_cast<std::uint64_t>(d);
  }
}

// Entrywise products of one row from each factor, all d^k combinations.
inline Matrix row_product(const std::vector<Matrix>& factors) {
  if (factors.empty()) throw std::invalid_argument("row_product: no factors");
  const auto n = factors.front().cols();
  std::uint64_t rows = 1;
  for (const auto& M : factors) {
    if (M.cols() != n)
      throw std::invalid_argument("row_product: column counts differ");
    rows *= static_cast<std::uint64_t>(M.rows());
    if (rows > 50'000'000ull)
      throw std::length_error("row_product result too large");
  }
  Matrix out(static_cast<Eigen::Index>(rows), n);
  std::vector<std::uint64_t> radix(factors.size());
  {
    std::uint64_t t = 1;
    for (std::size_t j = factors.size(); j-- > 0;) {
      radix[j] = t;
      t *= static_cast<std::uint64_t>(factors[j].rows());
    }
  }
  for (std::uint64_t r = 0; r < rows; ++r) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Ones(n);
    for (std::size_t j = 0; j < factors.size(); ++j) {
      const auto jr = static_cast<Eigen::Index>(
          (r / radix[j]) % static_cast<std::uint64_t>(factors[j].rows()));
      acc = acc.cwiseProduct(factors[j].row(jr));
    }
    out.row(static_cast<Eigen::Index>(r)) = acc;
  }
  return out;
}

namespace detail {
inline int entry_to_bit(double v, CubeDomain dom) {
  if (dom == CubeDomain::ZeroOne) {
    if (v == 0.0) return 0;
    if (v == 1.0) return 1;
  } else {
    if (v == -1.0) return 0;
    if (v == 1.0) return 1;
  }
  throw std::domain_error("row_function_matrix: matrix entry outside the table domain");
}
}  // namespace detail

// Row r (tuple J, lexicographic, j1 slowest), column a:
// out(r, a) = h(T1(j1, a), ..., Tk(jk, a)). Table version: entries must lie
// on h's cube.
inline Matrix row_function_matrix(const SignedFunction& h,
                                  const std::vector<Matrix>& Ts) {
  const int k = h.arity();
  if (static_cast<int>(Ts.size()) != k)
    throw std::invalid_argument("row_function_matrix: need one factor per argument");
  const auto d = Ts.front().rows();
  const auto n = Ts.front().cols();
  for (const auto& T : Ts)
    if (T.rows() != d || T.cols() != n)
      throw std::invalid_argument("row_function_matrix: factor shapes differ");
  const std::uint64_t rows =
      checked_pow_rows(static_cast<std::uint64_t>(d), k);
  Matrix out(static_cast<Eigen::Index>(rows), n);
  std::vector<int> J(k);
  for (std::uint64_t r = 0; r < rows; ++r) {
    decode_tuple(r, static_cast<int>(d), k, J.data());
    for (Eigen::Index a = 0; a < n; ++a) {
      std::uint32_t idx = 0;
      for (int j = 0; j < k; ++j)
        idx |= static_cast<std::uint32_t>(
                   detail::entry_to_bit(Ts[j](J[j], a), h.domain()))
               << j;
      out(static_cast<Eigen::Index>(r), a) = h.eval_index(idx);
    }
  }
  return out;
}

// Polynomial version: arbitrary real entries allowed.
inline Matrix row_function_matrix(const MultilinearPoly& h,
                                  const std::vector<Matrix>& Ts) {
  const int k = h.arity();
  if (static_cast<int>(Ts.size()) != k)
    throw std::invalid_argument("row_function_matrix: need one factor per argument");
  const auto d = Ts.front().rows();
  const auto n = Ts.front().cols();
  for (const auto& T : Ts)
    if (T.rows() != d || T.cols() != n)
      throw std::invalid_argument("row_function_matrix: factor shapes differ");
  const std::uint64_t rows =
      checked_pow_rows(static_cast<std::uint64_t>(d), k);
  Matrix out(static_cast<Eigen::Index>(rows), n);
  std::vector<int> J(k);
  std::vector<double> vals(k);
  for (std::uint64_t r = 0; r < rows; ++r) {
    decode_tuple(r, static_cast<int>(d), k, J.data());
    for (Eigen::Index a = 0; a < n; ++a) {
      for (int j = 0; j < k; ++j) vals[j] = Ts[j](J[j], a);
      out(static_cast<Eigen::Index>(r), a) = h.eval(vals.data(), k);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral diagnostics.
// ---------------------------------------------------------------------------
inline void require_finite(const Matrix& M, const char* who) {
  if (!M.allFinite())
    throw std::invalid_argument(std::string(who) + ": non-finite entries");
}

inline double least_singular_value(const Matrix& M) {
  if (M.rows() < M.cols() || M.cols() < 1)
    throw std::invalid_argument("least_singular_value: need m >= n >= 1");
  require_finite(M, "least_singular_value");
  Eigen::BDCSVD<Matrix> svd(M);
  return svd.singularValues()(M.cols() - 1);
}

inline double operator_norm(const Matrix& M) {
  require_finite(M, "operator_norm");
  Eigen::BDCSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

struct EuclidProbeResult {
  double ratio = 1.0;     // min over probes of ||Mx||_1 / (sqrt(m) ||Mx||_2)
  int probes_used = 0;
  bool rank_deficient = false;  // some probe had ||Mx|| ~ 0
};

// Empirical UPPER bound on the Euclidean-section constant: random unit
// probes, the canonical basis, and the right singular vector of the least
// singular value. The true infimum over the sphere is not attempted.
inline EuclidProbeResult euclidean_ratio_probe(const Matrix& M, int num_probes,
                                               std::uint64_t seed) {
  if (num_probes < 1)
    throw std::invalid_argument("euclidean_ratio_probe: num_probes >= 1");
  require_finite(M, "euclidean_ratio_probe");
  const auto m = M.rows();
  const auto n = M.cols();
  const double sqrt_m = std::sqrt(static_cast<double>(m));
  const double zero_tol =
      1e-14 * std::max(1.0, M.norm());  // ||Mx|| below this counts as rank loss

  EuclidProbeResult res;
  res.ratio = 1.0;  // Cauchy-Schwarz upper bound, attained at m=1
  auto consider = [&](const Vector& x) {
    const double xn = x.norm();
    if (xn == 0.0) return;
    const Vector y = M * (x / xn);
    const double l2 = y.norm();
    ++res.probes_used;
    if (l2 <= zero_tol) {
      res.rank_deficient = true;
      res.ratio = 0.0;
      return;
    }
    res.ratio = std::min(res.ratio, y.lpNorm<1>() / (sqrt_m * l2));
  };

  Xoshiro256ss rng(seed);
  for (int t = 0; t < num_probes; ++t) {
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.gaussian();
    consider(x);
  }
  for (Eigen::Index j = 0; j < n; ++j) consider(Vector::Unit(n, j));
  if (m >= n) {
    Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinV);
    consider(svd.matrixV().col(n - 1));
  }
  return res;
}

struct SpectralReport {
  Eigen::Index m = 0, n = 0;
  double sigma_min = 0.0;
  double op_norm = 0.0;
  double euclid_ratio_min = 1.0;
  int probes_used = 0;
  bool rank_deficient = false;
};

inline SpectralReport spectral_report(const Matrix& M, int num_probes,
                                      std::uint64_t seed) {
  SpectralReport rep;
  rep.m = M.rows();
  rep.n = M.cols();
  Eigen::BDCSVD<Matrix> svd(M);
  rep.op_norm = svd.singularValues()(0);
  rep.sigma_min = svd.singularValues()(std::min(M.rows(), M.cols()) - 1);
  const auto probe = euclidean_ratio_probe(M, num_probes, seed);
  rep.euclid_ratio_min = probe.ratio;
  rep.probes_used = probe.probes_used;
  rep.rank_deficient = probe.rank_deficient;
  return rep;
}

// R + u 1^T with R rademacher d x n and u drawn from derive_seed(seed, 1),
// scaled to length rank1_scale. Scale 0 returns R itself, bit for bit.
inline Matrix perturbed_matrix(int d, int n, double rank1_scale,
                               std::uint64_t seed) {
  Matrix M = gen_matrix(TauRandomSpec::rademacher(), d, n, seed);
  if (rank1_scale > 0.0) {
    Xoshiro256ss rng(derive_seed(seed, 1));
    Vector u(d);
    for (int r = 0; r < d; ++r) u(r) = rng.gaussian();
    const double norm = u.norm();
    if (norm > 0.0) u *= rank1_scale / norm;
    M += u * Eigen::RowVectorXd::Ones(n);
  }
  return M;
}

// For each seed: sigma_n of perturbed_matrix(d, n, rank1_scale, seed_i),
// seed_i = derive_seed(master_seed, i).
inline std::vector<double> perturbed_sigma_probe(int d, int n,
                                                 double rank1_scale,
                                                 int num_seeds,
                                                 std::uint64_t master_seed) {
  if (d < 2 * n && n > 1)
    throw std::invalid_argument("perturbed_sigma_probe: need d >= 2n");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(num_seeds));
  for (int i = 0; i < num_seeds; ++i) {
    const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(i));
    out.push_back(least_singular_value(perturbed_matrix(d, n, rank1_scale, seed)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact identity checks certifying the row-function construction. Both are
// carried out in integers after multiplying through by the full-monomial
// coefficient, so "holds" means exact equality, not small residual.
// ---------------------------------------------------------------------------

// For h on {0,1}^k with nonzero full-monomial coefficient c:
//   c * (d1-d1')...(dk-dk') == sum_{I subseteq [k]} (-1)^{|I|} h(d(I)),
// where d(I) replaces d_j by d_j' for j in I. Checked at `trials` random
// point pairs (plus exhaustively when the pair space is small) and in the
// matrix form: the same relation entrywise between row_product of (Tj - Tj')
// and the signed sum of row-function matrices, for random 0/1 factors with
// d, n <= 4.
inline bool check_derivative_identity(const SignedFunction& h, int trials,
                                      std::uint64_t seed) {
  if (h.domain() != CubeDomain::ZeroOne)
    throw std::invalid_argument("check_derivative_identity expects a {0,1} domain function");
  const int k = h.arity();
  const auto poly = to_multilinear(h);
  const long long c_full = poly.full_numerator();
  if (c_full == 0)
    throw std::domain_error("c_h undefined: full-monomial coefficient is zero");

  const std::uint32_t cube = std::uint32_t{1} << k;
  auto point_identity = [&](std::uint32_t delta, std::uint32_t delta_p) {
    long long lhs = c_full;
    for (int j = 0; j < k; ++j) {
      const int dj = static_cast<int>((delta >> j) & 1u);
      const int djp = static_cast<int>((delta_p >> j) & 1u);
      lhs *= (dj - djp);
    }
    long long rhs = 0;
    for (std::uint32_t I = 0; I < cube; ++I) {
      // delta(I): bits of delta_p where I has a bit, else bits of delta.
      const std::uint32_t pt = (delta & ~I) | (delta_p & I);
      const long long term = h.eval_index(pt);
      rhs += (detail::popcount32(I) & 1) ? -term : term;
    }
    return lhs == rhs;
  };

  if (static_cast<std::uint64_t>(cube) * cube <= 4096)
    for (std::uint32_t a = 0; a < cube; ++a)
      for (std::uint32_t b = 0; b < cube; ++b)
        if (!point_identity(a, b)) return false;

  Xoshiro256ss rng(seed);
  for (int t = 0; t < trials; ++t)
    if (!point_identity(static_cast<std::uint32_t>(rng.below(cube)),
                        static_cast<std::uint32_t>(rng.below(cube))))
      return false;

  // Matrix form on small random 0/1 factor pairs.
  for (int t = 0; t < 8; ++t) {
    const int d = 2 + static_cast<int>(rng.below(3));  // 2..4
    const int n = 2 + static_cast<int>(rng.below(3));
    std::vector<Matrix> T(k), Tp(k), diff(k);
    for (int j = 0; j < k; ++j) {
      T[j] = gen_matrix(TauRandomSpec::bernoulli01(), d, n, rng.next());
      Tp[j] = gen_matrix(TauRandomSpec::bernoulli01(), d, n, rng.next());
      diff[j] = T[j] - Tp[j];
    }
    Matrix lhs = static_cast<double>(c_full) * row_product(diff);
    Matrix rhs = Matrix::Zero(lhs.rows(), lhs.cols());
    for (std::uint32_t I = 0; I < cube; ++I) {
      std::vector<Matrix> pick(k);
      for (int j = 0; j < k; ++j) pick[j] = (I & (1u << j)) ? Tp[j] : T[j];
      const double sign = (detail::popcount32(I) & 1) ? -1.0 : 1.0;
      rhs += sign * row_function_matrix(h, pick);
    }
    // All values are small integers: exact comparison is the right test.
    if ((lhs - rhs).cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

// For h on {-1,1}^k with nonzero full coefficient c = c_num / 2^k:
//   c_num * phi_1...phi_k ==
//     sum_{I proper subset [k]} (-1)^{k-|I|} 2^k P_I(phi) + 2^k h(phi),
// where P_I zeroes every variable outside I in h's multilinear form.
inline bool check_pm_identity(const SignedFunction& h, int trials,
                              std::uint64_t seed) {
  if (h.domain() != CubeDomain::PlusMinus)
    throw std::invalid_argument("check_pm_identity expects a +/- domain function");
  const int k = h.arity();
  const auto poly = to_multilinear(h);
  const long long c_num = poly.full_numerator();
  if (c_num == 0)
    throw std::domain_error("c_h undefined: full-monomial coefficient is zero");

  const std::uint32_t cube = std::uint32_t{1} << k;
  const std::uint32_t full = cube - 1;
  // Restrictions are polynomial evaluations; precompute all of them.
  std::vector<MultilinearPoly> restricted;
  restricted.reserve(cube);
  for (std::uint32_t I = 0; I < cube; ++I)
    restricted.push_back(poly.restricted_to(I));

  auto point_identity = [&](std::uint32_t phi_idx) {
    long long sign_prod = 1;  // phi_1 * ... * phi_k
    for (int j = 0; j < k; ++j)
      if (((phi_idx >> j) & 1u) == 0) sign_prod = -sign_prod;
    const long long lhs = c_num * sign_prod;
    long long rhs = 0;
    for (std::uint32_t I = 0; I < cube; ++I) {
      // eval_numerator returns 2^k * P_I(phi); the I = [k] term is h itself.
      const long long term = restricted[I].eval_numerator(phi_idx);
      const int par = (k - detail::popcount32(I)) & 1;
      rhs += par ? -term : term;
    }
    return lhs == rhs;
  };
  // Sanity: the restriction at I = [k] must reproduce h on the cube.
  for (std::uint32_t pt = 0; pt < cube; ++pt)
    if (restricted[full].eval_numerator(pt) != (1LL << k) * h.eval_index(pt))
      return false;

  for (std::uint32_t pt = 0; pt < cube; ++pt)
    if (!point_identity(pt)) return false;
  Xoshiro256ss rng(seed);
  for (int t = 0; t < trials; ++t)
    if (!point_identity(static_cast<std::uint32_t>(rng.below(cube))))
      return false;
  return true;
}

// ---------------------------------------------------------------------------
// Matrix CSV: first line "m,n", then m comma-separated rows. %.17g entries
// round-trip doubles exactly.
// ---------------------------------------------------------------------------
inline void write_matrix_csv(const Matrix& M, std::ostream& os) {
  os << M.rows() << "," << M.cols() << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", M(i, j));
      if (j) os << ",";
      os << buf;
    }
    os << "\n";
  }
}

inline void write_matrix_csv(const Matrix& M, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_matrix_csv(M, os);
}

inline Matrix read_matrix_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("matrix csv: empty input");
  Eigen::Index m = 0, n = 0;
  {
    std::istringstream hdr(line);
    char comma = 0;
    if (!(hdr >> m >> comma >> n) || comma != ',' || m < 1 || n < 1)
      throw std::runtime_error("matrix csv: bad header line: " + line);
  }
  Matrix M(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::getline(is, line))
      throw std::runtime_error("matrix csv: truncated after " +
                               std::to_string(i) + " rows");
    std::istringstream row(line);
    std::string cell;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::getline(row, cell, ','))
        throw std::runtime_error("matrix csv: short row " + std::to_string(i));
      M(i, j) = std::stod(cell);
    }
  }
  return M;
}

inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_matrix_csv(is);
}

}  // namespace reconlab
