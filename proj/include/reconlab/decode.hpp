#pragma once

// The two generic noisy-linear-system solvers. A LinearSystem encodes
// A*s ~ y - b for an unknown bit vector s; least_squares_decode inverts
// through the SVD pseudo-inverse, l1_decode minimizes the l1 residual via a
// primal-dual interior-point method on the equivalent linear program
//   minimize 1'u  s.t.  -u <= A*x - (y-b) <= u,
// and both round the real solution to bits at the 1/2 threshold.

#include <chrono>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "reconlab/randmat.hpp"

namespace reconlab {

struct LinearSystem {
  Matrix A;   // m x n design
  Vector b;   // length m offset
  Vector y;   // length m observed release
  // Optional row mask (1 = keep); empty means all rows active. Builders mark
  // failed estimator fits here so decoders drop them instead of aborting.
  std::vector<std::uint8_t> row_mask;
  std::vector<std::string> notes;  // builder warnings, carried for reports

  Eigen::Index m() const { return A.rows(); }
  Eigen::Index n() const { return A.cols(); }
};

// Solver failure carrying whatever partial state the caller may want to log.
struct DecodeFailure : std::runtime_error {
  DecodeFailure(const std::string& msg, int numerical_rank_ = -1,
                double objective_ = std::numeric_limits<double>::quiet_NaN(),
                Vector incumbent_ = Vector())
      : std::runtime_error(msg),
        numerical_rank(numerical_rank_),
        objective(objective_),
        incumbent(std::move(incumbent_)) {}
  int numerical_rank;
  double objective;
  Vector incumbent;
};

struct DecodeResult {
  Vector s_real;
  std::vector<std::uint8_t> s_bits;
  double sigma_min = 0.0;
  double residual_l2 = 0.0;
  double residual_l1 = 0.0;
  double wall_ms = 0.0;
  Eigen::Index rows_used = 0;
  Eigen::Index rows_dropped = 0;
  double rank_tolerance = 0.0;  // absolute threshold used for the rank check
  int lp_iterations = 0;        // l1 path only
  double lp_gap = std::numeric_limits<double>::quiet_NaN();
};

// Entry 1 iff v_i >= 1/2; ties go to 1.
inline std::vector<std::uint8_t> round_to_bits(const Vector& v) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    bits[static_cast<std::size_t>(i)] = v(i) >= 0.5 ? 1 : 0;
  return bits;
}

namespace detail {

struct ActiveSystem {
  Matrix A;
  Vector z;  // y - b over the active rows
  Eigen::Index dropped = 0;
};

inline ActiveSystem collapse_mask(const LinearSystem& sys) {
  if (sys.b.size() != sys.m() || sys.y.size() != sys.m())
    throw std::invalid_argument("linear system: b and y must have one entry per row");
  if (!sys.row_mask.empty() &&
      sys.row_mask.size() != static_cast<std::size_t>(sys.m()))
    throw std::invalid_argument("linear system: row mask size mismatch");
  ActiveSystem act;
  if (sys.row_mask.empty()) {
    act.A = sys.A;
    act.z = sys.y - sys.b;
    return act;
  }
  Eigen::Index kept = 0;
  for (auto v : sys.row_mask) kept += (v != 0);
  act.A.resize(kept, sys.n());
  act.z.resize(kept);
  Eigen::Index w = 0;
  for (Eigen::Index i = 0; i < sys.m(); ++i) {
    if (!sys.row_mask[static_cast<std::size_t>(i)]) continue;
    act.A.row(w) = sys.A.row(i);
    act.z(w) = sys.y(i) - sys.b(i);
    ++w;
  }
  act.dropped = sys.m() - kept;
  return act;
}

inline double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace detail

inline DecodeResult least_squares_decode(const LinearSystem& sys) {
  const double t0 = detail::now_ms();
  auto act = detail::collapse_mask(sys);
  if (act.A.rows() < act.A.cols())
    throw std::invalid_argument("least_squares_decode: need m >= n after masking");
  require_finite(act.A, "least_squares_decode");

  Eigen::BDCSVD<Matrix> svd(act.A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const Eigen::Index n = act.A.cols();
  const double sigma1 = sv(0);
  const double sigma_n = sv(n - 1);
  const double rank_tol = 1e-10 * sigma1;
  if (sigma_n <= rank_tol) {
    int rank = 0;
    for (Eigen::Index i = 0; i < n; ++i) rank += (sv(i) > rank_tol);
    throw DecodeFailure("least_squares_decode: rank deficient system, numerical rank " +
                            std::to_string(rank) + " of " + std::to_string(n),
                        rank);
  }

  // Pseudo-inverse applied exactly as constructed: project onto the left
  // singular basis, divide by the singular values, map back.
  const Vector coords = svd.matrixU().transpose() * act.z;
  const Vector scaled = coords.cwiseQuotient(sv.head(n));
  DecodeResult res;
  res.s_real = svd.matrixV() * scaled;
  res.s_bits = round_to_bits(res.s_real);
  res.sigma_min = sigma_n;
  res.rank_tolerance = rank_tol;
  const Vector residual = act.A * res.s_real - act.z;
  res.residual_l2 = residual.norm();
  res.residual_l1 = residual.lpNorm<1>();
  res.rows_used = act.A.rows();
  res.rows_dropped = act.dropped;
  res.wall_ms = detail::now_ms() - t0;
  return res;
}

struct L1Options {
  int max_iters = 200;
  double mu = 10.0;               // centering aggressiveness
  double line_search_beta = 0.5;  // backtracking factor
  // Success requires surrogate gap <= gap_certificate_factor * (1 + ||z||_1)
  // together with small dual-feasibility residuals.
  double gap_certificate_factor = 1e-7;
  double target_gap_factor = 1e-12;  // aim well below the certificate
  bool box_constrain = false;        // restrict the solve to [0,1]^n
};

inline DecodeResult l1_decode(const LinearSystem& sys, const L1Options& opt = {}) {
  const double t0 = detail::now_ms();
  auto act = detail::collapse_mask(sys);
  const Eigen::Index m = act.A.rows();
  const Eigen::Index n = act.A.cols();
  if (m < n)
    throw std::invalid_argument("l1_decode: need m >= n after masking");
  require_finite(act.A, "l1_decode");

  DecodeResult res;
  res.rows_used = m;
  res.rows_dropped = act.dropped;

  // Least-squares warm start; also supplies sigma_min for the report.
  Eigen::BDCSVD<Matrix> svd(act.A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  res.sigma_min = sv(n - 1);
  res.rank_tolerance = 1e-10 * sv(0);
  Vector x;
  if (sv(n - 1) > res.rank_tolerance) {
    x = svd.matrixV() *
        (svd.matrixU().transpose() * act.z).cwiseQuotient(sv.head(n)).eval();
  } else {
    x = Vector::Zero(n);  // rank-deficient warm start; the LP still runs
  }
  if (opt.box_constrain) x = x.cwiseMax(0.01).cwiseMin(0.99);

  const double z_l1 = act.z.lpNorm<1>();
  const double gap_target = opt.target_gap_factor * (1.0 + z_l1);
  const double gap_certificate = opt.gap_certificate_factor * (1.0 + z_l1);

  auto finish = [&](const Vector& xv, int iters, double gap) {
    res.s_real = xv;
    res.s_bits = round_to_bits(xv);
    const Vector residual = act.A * xv - act.z;
    res.residual_l2 = residual.norm();
    res.residual_l1 = residual.lpNorm<1>();
    res.lp_iterations = iters;
    res.lp_gap = gap;
    res.wall_ms = detail::now_ms() - t0;
    return res;
  };

  // Exact or near-exact fit at the warm start: objective ~ 0 is already a
  // global minimum certificate, and the barrier would degenerate.
  {
    const double obj0 = (act.A * x - act.z).lpNorm<1>();
    if (!opt.box_constrain && obj0 <= 1e-12 * (1.0 + z_l1))
      return finish(x, 0, 0.0);
  }

  // Interior-point state: slack u, multipliers for res-u<=0, -res-u<=0, and
  // (box mode) -x<=0, x-1<=0. All f* stay strictly negative throughout.
  Vector resid = act.A * x - act.z;
  Vector u = 0.95 * resid.cwiseAbs() +
             Vector::Constant(m, 0.10 * resid.cwiseAbs().maxCoeff() +
                                      1e-10 * (1.0 + z_l1));
  Vector f1 = resid - u;
  Vector f2 = -resid - u;
  Vector lam1 = -f1.cwiseInverse();
  Vector lam2 = -f2.cwiseInverse();
  Vector f3, f4, lam3, lam4;
  if (opt.box_constrain) {
    f3 = -x;
    f4 = x - Vector::Ones(n);
    lam3 = -f3.cwiseInverse();
    lam4 = -f4.cwiseInverse();
  }
  const double constraint_count =
      static_cast<double>(2 * m + (opt.box_constrain ? 2 * n : 0));

  auto surrogate_gap = [&]() {
    double g = -(f1.dot(lam1) + f2.dot(lam2));
    if (opt.box_constrain) g -= f3.dot(lam3) + f4.dot(lam4);
    return g;
  };
  auto dual_residual_norm = [&]() {
    Vector rd_x = act.A.transpose() * (lam1 - lam2);
    if (opt.box_constrain) rd_x += -lam3 + lam4;
    const Vector rd_u = Vector::Ones(m) - lam1 - lam2;
    return std::sqrt(rd_x.squaredNorm() + rd_u.squaredNorm());
  };

  double gap = surrogate_gap();
  int iter = 0;
  for (; iter < opt.max_iters; ++iter) {
    if (gap <= gap_target && dual_residual_norm() <= gap_target) break;
    const double tau = opt.mu * constraint_count / gap;

    const Vector inv_f1 = f1.cwiseInverse();
    const Vector inv_f2 = f2.cwiseInverse();
    const Vector sig1 = -(lam1.cwiseQuotient(f1) + lam2.cwiseQuotient(f2));
    const Vector sig2 = lam1.cwiseQuotient(f1) - lam2.cwiseQuotient(f2);
    const Vector sigx = sig1 - sig2.cwiseAbs2().cwiseQuotient(sig1);
    const Vector w2 =
        Vector::Ones(m) + (inv_f1 + inv_f2) / tau;  // = 1 + (1/tau)(1/f1+1/f2)

    // Reduced n x n system for dx.
    Matrix H = act.A.transpose() * sigx.asDiagonal() * act.A;
    Vector rhs =
        act.A.transpose() *
        ((inv_f1 - inv_f2) / tau + sig2.cwiseQuotient(sig1).cwiseProduct(w2));
    if (opt.box_constrain) {
      const Vector d_box = -(lam3.cwiseQuotient(f3) + lam4.cwiseQuotient(f4));
      H += Matrix(d_box.asDiagonal());
      rhs += (-f3.cwiseInverse() + f4.cwiseInverse()) / tau;
    }
    Eigen::LDLT<Matrix> ldlt(H);
    if (ldlt.info() != Eigen::Success) {
      if (gap <= gap_certificate) break;  // already certified, accept iterate
      throw DecodeFailure("l1_decode: Newton system factorization failed",
                          -1, (act.A * x - act.z).lpNorm<1>(), x);
    }
    const Vector dx = ldlt.solve(rhs);
    const Vector Adx = act.A * dx;
    const Vector du = -(w2 + sig2.cwiseProduct(Adx)).cwiseQuotient(sig1);
    const Vector dlam1 = lam1.cwiseQuotient(f1).cwiseProduct(-Adx + du) - lam1 -
                         inv_f1 / tau;
    const Vector dlam2 = lam2.cwiseQuotient(f2).cwiseProduct(Adx + du) - lam2 -
                         inv_f2 / tau;
    Vector dlam3, dlam4;
    if (opt.box_constrain) {
      dlam3 = lam3.cwiseQuotient(f3).cwiseProduct(dx) - lam3 -
              f3.cwiseInverse() / tau;
      dlam4 = -lam4.cwiseQuotient(f4).cwiseProduct(dx) - lam4 -
              f4.cwiseInverse() / tau;
    }

    // Largest step keeping multipliers positive.
    double step = 1.0;
    auto cap_positive = [&step](const Vector& lam, const Vector& dlam) {
      for (Eigen::Index i = 0; i < lam.size(); ++i)
        if (dlam(i) < 0.0) step = std::min(step, -lam(i) / dlam(i));
    };
    cap_positive(lam1, dlam1);
    cap_positive(lam2, dlam2);
    if (opt.box_constrain) {
      cap_positive(lam3, dlam3);
      cap_positive(lam4, dlam4);
    }
    step *= 0.99;

    // Backtrack until the slacks stay strictly feasible.
    auto feasible_at = [&](double s) {
      const Vector xs = x + s * dx;
      const Vector us = u + s * du;
      const Vector rs = resid + s * Adx;
      if (((rs - us).array() >= 0.0).any()) return false;
      if (((-rs - us).array() >= 0.0).any()) return false;
      if (opt.box_constrain &&
          ((xs.array() <= 0.0).any() || (xs.array() >= 1.0).any()))
        return false;
      return true;
    };
    int halvings = 0;
    while (!feasible_at(step) && halvings < 60) {
      step *= opt.line_search_beta;
      ++halvings;
    }
    if (halvings >= 60) {
      if (gap <= gap_certificate) break;  // stalled but already certified
      throw DecodeFailure("l1_decode: line search failed to stay interior",
                          -1, (act.A * x - act.z).lpNorm<1>(), x);
    }

    x += step * dx;
    u += step * du;
    resid += step * Adx;
    lam1 += step * dlam1;
    lam2 += step * dlam2;
    f1 = resid - u;
    f2 = -resid - u;
    if (opt.box_constrain) {
      lam3 += step * dlam3;
      lam4 += step * dlam4;
      f3 = -x;
      f4 = x - Vector::Ones(n);
    }
    gap = surrogate_gap();
  }

  if (gap > gap_certificate)
    throw DecodeFailure(
        "l1_decode: iteration cap reached before optimality certificate; "
        "surrogate gap " + std::to_string(gap),
        -1, (act.A * x - act.z).lpNorm<1>(), x);
  return finish(x, iter, gap);
}

// One CSV row per decode: n,m,sigma_min,res_l2,res_l1,hamming,seed,wall_ms.
// Timing is only emitted when `with_timing` is set; reproducible outputs
// write 0 there so identical runs stay byte-identical.
inline std::string decode_result_csv_row(const DecodeResult& res, double hamming,
                                         std::uint64_t seed, bool with_timing) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%lld,%.10g,%.10g,%.10g,%.10g,%llu,%.0f",
                static_cast<long long>(res.s_real.size()),
                static_cast<long long>(res.rows_used),
                res.sigma_min, res.residual_l2, res.residual_l1, hamming,
                static_cast<unsigned long long>(seed),
                with_timing ? res.wall_ms : 0.0);
  return buf;
}

}  // namespace reconlab
