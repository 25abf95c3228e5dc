#pragma once

// Simulated privacy mechanisms: exact statistics over a database with one
// secret bit column (boolean-function counts, per-column regression and
// M-estimators), plus configurable noise corruption. Everything downstream
// attacks what this module releases.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "reconlab/boolfunc.hpp"
#include "reconlab/randmat.hpp"

namespace reconlab {

struct Database {
  Matrix U;                     // n x d nonsensitive attributes
  std::vector<std::uint8_t> s;  // length n secret bits

  Eigen::Index n() const { return U.rows(); }
  Eigen::Index d() const { return U.cols(); }

  Vector secret_vector() const {
    Vector v(static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i)
      v(static_cast<Eigen::Index>(i)) = s[i];
    return v;
  }

  void validate(bool require_binary) const {
    if (static_cast<Eigen::Index>(s.size()) != U.rows())
      throw std::invalid_argument("database: secret column length != row count");
    if (require_binary)
      for (Eigen::Index i = 0; i < U.rows(); ++i)
        for (Eigen::Index j = 0; j < U.cols(); ++j)
          if (U(i, j) != 0.0 && U(i, j) != 1.0)
            throw std::invalid_argument("database: U must be binary for this mechanism");
  }

  static Database random_binary(int n, int d, std::uint64_t seed) {
    Database db;
    db.U = gen_matrix(TauRandomSpec::bernoulli01(), n, d, derive_seed(seed, 0));
    Xoshiro256ss rng(derive_seed(seed, 1));
    db.s = rng.random_bits(static_cast<std::size_t>(n));
    return db;
  }

  static Database random_real(int n, int d, std::uint64_t seed,
                              double width = 1.0) {
    Database db;
    db.U = gen_matrix(TauRandomSpec::uniform_symmetric(width), n, d,
                      derive_seed(seed, 0));
    Xoshiro256ss rng(derive_seed(seed, 1));
    db.s = rng.random_bits(static_cast<std::size_t>(n));
    return db;
  }
};

// ---------------------------------------------------------------------------
// Noise.
// ---------------------------------------------------------------------------
enum class NoiseKind { None, BoundedUniform, GrossPlusBounded };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::None;
  double beta = 0.0;             // bound on the well-behaved entries
  double gamma = 0.0;            // fraction of grossly corrupted entries
  double gross_magnitude = 0.0;  // magnitude of the gross entries
  std::uint64_t seed = 0;

  static NoiseSpec none() { return {}; }
  static NoiseSpec bounded_uniform(double beta, std::uint64_t seed) {
    if (beta < 0.0) throw std::invalid_argument("noise: beta must be >= 0");
    NoiseSpec s;
    s.kind = NoiseKind::BoundedUniform;
    s.beta = beta;
    s.seed = seed;
    return s;
  }
  static NoiseSpec gross_plus_bounded(double gamma, double beta, double magnitude,
                                      std::uint64_t seed) {
    if (beta < 0.0) throw std::invalid_argument("noise: beta must be >= 0");
    if (gamma < 0.0 || gamma >= 1.0)
      throw std::invalid_argument("noise: gamma must lie in [0,1)");
    NoiseSpec s;
    s.kind = NoiseKind::GrossPlusBounded;
    s.gamma = gamma;
    s.beta = beta;
    s.gross_magnitude = magnitude;
    s.seed = seed;
    return s;
  }

  std::string kind_name() const {
    switch (kind) {
      case NoiseKind::None:
        return "none";
      case NoiseKind::BoundedUniform:
        return "bounded-uniform";
      case NoiseKind::GrossPlusBounded:
        return "gross-plus-bounded";
    }
    return "?";
  }
};

struct NoisyVector {
  Vector values;
  Vector error;  // realized error, kept for a-posteriori bound audits
};

inline NoisyVector apply_noise(const Vector& y, const NoiseSpec& spec) {
  NoisyVector out;
  out.error = Vector::Zero(y.size());
  const auto m = y.size();
  switch (spec.kind) {
    case NoiseKind::None:
      break;
    case NoiseKind::BoundedUniform: {
      Xoshiro256ss rng(spec.seed);
      for (Eigen::Index i = 0; i < m; ++i)
        out.error(i) = rng.uniform_sym(spec.beta);
      break;
    }
    case NoiseKind::GrossPlusBounded: {
      Xoshiro256ss rng(spec.seed);
      const auto gross_count = static_cast<std::size_t>(
          spec.gamma * static_cast<double>(m));  // exactly floor(gamma*m)
      const auto gross_at = rng.sample_without_replacement(
          static_cast<std::size_t>(m), gross_count);
      std::vector<std::uint8_t> is_gross(static_cast<std::size_t>(m), 0);
      for (auto p : gross_at) is_gross[p] = 1;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (is_gross[static_cast<std::size_t>(i)])
          out.error(i) = rng.bit() ? spec.gross_magnitude : -spec.gross_magnitude;
        else
          out.error(i) = rng.uniform_sym(spec.beta);
      }
      break;
    }
  }
  out.values = y + out.error;
  return out;
}

// At least a (1 - gamma) fraction of entries with magnitude within beta
// (closed bound; the uniform sampler can touch the endpoint).
inline bool is_small_noise(const Vector& error, double gamma, double beta) {
  Eigen::Index within = 0;
  for (Eigen::Index i = 0; i < error.size(); ++i)
    within += (std::abs(error(i)) <= beta);
  return static_cast<double>(within) >=
         (1.0 - gamma) * static_cast<double>(error.size());
}

// ---------------------------------------------------------------------------
// Boolean-function count release: one exact integer count per index tuple.
// ---------------------------------------------------------------------------
inline std::vector<long long> sigma_f(const Database& db, const BooleanFunction& f,
                                      std::uint64_t row_cap = 1'000'000) {
  db.validate(/*require_binary=*/true);
  if (f.arity() < 2)
    throw std::invalid_argument("sigma_f: release function needs arity >= 2");
  const int k = f.arity() - 1;
  const auto d = db.d();
  const auto n = db.n();
  std::uint64_t rows = 1;
  for (int i = 0; i < k; ++i) {
    if (rows > row_cap / static_cast<std::uint64_t>(d))
      throw std::length_error("sigma_f: d^k exceeds the row cap of " +
                              std::to_string(row_cap));
    rows *= static_cast<std::uint64_t>(d);
  }
  std::vector<long long> out(rows, 0);
  std::vector<int> J(static_cast<std::size_t>(k));
  for (std::uint64_t r = 0; r < rows; ++r) {
    decode_tuple(r, static_cast<int>(d), k, J.data());
    long long acc = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::uint32_t idx = 0;
      for (int j = 0; j < k; ++j)
        idx |= static_cast<std::uint32_t>(db.U(i, J[j]) != 0.0) << j;
      idx |= static_cast<std::uint32_t>(db.s[static_cast<std::size_t>(i)]) << k;
      acc += f.eval_index(idx);
    }
    out[r] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses. gradient(theta, x, y) == ell0(theta, x) + ell2(theta, x) * y holds
// exactly for y in {0,1} by construction; that decomposition is what the
// M-estimator attack consumes.
// ---------------------------------------------------------------------------
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

struct LossFunction {
  std::string id;
  double gradient_lipschitz;  // in theta, per record, over |x| <= 1
  std::function<double(double, double, double)> value;  // (theta, x, y)
  std::function<double(double, double, double)> grad;   // d value / d theta
  std::function<double(double, double)> ell0;           // grad at y = 0
  std::function<double(double, double)> ell2;           // grad at y=1 minus y=0
};

inline LossFunction make_squared_loss() {
  LossFunction L;
  L.id = "squared";
  L.gradient_lipschitz = 2.0;  // |d grad / d theta| = 2 x^2 <= 2
  L.value = [](double th, double x, double y) {
    const double r = y - x * th;
    return r * r;
  };
  L.grad = [](double th, double x, double y) { return 2.0 * x * x * th - 2.0 * x * y; };
  L.ell0 = [](double th, double x) { return 2.0 * x * x * th; };
  L.ell2 = [](double, double x) { return -2.0 * x; };
  return L;
}

inline LossFunction make_logistic_loss() {
  LossFunction L;
  L.id = "logistic";
  L.gradient_lipschitz = 0.25;  // x^2 * max zeta' = x^2/4 <= 1/4
  L.value = [](double th, double x, double y) {
    const double t = th * x;
    // log(1 + e^t) - y t, computed without overflow for large |t|.
    const double softplus = t > 0.0 ? t + std::log1p(std::exp(-t))
                                    : std::log1p(std::exp(t));
    return softplus - y * t;
  };
  L.grad = [](double th, double x, double y) { return x * (sigmoid(th * x) - y); };
  L.ell0 = [](double th, double x) { return x * sigmoid(th * x); };
  L.ell2 = [](double, double x) { return -x; };
  return L;
}

inline LossFunction loss_by_id(const std::string& id) {
  if (id == "squared") return make_squared_loss();
  if (id == "logistic") return make_logistic_loss();
  throw std::invalid_argument("unknown loss id: " + id);
}

// Monte-Carlo estimate of Var_x[ell2(theta; x)] over a given entry
// distribution; mechanisms warn when it sits below a configurable floor.
inline double ell2_variance_estimate(const LossFunction& loss, double theta,
                                     const TauRandomSpec& spec, int samples,
                                     std::uint64_t seed) {
  Xoshiro256ss rng(seed);
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < samples; ++i) {
    double x = 0.0;
    switch (spec.kind) {
      case EntryKind::Bernoulli01:
        x = static_cast<double>(rng.bit());
        break;
      case EntryKind::Rademacher:
        x = rng.rademacher();
        break;
      case EntryKind::UniformSymmetric:
        x = rng.uniform_sym(spec.width);
        break;
    }
    const double v = loss.ell2(theta, x);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / samples;
  return sumsq / samples - mean * mean;
}

// ---------------------------------------------------------------------------
// Per-column estimator fits.
// ---------------------------------------------------------------------------
struct FitFailure : std::runtime_error {
  FitFailure(const std::string& msg, double last_theta_, double grad_norm_)
      : std::runtime_error(msg), last_theta(last_theta_), grad_norm(grad_norm_) {}
  double last_theta;
  double grad_norm;
};

inline double fit_linear_regression(const Vector& x,
                                    const std::vector<std::uint8_t>& s) {
  if (x.size() != static_cast<Eigen::Index>(s.size()))
    throw std::invalid_argument("fit_linear_regression: length mismatch");
  const double xx = x.squaredNorm();
  if (xx <= 0.0) throw FitFailure("degenerate regressor: zero column", 0.0, 0.0);
  double xs = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    xs += x(i) * s[static_cast<std::size_t>(i)];
  return xs / xx;
}

struct LogisticFit {
  double theta = 0.0;
  bool separated = false;  // |theta| clamped at the cap
  int iterations = 0;
  double grad_norm = 0.0;
};

inline LogisticFit fit_logistic_regression(const Vector& x,
                                           const std::vector<std::uint8_t>& s,
                                           int max_iter = 100, double tol = 1e-10,
                                           double theta_cap = 50.0) {
  if (x.size() != static_cast<Eigen::Index>(s.size()))
    throw std::invalid_argument("fit_logistic_regression: length mismatch");
  if (x.cwiseAbs().maxCoeff() == 0.0)
    throw FitFailure("degenerate regressor: zero column", 0.0, 0.0);

  // Log-likelihood ascent: gradient sum_i x_i (s_i - zeta(theta x_i)),
  // curvature -sum_i x_i^2 zeta', Newton with step halving from theta = 0.
  auto gradient = [&](double th) {
    double g = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      g += x(i) * (static_cast<double>(s[static_cast<std::size_t>(i)]) -
                   sigmoid(th * x(i)));
    return g;
  };

  // The 1-d MLE fails to exist exactly when the signs of x perfectly predict
  // the labels; the likelihood then increases all the way to +-infinity, so
  // report the cap with the separation flag instead of letting Newton stop
  // wherever the vanishing gradient crosses the tolerance.
  bool pos_dir = true, neg_dir = true;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool si = s[static_cast<std::size_t>(i)] != 0;
    if (x(i) > 0.0) (si ? neg_dir : pos_dir) = false;
    if (x(i) < 0.0) (si ? pos_dir : neg_dir) = false;
  }
  if (pos_dir || neg_dir) {
    LogisticFit fit;
    fit.theta = pos_dir ? theta_cap : -theta_cap;
    fit.separated = true;
    fit.grad_norm = std::abs(gradient(fit.theta));
    return fit;
  }
  LogisticFit fit;
  double g = gradient(0.0);
  for (int iter = 1; iter <= max_iter; ++iter) {
    fit.iterations = iter;
    if (std::abs(g) <= tol) {
      fit.grad_norm = std::abs(g);
      return fit;
    }
    double curvature = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double z = sigmoid(fit.theta * x(i));
      curvature += x(i) * x(i) * z * (1.0 - z);
    }
    // Separation drives zeta to 0/1 and the curvature to 0 at huge theta.
    const double step = curvature > 0.0 ? g / curvature
                                        : (g > 0.0 ? theta_cap : -theta_cap);
    double t = 1.0;
    bool moved = false;
    while (t >= 1e-14) {
      double cand = fit.theta + t * step;
      if (cand > theta_cap) cand = theta_cap;
      if (cand < -theta_cap) cand = -theta_cap;
      const double gc = gradient(cand);
      if (std::abs(gc) < std::abs(g) || cand != fit.theta + t * step) {
        fit.theta = cand;
        g = gc;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (std::abs(fit.theta) >= theta_cap && std::abs(g) > tol &&
        ((g > 0.0 && fit.theta > 0.0) || (g < 0.0 && fit.theta < 0.0))) {
      // Gradient keeps pushing outward at the cap: perfectly separated data.
      fit.separated = true;
      fit.grad_norm = std::abs(g);
      return fit;
    }
    if (!moved) break;
  }
  if (std::abs(g) <= tol) {
    fit.grad_norm = std::abs(g);
    return fit;
  }
  throw FitFailure("logistic fit did not converge: |gradient| = " +
                       std::to_string(std::abs(g)) + " at theta = " +
                       std::to_string(fit.theta),
                   fit.theta, std::abs(g));
}

struct MEstOptions {
  double tol = 1e-9;
  double theta_cap = 50.0;
  int max_iter = 200;
};

// Root of the summed loss gradient by bisection on [-cap, cap]; the losses
// used here have monotone gradients, so a sign change brackets the M-estimate.
inline double fit_mestimator_1d(const LossFunction& loss, const Vector& x,
                                const std::vector<std::uint8_t>& s,
                                const MEstOptions& opt = {}) {
  if (x.size() != static_cast<Eigen::Index>(s.size()))
    throw std::invalid_argument("fit_mestimator_1d: length mismatch");
  auto G = [&](double th) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      acc += loss.grad(th, x(i),
                       static_cast<double>(s[static_cast<std::size_t>(i)]));
    return acc;
  };
  double lo = -opt.theta_cap, hi = opt.theta_cap;
  double glo = G(lo), ghi = G(hi);
  if (std::abs(glo) <= opt.tol) return lo;
  if (std::abs(ghi) <= opt.tol) return hi;
  if (glo * ghi > 0.0)
    throw FitFailure("no stationary point in range [-" +
                         std::to_string(opt.theta_cap) + ", " +
                         std::to_string(opt.theta_cap) + "]",
                     0.0, std::min(std::abs(glo), std::abs(ghi)));
  double mid = 0.0, gmid = G(mid);
  for (int iter = 0; iter < opt.max_iter && std::abs(gmid) > opt.tol; ++iter) {
    if (glo * gmid <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      glo = gmid;
    }
    mid = 0.5 * (lo + hi);
    gmid = G(mid);
    if (hi - lo < 1e-15 * std::max(1.0, std::abs(mid))) break;
  }
  if (std::abs(gmid) > opt.tol)
    throw FitFailure("bisection stalled: |gradient| = " + std::to_string(gmid),
                     mid, std::abs(gmid));
  return mid;
}

// ---------------------------------------------------------------------------
// Release bundles.
// ---------------------------------------------------------------------------
struct ReleaseBundle {
  std::string mechanism;  // boolean-count | linreg | logreg | mest:<loss>
  int k = 1;
  Eigen::Index n = 0, d = 0;
  Vector y;                           // released (noisy) values
  Vector exact;                       // pre-noise values (diagnostics)
  Vector error;                       // realized noise
  std::vector<std::uint8_t> missing;   // failed fits, entry dropped downstream
  std::vector<std::uint8_t> separated; // logreg separation flags
  bool normalized = false;             // counts released as counts/n
  std::string f_or_loss;               // function literal or loss id
  NoiseSpec noise;
};

inline ReleaseBundle release_boolean_counts(const Database& db,
                                            const BooleanFunction& f,
                                            const NoiseSpec& noise,
                                            bool normalized = false,
                                            std::uint64_t row_cap = 1'000'000) {
  const auto counts = sigma_f(db, f, row_cap);
  ReleaseBundle out;
  out.mechanism = "boolean-count";
  out.k = f.arity() - 1;
  out.n = db.n();
  out.d = db.d();
  out.f_or_loss = f.to_string();
  out.noise = noise;
  out.normalized = normalized;
  out.exact.resize(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i)
    out.exact(static_cast<Eigen::Index>(i)) = static_cast<double>(counts[i]);
  if (normalized) out.exact /= static_cast<double>(db.n());
  auto noisy = apply_noise(out.exact, noise);
  out.y = std::move(noisy.values);
  out.error = std::move(noisy.error);
  out.missing.assign(counts.size(), 0);
  out.separated.assign(counts.size(), 0);
  return out;
}

enum class EstimatorKind { Linear, Logistic };

inline ReleaseBundle release_estimators(const Database& db, EstimatorKind kind,
                                        const NoiseSpec& noise) {
  db.validate(/*require_binary=*/false);
  const auto d = db.d();
  ReleaseBundle out;
  out.mechanism = kind == EstimatorKind::Linear ? "linreg" : "logreg";
  out.k = 1;
  out.n = db.n();
  out.d = d;
  out.f_or_loss = kind == EstimatorKind::Linear ? "squared" : "logistic";
  out.noise = noise;
  out.exact.resize(d);
  out.missing.assign(static_cast<std::size_t>(d), 0);
  out.separated.assign(static_cast<std::size_t>(d), 0);
  for (Eigen::Index i = 0; i < d; ++i) {
    try {
      if (kind == EstimatorKind::Linear) {
        out.exact(i) = fit_linear_regression(db.U.col(i), db.s);
      } else {
        const auto fit = fit_logistic_regression(db.U.col(i), db.s);
        out.exact(i) = fit.theta;
        out.separated[static_cast<std::size_t>(i)] = fit.separated;
      }
    } catch (const FitFailure&) {
      out.exact(i) = std::numeric_limits<double>::quiet_NaN();
      out.missing[static_cast<std::size_t>(i)] = 1;
    }
  }
  auto noisy = apply_noise(out.exact, noise);
  out.y = std::move(noisy.values);
  out.error = std::move(noisy.error);
  for (Eigen::Index i = 0; i < d; ++i)
    if (out.missing[static_cast<std::size_t>(i)]) {
      out.y(i) = std::numeric_limits<double>::quiet_NaN();
      out.error(i) = 0.0;
    }
  return out;
}

// Released M-estimators for a general loss (k = 1, one theta per column).
inline ReleaseBundle release_mestimators(const Database& db,
                                         const LossFunction& loss,
                                         const NoiseSpec& noise,
                                         const MEstOptions& opt = {}) {
  db.validate(/*require_binary=*/false);
  const auto d = db.d();
  ReleaseBundle out;
  out.mechanism = "mest:" + loss.id;
  out.k = 1;
  out.n = db.n();
  out.d = d;
  out.f_or_loss = loss.id;
  out.noise = noise;
  out.exact.resize(d);
  out.missing.assign(static_cast<std::size_t>(d), 0);
  out.separated.assign(static_cast<std::size_t>(d), 0);
  for (Eigen::Index i = 0; i < d; ++i) {
    try {
      out.exact(i) = fit_mestimator_1d(loss, db.U.col(i), db.s, opt);
    } catch (const FitFailure&) {
      out.exact(i) = std::numeric_limits<double>::quiet_NaN();
      out.missing[static_cast<std::size_t>(i)] = 1;
    }
  }
  auto noisy = apply_noise(out.exact, noise);
  out.y = std::move(noisy.values);
  out.error = std::move(noisy.error);
  for (Eigen::Index i = 0; i < d; ++i)
    if (out.missing[static_cast<std::size_t>(i)]) {
      out.y(i) = std::numeric_limits<double>::quiet_NaN();
      out.error(i) = 0.0;
    }
  return out;
}

// CSV serialization: "index,value" rows plus a sidecar "<path>.meta" of
// key=value lines describing provenance.
inline void write_release_csv(const ReleaseBundle& bundle,
                              const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "#schema=1\n";
  os << "index,value\n";
  char buf[40];
  for (Eigen::Index i = 0; i < bundle.y.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", bundle.y(i));
    os << i << "," << buf << "\n";
  }
  std::ofstream meta(path + ".meta");
  if (!meta) throw std::runtime_error("cannot open for writing: " + path + ".meta");
  meta << "mechanism=" << bundle.mechanism << "\n"
       << "k=" << bundle.k << "\n"
       << "n=" << bundle.n << "\n"
       << "d=" << bundle.d << "\n"
       << "f_or_loss=" << bundle.f_or_loss << "\n"
       << "normalized=" << (bundle.normalized ? 1 : 0) << "\n"
       << "noise=" << bundle.noise.kind_name() << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", bundle.noise.beta);
  meta << "beta=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", bundle.noise.gamma);
  meta << "gamma=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", bundle.noise.gross_magnitude);
  meta << "gross_magnitude=" << buf << "\n";
  meta << "seed=" << bundle.noise.seed << "\n"
       << "rng=" << Xoshiro256ss::name() << "\n";
}

}  // namespace reconlab
