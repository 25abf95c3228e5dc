#pragma once

// Boolean function algebra: truth tables, the unique multilinear
// representation over {0,1}^p or {-1,1}^p, non-degeneracy tests, and the
// decompositions that turn a released statistic into a linear system in the
// secret bits.
//
// Encoding convention (fixed for portability of serialized functions): a
// point (d1,...,dp) maps to the table index with d1 as the LEAST significant
// bit. For the +/-1 cube the same index is used through d = (1+phi)/2, i.e.
// bit j set <=> phi_j = +1.
//
// All coefficients of {-1,0,1}-valued sources are dyadic rationals stored as
// exact integer numerators over a power-of-two denominator, so every identity
// in this module is testable with exact equality.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace reconlab {

inline constexpr int kMaxFunctionArity = 16;

namespace detail {
inline void check_arity(int p) {
  if (p < 1 || p > kMaxFunctionArity)
    throw std::invalid_argument("function arity must be in [1, 16], got " +
                                std::to_string(p));
}
inline int popcount32(std::uint32_t x) {
  int c = 0;
  while (x) {
    c += static_cast<int>(x & 1u);
    x >>= 1;
  }
  return c;
}
}  // namespace detail

enum class CubeDomain { ZeroOne, PlusMinus };

class BooleanFunction {
 public:
  BooleanFunction(int arity, std::vector<std::uint8_t> table)
      : arity_(arity), table_(std::move(table)) {
    detail::check_arity(arity_);
    if (table_.size() != (std::size_t{1} << arity_))
      throw std::invalid_argument("truth table must have 2^arity entries");
    for (auto v : table_)
      if (v > 1) throw std::invalid_argument("truth table entries must be 0/1");
  }

  int arity() const { return arity_; }
  std::size_t table_size() const { return table_.size(); }
  int eval_index(std::uint32_t idx) const { return table_[idx]; }
  int eval_bits(const std::vector<int>& bits) const {
    std::uint32_t idx = 0;
    for (std::size_t j = 0; j < bits.size(); ++j)
      idx |= static_cast<std::uint32_t>(bits[j] & 1) << j;
    return table_[idx];
  }

  // Build from the 2^p table bits packed into an integer (bit i = table[i]);
  // handy for exhaustive enumeration at small arity.
  static BooleanFunction from_packed(int p, std::uint64_t packed) {
    detail::check_arity(p);
    if (p > 6) throw std::invalid_argument("from_packed supports arity <= 6");
    std::vector<std::uint8_t> t(std::size_t{1} << p);
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<std::uint8_t>((packed >> i) & 1u);
    return BooleanFunction(p, std::move(t));
  }

  // Named constructors (readable CLI configs).
  static BooleanFunction constant_fn(int p, int value) {
    detail::check_arity(p);
    return BooleanFunction(
        p, std::vector<std::uint8_t>(std::size_t{1} << p,
                                     static_cast<std::uint8_t>(value & 1)));
  }
  static BooleanFunction and_fn(int p) {
    auto f = constant_fn(p, 0);
    f.table_.back() = 1;
    return f;
  }
  static BooleanFunction nand_fn(int p) {
    auto f = constant_fn(p, 1);
    f.table_.back() = 0;
    return f;
  }
  static BooleanFunction or_fn(int p) {
    auto f = constant_fn(p, 1);
    f.table_.front() = 0;
    return f;
  }
  static BooleanFunction xor_fn(int p) {
    return subset_parity(p, (std::uint32_t{1} << p) - 1);
  }
  // Parity of the variables selected by `mask` (bit j <=> variable j+1).
  static BooleanFunction subset_parity(int p, std::uint32_t mask) {
    detail::check_arity(p);
    std::vector<std::uint8_t> t(std::size_t{1} << p);
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<std::uint8_t>(
          detail::popcount32(static_cast<std::uint32_t>(i) & mask) & 1);
    return BooleanFunction(p, std::move(t));
  }
  // Strict majority: 1 iff more than half the inputs are 1 (ties, possible
  // only at even arity, go to 0).
  static BooleanFunction majority_fn(int p) {
    detail::check_arity(p);
    std::vector<std::uint8_t> t(std::size_t{1} << p);
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<std::uint8_t>(
          2 * detail::popcount32(static_cast<std::uint32_t>(i)) > p ? 1 : 0);
    return BooleanFunction(p, std::move(t));
  }

  // Text form "p=<arity>;table=<2^p chars of 0/1>", table in index order.
  std::string to_string() const {
    std::string s = "p=" + std::to_string(arity_) + ";table=";
    for (auto v : table_) s += static_cast<char>('0' + v);
    return s;
  }
  static BooleanFunction parse(const std::string& text) {
    const std::string pfx = "p=";
    auto semi = text.find(';');
    if (text.rfind(pfx, 0) != 0 || semi == std::string::npos)
      throw std::invalid_argument("bad function literal: " + text);
    int p = 0;
    try {
      p = std::stoi(text.substr(2, semi - 2));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad arity in function literal: " + text);
    }
    detail::check_arity(p);
    const std::string tpfx = "table=";
    if (text.compare(semi + 1, tpfx.size(), tpfx) != 0)
      throw std::invalid_argument("bad function literal: " + text);
    const std::string bits = text.substr(semi + 1 + tpfx.size());
    if (bits.size() != (std::size_t{1} << p))
      throw std::invalid_argument("table length must be 2^arity: " + text);
    std::vector<std::uint8_t> t(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] != '0' && bits[i] != '1')
        throw std::invalid_argument("table must be 0/1 characters: " + text);
      t[i] = static_cast<std::uint8_t>(bits[i] - '0');
    }
    return BooleanFunction(p, std::move(t));
  }

  // Accepts either a named family like "and3"/"or2"/"xor4"/"maj3"/"nand2"
  // (stem + arity digits) or a full "p=..;table=.." literal.
  static BooleanFunction from_name_or_literal(const std::string& text) {
    const std::pair<std::string, BooleanFunction (*)(int)> named[] = {
        {"nand", &nand_fn}, {"and", &and_fn}, {"or", &or_fn},
        {"xor", &xor_fn},   {"maj", &majority_fn}};
    for (const auto& [stem, ctor] : named) {
      if (text.size() > stem.size() && text.rfind(stem, 0) == 0) {
        bool all_digits = true;
        for (std::size_t i = stem.size(); i < text.size(); ++i)
          all_digits = all_digits && text[i] >= '0' && text[i] <= '9';
        if (all_digits) return ctor(std::stoi(text.substr(stem.size())));
      }
    }
    return parse(text);
  }

 private:
  int arity_;
  std::vector<std::uint8_t> table_;
};

// A {-1,0,1}-valued function on either cube; houses the f2/g2/g3 pieces of
// the decompositions below.
class SignedFunction {
 public:
  SignedFunction(int arity, std::vector<std::int8_t> table, CubeDomain domain)
      : arity_(arity), domain_(domain), table_(std::move(table)) {
    detail::check_arity(arity_);
    if (table_.size() != (std::size_t{1} << arity_))
      throw std::invalid_argument("table must have 2^arity entries");
    for (auto v : table_)
      if (v < -1 || v > 1)
        throw std::invalid_argument("signed table entries must be -1/0/1");
  }

  int arity() const { return arity_; }
  CubeDomain domain() const { return domain_; }
  int eval_index(std::uint32_t idx) const { return table_[idx]; }
  const std::vector<std::int8_t>& table() const { return table_; }

  // Text form mirrors BooleanFunction with chars '-','0','+'.
  std::string to_string() const {
    std::string s = "p=" + std::to_string(arity_) + ";domain=";
    s += (domain_ == CubeDomain::ZeroOne ? "01" : "pm");
    s += ";table=";
    for (auto v : table_) s += (v < 0 ? '-' : (v > 0 ? '+' : '0'));
    return s;
  }

  static SignedFunction from_boolean(const BooleanFunction& f) {
    std::vector<std::int8_t> t(f.table_size());
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<std::int8_t>(f.eval_index(static_cast<std::uint32_t>(i)));
    return SignedFunction(f.arity(), std::move(t), CubeDomain::ZeroOne);
  }

 private:
  int arity_;
  CubeDomain domain_;
  std::vector<std::int8_t> table_;
};

// The unique multilinear polynomial representing a function on a cube.
// coeffs are exact: coefficient(S) = numerator(S) / 2^denom_log2, with
// denom_log2 = 0 on {0,1}^p and = p on {-1,1}^p.
class MultilinearPoly {
 public:
  MultilinearPoly(int arity, CubeDomain domain, std::vector<long long> numerators,
                  int denom_log2)
      : arity_(arity),
        domain_(domain),
        num_(std::move(numerators)),
        denom_log2_(denom_log2) {
    detail::check_arity(arity_);
    if (num_.size() != (std::size_t{1} << arity_))
      throw std::invalid_argument("need one coefficient per subset of [p]");
  }

  int arity() const { return arity_; }
  CubeDomain domain() const { return domain_; }
  int denom_log2() const { return denom_log2_; }
  long long numerator(std::uint32_t subset) const { return num_[subset]; }
  long long full_numerator() const { return num_.back(); }
  double coeff(std::uint32_t subset) const {
    return static_cast<double>(num_[subset]) /
           static_cast<double>(1LL << denom_log2_);
  }

  int degree() const {
    int deg = 0;
    for (std::size_t s = 0; s < num_.size(); ++s)
      if (num_[s] != 0)
        deg = std::max(deg, detail::popcount32(static_cast<std::uint32_t>(s)));
    return deg;
  }

  // Exact evaluation at a cube point given as the table index of the point
  // (same LSB-first encoding). Returns the numerator over 2^denom_log2.
  long long eval_numerator(std::uint32_t point_idx) const {
    long long acc = 0;
    if (domain_ == CubeDomain::ZeroOne) {
      // Product over S is 1 iff S is a subset of the set bits of the point.
      const std::uint32_t p = point_idx;
      for (std::uint32_t s = p;; s = (s - 1) & p) {
        acc += num_[s];
        if (s == 0) break;
      }
    } else {
      for (std::size_t s = 0; s < num_.size(); ++s) {
        // Product of phi_j over j in S: -1 per member with bit clear.
        const std::uint32_t minus =
            static_cast<std::uint32_t>(s) & ~point_idx;
        acc += (detail::popcount32(minus) & 1) ? -num_[s] : num_[s];
      }
    }
    return acc;
  }

  // Real evaluation at arbitrary inputs (row-function matrices feed matrix
  // entries here).
  double eval(const double* vals, int count) const {
    if (count != arity_) throw std::invalid_argument("eval: wrong input count");
    double acc = 0.0;
    for (std::size_t s = 0; s < num_.size(); ++s) {
      if (num_[s] == 0) continue;
      double prod = static_cast<double>(num_[s]);
      for (int j = 0; j < arity_; ++j)
        if (s & (std::size_t{1} << j)) prod *= vals[j];
      acc += prod;
    }
    return acc / static_cast<double>(1LL << denom_log2_);
  }

  // Zero every coefficient whose subset reaches outside `keep_mask`; this is
  // the restriction that sets the other variables to 0 on the +/- cube.
  MultilinearPoly restricted_to(std::uint32_t keep_mask) const {
    std::vector<long long> out(num_.size(), 0);
    for (std::size_t s = 0; s < num_.size(); ++s)
      if ((static_cast<std::uint32_t>(s) & ~keep_mask) == 0) out[s] = num_[s];
    return MultilinearPoly(arity_, domain_, std::move(out), denom_log2_);
  }

  // The pure product monomial x1*...*xp (full coefficient 1).
  static MultilinearPoly product_monomial(int p, CubeDomain domain) {
    detail::check_arity(p);
    std::vector<long long> num(std::size_t{1} << p, 0);
    num.back() = 1;
    return MultilinearPoly(p, domain, std::move(num), 0);
  }

 private:
  int arity_;
  CubeDomain domain_;
  std::vector<long long> num_;
  int denom_log2_;
};

namespace detail {
// Moebius inversion over the subset lattice: in place, integer exact.
// coeff(S) = sum_{T subseteq S} (-1)^{|S|-|T|} f(T).
inline void moebius_transform(std::vector<long long>& a, int p) {
  for (int j = 0; j < p; ++j)
    for (std::size_t s = 0; s < a.size(); ++s)
      if (s & (std::size_t{1} << j)) a[s] -= a[s ^ (std::size_t{1} << j)];
}
// Character sums on the +/- cube: out[S] = sum_phi f(phi) prod_{j in S} phi_j,
// the numerators of the multilinear coefficients times 2^p.
inline void character_transform(std::vector<long long>& a, int p) {
  for (int j = 0; j < p; ++j)
    for (std::size_t s = 0; s < a.size(); ++s)
      if ((s & (std::size_t{1} << j)) == 0) {
        const std::size_t t = s | (std::size_t{1} << j);
        const long long u = a[s], v = a[t];
        a[s] = u + v;
        a[t] = v - u;
      }
}
}  // namespace detail

inline MultilinearPoly to_multilinear(const BooleanFunction& f) {
  std::vector<long long> a(f.table_size());
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] = f.eval_index(static_cast<std::uint32_t>(i));
  detail::moebius_transform(a, f.arity());
  return MultilinearPoly(f.arity(), CubeDomain::ZeroOne, std::move(a), 0);
}

inline MultilinearPoly to_multilinear(const SignedFunction& h) {
  std::vector<long long> a(h.table().begin(), h.table().end());
  if (h.domain() == CubeDomain::ZeroOne) {
    detail::moebius_transform(a, h.arity());
    return MultilinearPoly(h.arity(), CubeDomain::ZeroOne, std::move(a), 0);
  }
  detail::character_transform(a, h.arity());
  return MultilinearPoly(h.arity(), CubeDomain::PlusMinus, std::move(a),
                         h.arity());
}

// Degree test: full multilinear degree p <=> full-monomial coefficient != 0.
inline bool is_nondegenerate_by_degree(const BooleanFunction& f) {
  return to_multilinear(f).full_numerator() != 0;
}

// Signed-sum test: sum over the cube of (-1)^{f(d) - sum_j d_j}, nonzero iff
// non-degenerate. Exposed raw for tests.
inline long long nondegeneracy_sign_sum(const BooleanFunction& f) {
  long long acc = 0;
  for (std::size_t i = 0; i < f.table_size(); ++i) {
    const int par =
        (f.eval_index(static_cast<std::uint32_t>(i)) +
         detail::popcount32(static_cast<std::uint32_t>(i))) &
        1;
    acc += par ? -1 : 1;
  }
  return acc;
}

inline bool is_nondegenerate_by_sign_sum(const BooleanFunction& f) {
  return nondegeneracy_sign_sum(f) != 0;
}

// Exhaustive count at small arity (p <= 4; 2^16 tables).
inline std::uint64_t count_nondegenerate(int p) {
  if (p < 1 || p > 4)
    throw std::invalid_argument("count_nondegenerate supports arity 1..4");
  const std::uint64_t total = std::uint64_t{1} << (std::size_t{1} << p);
  std::uint64_t count = 0;
  for (std::uint64_t packed = 0; packed < total; ++packed)
    if (is_nondegenerate_by_degree(BooleanFunction::from_packed(p, packed)))
      ++count;
  return count;
}

// f(d, d_{k+1}) = f0(d) + f2(d) * d_{k+1} with f0 = f(.,0), f1 = f(.,1),
// f2 = f1 - f0; the linearization in the secret bit.
struct LastVarDecomposition {
  BooleanFunction f0;
  BooleanFunction f1;
  SignedFunction f2;
};

inline LastVarDecomposition decompose_last_variable(const BooleanFunction& f) {
  if (f.arity() < 2)
    throw std::invalid_argument("decompose_last_variable needs arity >= 2");
  const int k = f.arity() - 1;
  const std::size_t half = std::size_t{1} << k;
  std::vector<std::uint8_t> t0(half), t1(half);
  std::vector<std::int8_t> t2(half);
  for (std::size_t i = 0; i < half; ++i) {
    t0[i] = static_cast<std::uint8_t>(f.eval_index(static_cast<std::uint32_t>(i)));
    t1[i] = static_cast<std::uint8_t>(
        f.eval_index(static_cast<std::uint32_t>(i | half)));
    t2[i] = static_cast<std::int8_t>(t1[i] - t0[i]);
  }
  return LastVarDecomposition{BooleanFunction(k, std::move(t0)),
                              BooleanFunction(k, std::move(t1)),
                              SignedFunction(k, std::move(t2), CubeDomain::ZeroOne)};
}

// Affine relabeling onto the +/- cube: g(phi) = 2 f((1+phi_1)/2, ...) - 1.
// Same table index through bit j set <=> phi_j = +1, so only values change.
inline SignedFunction to_pm_function(const BooleanFunction& f) {
  std::vector<std::int8_t> t(f.table_size());
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<std::int8_t>(
        2 * f.eval_index(static_cast<std::uint32_t>(i)) - 1);
  return SignedFunction(f.arity(), std::move(t), CubeDomain::PlusMinus);
}

// g(phi, phi_{k+1}) = g3(phi) + g2(phi) * phi_{k+1}, with
// g2 = (g1 - g_{-1})/2 and g3 = (g1 + g_{-1})/2 landing in {-1,0,1}.
struct PmDecomposition {
  SignedFunction g2;
  SignedFunction g3;
};

inline PmDecomposition decompose_pm(const SignedFunction& g) {
  if (g.domain() != CubeDomain::PlusMinus)
    throw std::invalid_argument("decompose_pm expects a +/- domain function");
  if (g.arity() < 2)
    throw std::invalid_argument("decompose_pm needs arity >= 2");
  for (auto v : g.table())
    if (v == 0)
      throw std::invalid_argument("decompose_pm expects +/-1 values only");
  const int k = g.arity() - 1;
  const std::size_t half = std::size_t{1} << k;
  std::vector<std::int8_t> t2(half), t3(half);
  for (std::size_t i = 0; i < half; ++i) {
    const int gm = g.eval_index(static_cast<std::uint32_t>(i));         // phi_{k+1} = -1
    const int gp = g.eval_index(static_cast<std::uint32_t>(i | half));  // phi_{k+1} = +1
    t2[i] = static_cast<std::int8_t>((gp - gm) / 2);
    t3[i] = static_cast<std::int8_t>((gp + gm) / 2);
  }
  return PmDecomposition{SignedFunction(k, std::move(t2), CubeDomain::PlusMinus),
                         SignedFunction(k, std::move(t3), CubeDomain::PlusMinus)};
}

}  // namespace reconlab
