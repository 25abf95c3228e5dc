#pragma once

// Flat key=value configuration files ('#' comment lines) and their validated
// experiment descriptions. Every field is checked here, before any
// computation starts; all violations raise ConfigError.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "reconlab/attack.hpp"

namespace reconlab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!s.empty() && s.back() == ',') out.push_back("");
  return out;
}
}  // namespace detail

class ConfigMap {
 public:
  static ConfigMap parse_text(const std::string& text,
                              const std::string& origin = "<config>") {
    ConfigMap m;
    m.origin_ = origin;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      const std::string t = detail::trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected key=value, got '" + t + "'");
      const std::string key = detail::trim(t.substr(0, eq));
      const std::string value = detail::trim(t.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      if (!m.kv_.emplace(key, value).second)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
    }
    return m;
  }

  static ConfigMap parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_text(ss.str(), path);
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  // CLI flag overrides land here before typed extraction begins.
  void set(const std::string& key, const std::string& value) {
    kv_[key] = value;
  }

  std::string get_string(const std::string& key, const std::string& dflt) {
    consumed_.insert(key);
    const auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }

  std::string require_string(const std::string& key) {
    consumed_.insert(key);
    const auto it = kv_.find(key);
    if (it == kv_.end())
      throw ConfigError(origin_ + ": missing required key '" + key + "'");
    return it->second;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) {
    const auto s = get_string(key, "");
    return s.empty() ? dflt : parse_u64(key, s);
  }

  long long get_int(const std::string& key, long long dflt) {
    const auto s = get_string(key, "");
    return s.empty() ? dflt : parse_int(key, s);
  }

  long long require_int(const std::string& key) {
    return parse_int(key, require_string(key));
  }

  double get_double(const std::string& key, double dflt) {
    const auto s = get_string(key, "");
    return s.empty() ? dflt : parse_double(key, s);
  }

  bool get_bool(const std::string& key, bool dflt) {
    const auto s = get_string(key, "");
    if (s.empty()) return dflt;
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw ConfigError(bad(key, s, "a boolean (0/1/true/false)"));
  }

  std::vector<long long> get_int_list(const std::string& key,
                                      std::vector<long long> dflt) {
    const auto s = get_string(key, "");
    if (s.empty()) return dflt;
    std::vector<long long> out;
    for (const auto& tok : detail::split_commas(s))
      out.push_back(parse_int(key, tok));
    return out;
  }

  std::vector<double> get_double_list(const std::string& key,
                                      std::vector<double> dflt) {
    const auto s = get_string(key, "");
    if (s.empty()) return dflt;
    std::vector<double> out;
    for (const auto& tok : detail::split_commas(s))
      out.push_back(parse_double(key, tok));
    return out;
  }

  // Unknown keys are config errors: a typo silently ignored would change the
  // experiment without a trace.
  void reject_unknown() const {
    for (const auto& [key, value] : kv_)
      if (!consumed_.count(key))
        throw ConfigError(origin_ + ": unknown key '" + key + "'");
  }

 private:
  std::string bad(const std::string& key, const std::string& s,
                  const char* what) const {
    return origin_ + ": key '" + key + "' = '" + s + "' is not " + what;
  }

  std::uint64_t parse_u64(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(bad(key, s, "an unsigned integer"));
    }
  }

  long long parse_int(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(bad(key, s, "an integer"));
    }
  }

  double parse_double(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      const auto v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(bad(key, s, "a real number"));
    }
  }

  std::map<std::string, std::string> kv_;
  std::set<std::string> consumed_;
  std::string origin_ = "<config>";
};

// ---------------------------------------------------------------------------
// Attack experiment configuration.
// ---------------------------------------------------------------------------
struct ExperimentConfig {
  MechanismSpec mechanism;
  int n = 0, d = 0, k = 1;
  NoiseKind noise_kind = NoiseKind::None;
  double beta = 0.0, gamma = 0.0, gross_magnitude = 0.0;
  DecoderKind decoder = DecoderKind::LeastSquares;
  int trials = 1;
  std::uint64_t master_seed = 0;
  std::string out;  // empty = stdout
  bool timing = false;
  std::uint64_t row_cap = 1'000'000;

  NoiseSpec noise_with_seed(std::uint64_t seed) const {
    switch (noise_kind) {
      case NoiseKind::None:
        return NoiseSpec::none();
      case NoiseKind::BoundedUniform:
        return NoiseSpec::bounded_uniform(beta, seed);
      case NoiseKind::GrossPlusBounded:
        return NoiseSpec::gross_plus_bounded(gamma, beta, gross_magnitude, seed);
    }
    return NoiseSpec::none();
  }

  // Validates n/d/k/beta/gamma ranges and the d^k row cap for the loaded
  // mechanism; shared between the scalar path and each sweep cell.
  void validate_cell(int cn, int cd, double cbeta, double cgamma) const {
    if (cn < 1) throw ConfigError("n must be >= 1");
    if (cd < 1) throw ConfigError("d must be >= 1");
    if (cbeta < 0.0) throw ConfigError("beta must be >= 0");
    if (cgamma < 0.0 || cgamma >= 1.0) throw ConfigError("gamma must lie in [0,1)");
    if (mechanism.kind == MechanismSpec::Kind::BooleanCount) {
      std::uint64_t rows = 1;
      for (int i = 0; i < k; ++i) {
        if (rows > row_cap / static_cast<std::uint64_t>(cd))
          throw ConfigError("d^k = " + std::to_string(cd) + "^" +
                            std::to_string(k) + " exceeds the row cap of " +
                            std::to_string(row_cap) + " rows");
        rows *= static_cast<std::uint64_t>(cd);
      }
    }
  }

  static ExperimentConfig from_map(ConfigMap& m) {
    ExperimentConfig cfg;
    const std::string mech = m.require_string("mechanism");
    const std::string f_text = m.get_string("f", "");
    const std::string loss = m.get_string("loss", "");
    if (mech == "boolean-count") {
      if (f_text.empty())
        throw ConfigError("mechanism boolean-count requires key 'f'");
      BooleanFunction f = [&] {
        try {
          return BooleanFunction::from_name_or_literal(f_text);
        } catch (const std::exception& e) {
          throw ConfigError(std::string("invalid f: ") + e.what());
        }
      }();
      if (f.arity() < 2)
        throw ConfigError("release function must have arity >= 2");
      cfg.mechanism = MechanismSpec::boolean_count(f);
    } else if (mech == "linreg") {
      cfg.mechanism = MechanismSpec::linreg();
    } else if (mech == "logreg") {
      cfg.mechanism = MechanismSpec::logreg();
    } else if (mech == "mest") {
      if (loss != "squared" && loss != "logistic")
        throw ConfigError("mechanism mest requires loss=squared or loss=logistic");
      cfg.mechanism = MechanismSpec::mest(loss);
    } else {
      throw ConfigError("unknown mechanism '" + mech +
                        "' (expected boolean-count, linreg, logreg, or mest)");
    }
    if (!f_text.empty() && mech != "boolean-count")
      throw ConfigError("key 'f' applies only to mechanism boolean-count");
    if (!loss.empty() && mech != "mest")
      throw ConfigError("key 'loss' applies only to mechanism mest");

    cfg.k = cfg.mechanism.release_arity();
    const long long k_given = m.get_int("k", cfg.k);
    if (k_given != cfg.k)
      throw ConfigError("k=" + std::to_string(k_given) +
                        " contradicts the mechanism (expected k=" +
                        std::to_string(cfg.k) + ")");
    if (cfg.k < 1) throw ConfigError("k must be >= 1");

    cfg.n = static_cast<int>(m.require_int("n"));
    cfg.d = static_cast<int>(m.require_int("d"));
    cfg.trials = static_cast<int>(m.get_int("trials", 1));
    if (cfg.trials < 1) throw ConfigError("trials must be >= 1");

    const std::string noise = m.get_string("noise", "none");
    cfg.beta = m.get_double("beta", 0.0);
    cfg.gamma = m.get_double("gamma", 0.0);
    cfg.gross_magnitude = m.get_double("gross_magnitude", 0.0);
    if (noise == "none") {
      cfg.noise_kind = NoiseKind::None;
    } else if (noise == "bounded-uniform") {
      cfg.noise_kind = NoiseKind::BoundedUniform;
    } else if (noise == "gross-plus-bounded") {
      cfg.noise_kind = NoiseKind::GrossPlusBounded;
      if (cfg.gross_magnitude < 0.0)
        throw ConfigError("gross_magnitude must be >= 0");
    } else {
      throw ConfigError("unknown noise '" + noise +
                        "' (expected none, bounded-uniform, or gross-plus-bounded)");
    }

    const std::string dec = m.get_string("decoder", "ls");
    try {
      cfg.decoder = parse_decoder(dec);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    if (cfg.mechanism.kind == MechanismSpec::Kind::MEst &&
        cfg.decoder == DecoderKind::L1)
      throw ConfigError("mechanism mest supports decoder=ls only");

    cfg.master_seed = m.get_u64("seed", 0);
    cfg.out = m.get_string("out", "");
    cfg.timing = m.get_bool("timing", false);
    const long long cap = m.get_int("row_cap", 1'000'000);
    if (cap < 1) throw ConfigError("row_cap must be >= 1");
    cfg.row_cap = static_cast<std::uint64_t>(cap);

    cfg.validate_cell(cfg.n, cfg.d, cfg.beta, cfg.gamma);
    return cfg;
  }
};

// ---------------------------------------------------------------------------
// Sweep configuration: selected keys accept comma-separated value grids.
// ---------------------------------------------------------------------------
struct SweepConfig {
  ExperimentConfig base;
  std::vector<int> n_grid, d_grid;
  std::vector<double> beta_grid, gamma_grid, gross_grid;

  struct Cell {
    std::size_t index = 0;
    int n = 0, d = 0;
    double beta = 0.0, gamma = 0.0, gross_magnitude = 0.0;
  };

  std::vector<Cell> cells() const {
    std::vector<Cell> out;
    std::size_t idx = 0;
    for (int n : n_grid)
      for (int d : d_grid)
        for (double beta : beta_grid)
          for (double gamma : gamma_grid)
            for (double gross : gross_grid) {
              Cell c;
              c.index = idx++;
              c.n = n;
              c.d = d;
              c.beta = beta;
              c.gamma = gamma;
              c.gross_magnitude = gross;
              out.push_back(c);
            }
    return out;
  }

  ExperimentConfig cell_config(const Cell& c) const {
    ExperimentConfig cfg = base;
    cfg.n = c.n;
    cfg.d = c.d;
    cfg.beta = c.beta;
    cfg.gamma = c.gamma;
    cfg.gross_magnitude = c.gross_magnitude;
    return cfg;
  }

  static SweepConfig from_map(ConfigMap& m) {
    SweepConfig sw;
    auto ints = [&](const char* key) {
      std::vector<int> out;
      for (long long v : m.get_int_list(key, {}))
        out.push_back(static_cast<int>(v));
      return out;
    };
    sw.n_grid = ints("n");
    sw.d_grid = ints("d");
    sw.beta_grid = m.get_double_list("beta", {});
    sw.gamma_grid = m.get_double_list("gamma", {});
    sw.gross_grid = m.get_double_list("gross_magnitude", {});
    if (sw.n_grid.empty()) throw ConfigError("missing required key 'n'");
    if (sw.d_grid.empty()) throw ConfigError("missing required key 'd'");
    if (sw.beta_grid.empty()) sw.beta_grid = {0.0};
    if (sw.gamma_grid.empty()) sw.gamma_grid = {0.0};
    if (sw.gross_grid.empty()) sw.gross_grid = {0.0};

    // Hand the first grid value of each key to the scalar parser, then
    // validate every remaining cell against the same rules.
    m.set("n", std::to_string(sw.n_grid.front()));
    m.set("d", std::to_string(sw.d_grid.front()));
    m.set("beta", std::to_string(sw.beta_grid.front()));
    m.set("gamma", std::to_string(sw.gamma_grid.front()));
    m.set("gross_magnitude", std::to_string(sw.gross_grid.front()));
    sw.base = ExperimentConfig::from_map(m);

    const std::size_t cell_count = sw.n_grid.size() * sw.d_grid.size() *
                                   sw.beta_grid.size() * sw.gamma_grid.size() *
                                   sw.gross_grid.size();
    if (cell_count > 10'000)
      throw ConfigError("grid too large: " + std::to_string(cell_count) +
                        " cells exceed the limit of 10000");
    for (const auto& c : sw.cells())
      sw.base.validate_cell(c.n, c.d, c.beta, c.gamma);
    const bool gross_noise = sw.base.noise_kind == NoiseKind::GrossPlusBounded;
    if (sw.beta_grid.size() > 1 && sw.base.noise_kind == NoiseKind::None)
      throw ConfigError("a beta grid requires bounded-uniform or gross-plus-bounded noise");
    if ((sw.gamma_grid.size() > 1 || sw.gross_grid.size() > 1) && !gross_noise)
      throw ConfigError("gamma/gross_magnitude grids require gross-plus-bounded noise");
    return sw;
  }
};

// ---------------------------------------------------------------------------
// Spectral probe configuration.
// ---------------------------------------------------------------------------
struct SpectralConfig {
  std::string family;            // identity|bernoulli01|rademacher|rowfunc|perturbed
  std::string h_spec = "-";      // f2:<fn> or g2:<fn> for rowfunc
  std::optional<SignedFunction> h;
  TauRandomSpec entries = TauRandomSpec::bernoulli01();
  std::vector<int> d_values;
  int n = 0;
  int k = 1;
  int seeds = 1;
  int probes = 16;
  double rank1_scale = 0.0;
  std::uint64_t master_seed = 0;
  std::string out;
  std::uint64_t row_cap = 1'000'000;

  static SpectralConfig from_map(ConfigMap& m) {
    SpectralConfig cfg;
    cfg.family = m.require_string("family");
    const bool known = cfg.family == "identity" || cfg.family == "bernoulli01" ||
                       cfg.family == "rademacher" || cfg.family == "rowfunc" ||
                       cfg.family == "perturbed";
    if (!known)
      throw ConfigError("unknown family '" + cfg.family +
                        "' (expected identity, bernoulli01, rademacher, rowfunc, "
                        "or perturbed)");

    for (long long v : m.get_int_list("d", {})) cfg.d_values.push_back(static_cast<int>(v));
    if (cfg.d_values.empty()) throw ConfigError("missing required key 'd'");
    cfg.n = static_cast<int>(m.require_int("n"));
    if (cfg.n < 1) throw ConfigError("n must be >= 1");
    for (int d : cfg.d_values)
      if (d < 1) throw ConfigError("every d must be >= 1");

    cfg.seeds = static_cast<int>(m.get_int("seeds", 1));
    if (cfg.seeds < 1) throw ConfigError("seeds must be >= 1");
    cfg.probes = static_cast<int>(m.get_int("probes", 16));
    if (cfg.probes < 1) throw ConfigError("probes must be >= 1");
    cfg.master_seed = m.get_u64("seed", 0);
    cfg.out = m.get_string("out", "");
    const long long cap = m.get_int("row_cap", 1'000'000);
    if (cap < 1) throw ConfigError("row_cap must be >= 1");
    cfg.row_cap = static_cast<std::uint64_t>(cap);

    const std::string h_text = m.get_string("h", "");
    const std::string entries_text = m.get_string("entries", "");
    cfg.rank1_scale = m.get_double("rank1_scale", 0.0);
    if (cfg.rank1_scale < 0.0) throw ConfigError("rank1_scale must be >= 0");
    if (cfg.rank1_scale != 0.0 && cfg.family != "perturbed")
      throw ConfigError("rank1_scale applies only to family perturbed");

    if (cfg.family == "rowfunc") {
      if (h_text.empty())
        throw ConfigError("family rowfunc requires key 'h' (f2:<fn> or g2:<fn>)");
      const auto colon = h_text.find(':');
      const std::string tag = h_text.substr(0, colon);
      if (colon == std::string::npos || (tag != "f2" && tag != "g2"))
        throw ConfigError("key 'h' must look like f2:<fn> or g2:<fn>");
      BooleanFunction f = [&] {
        try {
          return BooleanFunction::from_name_or_literal(h_text.substr(colon + 1));
        } catch (const std::exception& e) {
          throw ConfigError(std::string("invalid h: ") + e.what());
        }
      }();
      if (f.arity() < 2)
        throw ConfigError("h's release function must have arity >= 2");
      if (tag == "f2") {
        cfg.h = decompose_last_variable(f).f2;
        cfg.entries = TauRandomSpec::bernoulli01();
      } else {
        cfg.h = decompose_pm(to_pm_function(f)).g2;
        cfg.entries = TauRandomSpec::rademacher();
      }
      cfg.h_spec = h_text;
      cfg.k = f.arity() - 1;
      const long long k_given = m.get_int("k", cfg.k);
      if (k_given != cfg.k)
        throw ConfigError("k=" + std::to_string(k_given) +
                          " contradicts h (expected k=" + std::to_string(cfg.k) + ")");
      if (!entries_text.empty()) {
        cfg.entries = parse_entries(entries_text);
        const bool pm = cfg.h->domain() == CubeDomain::PlusMinus;
        const bool ok = pm ? cfg.entries.kind == EntryKind::Rademacher
                           : cfg.entries.kind == EntryKind::Bernoulli01;
        if (!ok)
          throw ConfigError("entries '" + entries_text +
                            "' do not lie on the domain of " + cfg.h_spec);
      }
      for (int d : cfg.d_values) {
        std::uint64_t rows = 1;
        for (int i = 0; i < cfg.k; ++i) {
          if (rows > cfg.row_cap / static_cast<std::uint64_t>(d))
            throw ConfigError("d^k exceeds the row cap of " +
                              std::to_string(cfg.row_cap) + " rows");
          rows *= static_cast<std::uint64_t>(d);
        }
        if (rows < static_cast<std::uint64_t>(cfg.n))
          throw ConfigError("d^k < n: the probe needs at least as many rows as columns");
      }
    } else {
      if (!h_text.empty())
        throw ConfigError("key 'h' applies only to family rowfunc");
      if (m.get_int("k", 1) != 1)
        throw ConfigError("k applies only to family rowfunc");
      if (!entries_text.empty())
        throw ConfigError("key 'entries' applies only to family rowfunc");
      for (int d : cfg.d_values) {
        if (cfg.family == "identity" && d != cfg.n)
          throw ConfigError("family identity requires d = n");
        if (d < cfg.n)
          throw ConfigError("d >= n required so the least singular value exists");
        if (cfg.family == "perturbed" && cfg.n > 1 && d < 2 * cfg.n)
          throw ConfigError("family perturbed requires d >= 2n");
      }
    }
    return cfg;
  }

 private:
  static TauRandomSpec parse_entries(const std::string& s) {
    try {
      return TauRandomSpec::parse(s);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
};

}  // namespace reconlab
