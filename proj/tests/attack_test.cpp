#include "reconlab/attack.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace rl = reconlab;

namespace {

std::vector<rl::BooleanFunction> release_function_zoo() {
  return {
      rl::BooleanFunction::and_fn(2),  rl::BooleanFunction::xor_fn(2),
      rl::BooleanFunction::or_fn(2),   rl::BooleanFunction::and_fn(3),
      rl::BooleanFunction::majority_fn(3),
      rl::BooleanFunction::from_packed(3, 0b01101001),  // parity, arity 3
      rl::BooleanFunction::from_packed(3, 0b11010010),
  };
}

bool notes_contain(const std::vector<std::string>& notes, const std::string& what) {
  for (const auto& n : notes)
    if (n.find(what) != std::string::npos) return true;
  return false;
}

rl::Vector counts_vector(const rl::Database& db, const rl::BooleanFunction& f) {
  const auto counts = rl::sigma_f(db, f);
  rl::Vector y(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i)
    y(static_cast<Eigen::Index>(i)) = static_cast<double>(counts[i]);
  return y;
}

}  // namespace

TEST(Decoder, NamesRoundTrip) {
  EXPECT_EQ(rl::decoder_name(rl::parse_decoder("ls")), "ls");
  EXPECT_EQ(rl::decoder_name(rl::parse_decoder("lp")), "lp");
  EXPECT_THROW(rl::parse_decoder("simplex"), std::invalid_argument);
}

TEST(Hamming, FractionBasics) {
  EXPECT_DOUBLE_EQ(rl::hamming_fraction({1, 0, 1, 0}, {1, 0, 1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(rl::hamming_fraction({1, 0, 1, 0}, {1, 1, 1, 0}), 0.25);
  EXPECT_DOUBLE_EQ(rl::hamming_fraction({}, {}), 0.0);
  EXPECT_THROW(rl::hamming_fraction({1}, {1, 0}), std::invalid_argument);
}

// Noiseless counts satisfy y = b + A s exactly: every entry is an integer
// combination of table values, so the residual must be identically zero.
TEST(BooleanSystem, ExactOnCleanCounts) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto db = rl::Database::random_binary(12, 4, seed);
    const rl::Vector s = db.secret_vector();
    for (const auto& f : release_function_zoo()) {
      const auto sys = rl::build_boolean_system(db.U, f, counts_vector(db, f));
      const double resid =
          (sys.y - sys.b - sys.A * s).cwiseAbs().maxCoeff();
      EXPECT_EQ(resid, 0.0) << "seed " << seed << " f " << f.to_string();
    }
  }
}

// The +-1 linearization of the same counts is dyadic-exact as well.
TEST(PmBooleanSystem, ExactOnCleanCounts) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto db = rl::Database::random_binary(12, 4, seed);
    const rl::Vector s = db.secret_vector();
    for (const auto& f : release_function_zoo()) {
      const auto sys = rl::build_pm_boolean_system(db.U, f, counts_vector(db, f));
      const double resid =
          (sys.y - sys.b - sys.A * s).cwiseAbs().maxCoeff();
      EXPECT_EQ(resid, 0.0) << "seed " << seed << " f " << f.to_string();
    }
  }
}

TEST(BooleanSystem, BothLinearizationsDecodeTheSameCleanBits) {
  const auto db = rl::Database::random_binary(10, 30, 5);
  const auto f = rl::BooleanFunction::and_fn(2);
  const auto y = counts_vector(db, f);
  const auto r01 = rl::least_squares_decode(rl::build_boolean_system(db.U, f, y));
  const auto rpm =
      rl::least_squares_decode(rl::build_pm_boolean_system(db.U, f, y));
  EXPECT_EQ(r01.s_bits, db.s);
  EXPECT_EQ(rpm.s_bits, db.s);
}

TEST(BooleanSystem, ValidatesInputs) {
  const auto db = rl::Database::random_binary(6, 3, 1);
  const auto f = rl::BooleanFunction::and_fn(2);
  EXPECT_THROW(rl::build_boolean_system(db.U, f, rl::Vector::Zero(4)),
               std::invalid_argument);  // 3^1 = 3 rows expected
  rl::Matrix bad = db.U;
  bad(0, 0) = 0.5;
  EXPECT_THROW(rl::build_boolean_system(bad, f, rl::Vector::Zero(3)),
               std::domain_error);
}

TEST(BooleanSystem, DegenerateFunctionGetsWarningNote) {
  // f(u, s) = u ignores the secret entirely: table 0,1,0,1 over (u, s).
  const rl::BooleanFunction f(2, {0, 1, 0, 1});
  EXPECT_FALSE(rl::is_nondegenerate_by_sign_sum(f));
  const auto db = rl::Database::random_binary(6, 4, 2);
  const auto sys = rl::build_boolean_system(db.U, f, counts_vector(db, f));
  EXPECT_TRUE(notes_contain(sys.notes, "degenerate"));
  EXPECT_EQ(sys.A.cwiseAbs().maxCoeff(), 0.0);  // secret part vanished
}

TEST(LinRegSystem, StationarityAndRecovery) {
  const auto db = rl::Database::random_binary(25, 50, 7);
  const auto bundle =
      rl::release_estimators(db, rl::EstimatorKind::Linear, rl::NoiseSpec::none());
  const auto sys = rl::build_linreg_system(db.U, bundle.y, bundle.missing);
  const rl::Vector resid = sys.y - sys.b - sys.A * db.secret_vector();
  EXPECT_LE(resid.cwiseAbs().maxCoeff(), 1e-9);
  const auto res = rl::least_squares_decode(sys);
  EXPECT_EQ(res.s_bits, db.s);
}

TEST(LogRegSystem, StationarityAndRecovery) {
  const auto db = rl::Database::random_binary(30, 60, 11);
  const auto bundle = rl::release_estimators(db, rl::EstimatorKind::Logistic,
                                             rl::NoiseSpec::none());
  const auto sys =
      rl::build_logreg_system(db.U, bundle.y, bundle.missing, bundle.separated);
  const rl::Vector s = db.secret_vector();
  std::size_t masked = 0;
  for (Eigen::Index i = 0; i < sys.A.rows(); ++i) {
    if (!sys.row_mask.empty() && !sys.row_mask[static_cast<std::size_t>(i)]) {
      ++masked;
      continue;
    }
    EXPECT_LE(std::abs(sys.y(i) - sys.A.row(i).dot(s)), 1e-8) << "row " << i;
  }
  const auto res = rl::least_squares_decode(sys);
  EXPECT_EQ(res.s_bits, db.s);
  EXPECT_EQ(res.rows_dropped, static_cast<Eigen::Index>(masked));
}

TEST(MEstSystem, SquaredLossIsScaledLinRegSystem) {
  const auto db = rl::Database::random_binary(20, 50, 13);
  const auto bundle =
      rl::release_estimators(db, rl::EstimatorKind::Linear, rl::NoiseSpec::none());
  const auto lin = rl::build_linreg_system(db.U, bundle.y, bundle.missing);
  const auto mest = rl::build_mest_system(db.U, bundle.y, rl::make_squared_loss(),
                                          bundle.missing);
  // ell2 = -2x makes the design matrix exactly -2 U^t.
  EXPECT_EQ((mest.A + 2.0 * lin.A).cwiseAbs().maxCoeff(), 0.0);
  const rl::Vector zl = lin.y - lin.b;
  const rl::Vector zm = mest.y - mest.b;
  EXPECT_LE((zm + 2.0 * zl).cwiseAbs().maxCoeff(), 1e-9);
  // The decoded bits agree bit for bit.
  const auto rl_bits = rl::least_squares_decode(lin).s_bits;
  const auto rm_bits = rl::least_squares_decode(mest).s_bits;
  EXPECT_EQ(rl_bits, rm_bits);
  EXPECT_EQ(rl_bits, db.s);
}

TEST(MEstSystem, LogisticLossStationarity) {
  const auto db = rl::Database::random_real(25, 60, 17);
  const auto bundle = rl::release_mestimators(db, rl::make_logistic_loss(),
                                              rl::NoiseSpec::none());
  const auto sys = rl::build_mest_system(db.U, bundle.y, rl::make_logistic_loss(),
                                         bundle.missing);
  const rl::Vector resid = sys.y - sys.b - sys.A * db.secret_vector();
  for (Eigen::Index i = 0; i < resid.size(); ++i)
    if (sys.row_mask.empty() || sys.row_mask[static_cast<std::size_t>(i)])
      EXPECT_LE(std::abs(resid(i)), 1e-7) << "row " << i;
  const auto res = rl::least_squares_decode(sys);
  EXPECT_EQ(res.s_bits, db.s);
}

TEST(EstimatorSystems, NonFiniteEstimatesAreMasked) {
  const auto db = rl::Database::random_binary(10, 6, 3);
  const auto bundle =
      rl::release_estimators(db, rl::EstimatorKind::Linear, rl::NoiseSpec::none());
  rl::Vector theta = bundle.y;
  theta(2) = std::numeric_limits<double>::quiet_NaN();
  const auto sys = rl::build_linreg_system(db.U, theta);
  ASSERT_EQ(sys.row_mask.size(), 6u);
  EXPECT_EQ(sys.row_mask[2], 0);
  EXPECT_EQ(sys.row_mask[1], 1);
  EXPECT_TRUE(notes_contain(sys.notes, "masked 1 rows"));
  EXPECT_EQ(sys.A.row(2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(EstimatorSystems, ValidateShapes) {
  const auto db = rl::Database::random_binary(8, 4, 9);
  EXPECT_THROW(rl::build_linreg_system(db.U, rl::Vector::Zero(3)),
               std::invalid_argument);
  EXPECT_THROW(
      rl::build_logreg_system(db.U, rl::Vector::Zero(4), {1, 0}),
      std::invalid_argument);
  EXPECT_THROW(rl::build_mest_system(db.U, rl::Vector::Zero(4),
                                     rl::make_squared_loss(), {1, 0, 0}),
               std::invalid_argument);
}

TEST(RunAttack, NoiselessBooleanRecoversEverything) {
  const auto db = rl::Database::random_binary(15, 40, 21);
  const auto mech = rl::MechanismSpec::boolean_count(rl::BooleanFunction::and_fn(2));
  for (auto decoder : {rl::DecoderKind::LeastSquares, rl::DecoderKind::L1}) {
    const auto report =
        rl::run_attack(db, mech, rl::NoiseSpec::none(), decoder, 99);
    EXPECT_EQ(report.hamming, 0.0);
    EXPECT_EQ(report.mechanism, "boolean-count");
    EXPECT_EQ(report.decoder, rl::decoder_name(decoder));
    EXPECT_EQ(report.n, 15);
    EXPECT_EQ(report.d, 40);
    EXPECT_EQ(report.k, 1);
    EXPECT_EQ(report.seed, 99u);
    EXPECT_GT(report.decode.sigma_min, 0.0);
    EXPECT_EQ(report.s_hat.size(), 15u);
    EXPECT_GE(report.wall_ms, 0.0);
  }
}

TEST(RunAttack, EstimatorMechanismsWithMildNoise) {
  const auto db = rl::Database::random_binary(15, 40, 22);
  const auto noise = rl::NoiseSpec::bounded_uniform(0.01, 5);
  for (const auto& mech :
       {rl::MechanismSpec::linreg(), rl::MechanismSpec::logreg(),
        rl::MechanismSpec::mest("squared")}) {
    const auto report =
        rl::run_attack(db, mech, noise, rl::DecoderKind::LeastSquares, 1);
    EXPECT_EQ(report.hamming, 0.0) << mech.name();
  }
}

TEST(RunAttack, GrossNoiseDefeatsLsButNotLp) {
  const auto db = rl::Database::random_binary(10, 60, 23);
  const auto noise = rl::NoiseSpec::gross_plus_bounded(0.1, 0.01, 1e6, 3);
  const auto mech = rl::MechanismSpec::linreg();
  const auto lp = rl::run_attack(db, mech, noise, rl::DecoderKind::L1, 0);
  EXPECT_EQ(lp.hamming, 0.0);
  const auto ls = rl::run_attack(db, mech, noise, rl::DecoderKind::LeastSquares, 0);
  EXPECT_GT(ls.hamming, 0.0);  // six entries at 1e6 swamp the quadratic fit
}

TEST(RunAttack, LpDecoderOnBooleanCountsRecovers) {
  const auto db = rl::Database::random_binary(12, 40, 31);
  const auto mech =
      rl::MechanismSpec::boolean_count(rl::BooleanFunction::majority_fn(3));
  const auto report =
      rl::run_attack(db, mech, rl::NoiseSpec::none(), rl::DecoderKind::L1, 0);
  EXPECT_EQ(report.mechanism, "boolean-count");
  EXPECT_EQ(report.k, 2);
  EXPECT_EQ(report.hamming, 0.0);
}

TEST(RunAttack, MestMechanismIsLeastSquaresOnly) {
  const auto db = rl::Database::random_binary(8, 20, 31);
  EXPECT_THROW(rl::run_attack(db, rl::MechanismSpec::mest("squared"),
                              rl::NoiseSpec::none(), rl::DecoderKind::L1),
               std::invalid_argument);
}

// The two boolean linearizations describe the same affine system; since both
// builders are exact in different arithmetic (integer tables vs dyadic
// +-domain polynomials), entrywise equality cross-checks them against each
// other.
TEST(BooleanSystem, BothLinearizationsBuildTheSameSystem) {
  for (std::uint64_t seed : {4u, 5u}) {
    const auto db = rl::Database::random_binary(9, 5, seed);
    for (const auto& f : release_function_zoo()) {
      const auto y = counts_vector(db, f);
      const auto a = rl::build_boolean_system(db.U, f, y);
      const auto b = rl::build_pm_boolean_system(db.U, f, y);
      EXPECT_EQ((a.A - b.A).cwiseAbs().maxCoeff(), 0.0) << f.to_string();
      EXPECT_EQ((a.b - b.b).cwiseAbs().maxCoeff(), 0.0) << f.to_string();
    }
  }
}

TEST(BooleanSystem, PinnedSmallForms) {
  const auto db = rl::Database::random_binary(7, 5, 40);
  // f(u, s) = AND(u, s): f0 = 0 and f2(u) = u, so A is U^t and b vanishes.
  const auto sys_and = rl::build_boolean_system(
      db.U, rl::BooleanFunction::and_fn(2),
      counts_vector(db, rl::BooleanFunction::and_fn(2)));
  EXPECT_EQ((sys_and.A - db.U.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sys_and.b.cwiseAbs().maxCoeff(), 0.0);
  // f(u, s) = XOR(u, s): f0(u) = u and f2(u) = 1 - 2u.
  const auto sys_xor = rl::build_boolean_system(
      db.U, rl::BooleanFunction::xor_fn(2),
      counts_vector(db, rl::BooleanFunction::xor_fn(2)));
  const rl::Matrix expectA =
      rl::Matrix::Ones(5, 7) - 2.0 * db.U.transpose();
  EXPECT_EQ((sys_xor.A - expectA).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((sys_xor.b - db.U.transpose().rowwise().sum()).cwiseAbs().maxCoeff(),
            0.0);
  // f(u, s) = s ignores u: the +-domain secret part is constant one.
  const rl::BooleanFunction ignore_u(2, {0, 0, 1, 1});
  const auto sys_s = rl::build_pm_boolean_system(
      db.U, ignore_u, counts_vector(db, ignore_u));
  EXPECT_EQ((sys_s.A - rl::Matrix::Ones(5, 7)).cwiseAbs().maxCoeff(), 0.0);
}

// Averaged recovery error cannot improve as the noise bound grows.
TEST(RunAttack, HammingIsMonotoneInNoiseWithinTolerance) {
  const auto mech = rl::MechanismSpec::boolean_count(rl::BooleanFunction::and_fn(2));
  const double betas[] = {0.0, 0.2, 0.8, 4.0};  // 0, 0.05, 0.2, 1 times sqrt(n)
  double prev_mean = -1.0;
  for (const double beta : betas) {
    double total = 0.0;
    for (std::uint64_t i = 0; i < 10; ++i) {
      const auto db = rl::Database::random_binary(16, 48, rl::derive_seed(500, i));
      const auto noise = beta == 0.0
                             ? rl::NoiseSpec::none()
                             : rl::NoiseSpec::bounded_uniform(beta, rl::derive_seed(501, i));
      total += rl::run_attack(db, mech, noise, rl::DecoderKind::LeastSquares, i)
                   .hamming;
    }
    const double mean = total / 10.0;
    EXPECT_GE(mean, prev_mean - 0.05) << "beta " << beta;
    prev_mean = mean;
  }
}

// Complementing the secret column leaves an XOR release attack equally hard.
TEST(RunAttack, XorReleaseIsSymmetricUnderComplement) {
  const auto mech = rl::MechanismSpec::boolean_count(rl::BooleanFunction::xor_fn(2));
  for (std::uint64_t i = 0; i < 5; ++i) {
    auto db = rl::Database::random_binary(12, 40, rl::derive_seed(600, i));
    auto flipped = db;
    for (auto& bit : flipped.s) bit ^= 1;
    const auto noise = rl::NoiseSpec::bounded_uniform(0.5, rl::derive_seed(601, i));
    const auto a = rl::run_attack(db, mech, noise, rl::DecoderKind::LeastSquares, i);
    const auto b =
        rl::run_attack(flipped, mech, noise, rl::DecoderKind::LeastSquares, i);
    EXPECT_EQ(a.hamming, b.hamming) << "seed " << i;
  }
}

TEST(RunAttack, ErrorsNameTheFailingStage) {
  // Boolean counts demand a binary database: fails inside the release stage.
  const auto real_db = rl::Database::random_real(8, 4, 2);
  const auto mech = rl::MechanismSpec::boolean_count(rl::BooleanFunction::and_fn(2));
  try {
    rl::run_attack(real_db, mech, rl::NoiseSpec::none(), rl::DecoderKind::LeastSquares);
    FAIL() << "expected failure";
  } catch (const std::runtime_error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("release:", 0), 0u) << e.what();
  }

  // Underdetermined system (d < n): fails inside the decode stage.
  const auto db = rl::Database::random_binary(10, 5, 2);
  try {
    rl::run_attack(db, mech, rl::NoiseSpec::none(), rl::DecoderKind::LeastSquares);
    FAIL() << "expected failure";
  } catch (const std::runtime_error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("decode:", 0), 0u) << e.what();
  }
}

TEST(RunAttack, DeterministicGivenSeeds) {
  const auto db = rl::Database::random_binary(12, 30, 77);
  const auto noise = rl::NoiseSpec::bounded_uniform(0.2, 9);
  const auto mech = rl::MechanismSpec::linreg();
  const auto a = rl::run_attack(db, mech, noise, rl::DecoderKind::LeastSquares, 4);
  const auto b = rl::run_attack(db, mech, noise, rl::DecoderKind::LeastSquares, 4);
  EXPECT_EQ(a.s_hat, b.s_hat);
  EXPECT_EQ(a.hamming, b.hamming);
  EXPECT_EQ(rl::attack_report_csv_row(a), rl::attack_report_csv_row(b));
}

TEST(Report, CsvRowPinned) {
  rl::AttackReport r;
  r.mechanism = "linreg";
  r.decoder = "ls";
  r.n = 4;
  r.d = 3;
  r.k = 1;
  r.noise = rl::NoiseSpec::bounded_uniform(0.5, 0);
  r.seed = 9;
  r.hamming = 0.25;
  r.decode.sigma_min = 2.0;
  r.wall_ms = 7.5;
  EXPECT_EQ(rl::attack_report_csv_header(),
            "mechanism,decoder,n,d,k,beta,gamma,seed,hamming_fraction,sigma_min,wall_ms");
  EXPECT_EQ(rl::attack_report_csv_row(r), "linreg,ls,4,3,1,0.5,0,9,0.25,2,0");
  EXPECT_EQ(rl::attack_report_csv_row(r, true),
            "linreg,ls,4,3,1,0.5,0,9,0.25,2,7.5");
}
