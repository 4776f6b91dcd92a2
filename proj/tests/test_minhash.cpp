#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lshbloom/minhash.hpp"

using namespace lshbloom;

namespace {

struct SetPair {
  ShingleSet a, b;
};

// Random fingerprints: `shared` in both sets, `only_a` / `only_b` in one.
SetPair make_pair_with_overlap(std::size_t shared, std::size_t only_a, std::size_t only_b,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> a, b;
  for (std::size_t i = 0; i < shared; ++i) {
    const auto x = rng();
    a.push_back(x);
    b.push_back(x);
  }
  for (std::size_t i = 0; i < only_a; ++i) a.push_back(rng());
  for (std::size_t i = 0; i < only_b; ++i) b.push_back(rng());
  return {ShingleSet::from_fingerprints(a), ShingleSet::from_fingerprints(b)};
}

}  // namespace

TEST(MersenneArithmetic, ReduceAndMulAddMatchWideArithmetic) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100000; ++i) {
    const std::uint64_t x = rng();
    EXPECT_EQ(reduce61(x), x % kMersennePrime);
    const std::uint64_t a = rng() % kMersennePrime, y = rng() % kMersennePrime, b = rng() % kMersennePrime;
    const auto want = static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(a) * y + b) % kMersennePrime);
    ASSERT_EQ(mul_add_mod61(a, y, b), want);
  }
  EXPECT_EQ(reduce61(kMersennePrime), 0u);
  EXPECT_EQ(mul_add_mod61(kMersennePrime - 1, kMersennePrime - 1, kMersennePrime - 1),
            static_cast<std::uint64_t>((static_cast<unsigned __int128>(kMersennePrime - 1) *
                                            (kMersennePrime - 1) +
                                        (kMersennePrime - 1)) %
                                       kMersennePrime));
}

TEST(MakeFamily, DeterministicAndSeedSensitive) {
  EXPECT_EQ(make_family(42, 128), make_family(42, 128));
  const auto f42 = make_family(42, 128);
  const auto f43 = make_family(43, 128);
  bool differs = false;
  for (std::size_t i = 0; i < 128; ++i) differs |= !(f42[i] == f43[i]);
  EXPECT_TRUE(differs);
}

TEST(MakeFamily, SmallerFamilyIsPrefix) {
  const auto small = make_family(42, 64);
  const auto big = make_family(42, 128);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(small[i], big[i]);
}

TEST(MakeFamily, ParametersInRange) {
  const auto f = make_family(9, 4096);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_GE(f[i].a, 1u);
    EXPECT_LT(f[i].a, kMersennePrime);
    EXPECT_LT(f[i].b, kMersennePrime);
  }
}

TEST(MakeFamily, ZeroCountIsAnError) { EXPECT_THROW(make_family(1, 0), Error); }

TEST(MinHashSignature, IdenticalSetsGiveIdenticalSignatures) {
  const auto fam = make_family(5, 128);
  const auto s = shingle("to be or not to be that is the question");
  EXPECT_EQ(minhash_signature(s, fam), minhash_signature(s, fam));
  EXPECT_DOUBLE_EQ(estimate_jaccard(minhash_signature(s, fam), minhash_signature(s, fam)), 1.0);
}

TEST(MinHashSignature, SingletonIsTheHashValue) {
  const auto fam = make_family(77, 32);
  const std::uint64_t x = 0xdeadbeefcafef00dULL;
  const auto sig = minhash_signature(ShingleSet::from_fingerprints({x}), fam);
  for (std::size_t i = 0; i < 32; ++i) {
    const auto want = static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(fam[i].a) * (x % kMersennePrime) + fam[i].b) % kMersennePrime);
    EXPECT_EQ(sig.values[i], want);
  }
}

TEST(MinHashSignature, OrderInvariantAndInRange) {
  std::mt19937_64 rng(2);
  std::vector<std::uint64_t> fps(300);
  for (auto& f : fps) f = rng();
  const auto fam = make_family(3, 128);
  const auto base = minhash_signature(std::span<const std::uint64_t>(fps), fam);
  for (int t = 0; t < 20; ++t) {
    std::shuffle(fps.begin(), fps.end(), rng);
    EXPECT_EQ(minhash_signature(std::span<const std::uint64_t>(fps), fam), base);
  }
  for (auto v : base.values) EXPECT_LT(v, kMersennePrime);
  EXPECT_EQ(base.num_perm(), 128u);
}

TEST(MinHashSignature, EmptySetIsAnError) {
  try {
    minhash_signature(ShingleSet{}, make_family(1, 8));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDocument);
  }
}

TEST(EstimateJaccard, HalfMatchingPositions) {
  MinHashSignature a, b;
  for (std::uint64_t i = 0; i < 128; ++i) {
    a.values.push_back(i);
    b.values.push_back(i % 2 == 0 ? i : i + 1000);
  }
  EXPECT_DOUBLE_EQ(estimate_jaccard(a, b), 0.5);
}

TEST(EstimateJaccard, MismatchedLengthsOrFamiliesAreErrors) {
  const auto s = ShingleSet::from_fingerprints({1, 2, 3});
  const auto a = minhash_signature(s, make_family(1, 64));
  const auto b = minhash_signature(s, make_family(1, 128));
  const auto c = minhash_signature(s, make_family(2, 64));
  EXPECT_THROW(estimate_jaccard(a, b), Error);
  EXPECT_THROW(estimate_jaccard(a, c), Error);
}

TEST(EstimateJaccard, DisjointSetsEstimateNearZero) {
  const auto pair = make_pair_with_overlap(0, 2000, 2000, 17);
  const auto fam = make_family(4, 256);
  EXPECT_LT(estimate_jaccard(minhash_signature(pair.a, fam), minhash_signature(pair.b, fam)), 3.0 / 256);
}

TEST(EstimateJaccard, HalfOverlapWithinThreeSigma) {
  // |A ∩ B| = 100, |A ∪ B| = 200.
  const auto pair = make_pair_with_overlap(100, 50, 50, 23);
  ASSERT_DOUBLE_EQ(exact_jaccard(pair.a, pair.b), 0.5);
  const double tol = 3 * std::sqrt(0.5 * 0.5 / 256);  // 0.09375
  const auto fam = make_family(99, 256);
  EXPECT_NEAR(estimate_jaccard(minhash_signature(pair.a, fam), minhash_signature(pair.b, fam)), 0.5, tol);
}

TEST(EstimateJaccard, UnbiasedOverSeeds) {
  const auto pair = make_pair_with_overlap(300, 350, 350, 31);  // J = 0.3
  const double j = exact_jaccard(pair.a, pair.b);
  ASSERT_NEAR(j, 0.3, 1e-12);
  constexpr int kRuns = 100;
  constexpr std::size_t kPerm = 128;
  double mean = 0.0;
  for (int seed = 0; seed < kRuns; ++seed) {
    const auto fam = make_family(1000 + seed, kPerm);
    mean += estimate_jaccard(minhash_signature(pair.a, fam), minhash_signature(pair.b, fam));
  }
  mean /= kRuns;
  const double sigma = std::sqrt(j * (1 - j) / kPerm);
  EXPECT_NEAR(mean, j, 3 * sigma / std::sqrt(double(kRuns)));
}

TEST(EstimateJaccard, VarianceShrinksWithMorePermutations) {
  const auto pair = make_pair_with_overlap(500, 250, 250, 41);  // J = 0.5
  std::vector<double> variances;
  for (std::size_t perm : {32u, 128u, 512u}) {
    double sum = 0, sum2 = 0;
    constexpr int kRuns = 100;
    for (int seed = 0; seed < kRuns; ++seed) {
      const auto fam = make_family(5000 + seed, perm);
      const double e = estimate_jaccard(minhash_signature(pair.a, fam), minhash_signature(pair.b, fam));
      sum += e;
      sum2 += e * e;
    }
    variances.push_back(sum2 / kRuns - (sum / kRuns) * (sum / kRuns));
  }
  EXPECT_GT(variances[0], variances[1]);
  EXPECT_GT(variances[1], variances[2]);
}
