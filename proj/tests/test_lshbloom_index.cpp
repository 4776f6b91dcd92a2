#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "lshbloom/lshbloom_index.hpp"
#include "oracles.hpp"

using namespace lshbloom;

namespace {

BandHashes random_bands(std::mt19937_64& rng, std::size_t b) {
  BandHashes h(b);
  for (auto& x : h) x = rng() % kMersennePrime;
  return h;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / (name + "-" + std::to_string(std::random_device{}()));
}

}  // namespace

TEST(EffectiveFp, Examples) {
  // Binomial expansion: 9p - 36p^2 + 84p^3 - 126p^4 + ...
  const double p = 1e-5;
  EXPECT_NEAR(effective_fp(p, 9), 9 * p - 36 * p * p + 84 * p * p * p - 126 * p * p * p * p, 1e-20);
  EXPECT_NEAR(effective_fp(p, 9), 8.99964000839988e-5, 1e-17);
  EXPECT_DOUBLE_EQ(per_filter_fp(1e-5, 1), 1e-5);
  for (double pe : {1e-15, 1e-10, 1e-5, 1e-2}) {
    for (std::size_t b : {1u, 9u, 20u}) {
      EXPECT_NEAR(effective_fp(per_filter_fp(pe, b), b), pe, pe * 1e-9);
    }
  }
}

TEST(CapacityPlan, PublishedTableValues) {
  EXPECT_NEAR(plan(5000000000ull, 1e-5, 0.8, 128).total_gb(), 160.51, 160.51 * 1e-3);
  EXPECT_NEAR(plan(5000000000ull, 1e-10, 0.8, 128).total_gb(), 295.30, 295.30 * 1e-3);
  EXPECT_NEAR(plan(5000000000ull, 1e-15, 0.8, 128).total_gb(), 425.35, 425.35 * 2e-2);
  EXPECT_NEAR(plan(100000000000ull, 1e-5, 0.8, 128).total_tb(), 3.21, 3.21 * 1e-3);
  EXPECT_NEAR(plan(10000000000ull, 1e-10, 0.8, 128).total_gb(), 590.0, 590.0 * 5e-3);
}

TEST(CapacityPlan, FieldsAreConsistent) {
  const auto c = plan(1000000, 1e-5, 0.8, 128);
  EXPECT_EQ(c.bands, 9u);
  EXPECT_EQ(c.rows, 13u);
  const auto size = bloom_size(1000000, c.per_filter_p);
  EXPECT_EQ(c.per_filter_bits, size.bits);
  EXPECT_EQ(c.per_filter_probes, size.probes);
  EXPECT_EQ(c.total_bytes, 9 * ((size.bits + 7) / 8));
}

TEST(CapacityPlan, LinearInDocuments) {
  const auto a = plan(1000000, 1e-5, 0.8, 128);
  const auto b = plan(2000000, 1e-5, 0.8, 128);
  EXPECT_NEAR(double(b.total_bytes), 2.0 * double(a.total_bytes), 9.0 * 2);
}

TEST(LshBloomIndex, OneFilterPerBand) {
  const auto p = LshParams::optimal(0.8, 128);
  LshBloomIndex idx(p, 1000, 1e-5);
  EXPECT_EQ(idx.filters().size(), 9u);
  EXPECT_NEAR(idx.per_filter_p(), per_filter_fp(1e-5, 9), 1e-20);
  LshBloomIndex one(LshParams{0.5, 4, 1, 4, 1, 2}, 1000, 1e-5);
  EXPECT_DOUBLE_EQ(one.per_filter_p(), 1e-5);
}

TEST(LshBloomIndex, EmptyIndexReportsUnique) {
  LshBloomIndex idx(LshParams::optimal(0.8, 128), 100, 1e-5);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_FALSE(idx.query(random_bands(rng, 9)).duplicate());
}

TEST(LshBloomIndex, InsertedDocumentCollidesInEveryBand) {
  LshBloomIndex idx(LshParams::optimal(0.8, 128), 100, 1e-5);
  std::mt19937_64 rng(2);
  const auto h = random_bands(rng, 9);
  idx.insert(h);
  EXPECT_EQ(idx.doc_count(), 1u);
  EXPECT_EQ(idx.query(h).bands.size(), 9u);
  idx.insert(h);
  EXPECT_EQ(idx.doc_count(), 2u);
  EXPECT_EQ(idx.query(h).bands, (std::vector<std::uint32_t>{0, 1, 2, 3, 4, 5, 6, 7, 8}));
}

TEST(LshBloomIndex, QueryThenInsertIsFirstSeenWins) {
  const auto p = LshParams::optimal(0.8, 128);
  LshBloomIndex idx(p, 100, 1e-5);
  const auto sig = minhash_signature(shingle("a document about bloom filters and hashing"),
                                     make_family(p.signature_seed, p.num_perm));
  EXPECT_FALSE(idx.query_then_insert(sig).duplicate());
  EXPECT_TRUE(idx.query_then_insert(sig).duplicate());
}

TEST(LshBloomIndex, FalseDuplicatesOnRandomStreamWithinBinomialTail) {
  // Each query sees at most 1e4 inserted docs, so its false-duplicate chance is
  // at most p_eff; the count is dominated by Binomial(1e4, 1e-3).
  const std::uint64_t bound = oracle::binomial_tail_bound(10000, 1e-3, 1e-3);
  LshBloomIndex idx(LshParams::optimal(0.8, 128), 10000, 1e-3);
  std::mt19937_64 rng(3);
  std::uint64_t dups = 0;
  for (int i = 0; i < 10000; ++i) dups += idx.query_then_insert(random_bands(rng, 9)).duplicate();
  EXPECT_LE(dups, bound);
}

TEST(LshBloomIndex, PlantedNearDuplicatesAreFound) {
  const auto p = LshParams::optimal(0.8, 128);
  const BandHasher h(p);
  int found = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    MinHashSignature a{{}, p.signature_seed};
    for (int i = 0; i < 128; ++i) a.values.push_back(rng() % kMersennePrime);
    auto b = a;
    for (auto& v : b.values) {
      if (oracle::uniform01(rng) >= 0.95) v = rng() % kMersennePrime;
    }
    LshBloomIndex idx(p, 1000, 1e-5);
    idx.insert(a);
    found += idx.query(b).duplicate();
  }
  // P(collision) = 1 - (1 - 0.95^13)^9 = 0.9985.
  EXPECT_GE(found, 98);
}

TEST(LshBloomIndex, SupersetOfClassicWithBoundedExcess) {
  for (double p_eff : {1e-3, 1e-5}) {
    const auto p = LshParams::optimal(0.8, 128);
    const BandHasher hasher(p);
    constexpr int kDocs = 10000;
    LshBloomIndex bloom(p, kDocs, p_eff);
    ClassicLshIndex classic(p);
    std::mt19937_64 rng(17);
    std::vector<BandHashes> seen;
    std::uint64_t excess = 0;
    for (int i = 0; i < kDocs; ++i) {
      BandHashes h = random_bands(rng, 9);
      if (!seen.empty() && rng() % 10 == 0) {
        // Share a few bands with an earlier document.
        const auto& src = seen[rng() % seen.size()];
        for (std::size_t j = 0; j < 9; ++j) {
          if (rng() % 3 == 0) h[j] = src[j];
        }
      }
      const bool c = !classic.query(h).empty();
      const bool b = bloom.query_then_insert(h).duplicate();
      ASSERT_TRUE(!c || b) << "classic duplicate missed at " << i;
      excess += b && !c;
      classic.insert(std::to_string(i), h);
      seen.push_back(h);
    }
    EXPECT_LE(excess, oracle::binomial_tail_bound(kDocs, p_eff, 1e-3)) << p_eff;
  }
}

TEST(LshBloomIndex, SerializationRoundTrip) {
  const auto p = LshParams::optimal(0.8, 128, 5, 6);
  LshBloomIndex idx(p, 2000, 1e-4);
  std::mt19937_64 rng(4);
  std::vector<BandHashes> inserted;
  for (int i = 0; i < 1000; ++i) {
    inserted.push_back(random_bands(rng, 9));
    idx.insert(inserted.back());
  }
  const auto path = temp_path("lshbloom-index");
  idx.save(path);
  EXPECT_EQ(std::filesystem::file_size(path), idx.encoded_size());
  EXPECT_EQ(idx.encoded_size(), plan(p, 2000, 1e-4).file_bytes());
  const auto loaded = LshBloomIndex::load(path);
  EXPECT_EQ(loaded.params(), p);
  EXPECT_EQ(loaded.doc_count(), 1000u);
  EXPECT_EQ(loaded.capacity(), 2000u);
  EXPECT_EQ(loaded.serialize(), idx.serialize());
  for (const auto& h : inserted) EXPECT_TRUE(loaded.query(h).duplicate());
  for (int i = 0; i < 1000; ++i) {
    const auto h = random_bands(rng, 9);
    EXPECT_EQ(loaded.query(h).bands, idx.query(h).bands);
  }
  std::filesystem::remove(path);
}

TEST(LshBloomIndex, CorruptionAndTruncationAreDetected) {
  LshBloomIndex idx(LshParams::optimal(0.8, 32), 20, 1e-3);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) idx.insert(random_bands(rng, idx.params().bands));
  const auto good = idx.serialize();
  for (std::size_t i = 0; i < good.size(); ++i) {
    auto bad = good;
    bad[i] ^= 0xff;
    EXPECT_THROW(LshBloomIndex::deserialize(bad), Error) << "byte " << i;
  }
  try {
    LshBloomIndex::deserialize(std::span(good).first(good.size() / 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::kTruncated || e.code() == ErrorCode::kChecksumMismatch);
  }
  try {
    LshBloomIndex::deserialize(std::span(good).first(10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTruncated);
  }
}

TEST(LshBloomIndex, LoadMissingFileIsIoError) {
  try {
    LshBloomIndex::load("/nonexistent/dir/index.lshb");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(LshBloomIndex, ConcurrentQueriesAndInsertsAreSafe) {
  const auto p = LshParams::optimal(0.8, 128);
  LshBloomIndex idx(p, 40000, 1e-5);
  std::vector<std::jthread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&idx, t] {
      std::mt19937_64 rng(100 + t);
      for (int i = 0; i < 5000; ++i) {
        const auto h = random_bands(rng, 9);
        idx.insert(h);
        ASSERT_TRUE(idx.query(h).duplicate());
      }
    });
  }
  threads.clear();
  EXPECT_EQ(idx.doc_count(), 20000u);
}

TEST(LshBloomIndex, WrongBandCountIsAnError) {
  LshBloomIndex idx(LshParams::optimal(0.8, 128), 10, 1e-5);
  std::mt19937_64 rng(6);
  EXPECT_THROW(idx.insert(random_bands(rng, 8)), Error);
  EXPECT_THROW((void)idx.query(random_bands(rng, 10)), Error);
}
