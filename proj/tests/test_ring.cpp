//*****************************************************************************
// Copyright 2026 The hegraph Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//*****************************************************************************

#include <gtest/gtest.h>

#include "heg/ckks/ring.hpp"
#include "heg/common.hpp"
#include "heg/context.hpp"

namespace {

using namespace heg;
using namespace heg::ckks;

uint64_t random_residue(Rng& rng, uint64_t q) {
  return (static_cast<uint64_t>(rng.uniform() * 4294967296.0) << 32 ^
          static_cast<uint64_t>(rng.uniform() * 4294967296.0)) %
         q;
}

std::vector<uint64_t> random_poly(Rng& rng, size_t n, uint64_t q) {
  std::vector<uint64_t> poly(n);
  for (uint64_t& v : poly) v = random_residue(rng, q);
  return poly;
}

TEST(Modulus, ArithmeticMatchesDirectReduction) {
  Rng rng(11);
  for (uint64_t q : {uint64_t{97}, generate_ntt_primes(1024, {30})[0], generate_ntt_primes(1024, {50})[0],
                     generate_ntt_primes(1024, {60})[0]}) {
    Modulus m(q);
    for (int i = 0; i < 2000; ++i) {
      uint64_t a = random_residue(rng, q);
      uint64_t b = random_residue(rng, q);
      uint64_t expect = static_cast<uint64_t>(static_cast<unsigned __int128>(a) * b % q);
      ASSERT_EQ(m.mul(a, b), expect) << "q=" << q << " a=" << a << " b=" << b;
      ASSERT_EQ(m.add(a, b), (a + b) % q);
      ASSERT_EQ(m.sub(a, b), (a + q - b) % q);
    }
    // Worst-case corners.
    EXPECT_EQ(m.mul(q - 1, q - 1), static_cast<uint64_t>(static_cast<unsigned __int128>(q - 1) * (q - 1) % q));
    EXPECT_EQ(m.mul(0, q - 1), 0u);
    EXPECT_EQ(m.negate(0), 0u);
    EXPECT_EQ(m.negate(1), q - 1);
  }
}

TEST(Modulus, PowAndInverse) {
  Modulus m(97);
  EXPECT_EQ(m.pow(2, 10), 1024 % 97);
  EXPECT_EQ(m.pow(5, 0), 1u);
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    uint64_t a = 1 + random_residue(rng, 96);
    EXPECT_EQ(m.mul(a, m.inv(a)), 1u);
  }
  EXPECT_THROW(m.inv(0), Error);
}

TEST(Modulus, ShoupMatchesBarrett) {
  Rng rng(17);
  uint64_t q = generate_ntt_primes(1024, {59})[0];
  Modulus m(q);
  for (int i = 0; i < 2000; ++i) {
    uint64_t w = random_residue(rng, q);
    uint64_t ws = m.shoup(w);
    uint64_t x = random_residue(rng, q);
    ASSERT_EQ(m.mul_shoup(x, w, ws), m.mul(x, w));
  }
}

TEST(Primality, KnownValues) {
  EXPECT_FALSE(is_prime_u64(0));
  EXPECT_FALSE(is_prime_u64(1));
  EXPECT_TRUE(is_prime_u64(2));
  EXPECT_TRUE(is_prime_u64(97));
  EXPECT_TRUE(is_prime_u64(113));
  EXPECT_TRUE(is_prime_u64(2305843009213693951ull));  // 2^61 - 1
  EXPECT_FALSE(is_prime_u64(561));                    // Carmichael
  EXPECT_FALSE(is_prime_u64(3215031751ull));          // strong pseudoprime to bases 2,3,5,7
  EXPECT_FALSE(is_prime_u64(4033));                   // 37 * 109
}

TEST(Primes, CongruentDistinctDescending) {
  auto primes = generate_ntt_primes(8192, std::vector<int>(7, 30));
  ASSERT_EQ(primes.size(), 7u);
  for (size_t i = 0; i < primes.size(); ++i) {
    EXPECT_TRUE(is_prime_u64(primes[i]));
    EXPECT_EQ(primes[i] % 16384, 1u);
    EXPECT_LT(primes[i], uint64_t{1} << 30);
    EXPECT_GE(primes[i], uint64_t{1} << 29);
    if (i > 0) {
      EXPECT_LT(primes[i], primes[i - 1]);
    }
  }
}

TEST(Ntt, ForwardInverseRoundTrip) {
  Rng rng(19);
  for (size_t n : {size_t{8}, size_t{64}, size_t{1024}}) {
    uint64_t q = generate_ntt_primes(n, {30})[0];
    NttTables tables(Modulus(q), n);
    for (int i = 0; i < 20; ++i) {
      auto poly = random_poly(rng, n, q);
      auto copy = poly;
      tables.forward(copy.data());
      tables.inverse(copy.data());
      ASSERT_EQ(copy, poly) << "n=" << n;
    }
  }
}

// (1 + 2x + 3x^2 + 4x^3)(5 + 6x + 7x^2 + 8x^3) mod (x^4 + 1, 97):
// plain convolution [5,16,34,60,61,52,32]; wrapped terms negate, giving
// [5-61, 16-52, 34-32, 60] = [-56,-36,2,60] = [41,61,2,60] mod 97.
TEST(Ntt, FrozenNegacyclicProducts) {
  Modulus q(97);
  NttTables tables(q, 4);
  std::vector<uint64_t> a{1, 2, 3, 4}, b{5, 6, 7, 8};
  std::vector<uint64_t> expect{41, 61, 2, 60};
  EXPECT_EQ(negacyclic_mul_schoolbook(a, b, q), expect);
  EXPECT_EQ(negacyclic_mul_ntt(a, b, tables), expect);

  // x^3 * x^2 = x^5 = -x in the negacyclic ring.
  std::vector<uint64_t> x3{0, 0, 0, 1}, x2{0, 0, 1, 0};
  std::vector<uint64_t> minus_x{0, 96, 0, 0};
  EXPECT_EQ(negacyclic_mul_schoolbook(x3, x2, q), minus_x);
  EXPECT_EQ(negacyclic_mul_ntt(x3, x2, tables), minus_x);
}

TEST(Ntt, MatchesSchoolbookOnRandomPairs) {
  Rng rng(23);
  for (size_t n : {size_t{8}, size_t{64}}) {
    uint64_t q = generate_ntt_primes(n, {30})[0];
    Modulus m(q);
    NttTables tables(m, n);
    int pairs = n == 8 ? 1000 : 200;
    for (int i = 0; i < pairs; ++i) {
      auto a = random_poly(rng, n, q);
      auto b = random_poly(rng, n, q);
      ASSERT_EQ(negacyclic_mul_ntt(a, b, tables), negacyclic_mul_schoolbook(a, b, m)) << "n=" << n;
    }
  }
}

TEST(WideInt, CenteredReconstructionFrozen) {
  std::vector<Modulus> moduli{Modulus(97), Modulus(113)};  // product 10961
  CrtReconstructor crt(moduli);
  EXPECT_DOUBLE_EQ(crt.to_centered_double({53, 28}), 5000.0);
  EXPECT_DOUBLE_EQ(crt.to_centered_double({7, 51}), -3000.0);
  EXPECT_DOUBLE_EQ(crt.to_centered_double({0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(crt.to_centered_double({96, 112}), -1.0);
}

TEST(WideInt, CenteredReconstructionRandom) {
  auto primes = generate_ntt_primes(1024, {30, 30, 30});
  std::vector<Modulus> moduli;
  for (uint64_t q : primes) moduli.emplace_back(q);
  CrtReconstructor crt(moduli);
  Rng rng(29);
  for (int i = 0; i < 1000; ++i) {
    // Values well inside +-Q/2 (Q ~ 2^89).
    int64_t v = static_cast<int64_t>(rng.uniform(-1.0, 1.0) * 9.0e15);
    std::vector<uint64_t> residues;
    for (const Modulus& q : moduli) {
      int64_t r = v % static_cast<int64_t>(q.value());
      if (r < 0) r += static_cast<int64_t>(q.value());
      residues.push_back(static_cast<uint64_t>(r));
    }
    ASSERT_DOUBLE_EQ(crt.to_centered_double(residues), static_cast<double>(v));
  }
}

TEST(Context, PinnedShape) {
  ContextParams params;  // defaults: ckks-ref, 8192, seven 30-bit primes, scale 2^30, 128-bit
  EXPECT_FALSE(security_warning(params).has_value());
  ContextPtr ctx = make_context(params);
  EXPECT_EQ(ctx->max_level(), 6);
  EXPECT_EQ(ctx->slot_count(), 4096);
  EXPECT_DOUBLE_EQ(ctx->default_scale(), 1073741824.0);  // 2^30
  EXPECT_EQ(ctx->moduli().size(), 7u);
  for (const Modulus& q : ctx->moduli()) EXPECT_EQ(q.value() % 16384, 1u);
}

TEST(Context, SecurityEstimateWarning) {
  ContextParams params;
  params.coeff_mod_bits = std::vector<int>(8, 30);  // 240 bits > 218-bit estimate at 8192
  auto warning = security_warning(params);
  ASSERT_TRUE(warning.has_value());
  EXPECT_NE(warning->find("240"), std::string::npos);
  EXPECT_NE(warning->find("218"), std::string::npos);

  params.poly_degree = 16384;  // 240 bits fits the 438-bit estimate
  EXPECT_FALSE(security_warning(params).has_value());

  params.poly_degree = 8192;
  params.security = 0;  // explicitly unchecked
  EXPECT_FALSE(security_warning(params).has_value());
}

TEST(Context, RejectsBadParameters) {
  auto expect_invalid = [](ContextParams p) {
    try {
      make_context(std::move(p));
      FAIL() << "expected validation failure";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), errc::validation);
    }
  };
  ContextParams p;
  p.scheme = "bfv";
  expect_invalid(p);
  p = ContextParams();
  p.poly_degree = 3000;
  expect_invalid(p);
  p = ContextParams();
  p.coeff_mod_bits = {30};
  expect_invalid(p);
  p = ContextParams();
  p.coeff_mod_bits = {30, 30, 19};
  expect_invalid(p);
  p = ContextParams();
  p.scale_bits = 5;
  expect_invalid(p);
  p = ContextParams();
  p.security = 100;
  expect_invalid(p);
}

TEST(Context, ClearSchemeSkipsTransformTables) {
  ContextParams params;
  params.scheme = "clear";
  ContextPtr ctx = make_context(params);
  EXPECT_TRUE(ctx->is_clear());
  EXPECT_EQ(ctx->max_level(), 6);
  EXPECT_THROW(ctx->tables(0), Error);
}

TEST(Context, JsonRoundTrip) {
  ContextParams params;
  params.coeff_mod_bits = {40, 30, 30, 40};
  params.scale_bits = 30;
  params.security = 0;
  ContextPtr ctx = make_context(params);
  ContextParams back = CryptoContext::params_from_json(ctx->to_json());
  EXPECT_TRUE(back == params);
  EXPECT_THROW(CryptoContext::params_from_json(nlohmann::json{{"scheme", "ckks-ref"}}), Error);
}

}  // namespace
