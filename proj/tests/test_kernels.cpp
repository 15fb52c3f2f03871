#include "doctest.h"

#include <random>
#include <string>
#include <vector>

#include "tenkit/kernels.hpp"

using tenkit::kernels::Table;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Scalar and SIMD variants may differ by reassociation and FMA rounding
// only; compare at a tight relative tolerance.
void check_tables_agree(const Table& a, const Table& b, size_t n,
                        uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto x = random_vec(rng, n);
  auto y = random_vec(rng, n);

  auto da = x, db = x;
  a.mul(da.data(), y.data(), n);
  b.mul(db.data(), y.data(), n);
  for (size_t i = 0; i < n; ++i) CHECK(da[i] == db[i]);

  std::vector<double> ta(n), tb(n);
  a.mul_to(ta.data(), x.data(), y.data(), n);
  b.mul_to(tb.data(), x.data(), y.data(), n);
  for (size_t i = 0; i < n; ++i) CHECK(ta[i] == tb[i]);

  da = x;
  db = x;
  a.add(da.data(), y.data(), n);
  b.add(db.data(), y.data(), n);
  for (size_t i = 0; i < n; ++i) CHECK(da[i] == db[i]);

  da = x;
  db = x;
  a.axpy(da.data(), 1.7, y.data(), n);
  b.axpy(db.data(), 1.7, y.data(), n);
  for (size_t i = 0; i < n; ++i)
    CHECK(da[i] == doctest::Approx(db[i]).epsilon(1e-14));

  const double dot_a = a.dot(x.data(), y.data(), n);
  const double dot_b = b.dot(x.data(), y.data(), n);
  CHECK(dot_a == doctest::Approx(dot_b).epsilon(1e-12));

  const double ss_a = a.sumsq(x.data(), n);
  const double ss_b = b.sumsq(x.data(), n);
  CHECK(ss_a == doctest::Approx(ss_b).epsilon(1e-12));

  a.fill(da.data(), 3.25, n);
  b.fill(db.data(), 3.25, n);
  for (size_t i = 0; i < n; ++i) CHECK(da[i] == db[i]);
}

}  // namespace

TEST_CASE("scalar kernels match plain arithmetic on small cases") {
  const auto& k = tenkit::kernels::scalar();
  std::vector<double> x = {1.0, 2.0, 3.0};
  std::vector<double> y = {4.0, -1.0, 0.5};
  CHECK(k.dot(x.data(), y.data(), 3) == doctest::Approx(3.5));
  CHECK(k.sumsq(x.data(), 3) == doctest::Approx(14.0));
  k.axpy(x.data(), 2.0, y.data(), 3);
  CHECK(x[0] == doctest::Approx(9.0));
  CHECK(x[1] == doctest::Approx(0.0));
  CHECK(x[2] == doctest::Approx(4.0));
}

TEST_CASE("avx2 variant agrees with scalar reference") {
  if (!tenkit::kernels::avx2_available()) {
    WARN_MESSAGE(true, "AVX2 not available on this host; skipping");
    return;
  }
  const auto& s = tenkit::kernels::scalar();
  const auto& v = tenkit::kernels::avx2();
  // Lengths straddling the vector width, including ragged tails.
  for (size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 33u, 1000u})
    check_tables_agree(s, v, n, 42 + n);
}

TEST_CASE("kernel selection honors explicit choice") {
  CHECK(tenkit::kernels::select("scalar") == "scalar");
  CHECK(std::string(tenkit::kernels::active().name) == "scalar");
  const std::string picked = tenkit::kernels::select("auto");
  if (tenkit::kernels::avx2_available())
    CHECK(picked == "avx2");
  else
    CHECK(picked == "scalar");
  CHECK_THROWS(tenkit::kernels::select("no-such-isa"));
  tenkit::kernels::select("auto");
}
