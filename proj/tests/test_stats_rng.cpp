#include <doctest.h>

#include <cmath>

#include "pairlot/rng.hpp"
#include "pairlot/stats.hpp"

using namespace pairlot;

TEST_CASE("normal quantile matches reference values to 1e-9") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::fabs(normal_quantile(0.975) - 1.959963984540054) < 1e-9);
  CHECK(std::fabs(normal_quantile(0.995) - 2.5758293035489004) < 1e-9);
  CHECK(std::fabs(normal_quantile(1e-10) - (-6.361340902404056)) < 1e-8);
  CHECK(normal_quantile(0.3) == doctest::Approx(-normal_quantile(0.7)).epsilon(1e-12));
  CHECK_THROWS(normal_quantile(0.0));
}

TEST_CASE("normal cdf and quantile are inverses") {
  for (double p : {0.001, 0.025, 0.2, 0.5, 0.77, 0.999})
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
}

TEST_CASE("summary statistics") {
  std::vector<double> x = {1, 2, 3, 4, 100};
  CHECK(mean(x) == doctest::Approx(22.0));
  CHECK(median(x) == doctest::Approx(3.0));
  // MAD of {2,1,0,1,97} is 1 -> robust sd = 1.4826
  CHECK(robust_sd(x) == doctest::Approx(1.4826));
  CHECK(sample_sd(x) == doctest::Approx(std::sqrt(sample_variance(x))));
}

TEST_CASE("welch difference") {
  std::vector<double> a = {3, 5, 7}, b = {1, 2, 3};
  const WelchResult w = welch_diff(a, b);
  CHECK(w.diff == doctest::Approx(3.0));
  CHECK(w.se == doctest::Approx(std::sqrt(4.0 / 3 + 1.0 / 3)));
  CHECK_THROWS(welch_diff({1.0}, b));
}

TEST_CASE("rng streams are deterministic and stream-split") {
  Xoshiro256pp a(derive_seed(42, 7));
  Xoshiro256pp b(derive_seed(42, 7));
  Xoshiro256pp c(derive_seed(42, 8));
  bool same = true, differ = false;
  for (int i = 0; i < 100; ++i) {
    const auto av = a();
    same = same && av == b();
    differ = differ || av != c();
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("normal draws have the right first two moments") {
  Xoshiro256pp rng(123);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::fabs(s / n) < 0.01);
  CHECK(std::fabs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("weibull survival convention: P(X > x) = exp(-(x/scale)^shape)") {
  Xoshiro256pp rng(5);
  const double shape = 1.5, scale = 12.0, x = 5.0;
  int over = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) over += rng.weibull(shape, scale) > x;
  CHECK(std::fabs(static_cast<double>(over) / n - std::exp(-std::pow(x / scale, shape))) < 0.005);
}

TEST_CASE("kahan sum survives cancellation") {
  KahanSum s;
  s.add(1e16);
  for (int i = 0; i < 10000; ++i) s.add(0.1);
  s.add(-1e16);
  CHECK(s.value() == doctest::Approx(1000.0).epsilon(1e-9));
}
