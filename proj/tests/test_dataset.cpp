#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "pairlot/dataset.hpp"
#include "test_support.hpp"

using namespace pairlot;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/pairlot_test_") + name;
}

}  // namespace

TEST_CASE("validate accepts the toy dataset") {
  CHECK(validate(testing::toy4_dataset()).ok());
}

TEST_CASE("validate flags outcome present after ICE") {
  TrialDataset d = testing::toy4_dataset();
  d.outcomes(1, 1) = 9.0;  // subject 1 has T = 0
  const auto rep = validate(d);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.violations[0].subject == 1);
  CHECK(rep.violations[0].what.find("present after ICE") != std::string::npos);
}

TEST_CASE("validate flags a single-arm dataset") {
  TrialDataset d = testing::toy4_dataset();
  d.arm = {1, 1, 1, 1};
  const auto rep = validate(d);
  REQUIRE_FALSE(rep.ok());
  bool found = false;
  for (const auto& v : rep.violations) found = found || v.what == "single-arm dataset";
  CHECK(found);
}

TEST_CASE("validate flags missing outcome before ICE and T out of range") {
  TrialDataset d = testing::toy4_dataset();
  d.outcomes(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(validate(d).ok());
  TrialDataset e = testing::toy4_dataset();
  e.ice_time[0] = 5;
  CHECK_FALSE(validate(e).ok());
}

TEST_CASE("csv single row maps fields as documented") {
  const std::string path = temp_path("row.csv");
  {
    std::ofstream f(path);
    f << "id,A,T,L1,Y0,Y1,Y2\n";
    f << "1,1,2,0.5,1.0,2.0,3.0\n";
    f << "2,0,1,-1,4,5,NA\n";
  }
  const TrialDataset d = load_csv(path);
  CHECK(d.n == 2);
  CHECK(d.tau == 2);
  CHECK(d.d == 1);
  CHECK(d.arm[0] == 1);
  CHECK(d.ice_time[0] == 2);
  CHECK(d.covariates(0, 0) == 0.5);
  CHECK(d.outcomes(0, 2) == 3.0);
  CHECK(d.observed(1, 1));
  CHECK_FALSE(d.observed(1, 2));
  std::remove(path.c_str());
}

TEST_CASE("csv parse errors name row and column") {
  const std::string path = temp_path("bad.csv");
  SUBCASE("T out of range") {
    std::ofstream(path) << "id,A,T,Y0,Y1,Y2\n1,1,5,1,2,3\n";
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("T out of range"), std::runtime_error);
  }
  SUBCASE("non-integer T") {
    std::ofstream(path) << "id,A,T,Y0,Y1,Y2\n1,1,1.5,1,2,3\n";
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("non-integer"), std::runtime_error);
  }
  SUBCASE("NA in A") {
    std::ofstream(path) << "id,A,T,Y0,Y1,Y2\n1,NA,1,1,2,NA\n";
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("column A"), std::runtime_error);
  }
  SUBCASE("NA in L") {
    std::ofstream(path) << "id,A,T,L1,Y0,Y1,Y2\n1,1,1,NA,1,2,NA\n";
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("column L1"), std::runtime_error);
  }
  SUBCASE("malformed row") {
    std::ofstream(path) << "id,A,T,Y0,Y1,Y2\n1,1,1,1,2\n";
    CHECK_THROWS_AS(load_csv(path), std::runtime_error);
  }
  std::remove(path.c_str());
}

TEST_CASE("round-trip save/load is exact on random valid datasets") {
  Xoshiro256pp rng(2718);
  const std::string path = temp_path("roundtrip.csv");
  for (int rep = 0; rep < 25; ++rep) {
    const TrialDataset d = testing::random_dataset(rng, 60, 5, rep % 3);
    REQUIRE(validate(d).ok());
    save_csv(d, path);
    const TrialDataset e = load_csv(path);
    REQUIRE(e.n == d.n);
    REQUIRE(e.tau == d.tau);
    REQUIRE(e.d == d.d);
    for (int i = 0; i < d.n; ++i) {
      CHECK(e.arm[static_cast<std::size_t>(i)] == d.arm[static_cast<std::size_t>(i)]);
      CHECK(e.ice_time[static_cast<std::size_t>(i)] == d.ice_time[static_cast<std::size_t>(i)]);
      for (int j = 0; j < d.d; ++j) CHECK(e.covariates(i, j) == d.covariates(i, j));
      for (int t = 0; t <= d.tau; ++t) {
        CHECK(e.observed(i, t) == d.observed(i, t));
        if (d.observed(i, t)) CHECK(e.outcomes(i, t) == d.outcomes(i, t));
      }
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("masked accessor throws") {
  const TrialDataset d = testing::toy4_dataset();
  CHECK(d.y(0, 2) == 3.0);
  CHECK_THROWS_AS(d.y(1, 1), std::logic_error);
}

TEST_CASE("binary outcome detection") {
  TrialDataset d = testing::toy4_dataset();
  CHECK_FALSE(d.binary_outcomes());
  d.outcomes << 1, 0, 1, 1, 0, 0, 0, 1, 0, 0, 1, 0;
  d.outcomes(1, 1) = d.outcomes(1, 2) = std::numeric_limits<double>::quiet_NaN();
  d.outcomes(2, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK(d.binary_outcomes());
}
