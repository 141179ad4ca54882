#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "tvemi/errors.hpp"
#include "tvemi/random.hpp"
#include "tvemi/tve.hpp"

using namespace tvemi;

TEST_CASE("basis vectors by form") {
  CHECK(TveSpec::constant().dimension() == 1);
  CHECK(basis(TveSpec::constant(), 7.3)[0] == 1.0);

  const Eigen::VectorXd lin = basis(TveSpec::linear(), 2.5);
  CHECK(lin.size() == 2);
  CHECK(lin[0] == 1.0);
  CHECK(lin[1] == 2.5);

  const TveSpec rcs = TveSpec::rcs({1.0, 2.0, 3.0});
  CHECK(rcs.dimension() == 3);
  const Eigen::VectorXd rb = basis(rcs, 2.5);
  CHECK(rb[0] == 1.0);
  CHECK(rb[1] == 2.5);
  // (1.5)^3 - (0.5)^3 * (3-1)/(3-2) + 0 = 3.375 - 0.25
  CHECK(rb[2] == doctest::Approx(3.125).epsilon(1e-14));
  CHECK(rb[2] == rcs_term(2.5, rcs.knots(), 0));
}

TEST_CASE("step basis is one-hot with an open-ended last interval") {
  const TveSpec step = TveSpec::step({1.0, 2.5});
  CHECK(step.dimension() == 2);
  const auto at = [&](double t) { return basis(step, t); };
  CHECK(at(0.5)[0] == 1.0);
  CHECK(at(1.0)[0] == 1.0);  // boundary belongs to the left interval
  CHECK(at(1.0)[1] == 0.0);
  CHECK(at(2.0)[1] == 1.0);
  CHECK(at(2.5)[1] == 1.0);
  CHECK(at(7.0)[1] == 1.0);  // beyond the last cutpoint maps to the last slot
  for (double t : {0.5, 1.0, 2.0, 7.0}) CHECK(at(t).sum() == 1.0);
}

TEST_CASE("tve_eval is the basis dot product") {
  const TveSpec spec = TveSpec::linear();
  Eigen::VectorXd c(2);
  c << 0.1, 0.2;
  CHECK(tve_eval(spec, c, 3.0) == doctest::Approx(0.7).epsilon(1e-14));
  Eigen::VectorXd wrong(3);
  CHECK_THROWS_AS(tve_eval(spec, wrong, 1.0), ConfigError);
}

namespace {

// For a piecewise cubic, one-sided Taylor expansions are exact, so
// 2*D(d) - D(2d) cancels the first-order term and returns the jump itself
// (plus d^2-order residue for the slope case). Evaluated in long double to
// keep the difference-quotient roundoff below the tolerance.
long double term(long double t, const std::vector<double>& u, int i) {
  return rcs_term<long double>(t, u, i);
}

// one-sided first derivative with a Richardson step; keeping both
// evaluation points inside one cubic piece leaves only an O(d^2 f''') tail
long double slope_side(const std::vector<double>& u, int i, double k,
                       long double sign) {
  const auto q = [&](long double d) {
    const long double kk = k;
    return (term(kk + sign * d, u, i) - term(kk, u, i)) / (sign * d);
  };
  const long double d = 0x1p-16L;
  return 2 * q(d) - q(2 * d);
}

long double slope_jump(const std::vector<double>& u, int i, double k) {
  return slope_side(u, i, k, 1.0L) - slope_side(u, i, k, -1.0L);
}

long double curvature_jump(const std::vector<double>& u, int i, double k) {
  const auto J = [&](long double d) {
    const long double kk = k;
    const long double right =
        term(kk + 2 * d, u, i) - 2 * term(kk + d, u, i) + term(kk, u, i);
    const long double left =
        term(kk, u, i) - 2 * term(kk - d, u, i) + term(kk - 2 * d, u, i);
    return (right - left) / (d * d);
  };
  const long double d = 1e-3L;
  return 2 * J(d) - J(2 * d);
}

std::vector<double> random_knots(Rng& rng, int n) {
  for (;;) {
    std::vector<double> k(n);
    for (double& v : k) v = rng.uniform(0.1, 10.0);
    std::sort(k.begin(), k.end());
    bool ok = true;
    for (int i = 1; i < n; ++i) ok = ok && k[i] - k[i - 1] > 0.05;
    if (ok) return k;
  }
}

}  // namespace

TEST_CASE("spline terms are C2 at every knot with linear tails") {
  Rng rng(20240811);
  for (int set = 0; set < 100; ++set) {
    const int n = 3 + set % 3;
    const std::vector<double> u = random_knots(rng, n);
    for (int i = 0; i + 2 < n; ++i) {
      for (const double k : u) {
        CHECK(std::abs(static_cast<double>(
                  term(k + 1e-10L, u, i) - term(k - 1e-10L, u, i))) <= 1e-6);
        CHECK(std::abs(static_cast<double>(slope_jump(u, i, k))) <= 1e-6);
        CHECK(std::abs(static_cast<double>(curvature_jump(u, i, k))) <= 1e-6);
      }
      // identically zero before the first knot
      CHECK(term(u.front() - 0.01L, u, i) == 0.0L);
      // linear beyond the last knot: vanishing second difference
      for (const double b : {u.back() + 1.0, u.back() + 5.0}) {
        const long double d = 0.5L;
        const long double second =
            (term(b + d, u, i) - 2 * term(b, u, i) + term(b - d, u, i)) /
            (d * d);
        CHECK(std::abs(static_cast<double>(second)) <= 1e-6);
      }
    }
  }
}

TEST_CASE("knot selection uses fixed percentiles of the supplied times") {
  std::vector<double> times(100);
  for (int i = 0; i < 100; ++i) times[i] = i + 1.0;

  const std::vector<double> k3 = select_knots(times, 3);
  REQUIRE(k3.size() == 3);
  CHECK(k3[0] == doctest::Approx(10.9).epsilon(1e-14));
  CHECK(k3[1] == doctest::Approx(50.5).epsilon(1e-14));
  CHECK(k3[2] == doctest::Approx(90.1).epsilon(1e-14));

  const std::vector<double> k4 = select_knots(times, 4);
  REQUIRE(k4.size() == 4);
  CHECK(k4[0] == doctest::Approx(5.95).epsilon(1e-14));
  CHECK(k4[1] == doctest::Approx(35.65).epsilon(1e-14));
  CHECK(k4[2] == doctest::Approx(65.35).epsilon(1e-14));
  CHECK(k4[3] == doctest::Approx(95.05).epsilon(1e-14));

  const std::vector<double> k5 = select_knots(times, 5);
  REQUIRE(k5.size() == 5);
  CHECK(k5[0] == doctest::Approx(5.95).epsilon(1e-14));
  CHECK(k5[1] == doctest::Approx(25.75).epsilon(1e-14));
  CHECK(k5[2] == doctest::Approx(50.5).epsilon(1e-14));
  CHECK(k5[3] == doctest::Approx(75.25).epsilon(1e-14));
  CHECK(k5[4] == doctest::Approx(95.05).epsilon(1e-14));

  // unsorted input gives the same knots
  std::vector<double> shuffled = times;
  Rng rng(3);
  rng.shuffle(shuffled);
  CHECK(select_knots(shuffled, 5) == k5);
}

TEST_CASE("knot selection rejects degenerate inputs") {
  CHECK_THROWS_AS(select_knots({1.0, 2.0}, 2), ConfigError);
  CHECK_THROWS_AS(select_knots({}, 3), DataError);
  CHECK_THROWS_AS(select_knots({1.0, 1.0, 1.0, 2.0}, 3), DataError);
}

TEST_CASE("spec constructors validate their knots") {
  CHECK_THROWS_AS(TveSpec::rcs({1.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(TveSpec::rcs({2.0, 1.0, 3.0}), ConfigError);
  CHECK_THROWS_AS(TveSpec::step({}), ConfigError);
  CHECK_THROWS_AS(TveSpec::step({-1.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(TveSpec::step({2.0, 2.0}), ConfigError);
}

TEST_CASE("spec serialization round trips") {
  for (const TveSpec& spec :
       {TveSpec::constant(), TveSpec::linear(), TveSpec::rcs({0.5, 1.25, 9.0}),
        TveSpec::step({1.0, 2.5, 4.0})}) {
    CHECK(parse_tve_spec(to_string(spec)) == spec);
  }
  CHECK(to_string(TveSpec::constant()) == "constant");
  CHECK(to_string(TveSpec::rcs({1.0, 2.0, 3.0})) == "rcs:1,2,3");
  CHECK_THROWS_AS(parse_tve_spec("quadratic"), ConfigError);
  CHECK_THROWS_AS(parse_tve_spec("rcs:1,zz,3"), ConfigError);
}
