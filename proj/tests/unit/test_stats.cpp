#include <doctest.h>

#include <cmath>
#include <random>

#include "fedwatch/stats.hpp"

using namespace fedwatch;

namespace {

// Independent oracle: quadratic tie-aware ranks, then textbook Pearson.
double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto rank = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  auto rx = rank(x), ry = rank(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += rx[i] / n, my += ry[i] / n;
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  return num / std::sqrt(dx * dy);
}

// Independent oracle: fine grid scan of the log-likelihood written out directly.
double grid_lambda(const std::vector<double>& v) {
  double best = 0, best_ll = -INFINITY;
  const double n = static_cast<double>(v.size());
  double slog = 0;
  for (double x : v) slog += std::log(x);
  for (int i = -5000; i <= 5000; ++i) {
    const double l = i / 1000.0;
    std::vector<double> t;
    double m = 0;
    for (double x : v) {
      t.push_back(l == 0 ? std::log(x) : (std::pow(x, l) - 1) / l);
      m += t.back() / n;
    }
    double var = 0;
    for (double y : t) var += (y - m) * (y - m) / n;
    const double ll = (l - 1) * slog - n / 2 * std::log(var);
    if (ll > best_ll) best_ll = ll, best = l;
  }
  return best;
}

}  // namespace

TEST_CASE("spearman basic cases") {
  std::vector<double> x{1, 2, 3};
  CHECK(spearman(x, std::vector<double>{10, 20, 30}) == doctest::Approx(1.0));
  CHECK(spearman(x, std::vector<double>{30, 20, 10}) == doctest::Approx(-1.0));
}

TEST_CASE("spearman with ties matches the oracle") {
  std::vector<double> x{1, 2, 2, 4}, y{1, 3, 2, 4};
  const double expected = 0.94868329805051377;  // oracle value, frozen
  CHECK(std::abs(brute_spearman(x, y) - expected) < 1e-12);
  CHECK(std::abs(spearman(x, y) - expected) < 1e-9);
}

TEST_CASE("spearman errors") {
  std::vector<double> one{1};
  CHECK_THROWS_AS(spearman(one, one), Error);
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), Error);
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), UndefinedStatistic);
}

TEST_CASE("spearman properties: self-correlation and monotone invariance") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(2, 40), small(0, 6);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(rng);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = small(rng);
      y[i] = normal(rng);
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
    CHECK(spearman(x, x) == doctest::Approx(1.0));
    const double a = std::exp(normal(rng)), b = normal(rng);
    std::vector<double> fx(n), gy(n);
    for (int i = 0; i < n; ++i) {
      fx[i] = std::exp(a * x[i]) + b;  // strictly increasing
      gy[i] = std::cbrt(y[i]) * a - b;
    }
    CHECK(spearman(fx, gy) == doctest::Approx(spearman(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("empirical cdf") {
  EmpiricalCdf F({1, 2, 2, 4});
  CHECK(F(2) == 0.75);
  CHECK(F(0.5) == 0.0);
  CHECK(F(4) == 1.0);
  CHECK(F(100) == 1.0);
  CHECK(F(1.999) == 0.25);
  CHECK_THROWS_AS(EmpiricalCdf({}), Error);

  std::mt19937_64 rng(3);
  std::exponential_distribution<double> e(0.1);
  std::vector<double> v(500);
  for (auto& x : v) x = e(rng);
  EmpiricalCdf G(v);
  double prev = 0;
  for (double x = -1; x < 200; x += 0.37) {
    CHECK(G(x) >= prev);
    prev = G(x);
  }
  CHECK(G(-1) == 0.0);
  CHECK(prev == 1.0);
}

TEST_CASE("box_cox analytic cases") {
  CHECK(box_cox(7.5, 1.0) == doctest::Approx(6.5).epsilon(1e-15));
  CHECK(box_cox(std::exp(1.0), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(box_cox(4.0, 0.5) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(box_cox(0.0, 1.0), Error);
  CHECK_THROWS_AS(box_cox(-3.0, 0.0), Error);
}

TEST_CASE("box_cox is exact at lambda 1 and 0") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1e-3, 1e4);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    CHECK(box_cox(x, 1.0) == x - 1.0);
    CHECK(box_cox(x, 0.0) == std::log(x));
  }
}

TEST_CASE("box_cox is continuous at lambda = 0") {
  for (double x = 0.1; x <= 100.0; x *= 1.17) CHECK(std::abs(box_cox(x, 1e-8) - std::log(x)) < 1e-6);
}

TEST_CASE("box_cox is strictly increasing in value for every lambda") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lam(-5, 5), val(0.01, 1000);
  for (int i = 0; i < 2000; ++i) {
    const double l = lam(rng);
    double a = val(rng), b = val(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    CHECK(box_cox(a, l) < box_cox(b, l));
  }
}

TEST_CASE("fit_box_cox matches a grid-scan oracle") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(50.0, 5.0);
  SUBCASE("near-normal data: lambda close to 1") {
    std::vector<double> v(2000);
    for (auto& x : v) x = normal(rng);
    const double lambda = fit_box_cox(v);
    CHECK(std::abs(lambda - 1.0) <= 0.3);
    CHECK(std::abs(lambda - grid_lambda(v)) <= 2e-3);
  }
  SUBCASE("log-normal data: lambda close to 0") {
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> v(10000);
    for (auto& x : v) x = std::exp(z(rng));
    const double lambda = fit_box_cox(v);
    CHECK(std::abs(lambda) <= 0.2);
    CHECK(std::abs(lambda - grid_lambda(v)) <= 2e-3);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(fit_box_cox(std::vector<double>{3, 3, 3}), UndefinedStatistic);
    CHECK_THROWS_AS(fit_box_cox(std::vector<double>{1, 0, 3}), Error);
  }
}
