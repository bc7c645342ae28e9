// Tests for the benchmark targets. Frozen log-density/gradient values were
// computed with 30-digit arithmetic in an independent tool; gradients are
// also checked against central finite differences of the implementation's
// own log density.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "slocal/targets.hpp"

using namespace slocal;

namespace {

void check_grad_fd(const target_model& t, const vec& x, double tol = 1e-5) {
  const vec g = t.grad_log_density(x);
  for (std::size_t j = 0; j < x.size(); ++j) {
    vec xp = x, xm = x;
    const double h = 1e-6 * std::max(1.0, std::fabs(x[j]));
    xp[j] += h;
    xm[j] -= h;
    const double fd = (t.log_density(xp) - t.log_density(xm)) / (2 * h);
    CHECK(g[j] == Catch::Approx(fd).margin(tol * std::max(1.0, std::fabs(fd))));
  }
}

}  // namespace

TEST_CASE("benchmark mixture target", "[targets]") {
  const auto t = benchmark_gmm(1);
  CHECK(t.dim == 1);
  CHECK(t.a0.R == Catch::Approx(4.0 / 3.0));
  CHECK(t.a0.tau == Catch::Approx(std::sqrt(0.05)));
  CHECK(t.log_density({0.0}) ==
        Catch::Approx(-4.2709811391822178).margin(1e-12));
  CHECK(t.mode_weight_truth.value() == Catch::Approx(2.0 / 3.0));
  CHECK(t.has_exact_sampler());
  check_grad_fd(t, {0.25});
  const auto t8 = benchmark_gmm(8);
  CHECK(t8.dim == 8);
  check_grad_fd(t8, vec(8, 0.3));
}

TEST_CASE("eight-Gaussians target", "[targets]") {
  const auto t = eight_gaussians();
  CHECK(t.dim == 2);
  CHECK(t.a0.R == Catch::Approx(10.0 / std::sqrt(2.0)));
  CHECK(t.a0.tau == Catch::Approx(std::sqrt(0.7)));
  CHECK(t.log_density({10.0, 0.0}) ==
        Catch::Approx(-3.5606436641504490).margin(1e-12));
  check_grad_fd(t, {7.0, 7.0});
  check_grad_fd(t, {0.5, -0.5});

  // sampler symmetry: means average out, radius concentrates near 10
  rng_stream rng(31);
  double mx = 0.0, my = 0.0, mr = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const vec x = t.exact_sample(rng);
    mx += x[0];
    my += x[1];
    mr += norm(x);
  }
  CHECK(mx / n == Catch::Approx(0.0).margin(0.15));
  CHECK(my / n == Catch::Approx(0.0).margin(0.15));
  CHECK(mr / n == Catch::Approx(10.0).margin(0.1));
}

TEST_CASE("rings target", "[targets]") {
  const auto t = rings();
  CHECK(t.a0.R == Catch::Approx(4.0 / std::sqrt(2.0)));
  CHECK(t.a0.tau == Catch::Approx(0.15));
  CHECK(t.log_density({1.0, 0.0}) ==
        Catch::Approx(-2.2459899756246644).margin(1e-12));
  CHECK(t.log_density({2.4, -1.8}) ==
        Catch::Approx(-3.3446022640694109).margin(1e-12));
  CHECK(t.log_density({0.9, 1.2}) ==
        Catch::Approx(-7.5138634589518022).margin(1e-12));
  // rotation invariance
  CHECK(t.log_density({0.6, 0.8}) ==
        Catch::Approx(t.log_density({-1.0, 0.0})).epsilon(1e-12));
  // frozen gradient at radius 1.5: radial derivative is -1/r there
  const vec g = t.grad_log_density({0.9, 1.2});
  CHECK(g[0] == Catch::Approx(-2.0 / 3.0 * 0.6).margin(1e-9));
  CHECK(g[1] == Catch::Approx(-2.0 / 3.0 * 0.8).margin(1e-9));
  check_grad_fd(t, {1.1, -0.4});
  check_grad_fd(t, {-2.7, 1.3});

  // sampler: ring occupancy is uniform over the four rings
  rng_stream rng(77);
  int counts[4] = {0, 0, 0, 0};
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const double r = norm(t.exact_sample(rng));
    const int k = std::min(3, std::max(0, static_cast<int>(std::lround(r)) - 1));
    counts[k]++;
  }
  for (int k = 0; k < 4; ++k)
    CHECK(static_cast<double>(counts[k]) / n ==
          Catch::Approx(0.25).margin(0.02));
}

TEST_CASE("funnel target", "[targets]") {
  const auto t = funnel();
  CHECK(t.dim == 10);
  CHECK(t.a0.R == Catch::Approx(2.12));
  CHECK(t.a0.tau == 0.0);
  const vec x{1.0, 0.5, -0.3, 0.2, 0.0, -1.0, 0.7, 0.1, -0.4, 0.9};
  CHECK(t.log_density(x) == Catch::Approx(-15.367781379939698).margin(1e-12));
  const vec g = t.grad_log_density(x);
  CHECK(g[0] == Catch::Approx(-4.0868829074418058).margin(1e-12));
  CHECK(g[1] == Catch::Approx(-0.18393972058572116).margin(1e-12));
  check_grad_fd(t, x);

  rng_stream rng(99);
  double m1 = 0.0, v1 = 0.0;
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    const vec s = t.exact_sample(rng);
    m1 += s[0];
    v1 += s[0] * s[0];
  }
  CHECK(m1 / n == Catch::Approx(0.0).margin(0.05));
  CHECK(v1 / n == Catch::Approx(9.0).margin(0.15));
}

TEST_CASE("phi4 target energies match the worked examples", "[targets]") {
  const auto t0 = phi4_target(0.0);
  CHECK(t0.dim == 100);
  CHECK(t0.a0.R == Catch::Approx(4.5));
  CHECK(t0.a0.tau == Catch::Approx(1e-2));
  CHECK(t0.log_density(vec(100, 0.0)) == Catch::Approx(-50.0).margin(1e-10));
  CHECK(t0.log_density(vec(100, 1.0)) == Catch::Approx(-200.0).margin(1e-10));
  const auto t1 = phi4_target(0.1);
  // coupling: -beta * (a d / 2) * 2 = -200; tilt: -h * d = -10
  CHECK(t1.log_density(vec(100, 1.0)) == Catch::Approx(-210.0).margin(1e-10));

  std::mt19937_64 gen(5150);
  std::normal_distribution<double> nd(0.0, 0.8);
  vec x(100);
  for (auto& v : x) v = nd(gen);
  check_grad_fd(t0, x, 1e-4);
  check_grad_fd(t1, x, 1e-4);

  // tridiagonal Hessian vs finite differences of the gradient
  phi4_model model;
  model.h = 0.1;
  vec diag, off;
  model.hessian_tridiag(x, diag, off);
  const double h = 1e-6;
  for (std::size_t i : {std::size_t(0), std::size_t(49), std::size_t(99)}) {
    vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const vec gp = model.grad(xp), gm = model.grad(xm);
    CHECK(diag[i] == Catch::Approx((gp[i] - gm[i]) / (2 * h)).epsilon(1e-5));
    if (i + 1 < 100)
      CHECK(off[i] ==
            Catch::Approx((gp[i + 1] - gm[i + 1]) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("logistic-regression posterior matches frozen values", "[targets]") {
  labeled_dataset ds;
  ds.x = {{1.0, -0.5}, {-0.3, 0.8}, {0.2, 0.1}};
  ds.y = {1, 0, 1};
  const auto t = bayesian_logreg(ds);
  CHECK(t.dim == 3);
  CHECK(t.a0.R == Catch::Approx(2.5 / std::sqrt(3.0)));
  const vec th{0.5, -0.2, 0.1};
  CHECK(t.log_density(th) == Catch::Approx(-1.7498273547480235).margin(1e-12));
  const vec g = t.grad_log_density(th);
  CHECK(g[0] == Catch::Approx(0.057144076484820302).margin(1e-12));
  CHECK(g[1] == Catch::Approx(-0.27854767549381474).margin(1e-12));
  CHECK(g[2] == Catch::Approx(0.32324124503257911).margin(1e-12));
  check_grad_fd(t, {-0.8, 0.3, 1.2});
}

TEST_CASE("dataset loading, labels, and standardization", "[targets]") {
  const char* path = "/tmp/slocal_test_ds1.csv";
  {
    std::ofstream out(path);
    out << "f1,f2,label\n";
    out << "# comment row\n";
    out << "1.0,10.0,1\n";
    out << "2.0,20.0,0\n";
    out << "3.0,30.0,-1\n";
    out << "4.0,40.0,1\n";
  }
  const auto ds = load_dataset(path);
  REQUIRE(ds.n() == 4);
  REQUIRE(ds.p() == 2);
  CHECK(ds.y == std::vector<int>{1, 0, 0, 1});
  for (std::size_t j = 0; j < 2; ++j) {
    double mu = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 4; ++i) mu += ds.x[i][j];
    mu /= 4.0;
    for (std::size_t i = 0; i < 4; ++i)
      var += (ds.x[i][j] - mu) * (ds.x[i][j] - mu);
    var /= 4.0;
    CHECK(mu == Catch::Approx(0.0).margin(1e-12));
    CHECK(var == Catch::Approx(1.0).epsilon(1e-12));
  }
  // model dimension follows the file, not a hardcoded table
  CHECK(bayesian_logreg(ds).dim == 3);

  const char* bad = "/tmp/slocal_test_ds2.csv";
  {
    std::ofstream out(bad);
    out << "1.0,2.0,1\n1.0,1\n";
  }
  CHECK_THROWS_AS(load_dataset(bad), std::invalid_argument);
  {
    std::ofstream out(bad);
    out << "1.0,2.0,3\n";
  }
  CHECK_THROWS_AS(load_dataset(bad), std::invalid_argument);
  CHECK_THROWS_AS(load_dataset("/tmp/slocal_no_such_file.csv"),
                  std::invalid_argument);
  // constant column: deviation floor keeps values finite (and zero)
  {
    std::ofstream out(bad);
    out << "5.0,1.0,1\n5.0,2.0,0\n";
  }
  const auto ds3 = load_dataset(bad);
  CHECK(ds3.x[0][0] == 0.0);
  CHECK(ds3.x[1][0] == 0.0);
}

TEST_CASE("target config-string dispatch", "[targets]") {
  CHECK(parse_target("gmm:8").dim == 8);
  CHECK(parse_target("gmm:8").name == "gmm:8");
  CHECK(parse_target("8gauss").dim == 2);
  CHECK(parse_target("rings").dim == 2);
  CHECK(parse_target("funnel").dim == 10);
  CHECK(parse_target("phi4:0.05").dim == 100);
  CHECK(parse_target("phi4:0.05").name == "phi4:0.05");
  CHECK_THROWS_AS(parse_target("gmm:0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_target("gmm:2.5"), std::invalid_argument);
  CHECK_THROWS_AS(parse_target("banana"), std::invalid_argument);
  CHECK_THROWS_AS(parse_target("phi4:x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_target("logreg:/tmp/slocal_no_such_file.csv"),
                  std::invalid_argument);

  const char* path = "/tmp/slocal_test_ds4.csv";
  {
    std::ofstream out(path);
    out << "0.5,1.5,1\n-0.5,0.5,0\n1.5,-0.5,1\n";
  }
  const auto t = parse_target(std::string("logreg:") + path);
  CHECK(t.dim == 3);  // two features + intercept, read from the file
}
