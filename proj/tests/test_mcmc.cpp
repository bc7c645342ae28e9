// Tests for the MALA/ULA kernels and the step-size controller.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "slocal/gmm_analytic.hpp"
#include "slocal/mcmc.hpp"

using namespace slocal;

namespace {

auto std_normal_logpdf = [](const vec& x) { return -0.5 * sq_norm(x); };
auto std_normal_grad = [](const vec& x) { return scaled(x, -1.0); };

}  // namespace

TEST_CASE("step adaptation arithmetic", "[mcmc]") {
  // symmetric controller: literal multiply/divide by the adjust factor
  step_controller sym{0.1, 1.01, 0.5, false};
  adapt_step(sym, true);
  CHECK(sym.step_size == Catch::Approx(0.1 * 1.01).epsilon(1e-15));
  sym.step_size = 0.1;
  adapt_step(sym, false);
  CHECK(sym.step_size == Catch::Approx(0.1 / 1.01).epsilon(1e-15));

  // default controller: asymmetric exponents with equilibrium at 75%
  step_controller c{0.1, 1.01, 0.75, false};
  adapt_step(c, true);
  CHECK(c.step_size == Catch::Approx(0.1 * std::pow(1.01, 0.5)).epsilon(1e-15));
  c.step_size = 0.1;
  adapt_step(c, false);
  CHECK(c.step_size == Catch::Approx(0.1 / std::pow(1.01, 1.5)).epsilon(1e-15));
  // drift balance: p * up-exponent == (1-p) * down-exponent
  CHECK(0.75 * 2.0 * (1.0 - 0.75) == Catch::Approx((1 - 0.75) * 2.0 * 0.75));

  step_controller froz{0.1, 1.01, 0.75, true};
  adapt_step(froz, true);
  adapt_step(froz, false);
  CHECK(froz.step_size == 0.1);

  CHECK_THROWS_AS(validate(step_controller{0.0, 1.01, 0.75, false}),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate(step_controller{0.1, 1.0, 0.75, false}),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate(step_controller{0.1, 1.01, 1.0, false}),
                  std::invalid_argument);
}

TEST_CASE("MALA acceptance approaches one as the step vanishes", "[mcmc]") {
  rng_stream rng(2718);
  auto st = make_chain(vec{0.7}, std_normal_logpdf, std_normal_grad,
                       step_controller{1e-6, 1.01, 0.75, true});
  int acc = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i)
    if (mala_step(st, std_normal_logpdf, std_normal_grad, rng)) ++acc;
  CHECK(static_cast<double>(acc) / n >= 0.999);
}

TEST_CASE("MALA with adaptation samples the standard normal", "[mcmc]") {
  rng_stream rng(31415);
  auto st = make_chain(vec{0.0}, std_normal_logpdf, std_normal_grad,
                       step_controller{0.5, 1.01, 0.75, false});
  const int n = 200000;
  double m = 0.0, m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    mala_step(st, std_normal_logpdf, std_normal_grad, rng);
    adapt_step(st.ctrl, false);  // adaptation bookkeeping exercised below
    st.ctrl.step_size = 0.5;     // keep the kernel fixed for this moment test
    m += st.x[0];
    m2 += st.x[0] * st.x[0];
    m4 += std::pow(st.x[0], 4);
  }
  CHECK(m / n == Catch::Approx(0.0).margin(0.03));
  CHECK(m2 / n == Catch::Approx(1.0).margin(0.05));
  CHECK(m4 / n == Catch::Approx(3.0).margin(0.25));
}

TEST_CASE("adapted MALA equilibrates at the target acceptance rate",
          "[mcmc]") {
  rng_stream rng(112233);
  auto logpdf = [](const vec& x) { return -0.5 * sq_norm(x); };
  auto grad = [](const vec& x) { return scaled(x, -1.0); };
  auto st = make_chain(vec(10, 0.0), logpdf, grad,
                       step_controller{1.0, 1.01, 0.75, false});
  // warm up the controller, then measure
  for (int i = 0; i < 5000; ++i) adapt_step(st.ctrl, mala_step(st, logpdf, grad, rng));
  st.accepts = 0;
  st.proposals = 0;
  for (int i = 0; i < 50000; ++i)
    adapt_step(st.ctrl, mala_step(st, logpdf, grad, rng));
  CHECK(st.acceptance_rate() == Catch::Approx(0.75).margin(0.08));

  // a 50% controller equilibrates lower
  auto st2 = make_chain(vec(10, 0.0), logpdf, grad,
                        step_controller{1.0, 1.01, 0.5, false});
  for (int i = 0; i < 5000; ++i) adapt_step(st2.ctrl, mala_step(st2, logpdf, grad, rng));
  st2.accepts = 0;
  st2.proposals = 0;
  for (int i = 0; i < 50000; ++i)
    adapt_step(st2.ctrl, mala_step(st2, logpdf, grad, rng));
  CHECK(st2.acceptance_rate() == Catch::Approx(0.5).margin(0.08));
  CHECK(st2.ctrl.step_size > st.ctrl.step_size);
}

TEST_CASE("MALA matches mixture moments", "[mcmc]") {
  const auto mix = make_mixture({0.6, 0.4}, {vec{0.0}, vec{2.0}}, {0.5, 0.5});
  auto logpdf = [&](const vec& x) { return log_density(mix, x); };
  auto grad = [&](const vec& x) { return score(mix, x); };
  rng_stream rng(606060);
  auto st = make_chain(vec{1.0}, logpdf, grad,
                       step_controller{0.3, 1.01, 0.75, false});
  const int n = 400000;
  double m = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    adapt_step(st.ctrl, mala_step(st, logpdf, grad, rng));
    m += st.x[0];
    m2 += st.x[0] * st.x[0];
  }
  const double mean_true = 0.4 * 2.0;                       // 0.8
  const double second_true = 0.5 + 0.4 * 4.0;               // E[x^2]
  CHECK(m / n == Catch::Approx(mean_true).margin(0.03));
  CHECK(m2 / n == Catch::Approx(second_true).margin(0.08));
}

TEST_CASE("ULA with zero gradient is a random walk of variance 2 lambda",
          "[mcmc]") {
  auto flat = [](const vec&) { return 0.0; };
  auto zero_grad = [](const vec& x) { return vec(x.size(), 0.0); };
  rng_stream rng(8080);
  auto st = make_chain(vec{0.0}, flat, zero_grad,
                       step_controller{0.35, 1.01, 0.75, true});
  const int n = 200000;
  double acc = 0.0;
  double prev = 0.0;
  for (int i = 0; i < n; ++i) {
    ula_step(st, flat, zero_grad, rng);
    const double inc = st.x[0] - prev;
    prev = st.x[0];
    acc += inc * inc;
  }
  CHECK(acc / n == Catch::Approx(2.0 * 0.35).epsilon(0.02));
}

TEST_CASE("run_chain retains the documented tail average", "[mcmc]") {
  auto logpdf = [](const vec& x) { return -0.5 * sq_norm(x); };
  auto grad = [](const vec& x) { return scaled(x, -1.0); };
  // mirror run: same seed, manual stepping
  rng_stream rng_a(424242), rng_b(424242);
  auto st_a = make_chain(vec{0.4}, logpdf, grad,
                         step_controller{0.2, 1.01, 0.75, false});
  auto st_b = st_a;
  const auto res = run_chain(st_a, logpdf, grad, 8, 0.5, rng_a);
  double manual = 0.0;
  for (int step = 0; step < 8; ++step) {
    adapt_step(st_b.ctrl, mala_step(st_b, logpdf, grad, rng_b));
    if (step >= 4) manual += st_b.x[0];
  }
  CHECK(res.mean_retained[0] == Catch::Approx(manual / 4.0).epsilon(1e-14));
  CHECK(res.steps == 8);

  // retained count is the ceiling: L=5, burn 0.5 -> 3 positions kept
  rng_stream rng_c(5), rng_d(5);
  auto st_c = make_chain(vec{0.4}, logpdf, grad,
                         step_controller{0.2, 1.01, 0.75, false});
  auto st_d = st_c;
  const auto res2 = run_chain(st_c, logpdf, grad, 5, 0.5, rng_c);
  double manual2 = 0.0;
  for (int step = 0; step < 5; ++step) {
    adapt_step(st_d.ctrl, mala_step(st_d, logpdf, grad, rng_d));
    if (step >= 2) manual2 += st_d.x[0];
  }
  CHECK(res2.mean_retained[0] == Catch::Approx(manual2 / 3.0).epsilon(1e-14));

  CHECK_THROWS_AS(run_chain(st_c, logpdf, grad, 0, 0.5, rng_c),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_chain(st_c, logpdf, grad, 4, 1.0, rng_c),
                  std::invalid_argument);
}

TEST_CASE("chains reject states where the target is not finite", "[mcmc]") {
  auto half_line = [](const vec& x) {
    return x[0] > 0.0 ? -x[0] : -kInf;
  };
  auto hl_grad = [](const vec& x) { return vec{x[0] > 0.0 ? -1.0 : 0.0}; };
  CHECK_THROWS_AS(make_chain(vec{-1.0}, half_line, hl_grad,
                             step_controller{0.1, 1.01, 0.75, false}),
                  numeric_error);
  rng_stream rng(13);
  auto st = make_chain(vec{0.05}, half_line, hl_grad,
                       step_controller{0.5, 1.01, 0.75, true});
  // proposals into the dead region are rejected, never accepted
  for (int i = 0; i < 2000; ++i) mala_step(st, half_line, hl_grad, rng);
  CHECK(st.x[0] > 0.0);
  CHECK(std::isfinite(st.log_density));
}
