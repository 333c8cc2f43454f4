#include <random>

#include <doctest.h>
#include <Eigen/Dense>

#include "qjump/markov.hpp"

using namespace qjump::markov;

namespace {

Eigen::MatrixXd random_rates(std::mt19937_64& eng, int n, double scale) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) r(i, j) = scale * u(eng);
  return r;
}

// Null-space stationary vector, independent of the library's least-squares path.
Eigen::VectorXd stationary_kernel(const Eigen::MatrixXd& gen) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gen.transpose());
  lu.setThreshold(1e-10);
  Eigen::MatrixXd ker = lu.kernel();
  Eigen::VectorXd pi = ker.col(0);
  if (pi.sum() < 0.0) pi = -pi;
  return pi / pi.sum();
}

}  // namespace

TEST_SUITE("markov") {

TEST_CASE("generator rows sum to zero and ignore the input diagonal") {
  Eigen::MatrixXd rates(2, 2);
  rates << 123.0, 18.0, 40.0, -7.0;
  Eigen::MatrixXd q = generator(rates);
  CHECK(q(0, 1) == 18.0);
  CHECK(q(1, 0) == 40.0);
  CHECK(q(0, 0) == -18.0);
  CHECK(q(1, 1) == -40.0);
  for (int i = 0; i < 2; ++i) CHECK(q.row(i).sum() == 0.0);
}

TEST_CASE("propagator is row-stochastic") {
  std::mt19937_64 eng(7);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + static_cast<int>(eng() % 4);
    Eigen::MatrixXd q = generator(random_rates(eng, n, 50.0));
    for (double dt : {1e-5, 1e-3, 0.1, 10.0}) {
      Eigen::MatrixXd t = propagator(q, dt);
      for (int i = 0; i < n; ++i) {
        CHECK(t.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        for (int j = 0; j < n; ++j) CHECK(t(i, j) >= -1e-14);
      }
    }
  }
}

TEST_CASE("propagator at dt = 0 is the identity") {
  std::mt19937_64 eng(8);
  Eigen::MatrixXd q = generator(random_rates(eng, 3, 40.0));
  CHECK((propagator(q, 0.0) - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-14);
}

TEST_CASE("semigroup property exp(Q a) exp(Q b) = exp(Q (a+b))") {
  std::mt19937_64 eng(9);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 2 + static_cast<int>(eng() % 3);
    Eigen::MatrixXd q = generator(random_rates(eng, n, 80.0));
    std::uniform_real_distribution<double> u(1e-4, 0.05);
    double a = u(eng), b = u(eng);
    Eigen::MatrixXd lhs = propagator(q, a) * propagator(q, b);
    Eigen::MatrixXd rhs = propagator(q, a + b);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("two-state propagator matches the closed form") {
  Eigen::MatrixXd rates(2, 2);
  rates << 0.0, 18.0, 40.0, 0.0;
  Eigen::MatrixXd q = generator(rates);
  double total = 58.0, dt = 0.013;
  double decay = std::exp(-total * dt);
  // p(1->0)(dt) for a telegraph with rates r01 = 18 (0->1), r10 = 40 (1->0).
  double p10 = (40.0 / total) * (1.0 - decay);
  double p01 = (18.0 / total) * (1.0 - decay);
  Eigen::MatrixXd t = propagator(q, dt);
  CHECK(t(1, 0) == doctest::Approx(p10).epsilon(1e-12));
  CHECK(t(0, 1) == doctest::Approx(p01).epsilon(1e-12));
}

TEST_CASE("propagate applies a row vector through the matrix") {
  Eigen::MatrixXd trans(2, 2);
  trans << 0.9, 0.1, 0.3, 0.7;
  Eigen::VectorXd p(2);
  p << 0.25, 0.75;
  Eigen::VectorXd out = propagate(p, trans);
  CHECK(out(0) == doctest::Approx(0.25 * 0.9 + 0.75 * 0.3).epsilon(1e-15));
  CHECK(out(1) == doctest::Approx(0.25 * 0.1 + 0.75 * 0.7).epsilon(1e-15));
}

TEST_CASE("stationary distribution solves pi Q = 0") {
  std::mt19937_64 eng(10);
  for (int trial = 0; trial < 25; ++trial) {
    int n = 2 + static_cast<int>(eng() % 4);
    Eigen::MatrixXd q = generator(random_rates(eng, n, 60.0));
    Eigen::VectorXd pi = stationary(q);
    CHECK(pi.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pi.minCoeff() >= 0.0);
    CHECK((q.transpose() * pi).cwiseAbs().maxCoeff() < 1e-8 * 60.0);
    Eigen::VectorXd ref = stationary_kernel(q);
    CHECK((pi - ref).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("two-state stationary weights are the rate ratio") {
  Eigen::MatrixXd rates(2, 2);
  rates << 0.0, 18.0, 40.0, 0.0;
  Eigen::VectorXd pi = stationary(generator(rates));
  CHECK(pi(0) == doctest::Approx(40.0 / 58.0).epsilon(1e-12));
  CHECK(pi(1) == doctest::Approx(18.0 / 58.0).epsilon(1e-12));
}

TEST_CASE("stationary matches long-time propagation") {
  std::mt19937_64 eng(11);
  Eigen::MatrixXd q = generator(random_rates(eng, 3, 30.0));
  Eigen::VectorXd pi = stationary(q);
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(3);
  p0(2) = 1.0;
  Eigen::VectorXd p_inf = propagate(p0, propagator(q, 100.0));
  CHECK((pi - p_inf).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("generator_log inverts the propagator") {
  std::mt19937_64 eng(12);
  for (int trial = 0; trial < 15; ++trial) {
    int n = 2 + static_cast<int>(eng() % 3);
    Eigen::MatrixXd q = generator(random_rates(eng, n, 40.0));
    double dt = 1e-3;
    GeneratorEstimate est = generator_log(propagator(q, dt), dt);
    CHECK(est.valid);
    CHECK((est.rates - q).cwiseAbs().maxCoeff() < 1e-6 * 40.0);
  }
}

TEST_CASE("generator_log of the identity is zero") {
  GeneratorEstimate est = generator_log(Eigen::MatrixXd::Identity(3, 3), 0.01);
  CHECK(est.valid);
  CHECK(est.rates.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("generator_log falls back on strongly mixing matrices") {
  // Eigenvalue -0.3 < 0: no real principal logarithm exists.
  Eigen::MatrixXd trans(2, 2);
  trans << 0.4, 0.6, 0.7, 0.3;
  double dt = 0.001;
  GeneratorEstimate est = generator_log(trans, dt);
  CHECK_FALSE(est.valid);
  CHECK(est.rates(0, 1) == doctest::Approx(trans(0, 1) / dt).epsilon(1e-12));
  CHECK(est.rates(1, 0) == doctest::Approx(trans(1, 0) / dt).epsilon(1e-12));
}

}  // TEST_SUITE
