#include <doctest.h>

#include <cmath>
#include <vector>

#include "pathchaos/model.hpp"

using namespace pathchaos;

TEST_CASE("kernel_eval values") {
  std::vector<double> x{3.7};
  CHECK(kernel_eval(KernelSpec::zero(), x)[0] == 0.0);
  std::vector<double> z{0.0};
  CHECK(kernel_eval(KernelSpec::sine_force(1.0, 1.0), z)[0] == 0.0);
  std::vector<double> one{1.0};
  CHECK(kernel_eval(KernelSpec::gauss_bump(1.0), one)[0] == doctest::Approx(0.36787944117144233).epsilon(1e-14));
  CHECK(kernel_eval(KernelSpec::linear(0.5), one)[0] == -0.5);
  std::vector<double> c{1.0, -2.0};
  std::vector<double> x2{0.3, 0.4};
  auto out = kernel_eval(KernelSpec::constant(c), x2);
  CHECK(out == c);
  CHECK(kernel_eval(KernelSpec::zero(), x2).size() == 2);
}

TEST_CASE("kernel_eval rejects a constant of the wrong length") {
  std::vector<double> x{1.0};
  CHECK_THROWS_AS(kernel_eval(KernelSpec::constant({1.0, 2.0}), x), DimensionMismatch);
}

TEST_CASE("kernel sup norms") {
  CHECK(kernel_sup_norm(KernelSpec::zero(), 1) == 0.0);
  CHECK(kernel_sup_norm(KernelSpec::sine_force(2.0, 3.0), 1) == 2.0);
  CHECK(kernel_sup_norm(KernelSpec::sine_force(2.0, 3.0), 4) == doctest::Approx(4.0));
  CHECK(kernel_sup_norm(KernelSpec::constant({3.0, 4.0}), 2) == doctest::Approx(5.0));
  // frozen from a grid search of r exp(-r^2) over [0, 5]
  CHECK(kernel_sup_norm(KernelSpec::gauss_bump(1.0), 1) == doctest::Approx(0.42888194248035333).epsilon(1e-14));
  double best = 0.0;
  for (int i = 0; i <= 500000; ++i) {
    const double r = 5.0 * i / 500000.0;
    best = std::max(best, r * std::exp(-r * r));
  }
  CHECK(kernel_sup_norm(KernelSpec::gauss_bump(1.0), 1) == doctest::Approx(best).epsilon(1e-9));
  CHECK_THROWS_AS(kernel_sup_norm(KernelSpec::linear(0.5), 1), UnboundedKernel);
}

TEST_CASE("sampled kernel values stay below the sup norm") {
  const KeyedStream s(12345);
  const std::vector<KernelSpec> kernels{KernelSpec::zero(), KernelSpec::constant({0.3, -1.2, 2.0}),
                                        KernelSpec::sine_force(1.5, 2.0),
                                        KernelSpec::gauss_bump(2.0)};
  for (const auto& k : kernels) {
    const double sup = kernel_sup_norm(k, 3);
    double worst = 0.0;
    for (std::uint64_t n = 0; n < 10000; ++n) {
      std::vector<double> x{4.0 * s.gaussian(3 * n), 4.0 * s.gaussian(3 * n + 1),
                            4.0 * s.gaussian(3 * n + 2)};
      const auto y = kernel_eval(k, x);
      worst = std::max(worst, std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]));
    }
    CHECK(worst <= sup + 1e-12);
  }
}

TEST_CASE("lambda_min_of") {
  CHECK(lambda_min_of(Eigen::MatrixXd::Identity(2, 2)) == doctest::Approx(1.0));
  Eigen::MatrixXd d(2, 2);
  d << 1, 0, 0, 2;
  CHECK(lambda_min_of(d) == doctest::Approx(1.0));
  Eigen::MatrixXd u(2, 2);
  u << 1, 1, 0, 1;
  CHECK(lambda_min_of(u) == doctest::Approx(0.3819660112501051).epsilon(1e-14));
  CHECK(lambda_min_of(u) == doctest::Approx((3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-14));
  Eigen::MatrixXd sing(2, 2);
  sing << 1, 1, 1, 1;
  CHECK_THROWS_AS(lambda_min_of(sing), DegenerateDiffusion);
}

TEST_CASE("lambda_min_of is invariant under right rotation") {
  const KeyedStream s(99);
  std::uint64_t ctr = 0;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd sigma(3, 3), g(3, 3);
    for (int i = 0; i < 9; ++i) sigma(i / 3, i % 3) = s.gaussian(ctr++);
    for (int i = 0; i < 9; ++i) g(i / 3, i % 3) = s.gaussian(ctr++);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    double a = 0.0, b = 0.0;
    try {
      a = lambda_min_of(sigma);
    } catch (const DegenerateDiffusion&) {
      continue;
    }
    b = lambda_min_of(sigma * q);
    CHECK(std::abs(a - b) <= 1e-9);
  }
}

TEST_CASE("SystemParams validation") {
  const auto p = SystemParams::isotropic(2, 2.0, 3.0, 0.5);
  CHECK(p.d() == 2);
  CHECK(p.lambda_min() == doctest::Approx(4.0));
  CHECK(p.lambda_mat().isApprox(4.0 * Eigen::MatrixXd::Identity(2, 2)));
  CHECK(p.mass() == 3.0);
  CHECK_THROWS_AS(SystemParams::isotropic(1, 1.0, 0.0), InvalidParameter);
  CHECK_THROWS_AS(SystemParams::isotropic(1, 1.0, -1.0), InvalidParameter);
  CHECK_THROWS_AS(SystemParams::isotropic(1, 1.0, 1.0, -0.1), InvalidParameter);
  CHECK_THROWS_AS(SystemParams::isotropic(1, 0.0), DegenerateDiffusion);
  const auto z = SystemParams::make_degenerate(Eigen::MatrixXd::Zero(1, 1));
  CHECK_THROWS_AS(z.require_nondegenerate(), DegenerateDiffusion);
  Eigen::MatrixXd rect(2, 3);
  rect << 1, 0, 1, 0, 1, 0;
  const auto r = SystemParams::make(rect);
  CHECK(r.d_prime() == 3);
  // |B|^2 <= |b|^2 / lambda for the weighting sigma^T Lambda^-1
  Eigen::Vector2d b(0.7, -1.3);
  const Eigen::VectorXd w = r.mismatch_weight() * b;
  CHECK(w.squaredNorm() <= b.squaredNorm() / r.lambda_min() + 1e-9);
}

TEST_CASE("TimeGrid") {
  const auto g = TimeGrid::make(1.0, 1e-3);
  CHECK(g.n_steps() == 1000);
  CHECK(std::abs(g.n_steps() * g.dt() - 1.0) <= 1e-12);
  const auto h = TimeGrid::make(1.0, 0.01);
  CHECK(h.step_at(0.0) == 0);
  CHECK(h.step_at(1.0) == 100);
  CHECK(h.step_at(0.5) == 50);
  CHECK_THROWS_AS(h.step_at(1.5), InvalidParameter);
  CHECK_THROWS_AS(h.step_at(-0.1), InvalidParameter);
  CHECK_THROWS_AS(TimeGrid::make(1.0, 0.3), InvalidParameter);
  CHECK_THROWS_AS(TimeGrid::make(-1.0, 0.1), InvalidParameter);
  CHECK_THROWS_AS(TimeGrid::make(0.01, 0.1), InvalidParameter);
}

TEST_CASE("InitialLaw sampling") {
  const auto pt = InitialLaw::point(Eigen::Vector2d(1.0, -2.0));
  std::vector<double> out(2);
  pt.sample(KeyedStream(1), out);
  CHECK(out[0] == 1.0);
  CHECK(out[1] == -2.0);

  const auto g = InitialLaw::gaussian(Eigen::VectorXd::Constant(1, 3.0), Eigen::MatrixXd::Constant(1, 1, 4.0));
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    std::vector<double> y(1);
    g.sample(KeyedStream(splitmix64(i)), y);
    sum += y[0];
    sq += y[0] * y[0];
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - 3.0) < 4.0 * 2.0 / std::sqrt(n));
  CHECK(sq / n - mean * mean == doctest::Approx(4.0).epsilon(0.05));

  const auto e = InitialLaw::empirical({1.0, 2.0, 3.0, 4.0}, 2);
  std::vector<double> r(2);
  e.sample(KeyedStream(7), r);
  CHECK(((r[0] == 1.0 && r[1] == 2.0) || (r[0] == 3.0 && r[1] == 4.0)));
  CHECK_THROWS(InitialLaw::empirical_file("/nonexistent/init.txt"));
}

TEST_CASE("keyed streams are pure functions of their key") {
  RngPolicy rng{42};
  std::vector<double> a(5), b(5);
  rng.stream(StreamTag::brownian, 3, 2, 7).gaussians(a);
  rng.stream(StreamTag::initial, 0, 0, 0).gaussians(b);
  rng.stream(StreamTag::brownian, 3, 2, 7).gaussians(b);
  CHECK(a == b);
  std::vector<double> c(5);
  rng.stream(StreamTag::brownian, 3, 2, 8).gaussians(c);
  CHECK(a != c);
}
