#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "pathchaos/info_metrics.hpp"

using namespace pathchaos;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

ReferenceCloud gaussian_snapshot(std::size_t m, std::uint64_t seed) {
  std::vector<double> pts(m);
  KeyedStream(seed).gaussians(pts);
  std::vector<double> pos(pts);
  pos.insert(pos.end(), pts.begin(), pts.end());
  return ReferenceCloud(Order::first, m, 1, TimeGrid::make(1.0, 1.0), std::move(pos), {}, {});
}

std::vector<double> normals(std::size_t n, double mean, double sd, std::uint64_t seed) {
  std::vector<double> v(n);
  KeyedStream(seed).gaussians(v);
  for (double& x : v) x = mean + sd * x;
  return v;
}

}  // namespace

TEST_CASE("discrete measures and channels validate their input") {
  CHECK_THROWS_AS(DiscreteMeasure::make({0.5, 0.6}), InvalidParameter);
  CHECK_THROWS_AS(DiscreteMeasure::make({0.5, -0.5, 1.0}), InvalidParameter);
  CHECK_THROWS_AS(DiscreteMeasure::make({0.5, 0.5}, {"a", "a"}), InvalidParameter);
  CHECK(DiscreteMeasure::make({0.25, 0.75}).labels()[1] == "1");
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 0.0, 1.0;
  CHECK_THROWS_AS(Channel::make(bad), InvalidParameter);
  const auto p = DiscreteMeasure::make({0.5, 0.5});
  CHECK_THROWS_AS(Channel::identity(3).push(p), DimensionMismatch);
}

TEST_CASE("f-divergence values") {
  const auto p = DiscreteMeasure::make({0.2, 0.3, 0.5});
  for (auto f : {FDivergence::kl, FDivergence::tv, FDivergence::chi2}) CHECK(f_divergence(p, p, f) == 0.0);
  const auto pt = DiscreteMeasure::make({1.0, 0.0});
  const auto half = DiscreteMeasure::make({0.5, 0.5});
  CHECK(f_divergence(pt, half, FDivergence::kl) == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  CHECK(f_divergence(DiscreteMeasure::make({0.75, 0.25}), DiscreteMeasure::make({0.25, 0.75}), FDivergence::tv) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f_divergence(half, pt, FDivergence::kl) == kInf);
  CHECK(f_divergence(half, pt, FDivergence::chi2) == kInf);
  CHECK(f_divergence(half, pt, FDivergence::tv) == doctest::Approx(0.5));
  CHECK(to_string(FDivergence::chi2) == "chi2");
}

TEST_CASE("KL is nonnegative and vanishes only on equal measures") {
  const RngPolicy rng{1234};
  for (std::uint64_t c = 0; c < 1000; ++c) {
    const auto st = rng.stream(StreamTag::fuzz, c, 99, 0);
    const auto p = random_measure(st, 5, 0);
    const auto q = random_measure(st, 5, 100);
    CHECK(f_divergence(p, q, FDivergence::kl) >= -1e-10);
    CHECK(std::abs(f_divergence(p, p, FDivergence::kl)) <= 1e-10);
    if (p.probs() != q.probs()) CHECK(f_divergence(p, q, FDivergence::kl) > 0.0);
  }
}

TEST_CASE("data processing") {
  const auto p = DiscreteMeasure::make({0.1, 0.2, 0.3, 0.4});
  const auto q = DiscreteMeasure::make({0.4, 0.3, 0.2, 0.1});
  for (auto f : {FDivergence::kl, FDivergence::tv, FDivergence::chi2}) {
    const auto id = dpi_check(p, q, Channel::identity(4), f);
    CHECK(id.lhs == doctest::Approx(id.rhs).epsilon(1e-14));
    CHECK(id.holds);
    const auto collapse = dpi_check(p, q, Channel::make(Eigen::MatrixXd::Ones(4, 1)), f);
    CHECK(collapse.lhs == doctest::Approx(0.0).scale(1.0));
    CHECK(collapse.holds);
    const auto fz = dpi_fuzz(1000, 4, f, 7);
    CHECK(fz.cases == 1000);
    CHECK(fz.violations == 0);
    CHECK(fz.max_excess <= 1e-10);
  }
}

TEST_CASE("Fenchel-Young") {
  const auto rho = DiscreteMeasure::make({0.1, 0.6, 0.3});
  const std::vector<double> c{2.0, 2.0, 2.0};
  const auto eq = fenchel_young_check(rho, rho, c, 0.7);
  CHECK(eq.lhs == doctest::Approx(2.0));
  CHECK(eq.rhs == doctest::Approx(2.0).epsilon(1e-14));
  const std::vector<double> f{-1.0, 0.5, 3.0};
  const auto jensen = fenchel_young_check(rho, rho, f, 1.0);
  double ef = 0.0, eexp = 0.0;
  for (int i = 0; i < 3; ++i) {
    ef += rho[i] * f[i];
    eexp += rho[i] * std::exp(f[i]);
  }
  CHECK(jensen.rhs - jensen.lhs == doctest::Approx(std::log(eexp) - ef).epsilon(1e-12));
  CHECK(jensen.rhs - jensen.lhs >= 0.0);
  const auto fz = fenchel_young_fuzz(1000, 5, 8);
  CHECK(fz.violations == 0);
  CHECK(fz.max_excess <= 1e-10);
  CHECK_THROWS_AS(fenchel_young_check(rho, DiscreteMeasure::make({0.5, 0.5, 0.0}), f, 1.0), InvalidParameter);
}

TEST_CASE("Gaussian KL and the additive noise channel") {
  const auto p = GaussianMeasure::scalar(0.0, 1.0);
  const auto q = GaussianMeasure::scalar(1.0, 1.0);
  CHECK(std::abs(gaussian_kl(p, q) - 0.5) <= 1e-12);
  CHECK(gaussian_kl(p, p) == 0.0);
  const Eigen::MatrixXd noise = Eigen::MatrixXd::Constant(1, 1, 1.0);
  CHECK(std::abs(gaussian_kl(add_gaussian_noise(p, noise), add_gaussian_noise(q, noise)) - 0.25) <= 1e-12);
  CHECK(gaussian_kl(p, GaussianMeasure::scalar(0.0, 4.0)) == doctest::Approx(0.5 * (0.25 - 1.0 + std::log(4.0))));
  CHECK_THROWS_AS(GaussianMeasure::scalar(0.0, 0.0), InvalidParameter);
  CHECK_THROWS_AS(gaussian_kl(p, GaussianMeasure::make(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity())),
                  DimensionMismatch);
}

TEST_CASE("Pinsker") {
  CHECK(pinsker_tv(0.0) == 0.0);
  CHECK(pinsker_tv(0.5) == 0.5);
  CHECK(pinsker_tv(2.0 * std::numbers::ln2) == doctest::Approx(0.83255461115769769).epsilon(1e-14));
  CHECK_THROWS_AS(pinsker_tv(-0.1), InvalidParameter);
  for (double mu : {0.0, 0.3, 1.0, 2.5})
    for (double v : {0.25, 1.0, 2.0, 4.0, 9.0}) {
      const double tv = gaussian_tv_1d(0.0, 1.0, mu, v);
      CHECK(tv >= 0.0);
      CHECK(tv <= 1.0);
      CHECK(pinsker_tv(gaussian_kl(GaussianMeasure::scalar(0.0, 1.0), GaussianMeasure::scalar(mu, v))) >= tv - 1e-12);
    }
  CHECK(gaussian_tv_1d(0.0, 1.0, 1.0, 1.0) == doctest::Approx(std::erf(0.5 / std::sqrt(2.0))).epsilon(1e-14));
}

TEST_CASE("linear scaling") {
  const auto ref = MeanFieldGaussian::scalar(0.0, 1.0);
  const auto prod = linear_scaling_check(ExchangeableGaussian::scalar(6, 0.0, 1.0, 0.0), ref, 3);
  CHECK(prod.per_k == doctest::Approx(0.0).scale(1.0));
  CHECK(prod.per_n == doctest::Approx(0.0).scale(1.0));
  CHECK(prod.holds);
  const auto joint = ExchangeableGaussian::scalar(8, 0.0, 1.2, 0.1);
  const auto full = linear_scaling_check(joint, ref, 8);
  CHECK(full.per_k == full.per_n);
  double prev = -1.0;
  for (std::size_t k : {1, 2, 4}) {
    const auto r = linear_scaling_check(joint, ref, k);
    CHECK(r.holds);
    CHECK(r.per_k >= prev);
    CHECK(r.per_k <= r.per_n + 1e-10);
    prev = r.per_k;
    const auto dense = linear_scaling_check(GaussianMeasure::make(joint.full_mean(), joint.full_covariance()), 8,
                                            GaussianMeasure::scalar(0.0, 1.0), k);
    CHECK(dense.per_k == doctest::Approx(r.per_k).epsilon(1e-10));
    CHECK(dense.per_n == doctest::Approx(r.per_n).epsilon(1e-10));
  }
  Eigen::MatrixXd cov = joint.full_covariance();
  cov(0, 0) = 1.5;
  CHECK_THROWS_AS(linear_scaling_check(GaussianMeasure::make(joint.full_mean(), cov), 8,
                                       GaussianMeasure::scalar(0.0, 1.0), 2),
                  InvalidParameter);
}

TEST_CASE("k-NN KL estimate") {
  const auto a = normals(100000, 0.0, 1.0, 1);
  const auto b = normals(100000, 0.0, 2.0, 2);
  CHECK(std::abs(knn_kl_estimate(a, b, 1) - 0.5 * (0.25 - 1.0 + std::log(4.0))) <= 0.05);
  const auto c = normals(10000, 0.0, 1.0, 3);
  const auto e = normals(10000, 0.0, 1.0, 4);
  CHECK(std::abs(knn_kl_estimate(c, e, 1)) < 0.05);
  // two-dimensional: independent pairs, KL adds over coordinates
  const auto p2 = normals(40000, 0.0, 1.0, 5);
  auto q2 = normals(40000, 0.0, 1.0, 6);
  for (std::size_t i = 0; i < q2.size(); i += 2) q2[i] += 1.0;
  CHECK(std::abs(knn_kl_estimate(p2, q2, 2) - 0.5) <= 0.05);
  CHECK(knn_kl_estimate(c, e, 1) == knn_kl_estimate(c, e, 1));

  std::vector<double> dup(c.begin(), c.begin() + 200);
  for (std::size_t i = 0; i < 50; ++i) dup[100 + i] = dup[i];
  CHECK(std::isfinite(knn_kl_estimate(dup, e, 1, 1, 3)));

  CHECK_THROWS_AS(knn_kl_estimate(std::vector<double>(40, 0.0), e, 1), InvalidParameter);
  CHECK_THROWS_AS(knn_kl_estimate(std::vector<double>(500, 0.0), std::vector<double>(500, 0.0), 5), DimensionMismatch);
}

TEST_CASE("concentration statistic") {
  const auto cloud = gaussian_snapshot(20000, 9);
  const RngPolicy rng{10};
  const double eta = 1.0 / (8.0 * std::numbers::sqrt2 * std::numbers::e);
  const auto cst = concentration_suite(cloud, KernelSpec::constant({0.5}), 1.0, 16, 0.05, 200, rng);
  CHECK(cst.moment == 1.0);
  CHECK(cst.moment_se == 0.0);
  const auto zero = concentration_suite(cloud, KernelSpec::zero(), 1.0, 16, 0.3, 200, rng);
  CHECK(zero.moment == 1.0);
  CHECK(zero.bound == 1.0);
  const auto two = concentration_suite(cloud, KernelSpec::sine_force(1.0, 1.0), 1.0, 2, eta, 200, rng);
  CHECK(two.moment == 1.0);
  const auto sine = concentration_suite(cloud, KernelSpec::sine_force(1.0, 1.0), 1.0, 16, eta, 20000, rng);
  CHECK(sine.bound == doctest::Approx(2.0));
  CHECK(sine.holds);
  CHECK(sine.moment > 1.0);
  const auto threaded = concentration_suite(cloud, KernelSpec::sine_force(1.0, 1.0), 1.0, 16, eta, 20000, rng, 3);
  CHECK(threaded.moment == sine.moment);
  CHECK_THROWS_AS(concentration_suite(cloud, KernelSpec::sine_force(1.0, 1.0), 1.0, 16, 2.5 * eta, 100, rng),
                  InvalidParameter);
  CHECK_THROWS_AS(concentration_suite(cloud, KernelSpec::linear(1.0), 1.0, 16, eta, 100, rng), UnboundedKernel);
}

TEST_CASE("Marcinkiewicz-Zygmund check") {
  const auto single = normals(5000, 0.0, 1.0, 11);
  for (std::size_t p : {2, 4}) {
    const auto c = mz_inequality_check(single, 1, p);
    CHECK(c.holds);
    CHECK(c.lhs * static_cast<double>(p - 1) == doctest::Approx(c.rhs).epsilon(1e-12));
  }
  const auto indep = normals(20000 * 5, 0.0, 1.0, 12);
  const auto two = mz_inequality_check(indep, 5, 2);
  CHECK(two.holds);
  CHECK(std::abs(two.lhs - two.rhs) <= 4.0 * two.se);
  CHECK_THROWS_AS(mz_inequality_check(indep, 5, 3), InvalidParameter);

  const auto cloud = gaussian_snapshot(20000, 13);
  const auto inc = mz_increments(cloud, KernelSpec::sine_force(1.0, 1.0), 1.0, 10, 20000, RngPolicy{14});
  CHECK(inc.size() == 200000);
  double mean = 0.0;
  for (double v : inc) mean += v;
  mean /= static_cast<double>(inc.size());
  CHECK(std::abs(mean) < 0.02);
  for (std::size_t p : {2, 4}) CHECK(mz_inequality_check(inc, 10, p).holds);
}
