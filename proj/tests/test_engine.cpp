#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "pathchaos/engine.hpp"
#include "pathchaos/gaussian_oracle.hpp"
#include "pathchaos/parallel.hpp"

using namespace pathchaos;

namespace {

ParticleModel first_order(KernelSpec k, double sigma = 1.0) {
  return {Order::first, SystemParams::isotropic(1, sigma), std::move(k), {}};
}

ParticleModel second_order(KernelSpec k, double mass = 1.0, double gamma = 1.0) {
  return {Order::second, SystemParams::isotropic(1, 1.0, mass, gamma), std::move(k), {}};
}

InitialLaw std_gaussian(std::size_t dim) {
  return InitialLaw::gaussian(Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim));
}

// Single-snapshot cloud of given 1-d points on a one-step grid.
ReferenceCloud static_cloud(const std::vector<double>& pts) {
  const auto grid = TimeGrid::make(1.0, 1.0);
  std::vector<double> pos(pts);
  pos.insert(pos.end(), pts.begin(), pts.end());
  return ReferenceCloud(Order::first, pts.size(), 1, grid, std::move(pos), {}, {});
}

SampleStats mean_of(const std::vector<double>& v) { return sample_stats(v); }

// Sample variance with a delta-method standard error.
SampleStats variance_of(const std::vector<double>& v) {
  const double m = sample_stats(v).mean;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
  auto s = sample_stats(sq);
  s.mean *= static_cast<double>(v.size()) / static_cast<double>(v.size() - 1);
  return s;
}

}  // namespace

TEST_CASE("free flight with zero kernel and no noise") {
  const ParticleModel model{Order::second, SystemParams::make_degenerate(Eigen::MatrixXd::Zero(1, 1), 1.0, 0.0),
                            KernelSpec::zero(), {}};
  const auto grid = TimeGrid::make(1.0, 0.01);
  const auto b = simulate_interacting(model, InitialLaw::point(Eigen::Vector2d(0.5, 2.0)), grid, 3,
                                      RngPolicy{1}, 0);
  for (std::size_t s = 0; s <= grid.n_steps(); ++s) {
    CHECK(b.x(s, 1)[0] == doctest::Approx(0.5 + 2.0 * grid.time(s)).epsilon(1e-13));
    CHECK(b.v(s, 2)[0] == 2.0);
  }
}

TEST_CASE("constant kernel gives identical drift to every particle") {
  const auto model = ParticleModel{Order::second, SystemParams::isotropic(1, 1.0, 2.0, 0.0),
                                   KernelSpec::constant({1.5}), {}};
  const auto grid = TimeGrid::make(0.5, 0.01);
  const auto b = simulate_interacting(model, std_gaussian(2), grid, 2, RngPolicy{3}, 0);
  for (std::size_t s = 0; s < grid.n_steps(); ++s) {
    const double dv = (b.v(s + 1, 0)[0] - b.v(s + 1, 1)[0]) - (b.v(s, 0)[0] - b.v(s, 1)[0]);
    const double noise = (b.dw(s, 0)[0] - b.dw(s, 1)[0]) / 2.0;
    CHECK(dv == doctest::Approx(noise).epsilon(1e-12).scale(1e-12));
  }
}

TEST_CASE("second-order sine run matches an independent step-by-step recursion") {
  const auto params = SystemParams::isotropic(1, 1.0, 1.0, 1.0);
  const auto kernel = KernelSpec::sine_force(1.0, 1.0);
  const auto init = std_gaussian(2);
  const auto grid = TimeGrid::make(0.1, 1e-3);
  const RngPolicy rng{20240601};
  const std::size_t n = 4;
  const auto b = simulate_interacting_2nd(params, kernel, init, grid, n, rng, 5,
                                          SimulationOptions{PairwiseMode::direct});

  std::vector<double> x(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> z(2);
    init.sample(rng.stream(StreamTag::initial, 5, i, 0), z);
    x[i] = z[0];
    v[i] = z[1];
  }
  const double dt = 1e-3;
  for (std::size_t s = 0; s < grid.n_steps(); ++s) {
    std::vector<double> f(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) f[i] += std::sin(x[i] - x[j]);
      f[i] /= 3.0;
    }
    std::vector<double> nx(n), nv(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> dw(1);
      rng.stream(StreamTag::brownian, 5, i, s).gaussians(dw);
      const double w = dw[0] * std::sqrt(dt);
      nx[i] = x[i] + v[i] * dt;
      nv[i] = v[i] + (f[i] - v[i]) * dt / 1.0 + w / 1.0;
    }
    x = nx;
    v = nv;
  }
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(b.x(grid.n_steps(), i)[0] == x[i]);
    CHECK(b.v(grid.n_steps(), i)[0] == v[i]);
  }
}

TEST_CASE("separable pairwise sums agree with the double loop") {
  const KeyedStream s(17);
  for (const auto& k : {KernelSpec::sine_force(1.3, 0.7), KernelSpec::linear(0.5), KernelSpec::zero(),
                        KernelSpec::constant({0.2, -0.4})}) {
    const std::size_t n = 37, d = 2;
    std::vector<double> xs(n * d);
    for (std::size_t j = 0; j < xs.size(); ++j) xs[j] = 3.0 * s.gaussian(j);
    std::vector<double> fast(n * d), slow(n * d);
    pairwise_drift(k, xs, n, d, fast, PairwiseMode::automatic);
    pairwise_drift(k, xs, n, d, slow, PairwiseMode::direct);
    for (std::size_t j = 0; j < xs.size(); ++j) CHECK(std::abs(fast[j] - slow[j]) <= 1e-12);
  }
}

TEST_CASE("zero kernel first order is pure Brownian motion") {
  const Eigen::MatrixXd sigma = (Eigen::MatrixXd(2, 2) << 1.0, 0.5, 0.0, 2.0).finished();
  const ParticleModel model{Order::first, SystemParams::make(sigma), KernelSpec::zero(), {}};
  const auto grid = TimeGrid::make(0.1, 0.01);
  const auto b = simulate_interacting(model, std_gaussian(2), grid, 3, RngPolicy{9}, 2);
  for (std::size_t s = 0; s < grid.n_steps(); ++s)
    for (std::size_t i = 0; i < 3; ++i) {
      const auto dw = b.dw(s, i);
      CHECK(b.x(s + 1, i)[0] - b.x(s, i)[0] == doctest::Approx(dw[0] + 0.5 * dw[1]).epsilon(1e-12));
      CHECK(b.x(s + 1, i)[1] - b.x(s, i)[1] == doctest::Approx(2.0 * dw[1]).epsilon(1e-12));
    }
}

TEST_CASE("linear kernel N=2 keeps a centered mean") {
  const auto model = first_order(KernelSpec::linear(0.5));
  const auto grid = TimeGrid::make(1.0, 1e-3);
  const std::size_t r = 10000;
  std::vector<double> x(r);
  for (std::size_t k = 0; k < r; ++k)
    x[k] = simulate_interacting(model, std_gaussian(1), grid, 2, RngPolicy{11}, k).x(grid.n_steps(), 0)[0];
  const auto st = mean_of(x);
  CHECK(std::abs(st.mean) <= 3.0 * st.std_error);
}

TEST_CASE("linear kernel N=16 variance matches the oracle") {
  const auto model = first_order(KernelSpec::linear(0.5));
  const auto grid = TimeGrid::make(1.0, 1e-3);
  const std::size_t r = 5000;
  std::vector<double> x(r);
  for (std::size_t k = 0; k < r; ++k)
    x[k] = simulate_interacting(model, std_gaussian(1), grid, 16, RngPolicy{12}, k).x(grid.n_steps(), 0)[0];
  const auto oracle = LinearOracle::from_model(model);
  const auto traj = propagate_interacting(oracle, ExchangeableGaussian::scalar(16, 0.0, 1.0, 0.0), grid);
  const auto v = variance_of(x);
  CHECK(std::abs(v.mean - traj.back().s(0, 0)) <= 3.0 * v.std_error);
}

TEST_CASE("reference cloud sanity") {
  const auto grid = TimeGrid::make(1.0, 1e-2);
  const RngPolicy rng{21};
  SUBCASE("zero kernel keeps the initial mean") {
    const auto init = InitialLaw::gaussian(Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Identity(1, 1));
    const auto cloud = build_reference_cloud(first_order(KernelSpec::zero()), init, grid, 5000, rng, 1);
    const auto xs = cloud.positions_at(grid.n_steps());
    const auto st = mean_of({xs.begin(), xs.end()});
    CHECK(std::abs(st.mean - 2.0) <= 3.0 * st.std_error);
    CHECK(cloud.provenance().refine_iters == 1);
  }
  SUBCASE("constant kernel translates the cloud") {
    const auto cloud = build_reference_cloud(first_order(KernelSpec::constant({0.7})), std_gaussian(1), grid, 5000, rng, 1);
    const auto xs = cloud.positions_at(grid.n_steps());
    const auto st = mean_of({xs.begin(), xs.end()});
    CHECK(std::abs(st.mean - 0.7) <= 3.0 * st.std_error);
  }
  SUBCASE("linear kernel cloud variance follows the mean-field ODE") {
    const auto fine = TimeGrid::make(1.0, 1e-3);
    const auto cloud = build_reference_cloud(first_order(KernelSpec::linear(0.5)),
                                             InitialLaw::gaussian(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 2.0)),
                                             fine, 10000, rng, 1);
    for (double t : {0.5, 1.0}) {
      const auto xs = cloud.positions_at(fine.step_at(t));
      const auto v = variance_of({xs.begin(), xs.end()});
      CHECK(std::abs(v.mean - meanfield_variance_closed_form(0.5, 1.0, 2.0, t)) <= 3.0 * v.std_error);
    }
  }
  CHECK_THROWS_AS(build_reference_cloud(first_order(KernelSpec::zero()), std_gaussian(1), grid, 50, rng, 0),
                  InvalidParameter);
}

TEST_CASE("meanfield drift") {
  const auto pts = [] {
    std::vector<double> p(1000000);
    KeyedStream(5).gaussians(p);
    return p;
  }();
  const auto cloud = static_cloud(pts);
  std::vector<double> x{std::numbers::pi / 2.0};
  CHECK(meanfield_drift(cloud, KernelSpec::zero(), 0, x)[0] == 0.0);
  CHECK(meanfield_drift(cloud, KernelSpec::constant({1.25}), 0, x)[0] == 1.25);
  const double got = meanfield_drift(cloud, KernelSpec::sine_force(1.0, 1.0), 0, x)[0];
  std::vector<double> terms(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) terms[i] = std::sin(x[0] - pts[i]);
  const double se = sample_stats(terms).std_error;
  CHECK(std::abs(got - std::exp(-0.5)) <= 3.0 * se);

  MeanFieldField fast(cloud, KernelSpec::sine_force(1.0, 1.0));
  MeanFieldField slow(cloud, KernelSpec::sine_force(1.0, 1.0), PairwiseMode::direct);
  std::vector<double> a(1), b(1);
  fast.evaluate(0, x, a);
  slow.evaluate(0, x, b);
  CHECK(std::abs(a[0] - b[0]) <= 1e-12);
  CHECK(std::abs(a[0] - got) <= 1e-12);
}

TEST_CASE("mean-field driven runs are synchronously coupled") {
  const auto grid = TimeGrid::make(1.0, 1e-2);
  const RngPolicy rng{33};
  for (const auto& k : {KernelSpec::zero(), KernelSpec::constant({0.3})}) {
    const auto model = second_order(k);
    const auto cloud = build_reference_cloud(model, std_gaussian(2), grid, 200, rng, 0);
    MeanFieldField field(cloud, k);
    const auto a = simulate_interacting(model, std_gaussian(2), grid, 5, rng, 4);
    const auto b = simulate_meanfield_driven(model, field, std_gaussian(2), grid, 5, rng, 4);
    CHECK(a.positions == b.positions);
    CHECK(a.velocities == b.velocities);
    CHECK(a.increments == b.increments);
  }
  const auto model = second_order(KernelSpec::sine_force(1.0, 1.0));
  const auto cloud = build_reference_cloud(model, std_gaussian(2), grid, 2000, rng, 1);
  MeanFieldField field(cloud, model.kernel);
  const auto a = simulate_interacting(model, std_gaussian(2), grid, 8, rng, 1);
  const auto b = simulate_meanfield_driven(model, field, std_gaussian(2), grid, 8, rng, 1);
  CHECK(a.increments == b.increments);
  auto dev = [&](std::size_t s) {
    double m = 0.0;
    for (std::size_t i = 0; i < 8; ++i) m = std::max(m, std::abs(a.x(s, i)[0] - b.x(s, i)[0]));
    return m;
  };
  CHECK(dev(0) == 0.0);
  CHECK(dev(10) > 0.0);
  CHECK(dev(grid.n_steps()) > dev(10));
}

TEST_CASE("replay reproduces stored bundles") {
  const auto grid = TimeGrid::make(0.5, 1e-2);
  const RngPolicy rng{44};
  for (Order o : {Order::first, Order::second}) {
    const ParticleModel model{o, SystemParams::isotropic(1, 0.8, 1.5, 0.3), KernelSpec::gauss_bump(1.0), {}};
    const auto init = std_gaussian(model.state_dim());
    const auto b = simulate_interacting(model, init, grid, 6, rng, 3);
    const auto r = replay_interacting(model, grid, 6, b.initial_states(), b.increments);
    CHECK(r.positions == b.positions);
    CHECK(r.velocities == b.velocities);
  }
}

TEST_CASE("solution map") {
  const auto grid = TimeGrid::make(0.5, 1e-2);
  const RngPolicy rng{55};
  SUBCASE("zero noise path gives free flight") {
    const auto model = second_order(KernelSpec::zero(), 1.0, 0.0);
    const auto cloud = build_reference_cloud(model, std_gaussian(2), grid, 100, rng, 0);
    MeanFieldField field(cloud, model.kernel);
    const auto theta = make_noise_path(2, 1, grid, std::vector<double>(grid.n_steps() * 2, 0.0));
    const std::vector<double> init{1.0, -1.0, 0.0, 3.0};
    const auto b = solution_map_phi(theta, model, field, init);
    CHECK(b.x(grid.n_steps(), 0)[0] == doctest::Approx(1.0 - 0.5));
    CHECK(b.x(grid.n_steps(), 1)[0] == doctest::Approx(1.5));
    CHECK(theta.value(0, 1)[0] == 0.0);
  }
  for (Order o : {Order::first, Order::second}) {
    const ParticleModel model{o, SystemParams::isotropic(1, 1.0, 1.0, 1.0), KernelSpec::sine_force(1.0, 1.0), {}};
    const auto init = std_gaussian(model.state_dim());
    const auto cloud = build_reference_cloud(model, init, grid, 1000, rng, 1);
    MeanFieldField field(cloud, model.kernel);

    const auto mf = simulate_meanfield_driven(model, field, init, grid, 4, rng, 7);
    const auto phi2 = solution_map_phi(driving_noise(mf, model.params), model, field, mf.initial_states());
    CHECK(phi2.positions == mf.positions);
    CHECK(phi2.velocities == mf.velocities);

    const auto ia = simulate_interacting(model, init, grid, 4, rng, 7);
    const auto phi1 = solution_map_phi(interacting_noise(ia, model, field), model, field, ia.initial_states());
    double worst = 0.0;
    for (std::size_t j = 0; j < ia.positions.size(); ++j)
      worst = std::max(worst, std::abs(ia.positions[j] - phi1.positions[j]));
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("time marginal") {
  const auto grid = TimeGrid::make(1.0, 0.01);
  const auto model = second_order(KernelSpec::sine_force(1.0, 1.0));
  const auto b = simulate_interacting(model, std_gaussian(2), grid, 3, RngPolicy{66}, 0);
  const auto m0 = time_marginal(b, 0.0);
  CHECK(m0.values == b.initial_states());
  CHECK(time_marginal(b, 1.0).step == 100);
  const auto half = time_marginal(b, 0.5, MarginalPart::velocities);
  CHECK(half.step == 50);
  CHECK(half.dim == 1);
  CHECK(half.values[2] == b.v(50, 2)[0]);
  CHECK(time_marginal(b, 0.5, MarginalPart::positions).values[1] == b.x(50, 1)[0]);
  CHECK_THROWS_AS(time_marginal(b, 1.5), InvalidParameter);
}

TEST_CASE("error paths") {
  const auto grid = TimeGrid::make(1.0, 0.1);
  const auto model = first_order(KernelSpec::sine_force(1.0, 1.0));
  CHECK_THROWS_AS(simulate_interacting(model, std_gaussian(1), grid, 1, RngPolicy{1}, 0), TooFewParticles);
  CHECK_THROWS_AS(simulate_interacting(model, std_gaussian(2), grid, 3, RngPolicy{1}, 0), DimensionMismatch);

  ParticleModel blow = first_order(KernelSpec::zero());
  blow.drift = [](std::span<const double> x, std::span<double> out) { out[0] = 1e308 * x[0]; };
  try {
    simulate_interacting(blow, InitialLaw::point(Eigen::VectorXd::Constant(1, 1.0)), grid, 2, RngPolicy{1}, 0);
    FAIL("expected a blow-up");
  } catch (const NumericalBlowup& e) {
    CHECK(e.step() == 2);
  }

  const auto cloud = build_reference_cloud(model, std_gaussian(1), TimeGrid::make(1.0, 0.05), 100, RngPolicy{1}, 0);
  MeanFieldField field(cloud, model.kernel);
  CHECK_THROWS_AS(simulate_meanfield_driven(model, field, std_gaussian(1), grid, 2, RngPolicy{1}, 0), GridMismatch);
}

TEST_CASE("second-order velocity variance scales as T / m^2") {
  const auto grid = TimeGrid::make(1.0, 1e-2);
  for (double m : {0.5, 2.0}) {
    const auto model = second_order(KernelSpec::zero(), m, 0.0);
    const std::size_t r = 4000;
    std::vector<double> v(r);
    for (std::size_t k = 0; k < r; ++k)
      v[k] = simulate_interacting(model, InitialLaw::point(Eigen::Vector2d(0.0, 0.0)), grid, 2, RngPolicy{77}, k)
                 .v(grid.n_steps(), 0)[0];
    const auto st = variance_of(v);
    CHECK(std::abs(st.mean - 1.0 / (m * m)) <= 3.0 * st.std_error);
  }
}

TEST_CASE("halving dt moves the linear-kernel variance toward the oracle") {
  const std::size_t n = 32, r = 10000;
  const auto model = first_order(KernelSpec::linear(10.0));
  const auto init = std_gaussian(1);
  const auto fine = TimeGrid::make(1.0, 2.5e-3);
  const RngPolicy rng{88};
  const std::vector<std::size_t> levels{4, 2, 1};
  std::vector<std::vector<double>> xs(levels.size());
  for (std::size_t k = 0; k < r; ++k) {
    const auto b = simulate_interacting(model, init, fine, n, rng, k);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      // coarse increments are sums of the fine ones, so every level sees the same paths
      const auto grid = TimeGrid::make(1.0, 2.5e-3 * static_cast<double>(levels[l]));
      std::vector<double> inc(grid.n_steps() * n, 0.0);
      for (std::size_t s = 0; s < fine.n_steps(); ++s)
        for (std::size_t i = 0; i < n; ++i) inc[(s / levels[l]) * n + i] += b.dw(s, i)[0];
      const auto c = replay_interacting(model, grid, n, b.initial_states(), inc);
      for (std::size_t i = 0; i < n; ++i) xs[l].push_back(c.x(grid.n_steps(), i)[0]);
    }
  }
  std::vector<double> var;
  for (const auto& x : xs) var.push_back(variance_of(x).mean);
  const auto traj = propagate_interacting(LinearOracle::from_model(model),
                                          ExchangeableGaussian::scalar(n, 0.0, 1.0, 0.0), fine);
  const double s = traj.back().s(0, 0);
  CHECK(std::abs(var[0] - s) > std::abs(var[1] - s));
  CHECK(std::abs(var[1] - s) > std::abs(var[2] - s));
}

TEST_CASE("cloud dump round-trips bit-exactly") {
  const auto grid = TimeGrid::make(0.2, 0.01);
  for (Order o : {Order::first, Order::second}) {
    const ParticleModel model{o, SystemParams::isotropic(2, 1.0), KernelSpec::sine_force(1.0, 1.0), {}};
    const auto cloud = build_reference_cloud(model, std_gaussian(model.state_dim()), grid, 100, RngPolicy{3}, 0);
    std::stringstream ss;
    write_cloud(ss, cloud);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 4) == "MFCL");
    CHECK(bytes.size() == 4 + 4 + 8 + 4 + 4 + 8 + 8 + 8 * 21 * 100 * model.state_dim());
    const auto back = read_cloud(ss);
    CHECK(back.positions() == cloud.positions());
    CHECK(back.velocities() == cloud.velocities());
    CHECK(back.grid() == cloud.grid());
    CHECK(back.order() == o);
  }
  std::stringstream bad("XXXX");
  CHECK_THROWS(read_cloud(bad));
}
