#include "pathchaos/engine.hpp"

#include <cmath>
#include <utility>

#include "pathchaos/parallel.hpp"

namespace pathchaos {

namespace {

// out = sigma * dw
void apply_sigma(const Eigen::MatrixXd& sigma, std::span<const double> dw, std::span<double> out) {
  const auto rows = static_cast<std::size_t>(sigma.rows());
  const auto cols = static_cast<std::size_t>(sigma.cols());
  for (std::size_t k = 0; k < rows; ++k) {
    double acc = 0.0;
    for (std::size_t l = 0; l < cols; ++l)
      acc += sigma(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) * dw[l];
    out[k] = acc;
  }
}

PathBundle make_bundle(const ParticleModel& model, const TimeGrid& grid, std::size_t n,
                       bool with_increments) {
  PathBundle b;
  b.order = model.order;
  b.n_particles = n;
  b.d = model.d();
  b.d_prime = model.params.d_prime();
  b.grid = grid;
  const std::size_t rows = grid.n_steps() + 1;
  b.positions.assign(rows * n * b.d, 0.0);
  if (model.order == Order::second) b.velocities.assign(rows * n * b.d, 0.0);
  if (with_increments) b.increments.assign(grid.n_steps() * n * b.d_prime, 0.0);
  return b;
}

void check_particles(std::size_t n) {
  if (n < 2) throw TooFewParticles("interacting systems need N >= 2 particles");
}

// Explicit Euler-Maruyama shared by every integrator in this file.
//   first order:  x' = x + (F + b(x)) dt + w
//   second order: x' = x + v dt,  v' = v + (F - gamma v) dt / m + w / m
// F comes from interaction(step, positions, out) and w from forcing(step, out).
template <class Interaction, class Forcing>
void integrate(const ParticleModel& model, PathBundle& b, std::span<const double> initial,
               Interaction&& interaction, Forcing&& forcing) {
  const std::size_t n = b.n_particles;
  const std::size_t d = b.d;
  const std::size_t sd = model.state_dim();
  if (initial.size() != n * sd) throw DimensionMismatch("initial state array has wrong size");

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      b.positions[i * d + k] = initial[i * sd + k];
      if (model.order == Order::second) b.velocities[i * d + k] = initial[i * sd + d + k];
    }
  }
  for (std::size_t j = 0; j < n * sd; ++j)
    if (!std::isfinite(initial[j])) throw NumericalBlowup(0);

  const double dt = b.grid.dt();
  const double m = model.params.mass();
  const double g = model.params.gamma();
  std::vector<double> f(n * d);
  std::vector<double> w(n * d);
  std::vector<double> bval(d);

  for (std::size_t step = 0; step < b.grid.n_steps(); ++step) {
    const double* x0 = b.positions.data() + step * n * d;
    double* x1 = b.positions.data() + (step + 1) * n * d;
    interaction(step, std::span<const double>(x0, n * d), std::span<double>(f));
    forcing(step, std::span<double>(w));
    bool finite = true;
    if (model.order == Order::first) {
      for (std::size_t i = 0; i < n; ++i) {
        if (model.drift) model.drift(std::span<const double>(x0 + i * d, d), bval);
        for (std::size_t k = 0; k < d; ++k) {
          double a = f[i * d + k];
          if (model.drift) a += bval[k];
          const double next = x0[i * d + k] + a * dt + w[i * d + k];
          x1[i * d + k] = next;
          finite = finite && std::isfinite(next);
        }
      }
    } else {
      const double* v0 = b.velocities.data() + step * n * d;
      double* v1 = b.velocities.data() + (step + 1) * n * d;
      for (std::size_t j = 0; j < n * d; ++j) {
        x1[j] = x0[j] + v0[j] * dt;
        v1[j] = v0[j] + (f[j] - g * v0[j]) * dt / m + w[j] / m;
        finite = finite && std::isfinite(x1[j]) && std::isfinite(v1[j]);
      }
    }
    if (!finite) throw NumericalBlowup(step + 1);
  }
}

struct StreamTags {
  StreamTag initial;
  StreamTag brownian;
};

constexpr StreamTags kParticleTags{StreamTag::initial, StreamTag::brownian};
constexpr StreamTags kCloudTags{StreamTag::cloud_initial, StreamTag::cloud_brownian};

std::vector<double> sample_initial(const ParticleModel& model, const InitialLaw& init,
                                   std::size_t n, const RngPolicy& rng,
                                   std::uint64_t realization, StreamTag tag) {
  const std::size_t sd = model.state_dim();
  if (init.dim() != sd)
    throw DimensionMismatch("initial law has dimension " + std::to_string(init.dim()) +
                            ", system state needs " + std::to_string(sd));
  std::vector<double> states(n * sd);
  for (std::size_t i = 0; i < n; ++i)
    init.sample(rng.stream(tag, realization, i, 0), std::span<double>(states.data() + i * sd, sd));
  return states;
}

// Draws keyed Brownian increments into the bundle and returns sigma dW as forcing.
auto brownian_forcing(PathBundle& b, const SystemParams& params, const RngPolicy& rng,
                      std::uint64_t realization, StreamTag tag) {
  return [&b, &params, &rng, realization, tag](std::size_t step, std::span<double> w) {
    const std::size_t n = b.n_particles;
    const std::size_t dp = b.d_prime;
    const double sq = std::sqrt(b.grid.dt());
    for (std::size_t i = 0; i < n; ++i) {
      std::span<double> dw(b.increments.data() + (step * n + i) * dp, dp);
      rng.stream(tag, realization, i, step).gaussians(dw);
      for (double& z : dw) z *= sq;
      apply_sigma(params.sigma(), dw, w.subspan(i * b.d, b.d));
    }
  };
}

auto stored_forcing(const PathBundle& b, const SystemParams& params) {
  return [&b, &params](std::size_t step, std::span<double> w) {
    for (std::size_t i = 0; i < b.n_particles; ++i)
      apply_sigma(params.sigma(), b.dw(step, i), w.subspan(i * b.d, b.d));
  };
}

auto pairwise_interaction(const KernelSpec& kernel, std::size_t n, std::size_t d,
                          PairwiseMode mode) {
  return [&kernel, n, d, mode](std::size_t, std::span<const double> xs, std::span<double> out) {
    pairwise_drift(kernel, xs, n, d, out, mode);
  };
}

auto meanfield_interaction(const MeanFieldField& field) {
  return [&field](std::size_t step, std::span<const double> xs, std::span<double> out) {
    field.evaluate_all(step, xs, out);
  };
}

void check_field(const ParticleModel& model, const MeanFieldField& field, const TimeGrid& grid) {
  if (!(field.cloud().grid() == grid))
    throw GridMismatch("reference cloud grid differs from the simulation grid");
  if (field.cloud().d() != model.d()) throw DimensionMismatch("cloud dimension differs from d");
}

PathBundle simulate_pairwise(const ParticleModel& model, const InitialLaw& init,
                             const TimeGrid& grid, std::size_t n, const RngPolicy& rng,
                             std::uint64_t realization, StreamTags tags, PairwiseMode mode) {
  check_particles(n);
  auto initial = sample_initial(model, init, n, rng, realization, tags.initial);
  PathBundle b = make_bundle(model, grid, n, true);
  integrate(model, b, initial, pairwise_interaction(model.kernel, n, model.d(), mode),
            brownian_forcing(b, model.params, rng, realization, tags.brownian));
  return b;
}

PathBundle simulate_field(const ParticleModel& model, const MeanFieldField& field,
                          const InitialLaw& init, const TimeGrid& grid, std::size_t n,
                          const RngPolicy& rng, std::uint64_t realization, StreamTags tags) {
  check_field(model, field, grid);
  auto initial = sample_initial(model, init, n, rng, realization, tags.initial);
  PathBundle b = make_bundle(model, grid, n, true);
  integrate(model, b, initial, meanfield_interaction(field),
            brownian_forcing(b, model.params, rng, realization, tags.brownian));
  return b;
}

ReferenceCloud to_cloud(PathBundle&& b, CloudProvenance prov) {
  return ReferenceCloud(b.order, b.n_particles, b.d, b.grid, std::move(b.positions),
                        std::move(b.velocities), std::move(prov));
}

}  // namespace

std::vector<double> PathBundle::initial_states() const {
  const std::size_t sd = order == Order::second ? 2 * d : d;
  std::vector<double> s(n_particles * sd);
  for (std::size_t i = 0; i < n_particles; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      s[i * sd + k] = positions[i * d + k];
      if (order == Order::second) s[i * sd + d + k] = velocities[i * d + k];
    }
  }
  return s;
}

ReferenceCloud::ReferenceCloud(Order order, std::size_t m, std::size_t d, TimeGrid grid,
                               std::vector<double> positions, std::vector<double> velocities,
                               CloudProvenance provenance)
    : order_(order),
      m_(m),
      d_(d),
      grid_(grid),
      positions_(std::move(positions)),
      velocities_(std::move(velocities)),
      provenance_(std::move(provenance)) {
  const std::size_t expect = (grid_.n_steps() + 1) * m_ * d_;
  if (m_ == 0 || d_ == 0) throw InvalidParameter("reference cloud must be nonempty");
  if (positions_.size() != expect) throw DimensionMismatch("cloud snapshot count mismatch");
  if (order_ == Order::second && velocities_.size() != expect)
    throw DimensionMismatch("cloud velocity snapshot count mismatch");
  if (order_ == Order::first && !velocities_.empty())
    throw DimensionMismatch("first-order cloud cannot carry velocities");
}

std::span<const double> ReferenceCloud::positions_at(std::size_t step) const {
  if (step > grid_.n_steps()) throw InvalidParameter("cloud step out of range");
  return {positions_.data() + step * m_ * d_, m_ * d_};
}

std::span<const double> ReferenceCloud::velocities_at(std::size_t step) const {
  if (order_ != Order::second) throw InvalidParameter("first-order cloud has no velocities");
  if (step > grid_.n_steps()) throw InvalidParameter("cloud step out of range");
  return {velocities_.data() + step * m_ * d_, m_ * d_};
}

std::vector<double> meanfield_drift(const ReferenceCloud& cloud, const KernelSpec& kernel,
                                    std::size_t step, std::span<const double> x) {
  const std::size_t d = cloud.d();
  if (x.size() != d) throw DimensionMismatch("query point dimension differs from cloud");
  auto ys = cloud.positions_at(step);
  std::vector<double> acc(d, 0.0), diff(d), k(d);
  for (std::size_t m = 0; m < cloud.size(); ++m) {
    for (std::size_t c = 0; c < d; ++c) diff[c] = x[c] - ys[m * d + c];
    kernel_eval(kernel, diff, k);
    for (std::size_t c = 0; c < d; ++c) acc[c] += k[c];
  }
  for (double& a : acc) a /= static_cast<double>(cloud.size());
  return acc;
}

MeanFieldField::MeanFieldField(const ReferenceCloud& cloud, KernelSpec kernel, PairwiseMode mode)
    : cloud_(&cloud), kernel_(std::move(kernel)) {
  const std::size_t d = cloud.d();
  if (kernel_.kind() == KernelKind::constant && kernel_.constant_value().size() != d)
    throw DimensionMismatch("constant kernel dimension differs from cloud");
  if (mode == PairwiseMode::direct) return;
  const std::size_t rows = cloud.grid().n_steps() + 1;
  const std::size_t m = cloud.size();
  switch (kernel_.kind()) {
    case KernelKind::zero:
    case KernelKind::constant: cached_ = true; break;
    case KernelKind::sine_force: {
      moment_a_.resize(rows * d);
      moment_b_.resize(rows * d);
      std::vector<double> cs(m), sn(m);
      const double w = kernel_.frequency();
      for (std::size_t s = 0; s < rows; ++s) {
        auto ys = cloud.positions_at(s);
        for (std::size_t c = 0; c < d; ++c) {
          for (std::size_t j = 0; j < m; ++j) {
            cs[j] = std::cos(w * ys[j * d + c]);
            sn[j] = std::sin(w * ys[j * d + c]);
          }
          moment_a_[s * d + c] = pairwise_sum(cs) / static_cast<double>(m);
          moment_b_[s * d + c] = pairwise_sum(sn) / static_cast<double>(m);
        }
      }
      cached_ = true;
      break;
    }
    case KernelKind::linear: {
      moment_a_.resize(rows * d);
      std::vector<double> col(m);
      for (std::size_t s = 0; s < rows; ++s) {
        auto ys = cloud.positions_at(s);
        for (std::size_t c = 0; c < d; ++c) {
          for (std::size_t j = 0; j < m; ++j) col[j] = ys[j * d + c];
          moment_a_[s * d + c] = pairwise_sum(col) / static_cast<double>(m);
        }
      }
      cached_ = true;
      break;
    }
    case KernelKind::gauss_bump: break;
  }
}

void MeanFieldField::evaluate(std::size_t step, std::span<const double> x,
                              std::span<double> out) const {
  const std::size_t d = cloud_->d();
  if (x.size() != d || out.size() != d) throw DimensionMismatch("mean-field query dimension");
  if (step > cloud_->grid().n_steps()) throw InvalidParameter("mean-field step out of range");
  if (!cached_) {
    auto v = meanfield_drift(*cloud_, kernel_, step, x);
    for (std::size_t c = 0; c < d; ++c) out[c] = v[c];
    return;
  }
  switch (kernel_.kind()) {
    case KernelKind::zero:
      for (double& o : out) o = 0.0;
      break;
    case KernelKind::constant:
      for (std::size_t c = 0; c < d; ++c) out[c] = kernel_.constant_value()[c];
      break;
    case KernelKind::sine_force: {
      // E sin(w(x - Y)) = sin(wx) E cos(wY) - cos(wx) E sin(wY)
      const double w = kernel_.frequency();
      for (std::size_t c = 0; c < d; ++c)
        out[c] = kernel_.amplitude() * (std::sin(w * x[c]) * moment_a_[step * d + c] -
                                        std::cos(w * x[c]) * moment_b_[step * d + c]);
      break;
    }
    case KernelKind::linear:
      for (std::size_t c = 0; c < d; ++c)
        out[c] = -kernel_.slope() * (x[c] - moment_a_[step * d + c]);
      break;
    case KernelKind::gauss_bump: break;
  }
}

void MeanFieldField::evaluate_all(std::size_t step, std::span<const double> xs,
                                  std::span<double> out) const {
  const std::size_t d = cloud_->d();
  if (xs.size() % d != 0 || out.size() != xs.size())
    throw DimensionMismatch("mean-field batch dimension");
  for (std::size_t p = 0; p < xs.size() / d; ++p)
    evaluate(step, xs.subspan(p * d, d), out.subspan(p * d, d));
}

void pairwise_drift(const KernelSpec& kernel, std::span<const double> xs, std::size_t n,
                    std::size_t d, std::span<double> out, PairwiseMode mode) {
  check_particles(n);
  if (xs.size() != n * d || out.size() != n * d)
    throw DimensionMismatch("pairwise drift array size");
  const double inv = 1.0 / static_cast<double>(n - 1);
  const bool fast = mode == PairwiseMode::automatic && kernel.kind() != KernelKind::gauss_bump;
  if (fast) {
    switch (kernel.kind()) {
      case KernelKind::zero:
        for (double& o : out) o = 0.0;
        return;
      case KernelKind::constant: {
        const auto& c = kernel.constant_value();
        if (c.size() != d) throw DimensionMismatch("constant kernel dimension mismatch");
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < d; ++k) out[i * d + k] = c[k];
        return;
      }
      case KernelKind::sine_force: {
        const double w = kernel.frequency();
        std::vector<double> cs(n), sn(n);
        for (std::size_t k = 0; k < d; ++k) {
          double sc = 0.0, ss = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            cs[i] = std::cos(w * xs[i * d + k]);
            sn[i] = std::sin(w * xs[i * d + k]);
            sc += cs[i];
            ss += sn[i];
          }
          // sum_j sin(w(x_i - x_j)) = sin(w x_i) sum cos - cos(w x_i) sum sin; the j = i
          // term vanishes identically.
          for (std::size_t i = 0; i < n; ++i)
            out[i * d + k] = kernel.amplitude() * (sn[i] * sc - cs[i] * ss) * inv;
        }
        return;
      }
      case KernelKind::linear: {
        for (std::size_t k = 0; k < d; ++k) {
          double sum = 0.0;
          for (std::size_t i = 0; i < n; ++i) sum += xs[i * d + k];
          for (std::size_t i = 0; i < n; ++i) {
            const double xi = xs[i * d + k];
            out[i * d + k] = -kernel.slope() * (xi - (sum - xi) * inv);
          }
        }
        return;
      }
      case KernelKind::gauss_bump: break;
    }
  }
  std::vector<double> diff(d), kv(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) out[i * d + k] = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (std::size_t k = 0; k < d; ++k) diff[k] = xs[i * d + k] - xs[j * d + k];
      kernel_eval(kernel, diff, kv);
      for (std::size_t k = 0; k < d; ++k) out[i * d + k] += kv[k];
    }
    for (std::size_t k = 0; k < d; ++k) out[i * d + k] /= static_cast<double>(n - 1);
  }
}

PathBundle simulate_interacting(const ParticleModel& model, const InitialLaw& init,
                                const TimeGrid& grid, std::size_t n, const RngPolicy& rng,
                                std::uint64_t realization, SimulationOptions opts) {
  return simulate_pairwise(model, init, grid, n, rng, realization, kParticleTags, opts.pairwise);
}

PathBundle simulate_interacting_2nd(const SystemParams& params, const KernelSpec& kernel,
                                    const InitialLaw& init, const TimeGrid& grid, std::size_t n,
                                    const RngPolicy& rng, std::uint64_t realization,
                                    SimulationOptions opts) {
  ParticleModel model{Order::second, params, kernel, {}};
  return simulate_interacting(model, init, grid, n, rng, realization, opts);
}

PathBundle simulate_interacting_1st(const SystemParams& params, const KernelSpec& kernel,
                                    const DriftFn& drift, const InitialLaw& init,
                                    const TimeGrid& grid, std::size_t n, const RngPolicy& rng,
                                    std::uint64_t realization, SimulationOptions opts) {
  ParticleModel model{Order::first, params, kernel, drift};
  return simulate_interacting(model, init, grid, n, rng, realization, opts);
}

PathBundle simulate_meanfield_driven(const ParticleModel& model, const MeanFieldField& field,
                                     const InitialLaw& init, const TimeGrid& grid, std::size_t n,
                                     const RngPolicy& rng, std::uint64_t realization) {
  if (n == 0) throw TooFewParticles("need at least one particle");
  return simulate_field(model, field, init, grid, n, rng, realization, kParticleTags);
}

PathBundle replay_interacting(const ParticleModel& model, const TimeGrid& grid, std::size_t n,
                              std::span<const double> initial_states,
                              std::span<const double> increments, SimulationOptions opts) {
  check_particles(n);
  PathBundle b = make_bundle(model, grid, n, true);
  if (increments.size() != b.increments.size())
    throw DimensionMismatch("increment array has wrong size");
  std::copy(increments.begin(), increments.end(), b.increments.begin());
  integrate(model, b, initial_states, pairwise_interaction(model.kernel, n, model.d(), opts.pairwise),
            stored_forcing(b, model.params));
  return b;
}

PathBundle replay_meanfield(const ParticleModel& model, const MeanFieldField& field,
                            std::size_t n, std::span<const double> initial_states,
                            std::span<const double> increments) {
  const TimeGrid& grid = field.cloud().grid();
  check_field(model, field, grid);
  PathBundle b = make_bundle(model, grid, n, true);
  if (increments.size() != b.increments.size())
    throw DimensionMismatch("increment array has wrong size");
  std::copy(increments.begin(), increments.end(), b.increments.begin());
  integrate(model, b, initial_states, meanfield_interaction(field), stored_forcing(b, model.params));
  return b;
}

ReferenceCloud build_reference_cloud(const ParticleModel& model, const InitialLaw& init,
                                     const TimeGrid& grid, std::size_t m, const RngPolicy& rng,
                                     std::size_t refine_iters) {
  if (m < 100) throw InvalidParameter("reference cloud needs M >= 100");
  CloudProvenance prov{model.kernel.describe(), model.params.describe(), init.describe(),
                       rng.master_seed, 0, "interacting M-particle system"};
  ReferenceCloud cloud = to_cloud(
      simulate_pairwise(model, init, grid, m, rng, 0, kCloudTags, PairwiseMode::automatic), prov);
  for (std::size_t it = 1; it <= refine_iters; ++it) {
    MeanFieldField field(cloud, model.kernel);
    PathBundle next = simulate_field(model, field, init, grid, m, rng, it, kCloudTags);
    prov.refine_iters = it;
    prov.note = "interacting M-particle system + " + std::to_string(it) + " Picard refinement(s)";
    cloud = to_cloud(std::move(next), prov);
  }
  return cloud;
}

NoisePath make_noise_path(std::size_t n, std::size_t d, const TimeGrid& grid,
                          std::vector<double> increments) {
  if (increments.size() != grid.n_steps() * n * d)
    throw DimensionMismatch("noise increments have wrong size");
  NoisePath p;
  p.n_particles = n;
  p.d = d;
  p.grid = grid;
  p.increments = std::move(increments);
  p.values.assign((grid.n_steps() + 1) * n * d, 0.0);
  for (std::size_t s = 0; s < grid.n_steps(); ++s)
    for (std::size_t j = 0; j < n * d; ++j)
      p.values[(s + 1) * n * d + j] = p.values[s * n * d + j] + p.increments[s * n * d + j];
  return p;
}

NoisePath driving_noise(const PathBundle& bundle, const SystemParams& params) {
  if (bundle.increments.empty()) throw InvalidParameter("bundle carries no Brownian increments");
  const std::size_t n = bundle.n_particles;
  std::vector<double> inc(bundle.grid.n_steps() * n * bundle.d);
  for (std::size_t s = 0; s < bundle.grid.n_steps(); ++s)
    for (std::size_t i = 0; i < n; ++i)
      apply_sigma(params.sigma(), bundle.dw(s, i),
                  std::span<double>(inc.data() + (s * n + i) * bundle.d, bundle.d));
  return make_noise_path(n, bundle.d, bundle.grid, std::move(inc));
}

NoisePath interacting_noise(const PathBundle& bundle, const ParticleModel& model,
                            const MeanFieldField& field) {
  check_field(model, field, bundle.grid);
  if (bundle.increments.empty()) throw InvalidParameter("bundle carries no Brownian increments");
  const std::size_t n = bundle.n_particles;
  const std::size_t d = bundle.d;
  const double dt = bundle.grid.dt();
  std::vector<double> inc(bundle.grid.n_steps() * n * d);
  std::vector<double> pw(n * d), mf(n * d), w(d);
  for (std::size_t s = 0; s < bundle.grid.n_steps(); ++s) {
    pairwise_drift(model.kernel, bundle.positions_at(s), n, d, pw);
    field.evaluate_all(s, bundle.positions_at(s), mf);
    for (std::size_t i = 0; i < n; ++i) {
      apply_sigma(model.params.sigma(), bundle.dw(s, i), w);
      for (std::size_t k = 0; k < d; ++k)
        inc[(s * n + i) * d + k] = (pw[i * d + k] - mf[i * d + k]) * dt + w[k];
    }
  }
  return make_noise_path(n, d, bundle.grid, std::move(inc));
}

PathBundle solution_map_phi(const NoisePath& theta, const ParticleModel& model,
                            const MeanFieldField& field, std::span<const double> initial_states) {
  check_field(model, field, theta.grid);
  if (theta.d != model.d()) throw DimensionMismatch("noise path dimension differs from d");
  PathBundle b = make_bundle(model, theta.grid, theta.n_particles, false);
  const std::size_t nd = theta.n_particles * theta.d;
  integrate(model, b, initial_states, meanfield_interaction(field),
            [&theta, nd](std::size_t step, std::span<double> w) {
              for (std::size_t j = 0; j < nd; ++j) w[j] = theta.increments[step * nd + j];
            });
  return b;
}

EnsembleState time_marginal(const PathBundle& bundle, double t, MarginalPart part) {
  const std::size_t step = bundle.grid.step_at(t);
  if (part == MarginalPart::velocities && bundle.order == Order::first)
    throw InvalidParameter("first-order bundles have no velocity marginal");
  const bool with_x = part != MarginalPart::velocities;
  const bool with_v = bundle.order == Order::second && part != MarginalPart::positions;
  EnsembleState e;
  e.n_particles = bundle.n_particles;
  e.dim = (with_x ? bundle.d : 0) + (with_v ? bundle.d : 0);
  e.step = step;
  e.time = bundle.grid.time(step);
  e.values.reserve(e.n_particles * e.dim);
  for (std::size_t i = 0; i < bundle.n_particles; ++i) {
    if (with_x)
      for (double v : bundle.x(step, i)) e.values.push_back(v);
    if (with_v)
      for (double v : bundle.v(step, i)) e.values.push_back(v);
  }
  return e;
}

}  // namespace pathchaos
