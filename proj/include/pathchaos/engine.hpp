#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pathchaos/model.hpp"

namespace pathchaos {

enum class Order { first = 1, second = 2 };

// Non-interaction drift b(x) of the first-order system.
using DriftFn = std::function<void(std::span<const double> x, std::span<double> out)>;

struct ParticleModel {
  Order order = Order::first;
  SystemParams params;
  KernelSpec kernel;
  DriftFn drift;  // first order only; empty means b = 0

  std::size_t d() const { return params.d(); }
  std::size_t state_dim() const { return order == Order::second ? 2 * d() : d(); }
};

// automatic uses closed-form O(N) sums for Zero, Constant, SineForce and Linear kernels
// and falls back to the O(N^2) double loop otherwise. direct always runs the double loop.
enum class PairwiseMode { automatic, direct };

struct SimulationOptions {
  PairwiseMode pairwise = PairwiseMode::automatic;
};

// One realization of N particles on a time grid.
// States are laid out (step, particle, coordinate); increments (step, particle, d').
struct PathBundle {
  Order order = Order::first;
  std::size_t n_particles = 0;
  std::size_t d = 0;
  std::size_t d_prime = 0;
  TimeGrid grid;
  std::vector<double> positions;
  std::vector<double> velocities;  // second order only
  std::vector<double> increments;  // Brownian increments; empty for solution-map outputs

  std::span<const double> positions_at(std::size_t step) const {
    return {positions.data() + step * n_particles * d, n_particles * d};
  }
  std::span<const double> velocities_at(std::size_t step) const {
    return {velocities.data() + step * n_particles * d, n_particles * d};
  }
  std::span<const double> x(std::size_t step, std::size_t i) const {
    return {positions.data() + (step * n_particles + i) * d, d};
  }
  std::span<const double> v(std::size_t step, std::size_t i) const {
    return {velocities.data() + (step * n_particles + i) * d, d};
  }
  std::span<const double> dw(std::size_t step, std::size_t i) const {
    return {increments.data() + (step * n_particles + i) * d_prime, d_prime};
  }
  // Initial states (particle, state coordinate), x then v.
  std::vector<double> initial_states() const;
};

struct CloudProvenance {
  std::string kernel;
  std::string params;
  std::string initial;
  std::uint64_t seed = 0;
  std::size_t refine_iters = 0;
  std::string note;
};

// Time-indexed snapshots of an M-particle cloud standing in for the mean-field law.
class ReferenceCloud {
 public:
  ReferenceCloud(Order order, std::size_t m, std::size_t d, TimeGrid grid,
                 std::vector<double> positions, std::vector<double> velocities,
                 CloudProvenance provenance);

  Order order() const { return order_; }
  std::size_t size() const { return m_; }
  std::size_t d() const { return d_; }
  const TimeGrid& grid() const { return grid_; }
  const CloudProvenance& provenance() const { return provenance_; }
  std::span<const double> positions_at(std::size_t step) const;
  std::span<const double> velocities_at(std::size_t step) const;
  const std::vector<double>& positions() const { return positions_; }
  const std::vector<double>& velocities() const { return velocities_; }

 private:
  Order order_;
  std::size_t m_;
  std::size_t d_;
  TimeGrid grid_;
  std::vector<double> positions_;
  std::vector<double> velocities_;
  CloudProvenance provenance_;
};

// (1/M) sum_m K(x - Y_m(t_step)), by direct summation over the snapshot.
std::vector<double> meanfield_drift(const ReferenceCloud& cloud, const KernelSpec& kernel,
                                    std::size_t step, std::span<const double> x);

// K * rho evaluated against a cloud. For separable kernels the per-step trigonometric or
// first moments are cached at construction. Holds a non-owning reference to the cloud.
class MeanFieldField {
 public:
  MeanFieldField(const ReferenceCloud& cloud, KernelSpec kernel,
                 PairwiseMode mode = PairwiseMode::automatic);

  const ReferenceCloud& cloud() const { return *cloud_; }
  const KernelSpec& kernel() const { return kernel_; }
  void evaluate(std::size_t step, std::span<const double> x, std::span<double> out) const;
  // Evaluates at n points stored contiguously (point, coordinate).
  void evaluate_all(std::size_t step, std::span<const double> xs, std::span<double> out) const;

 private:
  const ReferenceCloud* cloud_;
  KernelSpec kernel_;
  bool cached_ = false;
  std::vector<double> moment_a_;  // (step, coordinate): mean cos / mean position
  std::vector<double> moment_b_;  // (step, coordinate): mean sin
};

// (1/(N-1)) sum_{j != i} K(x_i - x_j) for every particle; xs is (particle, coordinate).
void pairwise_drift(const KernelSpec& kernel, std::span<const double> xs, std::size_t n,
                    std::size_t d, std::span<double> out,
                    PairwiseMode mode = PairwiseMode::automatic);

PathBundle simulate_interacting(const ParticleModel& model, const InitialLaw& init,
                                const TimeGrid& grid, std::size_t n, const RngPolicy& rng,
                                std::uint64_t realization, SimulationOptions opts = {});

PathBundle simulate_interacting_2nd(const SystemParams& params, const KernelSpec& kernel,
                                    const InitialLaw& init, const TimeGrid& grid, std::size_t n,
                                    const RngPolicy& rng, std::uint64_t realization,
                                    SimulationOptions opts = {});

PathBundle simulate_interacting_1st(const SystemParams& params, const KernelSpec& kernel,
                                    const DriftFn& drift, const InitialLaw& init,
                                    const TimeGrid& grid, std::size_t n, const RngPolicy& rng,
                                    std::uint64_t realization, SimulationOptions opts = {});

// Same keyed initial states and Brownian increments as simulate_interacting for the same
// (seed, realization): the two runs are synchronously coupled.
PathBundle simulate_meanfield_driven(const ParticleModel& model, const MeanFieldField& field,
                                     const InitialLaw& init, const TimeGrid& grid, std::size_t n,
                                     const RngPolicy& rng, std::uint64_t realization);

// Re-runs the integrators from stored initial states (particle, state) and increments.
PathBundle replay_interacting(const ParticleModel& model, const TimeGrid& grid, std::size_t n,
                              std::span<const double> initial_states,
                              std::span<const double> increments, SimulationOptions opts = {});
PathBundle replay_meanfield(const ParticleModel& model, const MeanFieldField& field,
                            std::size_t n, std::span<const double> initial_states,
                            std::span<const double> increments);

// Iteration 0 simulates M interacting particles; each refinement re-simulates M particles
// driven by the previous frozen cloud (one Picard step).
ReferenceCloud build_reference_cloud(const ParticleModel& model, const InitialLaw& init,
                                     const TimeGrid& grid, std::size_t m, const RngPolicy& rng,
                                     std::size_t refine_iters);

// Driving process theta_i(t_n), stored both as increments and cumulative values.
struct NoisePath {
  std::size_t n_particles = 0;
  std::size_t d = 0;
  TimeGrid grid;
  std::vector<double> increments;  // (step, particle, coordinate), n_steps rows
  std::vector<double> values;      // cumulative, n_steps + 1 rows, values at step 0 are 0

  std::span<const double> value(std::size_t step, std::size_t i) const {
    return {values.data() + (step * n_particles + i) * d, d};
  }
};

NoisePath make_noise_path(std::size_t n, std::size_t d, const TimeGrid& grid,
                          std::vector<double> increments);
// theta^(2) = sigma W from the bundle's Brownian increments.
NoisePath driving_noise(const PathBundle& bundle, const SystemParams& params);
// theta^(1): increments b_i dt + sigma dW along an interacting bundle.
NoisePath interacting_noise(const PathBundle& bundle, const ParticleModel& model,
                            const MeanFieldField& field);

// Integrates the mean-field-driven dynamics with sigma dW replaced by d theta.
PathBundle solution_map_phi(const NoisePath& theta, const ParticleModel& model,
                            const MeanFieldField& field, std::span<const double> initial_states);

enum class MarginalPart { full, positions, velocities };

struct EnsembleState {
  std::size_t n_particles = 0;
  std::size_t dim = 0;  // coordinates per particle
  std::size_t step = 0;
  double time = 0.0;
  std::vector<double> values;  // (particle, coordinate)
};

EnsembleState time_marginal(const PathBundle& bundle, double t,
                            MarginalPart part = MarginalPart::full);

// Binary cloud dump, little-endian:
// "MFCL", u32 version = 1, u64 M, u32 d, u32 order, u64 n_steps + 1, f64 dt,
// then f64 states by (step, particle, coordinate) with coordinates x then v.
void write_cloud(std::ostream& out, const ReferenceCloud& cloud);
void write_cloud(const std::string& path, const ReferenceCloud& cloud);
ReferenceCloud read_cloud(std::istream& in);
ReferenceCloud read_cloud(const std::string& path);

}  // namespace pathchaos
