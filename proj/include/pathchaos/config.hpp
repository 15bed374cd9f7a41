#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pathchaos/engine.hpp"

namespace pathchaos {

// Flat key = value text with [section] headers; '#' and ';' start comments.
//
// [system]      order (1|2), N, d, m, gamma, sigma (scalar s -> s I_d, or rows "a b; c d")
// [initial]     law (gaussian|point|file), mean, variance, velocity_mean, velocity_variance, file
// [kernel]      variant (zero|constant|sine|gauss_bump|linear), amplitude, frequency, slope, value
// [meanfield]   M (0 -> max(10^4, 10 N)), refine_iters
// [integration] T, dt
// [montecarlo]  realizations, master_seed, threads
// [bounds]      eta (empty -> default)
// [sweep]       N, m, T, eta as comma-separated lists
// [output]      directory, formats (csv,json)
struct ExperimentConfig {
  std::string scenario = "sine-default";

  Order order = Order::second;
  std::size_t n_particles = 16;
  std::size_t d = 1;
  double mass = 1.0;
  double gamma = 1.0;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(1, 1);

  std::string init_law = "gaussian";
  double init_mean = 0.0;
  double init_variance = 1.0;
  double init_velocity_mean = 0.0;
  double init_velocity_variance = 1.0;
  std::string init_file;

  std::string kernel = "sine";
  double amplitude = 1.0;
  double frequency = 1.0;
  double slope = 0.5;
  std::vector<double> constant_value{1.0};

  std::size_t cloud_size = 0;
  std::size_t refine_iters = 1;

  double horizon = 1.0;
  double dt = 1e-3;

  std::size_t realizations = 2000;
  std::uint64_t master_seed = 20240601;
  std::size_t threads = 1;

  std::optional<double> eta;

  std::vector<std::size_t> sweep_n;
  std::vector<double> sweep_m;
  std::vector<double> sweep_t;
  std::vector<double> sweep_eta;

  std::string out_dir;
  bool write_csv = true;
  bool write_json = true;

  // Builders validate through model-core and throw on bad values.
  SystemParams system_params() const;
  KernelSpec kernel_spec() const;
  ParticleModel model() const;
  InitialLaw initial_law() const;
  TimeGrid grid() const;
  std::size_t effective_cloud_size() const;
  // Builds everything once so errors surface before any simulation starts.
  void validate() const;

  // Canonical key = value text of everything that affects results (not threads, not output).
  std::string canonical() const;
  // 16 hex digits of FNV-1a over canonical().
  std::string hash() const;
};

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});

}  // namespace pathchaos
