#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pathchaos/engine.hpp"
#include "pathchaos/parallel.hpp"

namespace pathchaos {

// Drift mismatch at the left endpoint of every step:
//   raw       b_i = (1/(N-1)) sum_{j != i} K(X_i - X_j) - K * rho(X_i)   in R^d
//   weighted  B_i = sigma^T Lambda^{-1} (-b_i)                             in R^{d'}
struct DriftMismatch {
  std::size_t n_particles = 0;
  std::size_t d = 0;
  std::size_t d_prime = 0;
  TimeGrid grid;
  std::vector<double> raw;       // (step, particle, d), n_steps rows
  std::vector<double> weighted;  // (step, particle, d'), n_steps rows

  std::span<const double> raw_at(std::size_t step, std::size_t i) const {
    return {raw.data() + (step * n_particles + i) * d, d};
  }
  std::span<const double> weighted_at(std::size_t step, std::size_t i) const {
    return {weighted.data() + (step * n_particles + i) * d_prime, d_prime};
  }
};

DriftMismatch drift_mismatch(const PathBundle& bundle, const MeanFieldField& field,
                             const SystemParams& params);
DriftMismatch drift_mismatch(const PathBundle& bundle, const ReferenceCloud& cloud,
                             const KernelSpec& kernel, const SystemParams& params);

// log(dQ2/dQ1) = sum_n sum_i [B_i(t_n) . dW_{i,n} - |B_i(t_n)|^2 dt / 2]
double log_rn_derivative(const DriftMismatch& mismatch, const PathBundle& bundle);

// Monte Carlo estimate of a path functional: dt * sum_n E[integrand(t_n)].
struct FunctionalEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::vector<double> per_time;     // integrand mean over realizations at each step
  std::vector<double> per_time_se;  // its standard error
  std::vector<double> cumulative;   // running functional at each grid time (n_steps + 1)
  std::vector<double> cumulative_se;
  std::size_t n_realizations = 0;
  std::string config_hash;

  double at_step(std::size_t step) const { return cumulative.at(step); }
  double se_at_step(std::size_t step) const { return cumulative_se.at(step); }
};

struct PathFunctionalResult {
  FunctionalEstimate lambda_weighted;  // (1/(2 lambda)) sum_i int E|b_i|^2
  FunctionalEstimate sharp;            // (1/2) sum_i int E|B_i|^2
  SampleStats rn_exp;                  // mean of exp(log RN)
  SampleStats log_rn;
};

struct KlScenario {
  ParticleModel model;
  InitialLaw init;
  TimeGrid grid;
  std::size_t n_particles = 2;
  RngPolicy rng;
  std::size_t threads = 1;
  bool oracle_only = false;  // admits the unbounded Linear kernel
  std::string config_hash;
};

// Integrand evaluated along interacting paths (bounds D_KL(F^N || Fbar^{xN}) on path space).
PathFunctionalResult forward_kl_bound(const KlScenario& scenario, const MeanFieldField& field,
                                      std::size_t realizations);
// Same integrand along mean-field-driven paths (the reversed relative entropy).
PathFunctionalResult reversed_kl_functional(const KlScenario& scenario,
                                            const MeanFieldField& field,
                                            std::size_t realizations);

struct TheoryConstants {
  double k_sup = 0.0;
  double lambda = 0.0;
  double eta = 0.0;
  double eta_max = 0.0;  // 1 / (4 sqrt(2) e |K|^2)
  double c_eta = 0.0;    // 8|K|^2 + 2 log(1 / (1 - 4 sqrt(2) e |K|^2 eta))
  double c1 = 0.0;       // (4|K|^2 + log 2) / (4 sqrt(2) e |K|^2)
  double c2 = 0.0;       // 16 sqrt(2) e |K|^2 / lambda
  double c = 0.0;        // max(c1, c2)
};

// Default eta is 1 / (8 sqrt(2) e |K|^2), where 4 sqrt(2) e |K|^2 eta = 1/2.
// With |K| = 0 every constant is 0 and any eta > 0 is admissible (default 1).
TheoryConstants theory_constants(double k_sup, double lambda,
                                 std::optional<double> eta = std::nullopt);

// C(eta) eta (exp(T / (2 lambda eta)) - 1) for each T; +inf once the exponent exceeds 700.
std::vector<double> theory_bound_curve(const TheoryConstants& consts, double lambda,
                                       std::span<const double> t_values);

// Explicit cap for the reversed functional: 4 |K|^2 T N / ((N - 1) lambda).
double reversed_functional_cap(double k_sup, double horizon, std::size_t n, double lambda);

// 1 / (1 - 4 sqrt(2) e |K|^2 eta)
double concentration_bound(double k_sup, double eta);

}  // namespace pathchaos
