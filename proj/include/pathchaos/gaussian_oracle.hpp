#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "pathchaos/engine.hpp"

namespace pathchaos {

// Exchangeable Gaussian law of N particles with per-particle block size 1 (x) or 2 (x, v):
// every particle has mean `mean` and covariance s, every distinct pair covariance c.
// Full covariance is I (x) (s - c) + J (x) c.
struct ExchangeableGaussian {
  std::size_t n = 1;
  Eigen::VectorXd mean;
  Eigen::MatrixXd s;
  Eigen::MatrixXd c;

  // Validates shapes, symmetry and positive definiteness (s - c > 0, s + (n-1) c > 0).
  static ExchangeableGaussian make(std::size_t n, Eigen::VectorXd mean, Eigen::MatrixXd s,
                                   Eigen::MatrixXd c);
  static ExchangeableGaussian scalar(std::size_t n, double mean, double s, double c);

  std::size_t block() const { return static_cast<std::size_t>(s.rows()); }
  bool positive_definite() const;
  Eigen::MatrixXd full_covariance() const;
  Eigen::VectorXd full_mean() const;
  // Law of any k of the particles (same s, c).
  ExchangeableGaussian marginal(std::size_t k) const;
};

// Mean-field marginal: one particle's mean and covariance block.
struct MeanFieldGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd s;

  static MeanFieldGaussian scalar(double mean, double s);
};

// Linear-kernel system K(x) = -a x in d = 1, first or second order, with b = 0.
struct LinearOracle {
  Order order = Order::first;
  double a = 0.0;
  double lambda = 1.0;  // sigma^2
  double mass = 1.0;
  double gamma = 0.0;

  // Reads order, mass, gamma and sigma^2 from a d = 1 model with a Linear kernel.
  static LinearOracle from_model(const ParticleModel& model);
  std::size_t block() const { return order == Order::second ? 2 : 1; }
  // Per-particle drift block A0, coupling block A1 for n particles, noise block Q.
  Eigen::MatrixXd a0() const;
  Eigen::MatrixXd a1(std::size_t n) const;
  Eigen::MatrixXd q() const;
};

// Exchangeable (s, c) block ODEs integrated by RK4 with 10 substeps per grid step.
// Returns n_steps + 1 states. Throws OraclePdFailure when positivity is lost.
std::vector<ExchangeableGaussian> propagate_interacting(const LinearOracle& sys,
                                                        const ExchangeableGaussian& init,
                                                        const TimeGrid& grid);
std::vector<MeanFieldGaussian> propagate_meanfield(const LinearOracle& sys,
                                                   const MeanFieldGaussian& init,
                                                   const TimeGrid& grid);
// First-order closed form lambda/(2a) + (s0 - lambda/(2a)) exp(-2 a t); s0 + lambda t when a = 0.
double meanfield_variance_closed_form(double a, double lambda, double s0, double t);

// Dense 2N-by-2N (or N-by-N) Lyapunov integration of the full covariance, same RK4 scheme.
std::vector<Eigen::MatrixXd> propagate_dense(const LinearOracle& sys, std::size_t n,
                                             const Eigen::MatrixXd& init_cov,
                                             const TimeGrid& grid);

double exact_joint_kl(const ExchangeableGaussian& p, const MeanFieldGaussian& ref);
double exact_marginal_kl(const ExchangeableGaussian& p, std::size_t k,
                         const MeanFieldGaussian& ref);

}  // namespace pathchaos
