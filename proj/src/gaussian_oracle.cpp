#include "pathchaos/gaussian_oracle.hpp"

#include <cmath>
#include <string>

namespace pathchaos {

namespace {

constexpr int kSubsteps = 10;

bool is_pd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 0.0;
}

double logdet_pd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw InvalidParameter(std::string(what) + " is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

struct BlockState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd s;
  Eigen::MatrixXd c;
};

BlockState block_rhs(const LinearOracle& sys, std::size_t n, const BlockState& x) {
  const Eigen::MatrixXd a0 = sys.a0();
  const Eigen::MatrixXd a1 = sys.a1(n);
  const double nm1 = static_cast<double>(n) - 1.0;
  const double nm2 = static_cast<double>(n) - 2.0;
  const Eigen::MatrixXd ms = a0 * x.s + nm1 * a1 * x.c;
  const Eigen::MatrixXd mc = a0 * x.c + a1 * x.s + nm2 * a1 * x.c;
  BlockState d;
  d.mean = (a0 + nm1 * a1) * x.mean;
  d.s = ms + ms.transpose() + sys.q();
  d.c = n > 1 ? Eigen::MatrixXd(mc + mc.transpose()) : Eigen::MatrixXd::Zero(x.c.rows(), x.c.cols());
  return d;
}

BlockState axpy(const BlockState& x, double h, const BlockState& k) {
  return {x.mean + h * k.mean, x.s + h * k.s, x.c + h * k.c};
}

template <class State, class Rhs, class Axpy>
State rk4_step(const State& x, double h, Rhs&& rhs, Axpy&& step) {
  const State k1 = rhs(x);
  const State k2 = rhs(step(x, 0.5 * h, k1));
  const State k3 = rhs(step(x, 0.5 * h, k2));
  const State k4 = rhs(step(x, h, k3));
  State out = step(x, h / 6.0, k1);
  out = step(out, h / 3.0, k2);
  out = step(out, h / 3.0, k3);
  return step(out, h / 6.0, k4);
}

double gaussian_block_kl(std::size_t n, const Eigen::VectorXd& mean, const Eigen::MatrixXd& s,
                         const Eigen::MatrixXd& c, const MeanFieldGaussian& ref) {
  const auto b = static_cast<double>(s.rows());
  const double nn = static_cast<double>(n);
  Eigen::LLT<Eigen::MatrixXd> ref_llt(ref.s);
  if (ref_llt.info() != Eigen::Success) throw InvalidParameter("reference covariance is not positive definite");
  const double logdet_ref = logdet_pd(ref.s, "reference covariance");
  const double logdet_top = logdet_pd(s + (nn - 1.0) * c, "s + (N-1) c");
  const double logdet_rest = n > 1 ? logdet_pd(s - c, "s - c") : 0.0;
  const double trace = ref_llt.solve(s).trace();
  const Eigen::VectorXd delta = mean - ref.mean;
  const double quad = delta.dot(ref_llt.solve(delta));
  return 0.5 * (nn * trace - nn * b + nn * logdet_ref - (nn - 1.0) * logdet_rest - logdet_top +
                nn * quad);
}

void check_ref(const ExchangeableGaussian& p, const MeanFieldGaussian& ref) {
  if (ref.s.rows() != p.s.rows() || ref.s.cols() != p.s.cols() || ref.mean.size() != p.mean.size())
    throw DimensionMismatch("reference marginal block size differs from the joint law");
}

}  // namespace

ExchangeableGaussian ExchangeableGaussian::make(std::size_t n, Eigen::VectorXd mean,
                                                Eigen::MatrixXd s, Eigen::MatrixXd c) {
  if (n == 0) throw TooFewParticles("exchangeable law needs N >= 1");
  const auto b = mean.size();
  if (b != 1 && b != 2) throw DimensionMismatch("block size must be 1 or 2");
  if (s.rows() != b || s.cols() != b || c.rows() != b || c.cols() != b)
    throw DimensionMismatch("s and c must be square blocks matching the mean");
  if (!mean.allFinite() || !s.allFinite() || !c.allFinite())
    throw InvalidParameter("exchangeable law must be finite");
  if (!s.isApprox(s.transpose(), 1e-12) || !c.isApprox(c.transpose(), 1e-12))
    throw InvalidParameter("s and c must be symmetric");
  ExchangeableGaussian g{n, std::move(mean), std::move(s), std::move(c)};
  if (!g.positive_definite())
    throw InvalidParameter("exchangeable covariance is not positive definite");
  return g;
}

ExchangeableGaussian ExchangeableGaussian::scalar(std::size_t n, double mean, double s, double c) {
  return make(n, Eigen::VectorXd::Constant(1, mean), Eigen::MatrixXd::Constant(1, 1, s),
              Eigen::MatrixXd::Constant(1, 1, c));
}

bool ExchangeableGaussian::positive_definite() const {
  const double nm1 = static_cast<double>(n) - 1.0;
  if (!is_pd(s + nm1 * c)) return false;
  return n == 1 || is_pd(s - c);
}

Eigen::MatrixXd ExchangeableGaussian::full_covariance() const {
  const auto b = s.rows();
  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd full(nn * b, nn * b);
  for (Eigen::Index i = 0; i < nn; ++i)
    for (Eigen::Index j = 0; j < nn; ++j) full.block(i * b, j * b, b, b) = i == j ? s : c;
  return full;
}

Eigen::VectorXd ExchangeableGaussian::full_mean() const {
  return mean.replicate(static_cast<Eigen::Index>(n), 1);
}

ExchangeableGaussian ExchangeableGaussian::marginal(std::size_t k) const {
  if (k < 1 || k > n) throw InvalidParameter("marginal size must lie in [1, N]");
  return ExchangeableGaussian{k, mean, s, c};
}

MeanFieldGaussian MeanFieldGaussian::scalar(double mean, double s) {
  if (!(s > 0.0)) throw InvalidParameter("mean-field variance must be positive");
  return {Eigen::VectorXd::Constant(1, mean), Eigen::MatrixXd::Constant(1, 1, s)};
}

LinearOracle LinearOracle::from_model(const ParticleModel& model) {
  if (model.kernel.kind() != KernelKind::linear)
    throw InvalidParameter("the Gaussian oracle needs the Linear kernel");
  if (model.d() != 1) throw DimensionMismatch("the Gaussian oracle is implemented for d = 1");
  if (model.drift) throw InvalidParameter("the Gaussian oracle assumes b = 0");
  LinearOracle sys;
  sys.order = model.order;
  sys.a = model.kernel.slope();
  sys.lambda = model.params.lambda_mat()(0, 0);
  sys.mass = model.params.mass();
  sys.gamma = model.params.gamma();
  return sys;
}

Eigen::MatrixXd LinearOracle::a0() const {
  if (order == Order::first) return Eigen::MatrixXd::Constant(1, 1, -a);
  Eigen::MatrixXd m(2, 2);
  m << 0.0, 1.0, -a / mass, -gamma / mass;
  return m;
}

Eigen::MatrixXd LinearOracle::a1(std::size_t n) const {
  const double inv = n > 1 ? 1.0 / (static_cast<double>(n) - 1.0) : 0.0;
  if (order == Order::first) return Eigen::MatrixXd::Constant(1, 1, a * inv);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(1, 0) = a * inv / mass;
  return m;
}

Eigen::MatrixXd LinearOracle::q() const {
  if (order == Order::first) return Eigen::MatrixXd::Constant(1, 1, lambda);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(1, 1) = lambda / (mass * mass);
  return m;
}

std::vector<ExchangeableGaussian> propagate_interacting(const LinearOracle& sys,
                                                        const ExchangeableGaussian& init,
                                                        const TimeGrid& grid) {
  if (!(sys.a >= 0.0)) throw InvalidParameter("linear slope must be nonnegative");
  if (init.block() != sys.block()) throw DimensionMismatch("initial block size does not match the order");
  const std::size_t n = init.n;
  const double h = grid.dt() / kSubsteps;
  auto rhs = [&](const BlockState& x) { return block_rhs(sys, n, x); };
  std::vector<ExchangeableGaussian> out;
  out.reserve(grid.n_steps() + 1);
  out.push_back(init);
  BlockState x{init.mean, init.s, init.c};
  for (std::size_t step = 0; step < grid.n_steps(); ++step) {
    for (int sub = 0; sub < kSubsteps; ++sub) x = rk4_step(x, h, rhs, axpy);
    x.s = 0.5 * (x.s + x.s.transpose());
    x.c = 0.5 * (x.c + x.c.transpose());
    ExchangeableGaussian g{n, x.mean, x.s, x.c};
    if (!x.s.allFinite() || !x.c.allFinite() || !g.positive_definite())
      throw OraclePdFailure("oracle covariance lost positive definiteness", grid.time(step + 1));
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<MeanFieldGaussian> propagate_meanfield(const LinearOracle& sys,
                                                   const MeanFieldGaussian& init,
                                                   const TimeGrid& grid) {
  if (!(sys.a >= 0.0)) throw InvalidParameter("linear slope must be nonnegative");
  if (init.s.rows() != static_cast<Eigen::Index>(sys.block()))
    throw DimensionMismatch("initial block size does not match the order");
  const Eigen::MatrixXd a0 = sys.a0();
  const Eigen::MatrixXd q = sys.q();
  // The mean follows the same linear flow as the interacting center of mass.
  const Eigen::MatrixXd am = a0 + sys.a1(2);
  auto rhs = [&](const MeanFieldGaussian& x) {
    const Eigen::MatrixXd as = a0 * x.s;
    return MeanFieldGaussian{am * x.mean, as + as.transpose() + q};
  };
  auto step = [](const MeanFieldGaussian& x, double h, const MeanFieldGaussian& k) {
    return MeanFieldGaussian{x.mean + h * k.mean, x.s + h * k.s};
  };
  const double h = grid.dt() / kSubsteps;
  std::vector<MeanFieldGaussian> out;
  out.reserve(grid.n_steps() + 1);
  out.push_back(init);
  MeanFieldGaussian x = init;
  for (std::size_t s = 0; s < grid.n_steps(); ++s) {
    for (int sub = 0; sub < kSubsteps; ++sub) x = rk4_step(x, h, rhs, step);
    x.s = 0.5 * (x.s + x.s.transpose());
    out.push_back(x);
  }
  return out;
}

double meanfield_variance_closed_form(double a, double lambda, double s0, double t) {
  if (a == 0.0) return s0 + lambda * t;
  const double stat = lambda / (2.0 * a);
  return stat + (s0 - stat) * std::exp(-2.0 * a * t);
}

std::vector<Eigen::MatrixXd> propagate_dense(const LinearOracle& sys, std::size_t n,
                                             const Eigen::MatrixXd& init_cov,
                                             const TimeGrid& grid) {
  const auto b = static_cast<Eigen::Index>(sys.block());
  const auto nn = static_cast<Eigen::Index>(n);
  if (init_cov.rows() != nn * b || init_cov.cols() != nn * b)
    throw DimensionMismatch("dense covariance shape does not match N and the order");
  const Eigen::MatrixXd a0 = sys.a0();
  const Eigen::MatrixXd a1 = sys.a1(n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nn * b, nn * b);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(nn * b, nn * b);
  for (Eigen::Index i = 0; i < nn; ++i) {
    q.block(i * b, i * b, b, b) = sys.q();
    for (Eigen::Index j = 0; j < nn; ++j) a.block(i * b, j * b, b, b) = i == j ? a0 : a1;
  }
  auto rhs = [&](const Eigen::MatrixXd& s) -> Eigen::MatrixXd {
    const Eigen::MatrixXd as = a * s;
    return as + as.transpose() + q;
  };
  auto step = [](const Eigen::MatrixXd& x, double h, const Eigen::MatrixXd& k) -> Eigen::MatrixXd {
    return x + h * k;
  };
  const double h = grid.dt() / kSubsteps;
  std::vector<Eigen::MatrixXd> out;
  out.reserve(grid.n_steps() + 1);
  out.push_back(init_cov);
  Eigen::MatrixXd x = init_cov;
  for (std::size_t s = 0; s < grid.n_steps(); ++s) {
    for (int sub = 0; sub < kSubsteps; ++sub) x = rk4_step(x, h, rhs, step);
    out.push_back(x);
  }
  return out;
}

double exact_joint_kl(const ExchangeableGaussian& p, const MeanFieldGaussian& ref) {
  check_ref(p, ref);
  return gaussian_block_kl(p.n, p.mean, p.s, p.c, ref);
}

double exact_marginal_kl(const ExchangeableGaussian& p, std::size_t k,
                         const MeanFieldGaussian& ref) {
  if (k < 1 || k > p.n) throw InvalidParameter("marginal size must lie in [1, N]");
  check_ref(p, ref);
  return gaussian_block_kl(k, p.mean, p.s, p.c, ref);
}

}  // namespace pathchaos
