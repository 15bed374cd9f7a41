#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "pathchaos/info_metrics.hpp"

namespace pathchaos {

namespace {

constexpr std::size_t kLeafSize = 12;
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

class KdTree {
 public:
  KdTree(std::span<const double> pts, std::size_t d) : pts_(pts), d_(d), n_(pts.size() / d) {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * n_ / kLeafSize + 2);
    build(0, n_);
  }

  // Squared distance to the k-th nearest point, skipping index `skip`.
  double kth_sq(std::span<const double> q, std::size_t k, std::size_t skip) const {
    std::vector<std::pair<double, std::size_t>> best;
    best.reserve(k + 1);
    search(0, q, k, skip, best);
    return best.back().first;
  }

 private:
  struct Node {
    std::size_t lo, hi;
    std::size_t dim = 0;
    double split = 0.0;
    std::size_t left = kNone, right = kNone;
  };

  double coord(std::size_t i, std::size_t k) const { return pts_[i * d_ + k]; }

  std::size_t build(std::size_t lo, std::size_t hi) {
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{lo, hi});
    if (hi - lo <= kLeafSize) return id;
    std::size_t dim = 0;
    double widest = -1.0;
    for (std::size_t k = 0; k < d_; ++k) {
      double mn = std::numeric_limits<double>::infinity(), mx = -mn;
      for (std::size_t t = lo; t < hi; ++t) {
        mn = std::min(mn, coord(order_[t], k));
        mx = std::max(mx, coord(order_[t], k));
      }
      if (mx - mn > widest) {
        widest = mx - mn;
        dim = k;
      }
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(hi),
                     [&](std::size_t a, std::size_t b) { return coord(a, dim) < coord(b, dim); });
    const double split = coord(order_[mid], dim);
    const std::size_t left = build(lo, mid);
    const std::size_t right = build(mid, hi);
    nodes_[id].dim = dim;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void offer(std::vector<std::pair<double, std::size_t>>& best, std::size_t k, double dist,
             std::size_t idx) const {
    const std::pair<double, std::size_t> cand{dist, idx};
    if (best.size() == k && !(cand < best.back())) return;
    best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
    if (best.size() > k) best.pop_back();
  }

  void search(std::size_t id, std::span<const double> q, std::size_t k, std::size_t skip,
              std::vector<std::pair<double, std::size_t>>& best) const {
    const Node& nd = nodes_[id];
    if (nd.left == kNone) {
      for (std::size_t t = nd.lo; t < nd.hi; ++t) {
        const std::size_t i = order_[t];
        if (i == skip) continue;
        double dist = 0.0;
        for (std::size_t c = 0; c < d_; ++c) {
          const double diff = q[c] - coord(i, c);
          dist += diff * diff;
        }
        offer(best, k, dist, i);
      }
      return;
    }
    const double delta = q[nd.dim] - nd.split;
    const std::size_t near = delta < 0.0 ? nd.left : nd.right;
    const std::size_t far = delta < 0.0 ? nd.right : nd.left;
    search(near, q, k, skip, best);
    if (best.size() < k || delta * delta <= best.back().first) search(far, q, k, skip, best);
  }

  std::span<const double> pts_;
  std::size_t d_;
  std::size_t n_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

// Returns false when some radius is zero (duplicate points).
bool knn_terms(std::span<const double> p, std::span<const double> q, std::size_t d,
               std::size_t k, double& sum_log) {
  const std::size_t n = p.size() / d;
  const KdTree tp(p, d), tq(q, d);
  sum_log = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = p.subspan(i * d, d);
    const double rho = tp.kth_sq(x, k, i);
    const double nu = tq.kth_sq(x, k, kNone);
    if (rho == 0.0 || nu == 0.0) return false;
    sum_log += 0.5 * std::log(nu / rho);
  }
  return true;
}

}  // namespace

double knn_kl_estimate(std::span<const double> samples_p, std::span<const double> samples_q,
                       std::size_t d, std::size_t k, std::uint64_t jitter_seed) {
  if (d == 0 || d > 4) throw DimensionMismatch("k-NN KL estimation supports 1 <= d <= 4");
  if (samples_p.size() % d != 0 || samples_q.size() % d != 0)
    throw DimensionMismatch("sample arrays are not a whole number of points");
  const std::size_t n = samples_p.size() / d;
  const std::size_t m = samples_q.size() / d;
  if (n < 50 || m < 50) throw InvalidParameter("k-NN KL estimation needs at least 50 samples per side");
  if (k == 0 || k >= n || k > m) throw InvalidParameter("neighbor count out of range");
  for (double v : samples_p)
    if (!std::isfinite(v)) throw InvalidParameter("samples must be finite");
  for (double v : samples_q)
    if (!std::isfinite(v)) throw InvalidParameter("samples must be finite");

  double sum_log = 0.0;
  if (!knn_terms(samples_p, samples_q, d, k, sum_log)) {
    std::cerr << "warning: duplicate points in k-NN KL estimate; jittering by 1e-12\n";
    const RngPolicy rng{jitter_seed};
    std::vector<double> p(samples_p.begin(), samples_p.end());
    std::vector<double> q(samples_q.begin(), samples_q.end());
    const KeyedStream sp = rng.stream(StreamTag::jitter, 0, 0, 0);
    const KeyedStream sq = rng.stream(StreamTag::jitter, 0, 1, 0);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += 1e-12 * std::max(1.0, std::abs(p[i])) * sp.gaussian(i);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += 1e-12 * std::max(1.0, std::abs(q[i])) * sq.gaussian(i);
    if (!knn_terms(p, q, d, k, sum_log))
      throw InvalidParameter("k-NN radii remain zero after jitter");
  }
  const double dd = static_cast<double>(d);
  return dd / static_cast<double>(n) * sum_log +
         std::log(static_cast<double>(m) / static_cast<double>(n - 1));
}

}  // namespace pathchaos
