#include "pli/ipm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "pli/core/error.hpp"

namespace pli {
namespace {

using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;

void check_dims(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) throw Error("dimension mismatch between sample sets");
}

// Squared distances from row `i` of `x` to rows [begin, end) of `y`.
RowArray row_sq_dist(const Matrix& x, Eigen::Index i, const Matrix& y, Eigen::Index begin, Eigen::Index end) {
  RowArray out(end - begin);
  const auto xi = x.row(i);
  for (Eigen::Index j = begin; j < end; ++j) out(j - begin) = (y.row(j) - xi).squaredNorm();
  return out;
}

// Same, with the points of `y` stored as columns of `yt`.
RowArray col_sq_dist(const Matrix& x, Eigen::Index i, const Matrix& yt, Eigen::Index begin) {
  return (yt.rightCols(yt.cols() - begin).colwise() - x.row(i).transpose()).colwise().squaredNorm().array();
}

// Evaluates sum_l exp(-d / (2 l)) with as few exp calls as possible: a bandwidth
// that is an integer fraction (ratio <= 16) of a larger one reuses that kernel
// through repeated multiplication.
class KernelBank {
 public:
  explicit KernelBank(std::vector<double> bandwidths) {
    std::sort(bandwidths.begin(), bandwidths.end(), std::greater<>());
    for (const double l : bandwidths) {
      Step step{-0.5 / l, -1, 0};
      for (std::size_t k = 0; k < steps_.size(); ++k) {
        const double ratio = bandwidths[k] / l;
        const double r = std::round(ratio);
        if (r >= 1.0 && r <= 16.0 && std::abs(ratio - r) < 1e-12 * r && (step.source < 0 || r < step.power)) {
          step.source = static_cast<int>(k);
          step.power = static_cast<int>(r);
        }
      }
      steps_.push_back(step);
    }
    values_.resize(steps_.size());
  }

  double sum(const RowArray& dist) {
    double total = 0.0;
    for (std::size_t k = 0; k < steps_.size(); ++k) {
      const Step& st = steps_[k];
      if (st.source < 0) {
        values_[k] = (dist * st.coefficient).exp();
      } else {
        values_[k] = power(values_[static_cast<std::size_t>(st.source)], st.power);
      }
      total += values_[k].sum();
    }
    return total;
  }

 private:
  struct Step {
    double coefficient;
    int source;
    int power;
  };

  static RowArray power(const RowArray& base, int p) {
    RowArray result = base;
    RowArray sq = base;
    bool first = true;
    for (; p > 0; p >>= 1) {
      if (p & 1) {
        if (first) {
          result = sq;
          first = false;
        } else {
          result *= sq;
        }
      }
      if (p > 1) sq = sq.square();
    }
    return result;
  }

  std::vector<Step> steps_;
  std::vector<RowArray> values_;
};

// Above this dimension distances come from the Gram expansion
// |x|^2 + |y|^2 - 2 x.y, computed blockwise with a matrix product.
constexpr Eigen::Index kGramMinDim = 16;
constexpr Eigen::Index kBlockRows = 256;

// Calls fn(i, d) with the squared distances d from row i of x to rows [offset(i), m) of y.
template <class Offset, class Fn>
void for_each_distance_row(const Matrix& x, const Matrix& y, Offset offset, Fn fn) {
  if (x.cols() < kGramMinDim) {
    const Matrix yt = y.transpose();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::Index begin = offset(i);
      if (begin < y.rows()) fn(col_sq_dist(x, i, yt, begin));
    }
    return;
  }
  const RowArray yn = y.rowwise().squaredNorm().transpose().array();
  for (Eigen::Index b = 0; b < x.rows(); b += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, x.rows() - b);
    const Matrix gram = x.middleRows(b, rows) * y.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index begin = offset(b + r);
      if (begin >= y.rows()) continue;
      const Eigen::Index len = y.rows() - begin;
      const RowArray d = (x.row(b + r).squaredNorm() + yn.tail(len) - 2.0 * gram.row(r).tail(len).array()).max(0.0);
      fn(d);
    }
  }
}

// (1 / (n (n - 1))) * sum_{i != j} k(x_i, x_j)
double self_term(const Matrix& x, const MmdConfig& cfg) {
  const Eigen::Index n = x.rows();
  KernelBank bank(cfg.bandwidths);
  double total = 0.0;
  for_each_distance_row(x, x, [](Eigen::Index i) { return i + 1; }, [&](const RowArray& d) { total += bank.sum(d); });
  return 2.0 * total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

double cross_term(const Matrix& x, const Matrix& y, const MmdConfig& cfg) {
  KernelBank bank(cfg.bandwidths);
  double total = 0.0;
  for_each_distance_row(x, y, [](Eigen::Index) { return Eigen::Index{0}; }, [&](const RowArray& d) { total += bank.sum(d); });
  return total / (static_cast<double>(x.rows()) * static_cast<double>(y.rows()));
}

// Single-row sets fall back to the V-statistic self term k(x, x) = #bandwidths.
double scorer_self_term(const Matrix& x, const MmdConfig& cfg) {
  return x.rows() == 1 ? static_cast<double>(cfg.bandwidths.size()) : self_term(x, cfg);
}

void check_mmd_inputs(const Matrix& x, const Matrix& y, const MmdConfig& cfg) {
  check_dims(x, y);
  if (x.rows() < 2 || y.rows() < 2) throw Error("need two samples per set");
  if (cfg.bandwidths.empty()) throw Error("MmdConfig: empty bandwidth list");
  for (const double l : cfg.bandwidths) {
    if (!(l > 0.0)) throw Error("MmdConfig: bandwidths must be positive");
  }
}

// True when `a` should be the second argument in the canonical orientation.
bool canonical_swap(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) return a.rows() > b.rows();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != b(i, j)) return a(i, j) > b(i, j);
    }
  }
  return false;
}

// eps * log sum_j exp((pot_j - cost_j) / eps), vectorized over one cost row.
double soft_min(const Eigen::Ref<const RowArray>& cost_row, const RowArray& potential, double eps) {
  const RowArray v = (potential - cost_row) / eps;
  const double shift = v.maxCoeff();
  return eps * (shift + std::log((v - shift).exp().sum()));
}

// Scaling-form Sinkhorn with log-domain absorption: the kernel is rebuilt around
// the current potentials whenever the scalings grow large or leave the finite
// range, so the inner loop needs only matrix-vector products. Warm-started from
// a geometric schedule of larger regularizations (epsilon scaling).
SinkhornResult solve_oriented(const Matrix& x, const Matrix& y, const SinkhornConfig& cfg) {
  SinkhornResult result;
  const Matrix cost = pairwise_sq_dist(x, y);
  const double mean_cost = cost.mean();
  if (mean_cost == 0.0) {
    result.converged = true;
    return result;
  }
  const Matrix cost_t = cost.transpose();
  const Eigen::Index n = x.rows();
  const Eigen::Index m = y.rows();
  const double target_eps = cfg.epsilon_scale * mean_cost;
  const double a = 1.0 / static_cast<double>(n);
  const double b = 1.0 / static_cast<double>(m);
  constexpr double kAbsorbAbove = 30.0;
  constexpr int kWarmupIters = 50;
  result.epsilon = target_eps;

  double eps = std::max(target_eps, mean_cost);
  RowArray f = RowArray::Zero(n);
  RowArray g = RowArray::Zero(m);
  Eigen::VectorXd u = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m);
  Matrix kernel;
  auto absorb = [&] {
    f += eps * u.array().log().transpose();
    g += eps * v.array().log().transpose();
    u.setOnes();
    v.setOnes();
  };
  auto refresh = [&] {
    absorb();
    for (Eigen::Index i = 0; i < n; ++i) f(i) = eps * std::log(a) - soft_min(cost.row(i).array(), g, eps);
    for (Eigen::Index j = 0; j < m; ++j) g(j) = eps * std::log(b) - soft_min(cost_t.row(j).array(), f, eps);
    kernel = ((-cost.array()).colwise() + f.transpose()).rowwise() + g;
    kernel = (kernel.array() / eps).exp().matrix();
  };
  // One u/v sweep; returns the row violation before the sweep (NaN after a refresh).
  auto sweep = [&]() -> double {
    const Eigen::VectorXd kv = kernel * v;
    const double row_error = (u.array() * kv.array() - a).abs().sum();
    if (!(kv.array() > 0.0).all() || !kv.allFinite()) {
      refresh();
      return row_error;
    }
    const Eigen::VectorXd u_next = a / kv.array();
    const Eigen::VectorXd ktu = kernel.transpose() * u_next;
    if (!(ktu.array() > 0.0).all() || !ktu.allFinite()) {
      refresh();
      return row_error;
    }
    u = u_next;
    v = b / ktu.array();
    if (u.array().log().abs().maxCoeff() > kAbsorbAbove || v.array().log().abs().maxCoeff() > kAbsorbAbove) {
      refresh();
    }
    return row_error;
  };

  refresh();
  while (eps > target_eps) {
    for (int k = 0; k < kWarmupIters; ++k) {
      if (sweep() < cfg.marginal_tol) break;
    }
    absorb();
    eps = std::max(target_eps, eps * 0.5);
    refresh();
  }

  RowArray best_f = f;
  RowArray best_g = g;
  double best_error = std::numeric_limits<double>::infinity();
  int iter = 1;
  for (;; ++iter) {
    // Column marginals are exact after each v update; rows carry the violation.
    const double row_error = (u.array() * (kernel * v).array() - a).abs().sum();
    if (std::isfinite(row_error) && row_error < best_error) {
      best_error = row_error;
      best_f = f + eps * u.array().log().transpose();
      best_g = g + eps * v.array().log().transpose();
    }
    if (row_error < cfg.marginal_tol) {
      result.converged = true;
      break;
    }
    if (iter >= cfg.max_iters) break;
    sweep();
  }
  const double eps_final = eps;

  double total = 0.0;
  RowArray col_mass = RowArray::Zero(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RowArray p = ((best_g - cost.row(i).array() + best_f(i)) / eps_final).exp();
    total += (p * cost.row(i).array()).sum();
    col_mass += p;
  }
  const double col_error = (col_mass - b).abs().sum();
  result.cost = total;
  result.iterations = iter;
  result.marginal_error = std::max(best_error, col_error);
  return result;
}

}  // namespace

Matrix pairwise_sq_dist(const Matrix& x, const Matrix& y) {
  check_dims(x, y);
  Matrix out(x.rows(), y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = row_sq_dist(x, i, y, 0, y.rows()).matrix();
  return out;
}

double mmd2_unbiased(const Matrix& x, const Matrix& y, const MmdConfig& cfg) {
  check_mmd_inputs(x, y, cfg);
  return self_term(x, cfg) + self_term(y, cfg) - 2.0 * cross_term(x, y, cfg);
}

SinkhornResult sinkhorn_solve(const Matrix& x, const Matrix& y, const SinkhornConfig& cfg) {
  check_dims(x, y);
  if (x.rows() < 1 || y.rows() < 1) throw Error("sinkhorn_w2: empty sample set");
  if (!(cfg.epsilon_scale > 0.0) || !(cfg.marginal_tol > 0.0) || cfg.max_iters < 1) {
    throw Error("SinkhornConfig: epsilon_scale, marginal_tol and max_iters must be positive");
  }
  // A fixed orientation keeps the result exactly symmetric in its arguments.
  return canonical_swap(x, y) ? solve_oriented(y, x, cfg) : solve_oriented(x, y, cfg);
}

double sinkhorn_w2(const Matrix& x, const Matrix& y, const SinkhornConfig& cfg) {
  return sinkhorn_solve(x, y, cfg).cost;
}

ReferenceScorer::ReferenceScorer(Matrix reference, MetricSpec metric)
    : reference_(std::move(reference)), metric_(std::move(metric)) {
  if (reference_.rows() < 1) throw Error("ReferenceScorer: empty reference set");
  if (metric_.kind == MetricKind::kMmd) {
    if (metric_.mmd.bandwidths.empty()) throw Error("MmdConfig: empty bandwidth list");
    reference_self_term_ = scorer_self_term(reference_, metric_.mmd);
  }
}

double ReferenceScorer::operator()(const Matrix& simulated) const {
  if (metric_.kind == MetricKind::kWasserstein) return sinkhorn_w2(reference_, simulated, metric_.sinkhorn);
  check_dims(reference_, simulated);
  if (simulated.rows() < 1) throw Error("ReferenceScorer: empty simulated set");
  return reference_self_term_ + scorer_self_term(simulated, metric_.mmd) -
         2.0 * cross_term(reference_, simulated, metric_.mmd);
}

}  // namespace pli
