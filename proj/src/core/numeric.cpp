#include "pli/core/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "pli/core/error.hpp"

namespace pli {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw Error("empty reduction");
  const double shift = *std::max_element(values.begin(), values.end());
  if (shift == -std::numeric_limits<double>::infinity()) return shift;
  double acc = 0.0;
  for (const double v : values) acc += std::exp(v - shift);
  return shift + std::log(acc);
}

std::vector<double> normalize_log_weights(std::span<const double> log_weights) {
  const double lse = log_sum_exp(log_weights);
  if (!std::isfinite(lse)) throw DegenerateWeightsError("degenerate weights");
  std::vector<double> out(log_weights.size());
  std::transform(log_weights.begin(), log_weights.end(), out.begin(),
                 [lse](double v) { return std::exp(v - lse); });
  return out;
}

double effective_sample_size(std::span<const double> weights) {
  double sq = 0.0;
  for (const double w : weights) sq += w * w;
  return 1.0 / sq;
}

double empirical_kl_to_uniform(std::span<const double> weights) {
  const double k = static_cast<double>(weights.size());
  double kl = 0.0;
  for (const double w : weights) {
    if (w > 0.0) kl += w * std::log(k * w);
  }
  return kl;
}

double lower_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("empty reduction");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  // The small offset keeps products like 0.1 * 30 from rounding up past an integer.
  auto idx = static_cast<long>(std::ceil(q * n - 1e-9)) - 1;
  idx = std::clamp(idx, 0L, static_cast<long>(values.size()) - 1);
  return values[static_cast<std::size_t>(idx)];
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t used = std::min(workers, n);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(used);
    for (std::size_t w = 0; w < used; ++w) {
      const std::size_t begin = n * w / used;
      const std::size_t end = n * (w + 1) / used;
      pool.emplace_back([&, begin, end] {
        try {
          for (std::size_t i = begin; i < end; ++i) body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace pli
