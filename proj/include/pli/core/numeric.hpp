#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace pli {

/// log(sum(exp(values))) with a max shift. -inf entries are masked out; an
/// all -inf input returns -inf. Throws pli::Error("empty reduction") when empty.
double log_sum_exp(std::span<const double> values);

/// Exponentiates `log_weights - log_sum_exp(log_weights)` in place of a copy.
std::vector<double> normalize_log_weights(std::span<const double> log_weights);

/// 1 / sum(w^2) for normalized weights.
double effective_sample_size(std::span<const double> weights);

/// Sum over positive weights of w * log(K * w): KL of a weighted particle set
/// against the uniform set of the same size.
double empirical_kl_to_uniform(std::span<const double> weights);

/// Lower empirical quantile: element at index ceil(q * n) - 1 of the sorted values.
double lower_quantile(std::vector<double> values, double q);

/// Runs body(i) for i in [0, n) on up to `threads` workers using contiguous
/// blocks. Callers keep results index-addressed so output does not depend on
/// the partition. Exceptions from any worker are rethrown on the caller.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace pli
