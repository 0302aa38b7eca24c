// Execution policy switch and an order-fixed reduction.

#pragma once

#include <cstddef>
#include <vector>

namespace nanonmr {

enum class Exec { serial, parallel };

/// Pairwise (cascade) sum; the association order depends only on the length.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

/// Number of OpenMP threads in use (1 without OpenMP).
int thread_count();
void set_thread_count(int n);

}  // namespace nanonmr
