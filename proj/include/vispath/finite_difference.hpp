// Central finite differences over small fixed-size parameter vectors.
#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>

namespace vispath {

/// component_i = (f(x + h_i e_i) - f(x - h_i e_i)) / (2 h_i)
template <std::size_t N, class F>
std::array<double, N> central_gradient(F&& f, const std::array<double, N>& x, const std::array<double, N>& h) {
  std::array<double, N> g{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!(h[i] > 0.0)) throw std::invalid_argument("central_gradient: step must be positive");
    auto plus = x;
    auto minus = x;
    plus[i] += h[i];
    minus[i] -= h[i];
    g[i] = (f(plus) - f(minus)) / (2.0 * h[i]);
  }
  return g;
}

}  // namespace vispath
