#include "homeofit/rng.hpp"

#include <cmath>
#include <numbers>

namespace homeofit {

CounterRng CounterRng::split(std::uint64_t tag) const noexcept {
  return CounterRng(mix(key_ ^ mix(tag + kGolden)), 0);
}

double CounterRng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() noexcept {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace homeofit
