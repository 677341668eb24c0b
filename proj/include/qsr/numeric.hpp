#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>

namespace qsr {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112; // ln(2 pi)

//! log(sum_i exp(v_i)), shifted by the max term. Empty input or all -inf
//! gives -inf.
inline double
log_sum_exp(std::span<const double> values)
{
  double hi = kNegInf;
  for (double v : values)
    hi = v > hi ? v : hi;
  if (hi == kNegInf)
    return kNegInf;
  if (hi == std::numeric_limits<double>::infinity())
    return hi;
  double sum = 0.0;
  for (double v : values)
    sum += std::exp(v - hi);
  return hi + std::log(sum);
}

//! SplitMix64 finalizer; derives independent child seeds from a parent seed.
inline constexpr std::uint64_t
derive_seed(std::uint64_t seed, std::uint64_t stream)
{
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr double
deg_to_rad(double deg)
{
  return deg * (std::numbers::pi / 180.0);
}

inline constexpr double
rad_to_deg(double rad)
{
  return rad * (180.0 / std::numbers::pi);
}

} // namespace qsr
