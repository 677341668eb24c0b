#pragma once

#include <algorithm>
#include <cmath>

namespace qsr {

//! A point or vector in the plane. For spatial features x is the distance
//! (km) and y the orientation (degrees).
struct Vec2
{
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return { a.x + b.x, a.y + b.y }; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return { a.x - b.x, a.y - b.y }; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return { s * a.x, s * a.y }; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

//! Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2
{
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  static constexpr Sym2 identity() { return { 1.0, 0.0, 1.0 }; }
  static constexpr Sym2 diagonal(double a, double b) { return { a, 0.0, b }; }
  static constexpr Sym2 outer(Vec2 v) { return { v.x * v.x, v.x * v.y, v.y * v.y }; }

  constexpr double det() const { return xx * yy - xy * xy; }

  friend constexpr Sym2 operator+(Sym2 a, Sym2 b)
  {
    return { a.xx + b.xx, a.xy + b.xy, a.yy + b.yy };
  }
  friend constexpr Sym2 operator*(double s, Sym2 a) { return { s * a.xx, s * a.xy, s * a.yy }; }
  friend constexpr bool operator==(Sym2, Sym2) = default;
};

//! Lower Cholesky factor [[l11, 0], [l21, l22]] of a positive definite Sym2.
struct Cholesky2
{
  double l11 = 1.0;
  double l21 = 0.0;
  double l22 = 1.0;

  //! Returns false when the matrix is not (numerically) positive definite.
  static bool factor(const Sym2& m, Cholesky2& out)
  {
    if (!(m.xx > 0.0) || !std::isfinite(m.xx))
      return false;
    const double l11 = std::sqrt(m.xx);
    const double l21 = m.xy / l11;
    const double d = m.yy - l21 * l21;
    if (!(d > 0.0) || !std::isfinite(d))
      return false;
    out = { l11, l21, std::sqrt(d) };
    return true;
  }

  double log_det() const { return 2.0 * (std::log(l11) + std::log(l22)); }

  //! Squared Mahalanobis norm v^T M^{-1} v via forward substitution.
  double mahalanobis_sq(Vec2 v) const
  {
    const double z1 = v.x / l11;
    const double z2 = (v.y - l21 * z1) / l22;
    return z1 * z1 + z2 * z2;
  }

  //! L z for a standard normal z; used for sampling.
  Vec2 apply(Vec2 z) const { return { l11 * z.x, l21 * z.x + l22 * z.y }; }
};

//! Clips the eigenvalues of a symmetric matrix from below at `floor`.
inline Sym2
clip_eigenvalues(const Sym2& m, double floor)
{
  const double half_tr = 0.5 * (m.xx + m.yy);
  const double half_diff = 0.5 * (m.xx - m.yy);
  const double r = std::hypot(half_diff, m.xy);
  const double lo = half_tr - r;
  if (lo >= floor)
    return m;
  const double hi = half_tr + r;
  if (r == 0.0)
    return Sym2::diagonal(std::max(m.xx, floor), std::max(m.yy, floor));
  // unit eigenvector of the larger eigenvalue
  const double angle = 0.5 * std::atan2(2.0 * m.xy, m.xx - m.yy);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double l1 = std::max(hi, floor);
  const double l2 = std::max(lo, floor);
  return { l1 * c * c + l2 * s * s, (l1 - l2) * c * s, l1 * s * s + l2 * c * c };
}

} // namespace qsr
