#pragma once

#include "qsr/linalg.hpp"

namespace qsr {

//! Kilometres per degree of latitude (and of longitude at the equator).
inline constexpr double kKmPerDegree = 111.32;

struct GeoPoint
{
  double lon = 0.0; ///< decimal degrees, [-180, 180]
  double lat = 0.0; ///< decimal degrees, [-90, 90]

  friend constexpr bool operator==(GeoPoint, GeoPoint) = default;
};

//! Local planar coordinates in km: x east, y north of some origin.
struct CartesianPoint
{
  double x = 0.0;
  double y = 0.0;
};

//! Distance (km) and counterclockwise orientation from the +x (east) axis
//! (degrees) of an unknown POI as seen from a known POI.
struct SpatialFeature
{
  double distance = 0.0;
  double orientation = 0.0;

  Vec2 as_vec() const { return { distance, orientation }; }
  bool valid() const { return distance >= 0.0 && orientation >= 0.0 && orientation < 360.0; }

  friend constexpr bool operator==(SpatialFeature, SpatialFeature) = default;
};

enum class ProjectionMode
{
  equirectangular_corrected, ///< longitude scaled by cos(ref_lat)
  raw_degrees                ///< 1 degree = 111.32 km on both axes
};

struct ProjectionConfig
{
  double ref_lat = 0.0;
  ProjectionMode mode = ProjectionMode::equirectangular_corrected;

  //! km per degree of longitude under this configuration
  double km_per_degree_lon() const;
  void validate() const;
};

//! Throws invalid_coordinate on non-finite or out-of-range values.
void validate(const GeoPoint& p);

CartesianPoint project(const GeoPoint& p, const GeoPoint& origin, const ProjectionConfig& cfg);

//! Inverse of project.
GeoPoint unproject(const CartesianPoint& c, const GeoPoint& origin, const ProjectionConfig& cfg);

//! Throws degenerate_pair when the points are closer than 1e-12 km.
SpatialFeature extract_feature(const CartesianPoint& known, const CartesianPoint& unknown);

CartesianPoint feature_to_point(const CartesianPoint& known, const SpatialFeature& f);

//! Maps any finite angle in degrees into [0, 360).
double wrap_degrees(double deg);

} // namespace qsr
