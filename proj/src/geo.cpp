#include "qsr/geo.hpp"

#include "qsr/error.hpp"
#include "qsr/numeric.hpp"

#include <cmath>
#include <sstream>

namespace qsr {

namespace {

constexpr double kCoincidentKm = 1e-12;

std::string
describe(const GeoPoint& p)
{
  std::ostringstream os;
  os << "(" << p.lon << ", " << p.lat << ")";
  return os.str();
}

} // namespace

double
ProjectionConfig::km_per_degree_lon() const
{
  if (mode == ProjectionMode::raw_degrees)
    return kKmPerDegree;
  return kKmPerDegree * std::cos(deg_to_rad(ref_lat));
}

void
ProjectionConfig::validate() const
{
  if (!std::isfinite(ref_lat))
    fail(ErrorKind::invalid_coordinate, "projection reference latitude is not finite");
  if (mode == ProjectionMode::equirectangular_corrected && (ref_lat < -89.0 || ref_lat > 89.0))
    fail(ErrorKind::invalid_coordinate,
         "projection reference latitude must lie in [-89, 89] for the corrected mode");
}

void
validate(const GeoPoint& p)
{
  if (!std::isfinite(p.lon) || !std::isfinite(p.lat))
    fail(ErrorKind::invalid_coordinate, "non-finite coordinate " + describe(p));
  if (p.lon < -180.0 || p.lon > 180.0 || p.lat < -90.0 || p.lat > 90.0)
    fail(ErrorKind::invalid_coordinate, "coordinate out of range " + describe(p));
}

CartesianPoint
project(const GeoPoint& p, const GeoPoint& origin, const ProjectionConfig& cfg)
{
  validate(p);
  validate(origin);
  cfg.validate();
  return { (p.lon - origin.lon) * cfg.km_per_degree_lon(), (p.lat - origin.lat) * kKmPerDegree };
}

GeoPoint
unproject(const CartesianPoint& c, const GeoPoint& origin, const ProjectionConfig& cfg)
{
  cfg.validate();
  return { origin.lon + c.x / cfg.km_per_degree_lon(), origin.lat + c.y / kKmPerDegree };
}

double
wrap_degrees(double deg)
{
  double w = std::fmod(deg, 360.0);
  if (w < 0.0)
    w += 360.0;
  // fmod of a tiny negative angle rounds up to exactly 360
  if (w >= 360.0)
    w = 0.0;
  return w;
}

SpatialFeature
extract_feature(const CartesianPoint& known, const CartesianPoint& unknown)
{
  const double dx = unknown.x - known.x;
  const double dy = unknown.y - known.y;
  if (!std::isfinite(dx) || !std::isfinite(dy))
    fail(ErrorKind::invalid_coordinate, "non-finite planar coordinate");
  const double distance = std::hypot(dx, dy);
  if (distance < kCoincidentKm)
    fail(ErrorKind::degenerate_pair, "known and unknown points coincide");
  return { distance, wrap_degrees(rad_to_deg(std::atan2(dy, dx))) };
}

CartesianPoint
feature_to_point(const CartesianPoint& known, const SpatialFeature& f)
{
  require(f.valid(), "spatial feature outside distance >= 0, orientation in [0, 360)");
  const double theta = deg_to_rad(f.orientation);
  return { known.x + f.distance * std::cos(theta), known.y + f.distance * std::sin(theta) };
}

} // namespace qsr
