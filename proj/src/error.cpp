#include "qsr/error.hpp"

namespace qsr {

std::string_view
to_string(ErrorKind kind) noexcept
{
  switch (kind) {
    case ErrorKind::precondition:
      return "precondition";
    case ErrorKind::invalid_coordinate:
      return "invalid-coordinate";
    case ErrorKind::degenerate_pair:
      return "degenerate-pair";
    case ErrorKind::degenerate_data:
      return "degenerate-data";
    case ErrorKind::insufficient_data:
      return "insufficient-data";
    case ErrorKind::singular_covariance:
      return "singular-covariance";
    case ErrorKind::invalid_model:
      return "invalid-model";
    case ErrorKind::infinite_log_likelihood:
      return "infinite-log-likelihood";
    case ErrorKind::collapsed_component:
      return "collapsed-component";
    case ErrorKind::infeasible_fusion:
      return "infeasible-fusion";
    case ErrorKind::parse:
      return "parse";
    case ErrorKind::unsupported_version:
      return "unsupported-version";
    case ErrorKind::io:
      return "io";
  }
  return "unknown";
}

} // namespace qsr
