#pragma once

#include <stdexcept>
#include <string>

namespace aft {

struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConstructionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankDeficientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrackingLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace aft
