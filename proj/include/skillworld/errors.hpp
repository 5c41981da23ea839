#pragma once

#include <stdexcept>
#include <string>

namespace skillworld {

// Base class for all library errors. CLI maps these to exit codes:
// ConfigError/IoError -> 2, NumericalError -> 3.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

struct InvalidKey : Error {
  using Error::Error;
};
struct DegenerateEmbedding : Error {
  using Error::Error;
};
struct EmptyPool : Error {
  using Error::Error;
};
struct UnassignedDomain : Error {
  using Error::Error;
};

struct UnknownTask : Error {
  using Error::Error;
};
struct EpisodeFinished : Error {
  using Error::Error;
};
struct ProtocolViolation : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct InvalidDistribution : Error {
  using Error::Error;
};
struct NoGoldenTrajectories : Error {
  using Error::Error;
};

}  // namespace skillworld
