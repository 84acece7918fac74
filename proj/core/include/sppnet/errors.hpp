#pragma once

#include <stdexcept>
#include <string>

namespace sppnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or feature-map dimensions do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An invalid model, training or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Prompt sampling could not be carried out on the given label map.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// A malformed file: checkpoint, image, mask or dataset layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace sppnet
