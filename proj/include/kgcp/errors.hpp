#pragma once

#include <stdexcept>
#include <string>

namespace kgcp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Correlation matrix could not be factored even with the largest jitter.
class IllConditioned : public Error {
public:
  using Error::Error;
};

class InsufficientData : public Error {
public:
  using Error::Error;
};

class SamplingStalled : public Error {
public:
  using Error::Error;
};

class UndefinedGradient : public Error {
public:
  using Error::Error;
};

class AcquisitionFailed : public Error {
public:
  using Error::Error;
};

/// The objective (built-in or external process) did not produce a value.
class EvaluationFailed : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace kgcp
