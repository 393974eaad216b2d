#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hallucheck {

// Every library failure derives from Error. The CLI maps the families below
// onto its exit codes (config 2, provider 3, schema 4).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

// Caller broke a documented precondition (empty request, n = 0, ...).
class PreconditionError : public ConfigError {
public:
  using ConfigError::ConfigError;
};

class TransportError : public Error {
public:
  using Error::Error;
};

class ProviderRefusal : public Error {
public:
  using Error::Error;
};

// sample_n gave up part-way; `succeeded` completions were obtained first.
class SamplingError : public Error {
public:
  SamplingError(const std::string& what, std::size_t succeeded)
      : Error(what), succeeded_(succeeded) {}
  std::size_t succeeded() const noexcept { return succeeded_; }

private:
  std::size_t succeeded_;
};

class ScoreParseError : public Error {
public:
  using Error::Error;
};

class EmbedBackendError : public Error {
public:
  using Error::Error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class ZeroVector : public Error {
public:
  using Error::Error;
};

class DetectorError : public Error {
public:
  using Error::Error;
};

class DegenerateLabels : public Error {
public:
  using Error::Error;
};

class RefMismatch : public Error {
public:
  using Error::Error;
};

class SchemaError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class NotFound : public Error {
public:
  using Error::Error;
};

class JudgeParseError : public Error {
public:
  using Error::Error;
};

}  // namespace hallucheck
