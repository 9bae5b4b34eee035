#pragma once

#include <stdexcept>
#include <string>

namespace gazedecouple {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

class InvalidArgument : public Error {
  public:
    using Error::Error;
};

/// Image bytes could not be turned into a raster or mask.
class DecodeError : public Error {
  public:
    using Error::Error;
};

/// A backend could not be reached or returned a server-side failure. Retryable.
class TransportError : public Error {
  public:
    using Error::Error;
};

/// A backend answered, but the payload does not follow the wire contract. Not retryable.
class MalformedResponse : public Error {
  public:
    using Error::Error;
};

/// Mock fixture has no response for the request key and is not permissive.
class MissingFixture : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

/// A stored record failed schema or integrity checks.
class RecordError : public Error {
  public:
    using Error::Error;
};

} // namespace gazedecouple
