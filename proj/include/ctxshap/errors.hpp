#pragma once

#include <stdexcept>
#include <string>

namespace ctxshap {

// Base class for all domain errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Model ingestion and evaluation.
class SchemaError : public Error {
 public:
  using Error::Error;
};
class StructureError : public Error {
 public:
  using Error::Error;
};
class ValueError : public Error {
 public:
  using Error::Error;
};
class WidthError : public Error {
 public:
  using Error::Error;
};
class EmptyBackgroundError : public Error {
 public:
  using Error::Error;
};

// Attribution.
class CoverageError : public Error {
 public:
  using Error::Error;
};
class TooManyFeaturesError : public Error {
 public:
  using Error::Error;
};
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// Prompt assembly and response parsing.
class UnknownFeatureError : public Error {
 public:
  using Error::Error;
};
class BudgetTooSmallError : public Error {
 public:
  using Error::Error;
};
class KindArityError : public Error {
 public:
  using Error::Error;
};
class FormatError : public Error {
 public:
  FormatError(const std::string& section, const std::string& msg)
      : Error(msg), section_(section) {}
  const std::string& section() const { return section_; }

 private:
  std::string section_;
};

// Gateway.
class AuthError : public Error {
 public:
  using Error::Error;
};
class RateLimitError : public Error {
 public:
  using Error::Error;
};
class TransportError : public Error {
 public:
  using Error::Error;
};
class UpstreamError : public Error {
 public:
  using Error::Error;
};
class FixtureMissError : public Error {
 public:
  using Error::Error;
};
class MissingPriceError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxshap
