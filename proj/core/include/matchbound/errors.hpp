#pragma once

#include <stdexcept>
#include <string>

namespace matchbound {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI's JSON error channel.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define MATCHBOUND_DEFINE_ERROR(Name, tag)                           \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& message) : Error(tag, message) {} \
  };

MATCHBOUND_DEFINE_ERROR(SchemaError, "schema")
MATCHBOUND_DEFINE_ERROR(ParseError, "parse")
MATCHBOUND_DEFINE_ERROR(ValidationError, "validation")
MATCHBOUND_DEFINE_ERROR(EstimandUndefinedError, "estimand-undefined")
MATCHBOUND_DEFINE_ERROR(PreconditionError, "precondition")
MATCHBOUND_DEFINE_ERROR(CapacityError, "capacity")
MATCHBOUND_DEFINE_ERROR(NumericError, "numeric")
MATCHBOUND_DEFINE_ERROR(ConfigurationError, "configuration")
MATCHBOUND_DEFINE_ERROR(ModelError, "model")
MATCHBOUND_DEFINE_ERROR(IoError, "io")

#undef MATCHBOUND_DEFINE_ERROR

}  // namespace matchbound
