#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isurv {

// Every failure carries a short machine-readable code; the CLI prints it.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define ISURV_ERROR_TYPE(Name, tag)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(tag, what) {}      \
  };

ISURV_ERROR_TYPE(SchemaError, "schema")
ISURV_ERROR_TYPE(ValidationError, "validation")
ISURV_ERROR_TYPE(SizeError, "size")
ISURV_ERROR_TYPE(DomainError, "domain")
ISURV_ERROR_TYPE(ShapeError, "shape")
ISURV_ERROR_TYPE(TrainingError, "training")
ISURV_ERROR_TYPE(UsageError, "usage")
ISURV_ERROR_TYPE(IoError, "io")
ISURV_ERROR_TYPE(FormatError, "format")

#undef ISURV_ERROR_TYPE

/// Warnings go to stderr unless silenced; the counter lets tests observe them.
void warn(std::string_view message);
void set_warnings_silenced(bool silenced);
long warning_count();

}  // namespace isurv
