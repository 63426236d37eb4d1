#pragma once

#include <stdexcept>
#include <string>

namespace ngc {

/// Broad failure classes; the CLI maps them onto exit codes 1 and 2.
enum class ErrorCategory { Validation, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define NGC_DEFINE_ERROR(Name, Category)                   \
  class Name : public Error {                              \
   public:                                                 \
    explicit Name(const std::string& what)                 \
        : Error(ErrorCategory::Category, #Name ": " + what) {} \
  }

NGC_DEFINE_ERROR(InvalidArgument, Validation);
NGC_DEFINE_ERROR(InvalidParams, Validation);
NGC_DEFINE_ERROR(InvalidTaskCount, Validation);
NGC_DEFINE_ERROR(CapExceeded, Validation);
NGC_DEFINE_ERROR(NotDecodable, Validation);
NGC_DEFINE_ERROR(MissingGradient, Validation);
NGC_DEFINE_ERROR(SingularSystem, Numerical);
NGC_DEFINE_ERROR(ConstructionFailed, Numerical);
NGC_DEFINE_ERROR(NumericalFailure, Numerical);
NGC_DEFINE_ERROR(UndecodableIteration, Numerical);

#undef NGC_DEFINE_ERROR

}  // namespace ngc
