#pragma once

#include <stdexcept>
#include <string>

namespace sgbayes {

/// Base of every error raised by the library. `error_class()` is a stable,
/// machine-parsable tag the CLI prints on failure.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* error_class() const noexcept { return "Error"; }
};

#define SGBAYES_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                                 \
    public:                                                                     \
        using Error::Error;                                                     \
        const char* error_class() const noexcept override { return #Name; }     \
    };

SGBAYES_DEFINE_ERROR(DomainError)
SGBAYES_DEFINE_ERROR(ConfigurationError)
SGBAYES_DEFINE_ERROR(IncompleteDataError)
SGBAYES_DEFINE_ERROR(InitializationError)
SGBAYES_DEFINE_ERROR(NumericalError)
SGBAYES_DEFINE_ERROR(LoadError)
SGBAYES_DEFINE_ERROR(CacheError)
SGBAYES_DEFINE_ERROR(RefusalError)
SGBAYES_DEFINE_ERROR(NotFoundError)
SGBAYES_DEFINE_ERROR(IoError)

#undef SGBAYES_DEFINE_ERROR

/// Failure of a forward-model execution. Carries the parameter point and
/// whatever diagnostics the backend captured (stderr, exit status).
class ModelExecutionError : public Error {
public:
    ModelExecutionError(const std::string& what, std::string point, std::string diagnostics)
        : Error(what), point_(std::move(point)), diagnostics_(std::move(diagnostics)) {}

    const char* error_class() const noexcept override { return "ModelExecutionError"; }
    const std::string& point() const noexcept { return point_; }
    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string point_;
    std::string diagnostics_;
};

}  // namespace sgbayes
