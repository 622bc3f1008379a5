#ifndef AMS_ERRORS_HPP
#define AMS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ams {

/** Base class for all library errors. */
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or size contract violation (non-square input, mismatched lengths).
class dimension_error : public error {
public:
    using error::error;
};

/// Invalid user-supplied value (neighbor count out of range, empty grid).
class parameter_error : public error {
public:
    using error::error;
};

/// File cannot be read, parsed, or fails shape/consistency validation.
class ingestion_error : public error {
public:
    using error::error;
};

/// Numerical failure: non-convergence, divergence, singular systems,
/// degenerate (zero-norm) vectors, non-finite data.
class numerical_error : public error {
public:
    using error::error;
};

} // namespace ams

#endif // AMS_ERRORS_HPP
