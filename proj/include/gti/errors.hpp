#pragma once

#include <stdexcept>
#include <string>

namespace gti {

inline constexpr const char* kVersion = "0.1.0";

// Estimators and experiment runners throw typed errors instead of asserting,
// so the CLI can print a clean message and tests can match on the type.

struct SizeLimitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite score or loss where a finite value is required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PartitionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateNormalizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateInstabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An identity that must hold by construction failed beyond tolerance.
// Signals an implementation bug, never user input.
struct InternalConsistencyError : std::logic_error {
    using std::logic_error::logic_error;
};

struct TrainingDivergedError : std::runtime_error {
    TrainingDivergedError(const std::string& what, long step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step(step) {}
    long step;
};

struct BudgetExceededError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace gti
