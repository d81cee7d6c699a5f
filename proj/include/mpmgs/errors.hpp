#pragma once

#include <stdexcept>
#include <string>

namespace mpmgs {

/// Base class of all errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// tensor / constitutive
struct SingularInput : Error { using Error::Error; };
struct NonPositiveSingularValue : Error { using Error::Error; };
struct InvalidPoissonRatio : Error { using Error::Error; };
struct DegenerateJacobian : Error { using Error::Error; };

// engine
struct OutOfDomain : Error { using Error::Error; };

/// A simulation quantity became non-finite (or a deformation gradient
/// collapsed); usually a CFL violation. Carries the offending step index.
struct UnstableStep : Error {
    int step;
    UnstableStep(int step_index, const std::string& what)
        : Error("step " + std::to_string(step_index) + ": " + what), step(step_index) {}
};

// i/o and configuration
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct EmptySource : Error { using Error::Error; };
struct EmptyCloud : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// estimation
struct ShapeMismatch : Error { using Error::Error; };
struct TooFewParticles : Error { using Error::Error; };

}  // namespace mpmgs
