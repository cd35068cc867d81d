#pragma once

#include <stdexcept>
#include <string>

namespace recalign {

// Base class for every recoverable error raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Construction-time violation of a distribution invariant (negative mass,
// normalization drift beyond tolerance, shape mismatch with its space).
struct InvalidDistribution : Error { using Error::Error; };

// p(i) > 0 where q(i) = 0 inside a divergence. Surfaced as an error rather
// than +inf so budget-constrained searches must handle it deliberately.
struct SupportViolation : Error { using Error::Error; };

// Conditioning on an event of probability zero.
struct ZeroMassCondition : Error { using Error::Error; };

struct SpaceMismatch : Error { using Error::Error; };
struct SearchSpaceTooLarge : Error { using Error::Error; };
struct NoFeasibleMap : Error { using Error::Error; };
struct CurveTooShort : Error { using Error::Error; };

struct ShapeMismatch : Error { using Error::Error; };
struct NonScalarLoss : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };

struct EmptyBatch : Error { using Error::Error; };
struct BatchTooSmall : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct DivergedLoss : Error { using Error::Error; };
struct Unsupported : Error { using Error::Error; };

struct ParseError : Error { using Error::Error; };

} // namespace recalign
