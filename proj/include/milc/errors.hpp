#pragma once

#include <stdexcept>
#include <string>

namespace milc {

struct MilcError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input / structural problems
struct DimensionMismatch : MilcError { using MilcError::MilcError; };
struct ModelMissing : MilcError { using MilcError::MilcError; };

// Numerical problems
struct PoleOnGrid : MilcError { using MilcError::MilcError; };
struct UnstableClosedLoop : MilcError { using MilcError::MilcError; };
struct SingularReturnDifference : MilcError { using MilcError::MilcError; };
struct RankDeficient : MilcError { using MilcError::MilcError; };
struct ZeroDiagonal : MilcError { using MilcError::MilcError; };
struct ZeroDiagonalM : MilcError { using MilcError::MilcError; };
struct SingularAtAnchor : MilcError { using MilcError::MilcError; };
struct IllConditioned : MilcError { using MilcError::MilcError; };
struct FitTooCoarse : MilcError { using MilcError::MilcError; };
struct CutoffOutOfRange : MilcError { using MilcError::MilcError; };
struct NoFeasibleCutoff : MilcError { using MilcError::MilcError; };
struct UnstableOperator : MilcError { using MilcError::MilcError; };
struct NonContractive : MilcError { using MilcError::MilcError; };

}  // namespace milc
