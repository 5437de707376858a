#include "kscl/error.hpp"

namespace kscl {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::NonSquare: return "NonSquare";
        case Errc::NonSymmetric: return "NonSymmetric";
        case Errc::NonFinite: return "NonFinite";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::EmptyKeys: return "EmptyKeys";
        case Errc::NonUnitKey: return "NonUnitKey";
        case Errc::KExceedsDim: return "KExceedsDim";
        case Errc::AllZeroSpectrum: return "AllZeroSpectrum";
        case Errc::PositiveOutOfRange: return "PositiveOutOfRange";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::NonFiniteActivation: return "NonFiniteActivation";
        case Errc::NonFiniteGradient: return "NonFiniteGradient";
        case Errc::NonFiniteLoss: return "NonFiniteLoss";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::CheckpointCorrupt: return "CheckpointCorrupt";
        case Errc::IoError: return "IoError";
    }
    return "UnknownError";
}

} // namespace kscl
