#pragma once

#include <stdexcept>
#include <string>

namespace kscl {

enum class Errc {
    NonSquare,
    NonSymmetric,
    NonFinite,
    DimensionMismatch,
    EmptyKeys,
    NonUnitKey,
    KExceedsDim,
    AllZeroSpectrum,
    PositiveOutOfRange,
    ShapeMismatch,
    NonFiniteActivation,
    NonFiniteGradient,
    NonFiniteLoss,
    InvalidConfig,
    CheckpointCorrupt,
    IoError,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
    throw Error(code, what);
}

} // namespace kscl
