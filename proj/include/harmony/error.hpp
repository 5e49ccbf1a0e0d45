#pragma once

#include <stdexcept>
#include <string>

namespace harmony {

enum class ErrorCode {
    InvalidSpace,
    DimensionMismatch,
    ZeroDimension,
    DecodeFailure,
    UnsupportedBitDepth,
    UnsupportedEncoding,
    InvalidArgument,
    UnknownChain,
    UnknownKind,
    NoForeground,
    EmptyMask,
    OverlappingRegions,
    UnknownChannel,
    NoBackend,
    Io,
    SchemaMismatch,
    MissingFile,
    DanglingPath,
    WindowTooLarge,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace harmony
