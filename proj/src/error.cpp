#include "harmony/error.hpp"

namespace harmony {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidSpace: return "invalid-space";
        case ErrorCode::DimensionMismatch: return "dimension-mismatch";
        case ErrorCode::ZeroDimension: return "zero-dimension";
        case ErrorCode::DecodeFailure: return "decode-failure";
        case ErrorCode::UnsupportedBitDepth: return "unsupported-bit-depth";
        case ErrorCode::UnsupportedEncoding: return "unsupported-encoding";
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::UnknownChain: return "unknown-chain";
        case ErrorCode::UnknownKind: return "unknown-kind";
        case ErrorCode::NoForeground: return "no-foreground";
        case ErrorCode::EmptyMask: return "empty-mask";
        case ErrorCode::OverlappingRegions: return "overlapping-regions";
        case ErrorCode::UnknownChannel: return "unknown-channel";
        case ErrorCode::NoBackend: return "no-backend";
        case ErrorCode::Io: return "io";
        case ErrorCode::SchemaMismatch: return "schema-mismatch";
        case ErrorCode::MissingFile: return "missing-file";
        case ErrorCode::DanglingPath: return "dangling-path";
        case ErrorCode::WindowTooLarge: return "window-too-large";
    }
    return "unknown";
}

}  // namespace harmony
