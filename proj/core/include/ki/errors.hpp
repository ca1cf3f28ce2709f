#ifndef KI_ERRORS_HPP
#define KI_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ki {

enum class Errc {
    EmptyCorpus,
    VocabMismatch,
    EmptyLossSupport,
    InvalidTemperature,
    SupportMismatch,
    TemperatureMismatch,
    InvalidK,
    InvalidAlpha,
    StepOutOfRange,
    NoTeacherForDomain,
    MissingPosition,
    FormatError,
    CorruptCache,
    CacheMismatch,
    NumericFailure,
    ConfigError,
    InvalidArgument,
    IoError,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::EmptyCorpus: return "EmptyCorpus";
        case Errc::VocabMismatch: return "VocabMismatch";
        case Errc::EmptyLossSupport: return "EmptyLossSupport";
        case Errc::InvalidTemperature: return "InvalidTemperature";
        case Errc::SupportMismatch: return "SupportMismatch";
        case Errc::TemperatureMismatch: return "TemperatureMismatch";
        case Errc::InvalidK: return "InvalidK";
        case Errc::InvalidAlpha: return "InvalidAlpha";
        case Errc::StepOutOfRange: return "StepOutOfRange";
        case Errc::NoTeacherForDomain: return "NoTeacherForDomain";
        case Errc::MissingPosition: return "MissingPosition";
        case Errc::FormatError: return "FormatError";
        case Errc::CorruptCache: return "CorruptCache";
        case Errc::CacheMismatch: return "CacheMismatch";
        case Errc::NumericFailure: return "NumericFailure";
        case Errc::ConfigError: return "ConfigError";
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::IoError: return "IoError";
    }
    return "Error";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
    Errc code() const noexcept { return code_; }

    // CLI exit-code contract: 1 usage/config, 2 data, 3 numeric.
    int exit_code() const noexcept {
        switch (code_) {
            case Errc::ConfigError:
            case Errc::InvalidArgument: return 1;
            case Errc::NumericFailure: return 3;
            default: return 2;
        }
    }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool ok, Errc code, const std::string& msg) {
    if (!ok) fail(code, msg);
}

}  // namespace ki

#endif
