#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spoq {

enum class Errc {
    // core-model
    EmptySeed,
    UnknownBackend,
    DecodeError,
    // crypto
    InvalidKey,
    BadIndex,
    EmptyRing,
    AuthFailed,
    // ledger
    RoleAuthFailed,
    NotOwner,
    DuplicateAddress,
    DuplicateUser,
    UserNotFound,
    AssetNotFound,
    ParentNotFound,
    ParentNotBatch,
    EmptySplit,
    NotFound,
    ChainInvalid,
    // storage
    NonceInvalid,
    KeyMismatch,
    WriteDenied,
    PolicyInvalid,
    AssetLinkMissing,
    // verification
    UnknownFingerprintType,
    // efficiency
    ScenarioInvalid,
    EmptyInput,
    // plumbing
    IoError,
};

// Stable error code strings; these are the values surfaced on the wire and
// by the CLI, so they must not change.
std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    explicit Error(Errc code) : Error(code, "") {}

    Errc code() const { return code_; }
    std::string_view code_name() const { return errc_name(code_); }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message = "") {
    throw Error(code, message);
}

} // namespace spoq
