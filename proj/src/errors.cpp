#include "spoq/errors.hpp"

namespace spoq {

std::string_view errc_name(Errc code) {
    switch (code) {
    case Errc::EmptySeed: return "EMPTY_SEED";
    case Errc::UnknownBackend: return "UNKNOWN_BACKEND";
    case Errc::DecodeError: return "DECODE_ERROR";
    case Errc::InvalidKey: return "INVALID_KEY";
    case Errc::BadIndex: return "BAD_INDEX";
    case Errc::EmptyRing: return "EMPTY_RING";
    case Errc::AuthFailed: return "AUTH_FAILED";
    case Errc::RoleAuthFailed: return "ROLE_AUTH_FAILED";
    case Errc::NotOwner: return "NOT_OWNER";
    case Errc::DuplicateAddress: return "DUPLICATE_ADDRESS";
    case Errc::DuplicateUser: return "DUPLICATE_USER";
    case Errc::UserNotFound: return "USER_NOT_FOUND";
    case Errc::AssetNotFound: return "ASSET_NOT_FOUND";
    case Errc::ParentNotFound: return "PARENT_NOT_FOUND";
    case Errc::ParentNotBatch: return "PARENT_NOT_BATCH";
    case Errc::EmptySplit: return "EMPTY_SPLIT";
    case Errc::NotFound: return "NOT_FOUND";
    case Errc::ChainInvalid: return "CHAIN_INVALID";
    case Errc::NonceInvalid: return "NONCE_INVALID";
    case Errc::KeyMismatch: return "KEY_MISMATCH";
    case Errc::WriteDenied: return "WRITE_DENIED";
    case Errc::PolicyInvalid: return "POLICY_INVALID";
    case Errc::AssetLinkMissing: return "ASSET_LINK_MISSING";
    case Errc::UnknownFingerprintType: return "UNKNOWN_FINGERPRINT_TYPE";
    case Errc::ScenarioInvalid: return "SCENARIO_INVALID";
    case Errc::EmptyInput: return "EMPTY_INPUT";
    case Errc::IoError: return "IO_ERROR";
    }
    return "UNKNOWN_ERROR";
}

} // namespace spoq
