#include "metasim/common/error.hpp"

namespace metasim {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownField: return "UnknownField";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::UnknownOrDuplicateEntity: return "UnknownOrDuplicateEntity";
    case Errc::PathNotFound: return "PathNotFound";
    case Errc::TypeMismatch: return "TypeMismatch";
    case Errc::MalformedXml: return "MalformedXml";
    case Errc::CyclicBodyGraph: return "CyclicBodyGraph";
    case Errc::MissingLinkReference: return "MissingLinkReference";
    case Errc::MultipleRoots: return "MultipleRoots";
    case Errc::UnsupportedJointKind: return "UnsupportedJointKind";
    case Errc::InconsistentDefaultClass: return "InconsistentDefaultClass";
    case Errc::UnrepresentableInUrdf: return "UnrepresentableInUrdf";
    case Errc::UnknownEntity: return "UnknownEntity";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::TruncatedStream: return "TruncatedStream";
    case Errc::ChecksumFailure: return "ChecksumFailure";
    case Errc::BadMagic: return "BadMagic";
    case Errc::AssetNotFound: return "AssetNotFound";
    case Errc::UnsupportedGeom: return "UnsupportedGeom";
    case Errc::DofLengthMismatch: return "DofLengthMismatch";
    case Errc::NaNDetected: return "NaNDetected";
    case Errc::WrongBackend: return "WrongBackend";
    case Errc::DegenerateCamera: return "DegenerateCamera";
    case Errc::EpisodeOver: return "EpisodeOver";
    case Errc::EntitySetMismatch: return "EntitySetMismatch";
    case Errc::ScenarioMismatch: return "ScenarioMismatch";
    case Errc::SegmentationFailed: return "SegmentationFailed";
    case Errc::IkUnreachable: return "IkUnreachable";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::TooFewItems: return "TooFewItems";
    case Errc::MalformedFrame: return "MalformedFrame";
    case Errc::DuplicateOrStale: return "DuplicateOrStale";
    case Errc::SessionClosed: return "SessionClosed";
    case Errc::Io: return "Io";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

}  // namespace metasim
