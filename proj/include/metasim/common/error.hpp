#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace metasim {

/// Typed failure categories shared by every module. Each maps to a stable
/// name that prefixes the exception message.
enum class Errc {
  SyntaxError,
  UnknownField,
  InvariantViolation,
  UnknownOrDuplicateEntity,
  PathNotFound,
  TypeMismatch,
  MalformedXml,
  CyclicBodyGraph,
  MissingLinkReference,
  MultipleRoots,
  UnsupportedJointKind,
  InconsistentDefaultClass,
  UnrepresentableInUrdf,
  UnknownEntity,
  VersionMismatch,
  TruncatedStream,
  ChecksumFailure,
  BadMagic,
  AssetNotFound,
  UnsupportedGeom,
  DofLengthMismatch,
  NaNDetected,
  WrongBackend,
  DegenerateCamera,
  EpisodeOver,
  EntitySetMismatch,
  ScenarioMismatch,
  SegmentationFailed,
  IkUnreachable,
  NoConvergence,
  EmptyPool,
  TooFewItems,
  MalformedFrame,
  DuplicateOrStale,
  SessionClosed,
  Io,
  InvalidArgument,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace metasim
