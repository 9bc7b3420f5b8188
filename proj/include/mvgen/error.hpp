#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvgen {

enum class Errc {
  InvalidArgument,
  Io,
  // media-io
  CodecToolMissing,
  UndecodableMedia,
  NoAudioStream,
  EmptyInput,
  MissingSource,
  DurationMismatch,
  // shot-detect
  DimensionMismatch,
  InsufficientFrames,
  // scene-index
  EmptyScene,
  EmptyCorpus,
  CorruptIndex,
  // music-structure
  SilentAudio,
  TooFewBeats,
  ColumnMismatch,
  DegenerateScatter,
  InputLengthOutOfRange,
  // genre
  NotRecognized,
  ServiceUnavailable,
  // clustering / assembler
  EmptySlice,
  InsufficientFootage,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::CodecToolMissing: return "CodecToolMissing";
    case Errc::UndecodableMedia: return "UndecodableMedia";
    case Errc::NoAudioStream: return "NoAudioStream";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::MissingSource: return "MissingSource";
    case Errc::DurationMismatch: return "DurationMismatch";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InsufficientFrames: return "InsufficientFrames";
    case Errc::EmptyScene: return "EmptyScene";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::CorruptIndex: return "CorruptIndex";
    case Errc::SilentAudio: return "SilentAudio";
    case Errc::TooFewBeats: return "TooFewBeats";
    case Errc::ColumnMismatch: return "ColumnMismatch";
    case Errc::DegenerateScatter: return "DegenerateScatter";
    case Errc::InputLengthOutOfRange: return "InputLengthOutOfRange";
    case Errc::NotRecognized: return "NotRecognized";
    case Errc::ServiceUnavailable: return "ServiceUnavailable";
    case Errc::EmptySlice: return "EmptySlice";
    case Errc::InsufficientFootage: return "InsufficientFootage";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the Errc kinds above so
/// callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mvgen
