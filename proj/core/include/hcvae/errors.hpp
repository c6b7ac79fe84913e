#pragma once

#include <stdexcept>
#include <string>

namespace hcvae {

// Base class for every error raised by the library. The CLI prints what()
// on one line, prefixed by kind(), so messages must not contain newlines.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class DimensionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "dimension"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

class InputTooShortError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "input_too_short"; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric"; }
};

class LookupError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "lookup"; }
};

class IngestionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ingestion"; }
};

class UndefinedAucError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "undefined_auc"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

enum class WavErrorCode { kMissingFile, kMalformedHeader, kUnsupportedCodec };

class WavError : public Error {
 public:
  WavError(WavErrorCode code, const std::string& what) : Error(what), code_(code) {}
  WavErrorCode code() const noexcept { return code_; }
  const char* kind() const noexcept override {
    switch (code_) {
      case WavErrorCode::kMissingFile: return "wav_missing_file";
      case WavErrorCode::kMalformedHeader: return "wav_malformed_header";
      case WavErrorCode::kUnsupportedCodec: return "wav_unsupported_codec";
    }
    return "wav";
  }

 private:
  WavErrorCode code_;
};

enum class CheckpointErrorCode { kBadMagic, kVersionMismatch, kTruncated, kMalformed, kModeMismatch };

class CheckpointError : public Error {
 public:
  CheckpointError(CheckpointErrorCode code, const std::string& what) : Error(what), code_(code) {}
  CheckpointErrorCode code() const noexcept { return code_; }
  const char* kind() const noexcept override {
    switch (code_) {
      case CheckpointErrorCode::kBadMagic: return "checkpoint_bad_magic";
      case CheckpointErrorCode::kVersionMismatch: return "checkpoint_version";
      case CheckpointErrorCode::kTruncated: return "checkpoint_truncated";
      case CheckpointErrorCode::kMalformed: return "checkpoint_malformed";
      case CheckpointErrorCode::kModeMismatch: return "checkpoint_mode_mismatch";
    }
    return "checkpoint";
  }

 private:
  CheckpointErrorCode code_;
};

}  // namespace hcvae
