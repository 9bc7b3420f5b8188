#pragma once

#include "mvgen/genre.hpp"

#include <string>

namespace mvgen {

/// ACRCloud-style identification: signed multipart POST of a WAV excerpt to
/// `<endpoint>/v1/identify`. Credentials come as "access_key:access_secret".
class HttpFingerprintClient final : public FingerprintClient {
 public:
  HttpFingerprintClient(std::string endpoint, std::string credentials, int timeout_seconds = 10);
  TrackIdentity identify(const PcmAudio& excerpt) override;

  /// Exposed for tests: base64(HMAC-SHA1(secret, string_to_sign)).
  static std::string sign(const std::string& secret, const std::string& string_to_sign);

 private:
  std::string endpoint_;
  std::string access_key_;
  std::string access_secret_;
  int timeout_seconds_;
};

/// Last.fm-style `track.getTopTags` lookup at `<endpoint>/2.0/`.
class HttpTagClient final : public TagClient {
 public:
  HttpTagClient(std::string endpoint, std::string api_key, int timeout_seconds = 10, std::size_t max_tags = 10);
  std::vector<std::string> top_tags(const TrackIdentity& track) override;

 private:
  std::string endpoint_;
  std::string api_key_;
  int timeout_seconds_;
  std::size_t max_tags_;
};

/// Parsers for the service responses, separated from transport for testing.
TrackIdentity parse_fingerprint_response(const std::string& body);
std::vector<std::string> parse_tag_response(const std::string& body, std::size_t max_tags);

}  // namespace mvgen
