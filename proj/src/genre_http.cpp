#include "mvgen/genre_http.hpp"

#include "mvgen/error.hpp"

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <chrono>

namespace mvgen {
using nlohmann::json;

namespace {

std::string base64(const unsigned char* data, std::size_t len) {
  std::string out(4 * ((len + 2) / 3), '\0');
  const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data, static_cast<int>(len));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

std::string trim_slash(std::string s) {
  while (!s.empty() && s.back() == '/') s.pop_back();
  return s;
}

}  // namespace

HttpFingerprintClient::HttpFingerprintClient(std::string endpoint, std::string credentials, int timeout_seconds)
    : endpoint_(trim_slash(std::move(endpoint))), timeout_seconds_(timeout_seconds) {
  const auto colon = credentials.find(':');
  if (colon == std::string::npos) {
    throw Error(Errc::InvalidArgument, "fingerprint credentials must be <access_key>:<access_secret>");
  }
  access_key_ = credentials.substr(0, colon);
  access_secret_ = credentials.substr(colon + 1);
}

std::string HttpFingerprintClient::sign(const std::string& secret, const std::string& string_to_sign) {
  unsigned char mac[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  HMAC(EVP_sha1(), secret.data(), static_cast<int>(secret.size()),
       reinterpret_cast<const unsigned char*>(string_to_sign.data()), string_to_sign.size(), mac, &len);
  return base64(mac, len);
}

TrackIdentity parse_fingerprint_response(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(Errc::ServiceUnavailable, std::string("unparseable fingerprint response: ") + e.what());
  }
  const int code = doc.contains("status") ? doc["status"].value("code", -1) : -1;
  if (code == 1001) throw Error(Errc::NotRecognized, "no fingerprint match");
  if (code != 0) {
    const std::string msg = doc.contains("status") ? doc["status"].value("msg", "") : "";
    throw Error(Errc::ServiceUnavailable, "fingerprint service status " + std::to_string(code) + " " + msg);
  }
  const auto& music = doc.at("metadata").at("music");
  if (!music.is_array() || music.empty()) throw Error(Errc::NotRecognized, "empty match list");
  const auto& best = music.front();
  TrackIdentity id;
  id.title = best.value("title", "");
  if (best.contains("artists") && best["artists"].is_array() && !best["artists"].empty()) {
    id.artist = best["artists"].front().value("name", "");
  }
  id.confidence = std::clamp(best.value("score", 0.0) / 100.0, 0.0, 1.0);
  if (best.contains("genres") && best["genres"].is_array()) {
    for (const auto& g : best["genres"]) id.genres.push_back(g.value("name", ""));
  }
  return id;
}

TrackIdentity HttpFingerprintClient::identify(const PcmAudio& excerpt) {
  const auto wav = encode_wav(excerpt);
  const std::string timestamp = std::to_string(
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count());
  const std::string to_sign = "POST\n/v1/identify\n" + access_key_ + "\naudio\n1\n" + timestamp;

  httplib::Client client(endpoint_);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);
  httplib::MultipartFormDataItems items = {
      {"access_key", access_key_, "", ""},
      {"data_type", "audio", "", ""},
      {"signature_version", "1", "", ""},
      {"signature", sign(access_secret_, to_sign), "", ""},
      {"sample_bytes", std::to_string(wav.size()), "", ""},
      {"timestamp", timestamp, "", ""},
      {"sample", std::string(reinterpret_cast<const char*>(wav.data()), wav.size()), "sample.wav", "audio/wav"},
  };
  const auto res = client.Post("/v1/identify", items);
  if (!res) throw Error(Errc::ServiceUnavailable, "fingerprint request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(Errc::ServiceUnavailable, "fingerprint HTTP " + std::to_string(res->status));
  return parse_fingerprint_response(res->body);
}

HttpTagClient::HttpTagClient(std::string endpoint, std::string api_key, int timeout_seconds, std::size_t max_tags)
    : endpoint_(trim_slash(std::move(endpoint))),
      api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds),
      max_tags_(max_tags) {}

std::vector<std::string> parse_tag_response(const std::string& body, std::size_t max_tags) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(Errc::ServiceUnavailable, std::string("unparseable tag response: ") + e.what());
  }
  if (doc.contains("error")) {
    // 6 = track not found: a valid "no tags" answer, anything else is a service failure.
    if (doc["error"].get<int>() == 6) return {};
    throw Error(Errc::ServiceUnavailable, "tag service error " + doc["error"].dump());
  }
  std::vector<std::string> tags;
  if (!doc.contains("toptags")) return tags;
  const auto& list = doc["toptags"].value("tag", json::array());
  // A single tag may come back as an object instead of a one-element array.
  if (list.is_object()) {
    tags.push_back(list.value("name", ""));
  } else {
    for (const auto& t : list) {
      if (tags.size() >= max_tags) break;
      tags.push_back(t.value("name", ""));
    }
  }
  return tags;
}

std::vector<std::string> HttpTagClient::top_tags(const TrackIdentity& track) {
  httplib::Client client(endpoint_);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);
  const httplib::Params params = {{"method", "track.gettoptags"}, {"artist", track.artist}, {"track", track.title},
                                  {"api_key", api_key_},          {"format", "json"},      {"autocorrect", "1"}};
  const auto res = client.Get("/2.0/", params, httplib::Headers{});
  if (!res) throw Error(Errc::ServiceUnavailable, "tag request failed: " + httplib::to_string(res.error()));
  if (res->status != 200 && res->status != 400) {
    throw Error(Errc::ServiceUnavailable, "tag HTTP " + std::to_string(res->status));
  }
  return parse_tag_response(res->body, max_tags_);
}

}  // namespace mvgen
