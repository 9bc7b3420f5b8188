#include "mvgen/genre.hpp"

#include "mvgen/error.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace mvgen {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lower_trim(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  std::string out(text.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

constexpr std::array kCategories = {GenreCategory::PopIndie, GenreCategory::RockMetalAlternative,
                                    GenreCategory::HipHopRapRnB, GenreCategory::ElectronicHouse};

}  // namespace

std::string_view genre_key(GenreCategory category) {
  switch (category) {
    case GenreCategory::PopIndie: return "pop";
    case GenreCategory::RockMetalAlternative: return "rock";
    case GenreCategory::HipHopRapRnB: return "hiphop";
    case GenreCategory::ElectronicHouse: return "electronic";
    case GenreCategory::Unknown: return "unknown";
  }
  return "unknown";
}

std::string_view genre_display_name(GenreCategory category) {
  switch (category) {
    case GenreCategory::PopIndie: return "Pop/Indie";
    case GenreCategory::RockMetalAlternative: return "Rock/Metal/Alternative";
    case GenreCategory::HipHopRapRnB: return "Hip-Hop/Rap/RnB";
    case GenreCategory::ElectronicHouse: return "Electronic/House";
    case GenreCategory::Unknown: return "Unknown";
  }
  return "Unknown";
}

std::string_view genre_source_name(GenreSource source) {
  switch (source) {
    case GenreSource::Fingerprint: return "fingerprint";
    case GenreSource::Tags: return "tags";
    case GenreSource::Manual: return "manual";
    case GenreSource::Cache: return "cache";
  }
  return "tags";
}

std::optional<GenreCategory> parse_genre(std::string_view text) {
  const std::string key = lower_trim(text);
  for (auto c : {GenreCategory::PopIndie, GenreCategory::RockMetalAlternative, GenreCategory::HipHopRapRnB,
                 GenreCategory::ElectronicHouse, GenreCategory::Unknown}) {
    if (key == genre_key(c) || key == lower_trim(genre_display_name(c))) return c;
  }
  return std::nullopt;
}

std::string audio_content_hash(const PcmAudio& audio) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  const double rate = audio.sample_rate;
  EVP_DigestUpdate(ctx, &rate, sizeof rate);
  EVP_DigestUpdate(ctx, audio.samples.data(), audio.samples.size() * sizeof(float));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

void MockFingerprintClient::add(const std::string& excerpt_hash, TrackIdentity identity) {
  std::lock_guard lock(mutex_);
  table_[excerpt_hash] = std::move(identity);
}

TrackIdentity MockFingerprintClient::identify(const PcmAudio& excerpt) {
  ++calls_;
  if (unavailable_) throw Error(Errc::ServiceUnavailable, "mock fingerprint service is down");
  const auto key = audio_content_hash(excerpt);
  std::lock_guard lock(mutex_);
  const auto it = table_.find(key);
  if (it == table_.end()) throw Error(Errc::NotRecognized, "no fingerprint match");
  return it->second;
}

void MockTagClient::add(const std::string& artist, const std::string& title, std::vector<std::string> tags) {
  std::lock_guard lock(mutex_);
  table_[lower_trim(artist) + "\t" + lower_trim(title)] = std::move(tags);
}

std::vector<std::string> MockTagClient::top_tags(const TrackIdentity& track) {
  ++calls_;
  if (unavailable_) throw Error(Errc::ServiceUnavailable, "mock tag service is down");
  std::lock_guard lock(mutex_);
  const auto it = table_.find(lower_trim(track.artist) + "\t" + lower_trim(track.title));
  return it == table_.end() ? std::vector<std::string>{} : it->second;
}

const TagTable& TagTable::builtin() {
  static const TagTable table = from_json_text(R"({
    "pop": ["pop", "indie", "indie pop", "synthpop", "synth-pop", "dance-pop", "electropop", "k-pop",
            "teen pop", "singer-songwriter", "dream pop", "power pop", "indie folk", "chamber pop"],
    "rock": ["rock", "metal", "alternative", "alternative rock", "hard rock", "indie rock", "punk", "pop punk",
             "grunge", "heavy metal", "emo", "post-hardcore", "nu metal", "metalcore", "classic rock", "punk rock"],
    "hiphop": ["hip-hop", "hip hop", "hiphop", "rap", "rnb", "r&b", "r-n-b", "trap", "soul", "gangsta rap",
               "contemporary r&b", "neo-soul", "grime", "urban"],
    "electronic": ["electronic", "house", "edm", "techno", "trance", "dubstep", "electro", "deep house",
                   "drum and bass", "dance", "electronica", "progressive house", "electro house", "future bass"]
  })");
  return table;
}

TagTable TagTable::from_json_text(std::string_view text) {
  TagTable table;
  try {
    const json doc = json::parse(text);
    for (const auto& [key, tags] : doc.items()) {
      const auto category = parse_genre(key);
      if (!category || *category == GenreCategory::Unknown) {
        throw Error(Errc::InvalidArgument, "unknown genre category in tag table: " + key);
      }
      for (const auto& tag : tags) table.table_[lower_trim(tag.get<std::string>())] = *category;
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed tag table: ") + e.what());
  }
  return table;
}

TagTable TagTable::from_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read tag table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::optional<GenreCategory> TagTable::lookup(std::string_view tag) const {
  const auto it = table_.find(lower_trim(tag));
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

std::size_t TagTable::count(GenreCategory category) const {
  return static_cast<std::size_t>(
      std::count_if(table_.begin(), table_.end(), [&](const auto& kv) { return kv.second == category; }));
}

GenreLabel tags_to_category(std::span<const std::string> tags, const TagTable& table) {
  std::array<int, kCategories.size()> votes{};
  for (const auto& tag : tags) {
    if (const auto c = table.lookup(tag)) ++votes[static_cast<std::size_t>(*c)];
  }
  GenreLabel label{GenreCategory::Unknown, GenreSource::Tags};
  int best = 0;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    if (votes[i] > best) {
      best = votes[i];
      label.category = kCategories[i];
    }
  }
  return label;
}

PcmAudio fingerprint_excerpt(const PcmAudio& audio) {
  PcmAudio excerpt;
  excerpt.sample_rate = audio.sample_rate;
  const auto n = audio.samples.size();
  const auto window = std::min<std::size_t>(n, static_cast<std::size_t>(kFingerprintExcerptSeconds * audio.sample_rate));
  std::size_t start = n / 4;
  if (start + window > n) start = n - window;
  excerpt.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(start),
                         audio.samples.begin() + static_cast<std::ptrdiff_t>(start + window));
  return excerpt;
}

TrackIdentity fingerprint(const PcmAudio& audio, FingerprintClient& client) {
  if (audio.sample_rate <= 0) throw Error(Errc::InvalidArgument, "audio without sample rate");
  if (audio.duration() < kFingerprintMinSeconds) {
    throw Error(Errc::NotRecognized, "audio shorter than 10 s cannot be fingerprinted");
  }
  auto identity = client.identify(fingerprint_excerpt(audio));
  identity.confidence = std::clamp(identity.confidence, 0.0, 1.0);
  return identity;
}

GenreCache::GenreCache(fs::path path) : path_(std::move(path)) {
  if (path_.empty() || !fs::exists(path_)) return;
  std::ifstream in(path_);
  try {
    const json doc = json::parse(in);
    for (const auto& [key, value] : doc.items()) {
      GenreCacheEntry entry;
      entry.category = parse_genre(value.value("category", "unknown")).value_or(GenreCategory::Unknown);
      entry.title = value.value("title", "");
      entry.artist = value.value("artist", "");
      entries_[key] = std::move(entry);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::Io, "corrupt genre cache " + path_.string() + ": " + e.what());
  }
}

std::optional<GenreCacheEntry> GenreCache::get(const std::string& key) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void GenreCache::put(const std::string& key, const GenreCacheEntry& entry) {
  std::lock_guard lock(mutex_);
  entries_[key] = entry;
  flush_locked();
}

std::size_t GenreCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void GenreCache::flush_locked() const {
  if (path_.empty()) return;
  json doc = json::object();
  for (const auto& [key, e] : entries_) {
    doc[key] = {{"category", std::string(genre_key(e.category))}, {"title", e.title}, {"artist", e.artist}};
  }
  if (!path_.parent_path().empty()) fs::create_directories(path_.parent_path());
  const fs::path tmp = path_.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out << doc.dump(2) << "\n";
  }
  fs::rename(tmp, path_);
}

GenreLabel resolve_genre(const PcmAudio& audio, const GenreServices& services,
                         std::optional<GenreCategory> manual_override) {
  if (manual_override && *manual_override != GenreCategory::Unknown) {
    return {*manual_override, GenreSource::Manual};
  }
  const TagTable& table = services.table ? *services.table : TagTable::builtin();
  std::string key;
  if (services.cache) {
    key = audio_content_hash(audio);
    if (const auto hit = services.cache->get(key)) return {hit->category, GenreSource::Cache};
  }
  if (!services.fingerprint) return {GenreCategory::Unknown, GenreSource::Fingerprint};

  TrackIdentity identity;
  try {
    identity = fingerprint(audio, *services.fingerprint);
  } catch (const Error& e) {
    if (e.code() == Errc::NotRecognized || e.code() == Errc::ServiceUnavailable) {
      return {GenreCategory::Unknown, GenreSource::Fingerprint};
    }
    throw;
  }

  GenreLabel label{GenreCategory::Unknown, GenreSource::Fingerprint};
  if (!identity.genres.empty()) {
    label.category = tags_to_category(identity.genres, table).category;
  }
  if (label.category == GenreCategory::Unknown && services.tags) {
    try {
      const auto tags = services.tags->top_tags(identity);
      label = tags_to_category(tags, table);
    } catch (const Error& e) {
      if (e.code() != Errc::ServiceUnavailable) throw;
      label = {GenreCategory::Unknown, GenreSource::Tags};
    }
  }
  if (label.category != GenreCategory::Unknown && services.cache) {
    services.cache->put(key, {label.category, identity.title, identity.artist});
  }
  return label;
}

}  // namespace mvgen
