#pragma once

#include "mvgen/media_io.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mvgen {

/// The four visual-convention groups used to slice the scene index.
/// Declaration order is the tie-break order for tag plurality.
enum class GenreCategory { PopIndie, RockMetalAlternative, HipHopRapRnB, ElectronicHouse, Unknown };

enum class GenreSource { Fingerprint, Tags, Manual, Cache };

struct GenreLabel {
  GenreCategory category = GenreCategory::Unknown;
  GenreSource source = GenreSource::Tags;
  friend bool operator==(const GenreLabel&, const GenreLabel&) = default;
};

/// Short machine keys: pop, rock, hiphop, electronic, unknown.
std::string_view genre_key(GenreCategory category);
std::string_view genre_display_name(GenreCategory category);
std::string_view genre_source_name(GenreSource source);
/// Accepts machine keys and display names, case-insensitively.
std::optional<GenreCategory> parse_genre(std::string_view text);

struct TrackIdentity {
  std::string title;
  std::string artist;
  double confidence = 0.0;
  /// Genre names some fingerprint services return with the match.
  std::vector<std::string> genres;
};

class FingerprintClient {
 public:
  virtual ~FingerprintClient() = default;
  /// Throws Error(NotRecognized) or Error(ServiceUnavailable).
  virtual TrackIdentity identify(const PcmAudio& excerpt) = 0;
};

class TagClient {
 public:
  virtual ~TagClient() = default;
  /// Throws Error(ServiceUnavailable); an unknown track yields no tags.
  virtual std::vector<std::string> top_tags(const TrackIdentity& track) = 0;
};

/// SHA-256 (hex) of the sample rate and the float sample bytes.
std::string audio_content_hash(const PcmAudio& audio);

class MockFingerprintClient final : public FingerprintClient {
 public:
  void add(const std::string& excerpt_hash, TrackIdentity identity);
  void set_unavailable(bool down) { unavailable_ = down; }
  TrackIdentity identify(const PcmAudio& excerpt) override;
  int calls() const { return calls_.load(); }

 private:
  std::mutex mutex_;
  std::map<std::string, TrackIdentity> table_;
  std::atomic<bool> unavailable_{false};
  std::atomic<int> calls_{0};
};

class MockTagClient final : public TagClient {
 public:
  void add(const std::string& artist, const std::string& title, std::vector<std::string> tags);
  void set_unavailable(bool down) { unavailable_ = down; }
  std::vector<std::string> top_tags(const TrackIdentity& track) override;
  int calls() const { return calls_.load(); }

 private:
  std::mutex mutex_;
  std::map<std::string, std::vector<std::string>> table_;
  std::atomic<bool> unavailable_{false};
  std::atomic<int> calls_{0};
};

/// Case-insensitive tag -> category table. The bundled default is data and
/// can be replaced by a JSON file of the form {"pop": ["indie", ...], ...}.
class TagTable {
 public:
  static const TagTable& builtin();
  static TagTable from_json_file(const std::filesystem::path& path);
  static TagTable from_json_text(std::string_view text);

  std::optional<GenreCategory> lookup(std::string_view tag) const;
  std::size_t size() const { return table_.size(); }
  std::size_t count(GenreCategory category) const;

 private:
  std::map<std::string, GenreCategory> table_;
};

/// Plurality vote over matched tags; ties go to the earlier category.
GenreLabel tags_to_category(std::span<const std::string> tags, const TagTable& table = TagTable::builtin());

inline constexpr double kFingerprintExcerptSeconds = 30.0;
inline constexpr double kFingerprintMinSeconds = 10.0;

/// At most 30 s starting at the 25% position (shifted earlier if the track
/// is too short to fit the full window).
PcmAudio fingerprint_excerpt(const PcmAudio& audio);

TrackIdentity fingerprint(const PcmAudio& audio, FingerprintClient& client);

struct GenreCacheEntry {
  GenreCategory category = GenreCategory::Unknown;
  std::string title;
  std::string artist;
};

/// JSON cache keyed by audio content hash. Writes go to a temp file that is
/// renamed over the target. An empty path keeps the cache in memory only.
class GenreCache {
 public:
  explicit GenreCache(std::filesystem::path path = {});

  std::optional<GenreCacheEntry> get(const std::string& key) const;
  void put(const std::string& key, const GenreCacheEntry& entry);
  std::size_t size() const;

 private:
  void flush_locked() const;

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, GenreCacheEntry> entries_;
};

struct GenreServices {
  FingerprintClient* fingerprint = nullptr;
  TagClient* tags = nullptr;
  GenreCache* cache = nullptr;
  const TagTable* table = nullptr;
};

/// manual override > cache > fingerprint (+ genres it returns) > tag service.
/// Unknown is a value, never an error.
GenreLabel resolve_genre(const PcmAudio& audio, const GenreServices& services,
                         std::optional<GenreCategory> manual_override = std::nullopt);

}  // namespace mvgen
