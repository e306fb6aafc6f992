#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "facecap/bow.hpp"
#include "facecap/debias.hpp"
#include "facecap/derive.hpp"
#include "facecap/filter.hpp"
#include "facecap/fusion.hpp"
#include "facecap/rng.hpp"
#include "facecap/schema.hpp"

namespace facecap {

inline constexpr std::string_view kManifestFormat = "facecap.manifest/1";
inline constexpr std::string_view kPipelineVersion = "facecap/1.0.0";
inline constexpr std::size_t kDefaultShardSize = 10000;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DuplicateImageId : public std::runtime_error {
public:
    explicit DuplicateImageId(const std::string& id)
        : std::runtime_error("duplicate image_id '" + id + "'"), image_id_(id) {}
    const std::string& image_id() const noexcept { return image_id_; }

private:
    std::string image_id_;
};

class CorruptIndex : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyManifest : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EntrySeeds {
    std::uint64_t global = 0;
    std::uint64_t per_image = 0;
    bool operator==(const EntrySeeds&) const = default;
};

struct ManifestEntry {
    std::string image_id;
    std::string image_path;
    CropRect crop_rect;
    std::optional<SimilarityTransform> alignment;
    SourceDataset source_dataset = SourceDataset::other;
    AttributeRecord attribute_record;
    DerivedAttributes derived;
    AgePhrase age_phrase;
    BagOfWords bag_of_words;
    CaptionSet caption_set;
    std::vector<Attribute> dropped_labels;
    EntrySeeds seeds;
    std::string pipeline_version{kPipelineVersion};

    // Record flags after the debias drop, i.e. what the captions describe.
    AttributeFlags captioned_flags() const;
};

Json entry_to_json(const ManifestEntry& e);
ManifestEntry entry_from_json(const Json& j);
std::string serialize_entry(const ManifestEntry& e);

Json profile_to_json(const DatasetProfile& p);
DatasetProfile profile_from_json(const Json& j);

struct ShardInfo {
    std::string file;  // relative to the manifest root
    std::size_t entries = 0;
    bool operator==(const ShardInfo&) const = default;
};

struct EntryLocation {
    std::size_t shard = 0;
    std::uint64_t offset = 0;  // byte offset of the entry's line
    bool operator==(const EntryLocation&) const = default;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<ShardInfo> shards;
    std::map<std::string, EntryLocation> index;
    std::map<std::string, RejectReason> rejected;
    // Images whose processing failed (e.g. no valid caption); retried on resume.
    std::map<std::string, std::string> failed;
    DatasetProfile profile;
    std::uint64_t global_seed = 0;
    std::size_t shard_size = kDefaultShardSize;
    std::string pipeline_version{kPipelineVersion};

    // Keyed by reject reason id ("ok" holds accepted entries), plus "failed"
    // and "input".
    std::map<std::string, std::uint64_t> counts() const;
};

inline constexpr std::string_view kIndexFile = "index.json";

// Streams entries into JSONL shards under `root/shards/`. Each shard is
// written to a temporary name and renamed into place once complete; the
// index is rewritten after every shard and on finish.
class ManifestWriter {
public:
    static ManifestWriter create(const std::filesystem::path& root, const DatasetProfile& profile,
                                 std::uint64_t global_seed, std::size_t shard_size);
    // Reopens an existing manifest; a partially filled last shard is
    // reloaded and topped up so the final layout matches an uninterrupted run.
    static ManifestWriter resume(const std::filesystem::path& root);

    void add(const ManifestEntry& entry);
    void add_rejected(const std::string& image_id, RejectReason reason);
    void add_failed(const std::string& image_id, const std::string& message);

    bool contains(const std::string& image_id) const;
    const DatasetManifest& manifest() const { return manifest_; }

    DatasetManifest finish();

private:
    ManifestWriter() = default;
    void flush_shard();
    void write_index() const;
    void claim_id(const std::string& image_id);

    DatasetManifest manifest_;
    std::size_t current_shard_ = 0;
    std::vector<std::string> pending_lines_;
    std::uint64_t pending_bytes_ = 0;
};

DatasetManifest write_entries(const std::vector<ManifestEntry>& entries, const std::filesystem::path& root,
                              std::size_t shard_size = kDefaultShardSize, const DatasetProfile& profile = {},
                              std::uint64_t global_seed = 0);

// Throws CorruptIndex when the index is unreadable or inconsistent with the
// shard files.
DatasetManifest load_manifest(const std::filesystem::path& root);
Json manifest_index_json(const DatasetManifest& m);

std::vector<ManifestEntry> read_all(const DatasetManifest& m);
ManifestEntry read_entry(const DatasetManifest& m, const std::string& image_id);

// Ids not yet recorded (neither indexed nor rejected), in input order.
std::vector<std::string> resume_filter(const std::vector<std::string>& ids, const DatasetManifest& m);

const std::string& sample_caption(const ManifestEntry& e, Rng& rng);

// Seed used by one_per_image export for this entry.
std::uint64_t export_seed(std::uint64_t global_seed, const std::string& image_id);

enum class ExportMode { all_captions, one_per_image };

// JSONL of {image_path, captions|caption, crop_rect} in manifest order.
void export_training_manifest(const DatasetManifest& m, ExportMode mode, const std::filesystem::path& out);

struct StatsReport {
    std::uint64_t entries = 0;
    std::map<std::string, double> attribute_marginals;
    std::map<std::string, double> gender;
    std::map<std::string, double> ethnicity;
    std::map<std::string, double> age_category;
    std::map<std::string, double> age_strategy;
    // Fraction of entries whose selected emotions include each emotion.
    std::map<std::string, double> emotions;
    std::map<std::string, std::uint64_t> dropped_labels;
    std::map<std::string, std::uint64_t> filter_counts;
    // Caption word counts in bins of `word_bin_width` words.
    std::vector<std::uint64_t> word_count_histogram;
    std::size_t word_bin_width = 10;
    CooccurrenceReport raw_cooccurrence;
    CooccurrenceReport captioned_cooccurrence;

    Json to_json() const;
    std::string to_text() const;
};

StatsReport stats_report(const DatasetManifest& m, const DeriveConfig& derive = DeriveConfig::defaults());

}  // namespace facecap
