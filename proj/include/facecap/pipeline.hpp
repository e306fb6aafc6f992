#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "facecap/bow.hpp"
#include "facecap/config.hpp"
#include "facecap/dataset.hpp"
#include "facecap/fusion.hpp"

namespace facecap {

struct ProcessingFailure {
    std::string message;
};

using RecordOutcome = std::variant<ManifestEntry, RejectReason, ProcessingFailure>;

std::string image_path_for(const AttributeRecord& r, const std::string& path_template);

// Runs one record through filtering, cropping, debiasing, derivation, the
// bag-of-words and caption fusion. Rejections come back as a RejectReason;
// content failures (no valid caption, unusable parsing stats) as a
// ProcessingFailure. Transport errors propagate.
RecordOutcome process_record(const AttributeRecord& r, const PipelineConfig& cfg, LlmClient& client,
                             const PhraseTable& phrases = PhraseTable::builtin());

// Reads a JSONL file of attribute records. Blank lines are skipped; a
// malformed line raises SchemaError prefixed with its line number.
std::vector<AttributeRecord> read_records(const std::filesystem::path& path);
void write_records(const std::vector<AttributeRecord>& records, const std::filesystem::path& path);

struct FilterRun {
    std::vector<std::pair<std::string, FilterVerdict>> verdicts;
    std::map<std::string, std::uint64_t> counts;
};

FilterRun run_filter(const std::vector<AttributeRecord>& records, const DatasetProfile& profile);

struct CaptionRunOptions {
    bool resume = false;
    // Stop after this many newly processed records (0 = no limit).
    std::size_t limit = 0;
};

struct CaptionRun {
    DatasetManifest manifest;
    std::size_t processed = 0;
    std::size_t remaining = 0;
    bool complete() const { return remaining == 0 && manifest.failed.empty(); }
};

// Processes records into a manifest at `out`. Records are handled in
// parallel chunks but committed in input order, so output bytes do not
// depend on the worker count.
CaptionRun run_caption(const std::vector<AttributeRecord>& records, const PipelineConfig& cfg,
                       const std::filesystem::path& out, LlmClient& client, const CaptionRunOptions& options = {},
                       const PhraseTable& phrases = PhraseTable::builtin());

}  // namespace facecap
