#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "facecap/debias.hpp"
#include "facecap/derive.hpp"
#include "facecap/filter.hpp"
#include "facecap/fusion.hpp"
#include "facecap/llm_client.hpp"

namespace facecap {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct CropConfig {
    double margin = kDefaultCropMargin;
    bool align = false;
    AlignmentTemplate alignment_template = default_alignment_template();
};

struct FusionConfig {
    bool mock = false;
    std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
    std::string model = "vicuna-13b-v1.5";
    // Environment variable holding the bearer token; never stored in the file.
    std::string token_env = "FACECAP_LLM_TOKEN";
    FusionOptions options;
    RetryPolicy retry;
    std::int64_t timeout_s = 120;
};

struct OutputConfig {
    std::int64_t shard_size = 10000;
    std::string image_path_template = "images/{image_id}.jpg";
};

struct ConcurrencyConfig {
    std::int64_t workers = 8;
    std::int64_t llm_in_flight = 8;
};

struct PathsConfig {
    std::filesystem::path records;
    std::filesystem::path out;
    std::filesystem::path phrases;
};

struct PipelineConfig {
    std::uint64_t global_seed = 0;
    DatasetProfile profile = builtin_profile(SourceDataset::laion_face);
    CropConfig crop;
    DeriveConfig derive = DeriveConfig::defaults();
    std::vector<DebiasRule> debias_rules = default_debias_rules();
    FusionConfig fusion;
    OutputConfig output;
    ConcurrencyConfig concurrency;
    PathsConfig paths;

    // Throws ConfigError naming the offending key.
    void validate() const;

    // Canonical JSON form; its hash identifies a run configuration.
    Json to_json() const;
    std::string hash() const;
};

// Relative paths are resolved against the config file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir = {});

}  // namespace facecap
