#include "facecap/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "facecap/config.hpp"
#include "facecap/dataset.hpp"
#include "facecap/llm_client.hpp"
#include "facecap/pipeline.hpp"

namespace facecap {

namespace fs = std::filesystem;

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string profile;
    bool mock_llm = false;
    std::optional<std::int64_t> captions_per_image;
    std::optional<std::int64_t> concurrency;
    std::optional<std::int64_t> llm_in_flight;
    bool resume = false;
    std::size_t limit = 0;
    std::string out;
    std::string input;
    std::string manifest;
    std::string mode = "all";
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void emit_error(std::ostream& err, const std::string& kind, const std::string& message, const std::string& path = {}) {
    Json j{{"error", kind}, {"message", message}};
    if (!path.empty()) {
        j["path"] = path;
    }
    err << j.dump() << std::endl;
}

PipelineConfig effective_config(const Flags& f) {
    PipelineConfig cfg = f.config.empty() ? parse_config("") : load_config(f.config);
    if (f.seed) {
        cfg.global_seed = *f.seed;
    }
    if (!f.profile.empty()) {
        auto name = source_dataset_from_id(f.profile);
        if (!name) {
            throw ConfigError("--profile", "unknown dataset profile '" + f.profile + "'");
        }
        cfg.profile = builtin_profile(*name);
    }
    if (f.mock_llm) {
        cfg.fusion.mock = true;
    }
    if (f.captions_per_image) {
        if (*f.captions_per_image <= 0) {
            throw ConfigError("--captions-per-image", "must be positive");
        }
        cfg.fusion.options.captions_per_image = static_cast<std::size_t>(*f.captions_per_image);
    }
    if (f.concurrency) {
        cfg.concurrency.workers = *f.concurrency;
    }
    if (f.llm_in_flight) {
        cfg.concurrency.llm_in_flight = *f.llm_in_flight;
    }
    if (!f.input.empty()) {
        cfg.paths.records = f.input;
    }
    if (!f.out.empty()) {
        cfg.paths.out = f.out;
    }
    cfg.validate();
    return cfg;
}

void write_run_meta(const fs::path& dir, const std::string& subcommand, const PipelineConfig& cfg, Json extra) {
    fs::create_directories(dir);
    Json meta{{"subcommand", subcommand},
              {"config_hash", cfg.hash()},
              {"global_seed", cfg.global_seed},
              {"pipeline_version", kPipelineVersion},
              {"record_schema", kSchemaVersion},
              {"phrase_table", PhraseTable::builtin().version()}};
    for (auto& [key, value] : extra.items()) {
        meta[key] = value;
    }
    std::ofstream(dir / ("run_meta." + subcommand + ".json")) << meta.dump(2) << "\n";
}

std::unique_ptr<LlmClient> make_client(const PipelineConfig& cfg) {
    if (cfg.fusion.mock) {
        return std::make_unique<MockLlmClient>(cfg.fusion.options.limits);
    }
    HttpLlmConfig http;
    http.endpoint = cfg.fusion.endpoint;
    http.model = cfg.fusion.model;
    if (const char* token = std::getenv(cfg.fusion.token_env.c_str())) {
        http.auth_token = token;
    }
    http.timeout = std::chrono::seconds(cfg.fusion.timeout_s);
    http.retry = cfg.fusion.retry;
    return std::make_unique<HttpLlmClient>(http);
}

Flags config_only(const Flags& f) {
    Flags g;
    g.config = f.config;
    return g;
}

fs::path require_path(const fs::path& p, const std::string& what) {
    if (p.empty()) {
        throw UsageError(what + " is required");
    }
    return p;
}

int cmd_validate_config(const Flags& f, std::ostream& out) {
    if (f.config.empty()) {
        throw UsageError("--config is required");
    }
    const auto cfg = effective_config(f);
    out << Json{{"valid", true}, {"config_hash", cfg.hash()}}.dump() << std::endl;
    return 0;
}

int cmd_filter(const Flags& f, std::ostream& out) {
    const auto cfg = effective_config(f);
    const auto records = read_records(require_path(cfg.paths.records, "--input"));
    const auto run = run_filter(records, cfg.profile);

    Json counts(run.counts);
    if (!cfg.paths.out.empty()) {
        const fs::path dir = cfg.paths.out;
        fs::create_directories(dir);
        std::ofstream verdicts(dir / "verdicts.jsonl", std::ios::binary | std::ios::trunc);
        for (const auto& [id, verdict] : run.verdicts) {
            verdicts << Json{{"image_id", id}, {"accepted", verdict.accepted()}, {"reason", to_id(verdict.reason)}}.dump()
                     << '\n';
        }
        std::ofstream(dir / "counts.json") << counts.dump(2) << "\n";
        write_run_meta(dir, "filter", cfg, {{"records", records.size()}});
    }
    out << counts.dump() << std::endl;
    return 0;
}

int cmd_caption(const Flags& f, std::ostream& out, std::ostream& err) {
    const auto cfg = effective_config(f);
    const auto records = read_records(require_path(cfg.paths.records, "--input"));
    const fs::path dir = require_path(cfg.paths.out, "--out");
    auto client = make_client(cfg);

    CaptionRunOptions options;
    options.resume = f.resume;
    options.limit = f.limit;

    const auto phrases = cfg.paths.phrases.empty() ? PhraseTable::builtin() : PhraseTable::load(cfg.paths.phrases);
    auto run = run_caption(records, cfg, dir, *client, options, phrases);

    const auto counts = run.manifest.counts();
    write_run_meta(dir, "caption", cfg,
                   {{"llm_model_id", client->model_id()},
                    {"mock_llm", cfg.fusion.mock},
                    {"captions_per_image", cfg.fusion.options.captions_per_image},
                    {"counts", counts},
                    {"remaining", run.remaining}});
    out << Json{{"processed", run.processed}, {"remaining", run.remaining}, {"counts", counts}}.dump() << std::endl;
    if (!run.manifest.failed.empty()) {
        emit_error(err, "ProcessingFailures",
                   std::to_string(run.manifest.failed.size()) + " image(s) failed; rerun with --resume to retry");
        return 1;
    }
    return 0;
}

int cmd_export(const Flags& f, std::ostream& out) {
    const auto manifest = load_manifest(require_path(f.manifest, "--manifest"));
    const fs::path target = require_path(f.out, "--out");
    ExportMode mode;
    if (f.mode == "all") {
        mode = ExportMode::all_captions;
    } else if (f.mode == "one") {
        mode = ExportMode::one_per_image;
    } else {
        throw UsageError("--mode must be 'all' or 'one'");
    }
    export_training_manifest(manifest, mode, target);
    auto cfg = effective_config(config_only(f));
    cfg.global_seed = manifest.global_seed;
    fs::path meta_dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
    write_run_meta(meta_dir, "export", cfg,
                   {{"manifest", manifest.root.string()}, {"mode", f.mode}, {"entries", manifest.index.size()}});
    out << Json{{"exported", manifest.index.size()}, {"file", target.string()}}.dump() << std::endl;
    return 0;
}

int cmd_stats(const Flags& f, std::ostream& out) {
    const auto manifest = load_manifest(require_path(f.manifest, "--manifest"));
    auto cfg = effective_config(config_only(f));
    cfg.global_seed = manifest.global_seed;
    const auto report = stats_report(manifest, cfg.derive);
    const fs::path dir = f.out.empty() ? manifest.root : fs::path(f.out);
    fs::create_directories(dir);
    std::ofstream(dir / "stats.json") << report.to_json().dump(2) << "\n";
    std::ofstream(dir / "stats.txt") << report.to_text();
    write_run_meta(dir, "stats", cfg, {{"manifest", manifest.root.string()}, {"entries", report.entries}});
    out << report.to_text();
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Face caption pipeline: attribute records to captioned training manifests", "facecap"};
    app.require_subcommand(1);
    Flags f;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "Pipeline configuration (YAML)");
    };
    auto add_pipeline = [&](CLI::App* sub) {
        add_config(sub);
        sub->add_option("--seed", f.seed, "Override the global seed");
        sub->add_option("--profile", f.profile, "Dataset profile: easyportrait, ffhq, laion_face, other");
        sub->add_option("--input", f.input, "Attribute records (JSONL)");
        sub->add_option("--out", f.out, "Output directory");
    };

    auto* filter = app.add_subcommand("filter", "Apply the face/CLIP filters and report verdict counts");
    add_pipeline(filter);

    auto* caption = app.add_subcommand("caption", "Generate captions and write a sharded manifest");
    add_pipeline(caption);
    caption->add_flag("--mock-llm", f.mock_llm, "Use the offline mock fuser instead of the LLM service");
    caption->add_option("--captions-per-image", f.captions_per_image, "Captions to collect per image");
    caption->add_option("--concurrency", f.concurrency, "Records processed in parallel");
    caption->add_option("--llm-in-flight", f.llm_in_flight, "Maximum concurrent LLM requests");
    caption->add_flag("--resume", f.resume, "Continue an existing manifest");
    caption->add_option("--limit", f.limit, "Stop after this many records (0 = all)");

    auto* exp = app.add_subcommand("export", "Export image/caption pairs for training");
    add_config(exp);
    exp->add_option("--manifest", f.manifest, "Manifest directory")->required();
    exp->add_option("--mode", f.mode, "all: every caption per image; one: one sampled caption")
        ->check(CLI::IsMember({"all", "one"}));
    exp->add_option("--out", f.out, "Output JSONL file")->required();

    auto* stats = app.add_subcommand("stats", "Attribute, demographic and caption statistics");
    add_config(stats);
    stats->add_option("--manifest", f.manifest, "Manifest directory")->required();
    stats->add_option("--out", f.out, "Report directory (defaults to the manifest)");

    auto* validate = app.add_subcommand("validate-config", "Check a configuration file");
    add_config(validate);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        emit_error(err, "UsageError", e.what());
        return 2;
    }

    try {
        if (validate->parsed()) {
            return cmd_validate_config(f, out);
        }
        if (filter->parsed()) {
            return cmd_filter(f, out);
        }
        if (caption->parsed()) {
            return cmd_caption(f, out, err);
        }
        if (exp->parsed()) {
            return cmd_export(f, out);
        }
        if (stats->parsed()) {
            return cmd_stats(f, out);
        }
    } catch (const ConfigError& e) {
        emit_error(err, "ConfigError", e.what(), e.path());
        return 2;
    } catch (const UsageError& e) {
        emit_error(err, "UsageError", e.what());
        return 2;
    } catch (const SchemaError& e) {
        emit_error(err, "SchemaError", e.what(), e.path());
        return 1;
    } catch (const ServiceUnreachable& e) {
        emit_error(err, "ServiceUnreachable", e.what());
        return 1;
    } catch (const ServiceError& e) {
        emit_error(err, "ServiceError", e.what());
        return 1;
    } catch (const DuplicateImageId& e) {
        emit_error(err, "DuplicateImageId", e.what(), e.image_id());
        return 1;
    } catch (const CorruptIndex& e) {
        emit_error(err, "CorruptIndex", e.what());
        return 1;
    } catch (const EmptyManifest& e) {
        emit_error(err, "EmptyManifest", e.what());
        return 1;
    } catch (const IoError& e) {
        emit_error(err, "IoError", e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error(err, "Error", e.what());
        return 1;
    }
    return 2;
}

}  // namespace facecap
