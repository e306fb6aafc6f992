#include "facecap/pipeline.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_set>

#include "facecap/debias.hpp"
#include "facecap/derive.hpp"
#include "facecap/filter.hpp"
#include "facecap/rng.hpp"

namespace facecap {

namespace {

void replace_all(std::string& text, std::string_view token, std::string_view value) {
    for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size())) {
        text.replace(pos, token.size(), value);
    }
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// thrown by any task is rethrown after all threads join.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) {
                            error = std::current_exception();
                        }
                        next = n;
                    }
                }
            });
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace

std::string image_path_for(const AttributeRecord& r, const std::string& path_template) {
    std::string path = path_template;
    replace_all(path, "{image_id}", r.image_id);
    replace_all(path, "{source}", to_id(r.source_dataset));
    return path;
}

RecordOutcome process_record(const AttributeRecord& r, const PipelineConfig& cfg, LlmClient& client,
                             const PhraseTable& phrases) {
    const auto verdict = check_image(r, cfg.profile);
    if (!verdict.accepted()) {
        return verdict.reason;
    }

    ManifestEntry e;
    e.image_id = r.image_id;
    e.image_path = image_path_for(r, cfg.output.image_path_template);
    e.source_dataset = r.source_dataset;
    e.attribute_record = r;
    e.seeds = {cfg.global_seed, per_image_seed(cfg.global_seed, r.image_id)};

    try {
        e.crop_rect = compute_crop(*r.detection.box, *r.detection.landmarks, r.image_size, cfg.crop.margin);
        if (cfg.crop.align) {
            e.alignment = estimate_alignment(*r.detection.landmarks, cfg.crop.alignment_template);
        }

        Rng debias_rng(stage_seed(e.seeds.per_image, "debias"));
        auto debiased = apply_debias(r, cfg.debias_rules, debias_rng);
        e.dropped_labels = debiased.dropped;

        e.derived = derive_attributes(debiased.record, cfg.derive);
        Rng age_rng(stage_seed(e.seeds.per_image, "age"));
        e.age_phrase = sample_age_phrase(r.demographics.age_pred, age_rng, cfg.derive);

        e.bag_of_words =
            assemble_bow(debiased.record, e.derived, e.age_phrase, stage_seed(e.seeds.per_image, "bow"), phrases);
        const auto prompt = build_prompt(e.bag_of_words);
        e.caption_set =
            fuse_captions(prompt, r.image_id, cfg.fusion.options, client, stage_seed(e.seeds.per_image, "fusion"));
    } catch (const GeometryError& ex) {
        return ProcessingFailure{std::string("geometry: ") + ex.what()};
    } catch (const DeriveError& ex) {
        return ProcessingFailure{std::string("derive: ") + ex.what()};
    } catch (const NoValidCaption& ex) {
        return ProcessingFailure{std::string("fusion: ") + ex.what()};
    }
    return e;
}

std::vector<AttributeRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open records file " + path.string());
    }
    std::vector<AttributeRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            records.push_back(parse_record(line));
        } catch (const SchemaError& e) {
            throw SchemaError("line " + std::to_string(line_no) + ": " + e.path(), e.what());
        }
    }
    return records;
}

void write_records(const std::vector<AttributeRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    for (const auto& r : records) {
        out << serialize_record(r) << '\n';
    }
}

FilterRun run_filter(const std::vector<AttributeRecord>& records, const DatasetProfile& profile) {
    FilterRun run;
    for (std::size_t i = 0; i < kRejectReasonCount; ++i) {
        run.counts[std::string(to_id(static_cast<RejectReason>(i)))] = 0;
    }
    for (const auto& r : records) {
        auto verdict = check_image(r, profile);
        ++run.counts[std::string(to_id(verdict.reason))];
        run.verdicts.emplace_back(r.image_id, verdict);
    }
    run.counts["input"] = records.size();
    return run;
}

CaptionRun run_caption(const std::vector<AttributeRecord>& records, const PipelineConfig& cfg,
                       const std::filesystem::path& out, LlmClient& client, const CaptionRunOptions& options,
                       const PhraseTable& phrases) {
    const auto shard_size = static_cast<std::size_t>(cfg.output.shard_size);
    auto writer = options.resume && std::filesystem::exists(out / kIndexFile)
                      ? ManifestWriter::resume(out)
                      : ManifestWriter::create(out, cfg.profile, cfg.global_seed, shard_size);
    if (writer.manifest().global_seed != cfg.global_seed || writer.manifest().shard_size != shard_size ||
        !(writer.manifest().profile == cfg.profile)) {
        throw std::runtime_error("cannot resume " + out.string() +
                                 ": seed, shard size or profile differ from the existing manifest");
    }

    std::unordered_set<std::string> seen;
    std::vector<const AttributeRecord*> todo;
    for (const auto& r : records) {
        if (!seen.insert(r.image_id).second) {
            throw DuplicateImageId(r.image_id);
        }
        if (!writer.contains(r.image_id)) {
            todo.push_back(&r);
        }
    }

    BoundedLlmClient bounded(client, cfg.concurrency.llm_in_flight);
    const auto workers = static_cast<std::size_t>(cfg.concurrency.workers);
    const std::size_t chunk = std::max<std::size_t>(64, workers * 8);
    const std::size_t budget = options.limit == 0 ? todo.size() : std::min(options.limit, todo.size());

    CaptionRun run;
    std::exception_ptr pending_error;
    for (std::size_t begin = 0; begin < budget && !pending_error; begin += chunk) {
        const std::size_t end = std::min(budget, begin + chunk);
        std::vector<std::optional<RecordOutcome>> outcomes(end - begin);
        try {
            parallel_for(end - begin, workers, [&](std::size_t i) {
                outcomes[i] = process_record(*todo[begin + i], cfg, bounded, phrases);
            });
        } catch (...) {
            pending_error = std::current_exception();
        }
        // Commit the completed prefix so a transport failure leaves a
        // resumable manifest with no gaps in input order.
        for (std::size_t i = 0; i < outcomes.size() && outcomes[i]; ++i) {
            const auto& id = todo[begin + i]->image_id;
            std::visit(
                [&](const auto& o) {
                    using T = std::decay_t<decltype(o)>;
                    if constexpr (std::is_same_v<T, ManifestEntry>) {
                        writer.add(o);
                    } else if constexpr (std::is_same_v<T, RejectReason>) {
                        writer.add_rejected(id, o);
                    } else {
                        writer.add_failed(id, o.message);
                    }
                },
                *outcomes[i]);
            ++run.processed;
        }
    }
    run.manifest = writer.finish();
    run.remaining = todo.size() - run.processed;
    if (pending_error) {
        std::rethrow_exception(pending_error);
    }
    return run;
}

}  // namespace facecap
