#include "facecap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

namespace facecap {

namespace fs = std::filesystem;

namespace {

template <typename E, std::size_t N>
E enum_from(const std::array<E, N>& values, const std::string& id, const std::string& path) {
    for (auto v : values) {
        if (to_id(v) == id) {
            return v;
        }
    }
    throw SchemaError(path, "unknown value '" + id + "'");
}

constexpr std::array<HairLength, 4> kHair = {HairLength::bald, HairLength::short_hair, HairLength::medium,
                                             HairLength::long_hair};
constexpr std::array<EyeState, 3> kEyes = {EyeState::open, EyeState::narrow, EyeState::closed};
constexpr std::array<MouthState, 3> kMouth = {MouthState::closed, MouthState::slightly_open, MouthState::open};
constexpr std::array<AgeStrategy, 3> kStrategies = {AgeStrategy::noisy, AgeStrategy::bracket, AgeStrategy::category};

std::string shard_name(std::size_t i) {
    std::ostringstream os;
    os << "shards/shard-" << std::setw(5) << std::setfill('0') << i << ".jsonl";
    return os.str();
}

void write_atomically(const fs::path& target, const std::string& content) {
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + " to " + target.string() + ": " + ec.message());
    }
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            lines.push_back(std::move(line));
        }
    }
    return lines;
}

Json crop_json(const CropRect& c) { return Json::array({c.x0, c.y0, c.x1, c.y1}); }

CropRect crop_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 4) {
        throw SchemaError("crop_rect", "expected [x0, y0, x1, y1]");
    }
    return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>(), j[3].get<std::int64_t>()};
}

std::string fraction_line(const std::string& key, double value) {
    std::ostringstream os;
    os << "  " << std::left << std::setw(24) << key << std::right << std::fixed << std::setprecision(4) << value << "\n";
    return os.str();
}

}  // namespace

AttributeFlags ManifestEntry::captioned_flags() const {
    AttributeFlags flags = attribute_record.attributes;
    for (auto a : dropped_labels) {
        flags.clear(a);
    }
    return flags;
}

Json profile_to_json(const DatasetProfile& p) {
    return Json{{"name", to_id(p.name)},
                {"min_face_side_px", p.min_face_side_px ? Json(*p.min_face_side_px) : Json(nullptr)},
                {"require_single_face", p.require_single_face},
                {"require_real_human", p.require_real_human},
                {"reject_text_overlay", p.reject_text_overlay}};
}

DatasetProfile profile_from_json(const Json& j) {
    DatasetProfile p;
    auto name = source_dataset_from_id(j.at("name").get<std::string>());
    if (!name) {
        throw SchemaError("profile.name", "unknown dataset");
    }
    p.name = *name;
    if (!j.at("min_face_side_px").is_null()) {
        p.min_face_side_px = j.at("min_face_side_px").get<std::int64_t>();
    }
    p.require_single_face = j.at("require_single_face").get<bool>();
    p.require_real_human = j.at("require_real_human").get<bool>();
    p.reject_text_overlay = j.at("reject_text_overlay").get<bool>();
    return p;
}

Json entry_to_json(const ManifestEntry& e) {
    Json emotions = Json::array();
    for (auto em : e.derived.emotions_selected) {
        emotions.push_back(to_id(em));
    }
    Json dropped = Json::array();
    for (auto a : e.dropped_labels) {
        dropped.push_back(to_id(a));
    }
    Json j;
    j["image_id"] = e.image_id;
    j["image_path"] = e.image_path;
    j["crop_rect"] = crop_json(e.crop_rect);
    j["alignment"] = e.alignment ? Json{{"a", e.alignment->a}, {"b", e.alignment->b}, {"tx", e.alignment->tx},
                                        {"ty", e.alignment->ty}}
                                 : Json(nullptr);
    j["source_dataset"] = to_id(e.source_dataset);
    j["attribute_record"] = record_to_json(e.attribute_record);
    j["derived"] = {{"emotions_selected", std::move(emotions)},
                    {"hair_length", to_id(e.derived.hair_length)},
                    {"eye_state", to_id(e.derived.eye_state)},
                    {"mouth_state", to_id(e.derived.mouth_state)},
                    {"age_phrase",
                     {{"strategy", to_id(e.age_phrase.strategy)},
                      {"text", e.age_phrase.text},
                      {"numeric_basis", e.age_phrase.numeric_basis}}}};
    j["bag_of_words"] = bag_to_json(e.bag_of_words);
    j["caption_set"] = caption_set_to_json(e.caption_set);
    j["dropped_labels"] = std::move(dropped);
    j["seeds"] = {{"global", e.seeds.global}, {"per_image", e.seeds.per_image}};
    j["pipeline_version"] = e.pipeline_version;
    return j;
}

ManifestEntry entry_from_json(const Json& j) {
    ManifestEntry e;
    try {
        e.image_id = j.at("image_id").get<std::string>();
        e.image_path = j.at("image_path").get<std::string>();
        e.crop_rect = crop_from_json(j.at("crop_rect"));
        if (const auto& a = j.at("alignment"); !a.is_null()) {
            e.alignment = SimilarityTransform{a.at("a").get<double>(), a.at("b").get<double>(), a.at("tx").get<double>(),
                                              a.at("ty").get<double>()};
        }
        auto source = source_dataset_from_id(j.at("source_dataset").get<std::string>());
        if (!source) {
            throw SchemaError("source_dataset", "unknown value");
        }
        e.source_dataset = *source;
        e.attribute_record = record_from_json(j.at("attribute_record"));

        const auto& d = j.at("derived");
        for (const auto& em : d.at("emotions_selected")) {
            auto value = emotion_from_id(em.get<std::string>());
            if (!value) {
                throw SchemaError("derived.emotions_selected", "unknown emotion");
            }
            e.derived.emotions_selected.push_back(*value);
        }
        e.derived.hair_length = enum_from(kHair, d.at("hair_length").get<std::string>(), "derived.hair_length");
        e.derived.eye_state = enum_from(kEyes, d.at("eye_state").get<std::string>(), "derived.eye_state");
        e.derived.mouth_state = enum_from(kMouth, d.at("mouth_state").get<std::string>(), "derived.mouth_state");
        const auto& age = d.at("age_phrase");
        e.age_phrase.strategy = enum_from(kStrategies, age.at("strategy").get<std::string>(), "derived.age_phrase.strategy");
        e.age_phrase.text = age.at("text").get<std::string>();
        e.age_phrase.numeric_basis = age.at("numeric_basis").get<double>();

        e.bag_of_words = bag_from_json(j.at("bag_of_words"));
        e.caption_set = caption_set_from_json(j.at("caption_set"));
        for (const auto& a : j.at("dropped_labels")) {
            auto value = attribute_from_id(a.get<std::string>());
            if (!value) {
                throw SchemaError("dropped_labels", "unknown attribute");
            }
            e.dropped_labels.push_back(*value);
        }
        e.seeds.global = j.at("seeds").at("global").get<std::uint64_t>();
        e.seeds.per_image = j.at("seeds").at("per_image").get<std::uint64_t>();
        e.pipeline_version = j.at("pipeline_version").get<std::string>();
    } catch (const Json::exception& ex) {
        throw SchemaError("manifest_entry", ex.what());
    }
    if (e.caption_set.captions.empty()) {
        throw SchemaError("caption_set.captions", "must be non-empty");
    }
    return e;
}

std::string serialize_entry(const ManifestEntry& e) {
    return entry_to_json(e).dump(-1, ' ', false, Json::error_handler_t::strict);
}

std::map<std::string, std::uint64_t> DatasetManifest::counts() const {
    std::map<std::string, std::uint64_t> c;
    for (std::size_t i = 0; i < kRejectReasonCount; ++i) {
        c[std::string(to_id(static_cast<RejectReason>(i)))] = 0;
    }
    c["ok"] = index.size();
    for (const auto& [id, reason] : rejected) {
        ++c[std::string(to_id(reason))];
    }
    c["failed"] = failed.size();
    c["input"] = index.size() + rejected.size() + failed.size();
    return c;
}

Json manifest_index_json(const DatasetManifest& m) {
    Json shards = Json::array();
    for (const auto& s : m.shards) {
        shards.push_back({{"file", s.file}, {"entries", s.entries}});
    }
    Json entries = Json::object();
    for (const auto& [id, loc] : m.index) {
        entries[id] = {{"shard", loc.shard}, {"offset", loc.offset}};
    }
    Json rejected = Json::object();
    for (const auto& [id, reason] : m.rejected) {
        rejected[id] = to_id(reason);
    }
    Json failed = Json::object();
    for (const auto& [id, message] : m.failed) {
        failed[id] = message;
    }
    Json counts = Json::object();
    for (const auto& [key, value] : m.counts()) {
        counts[key] = value;
    }
    return Json{{"format", kManifestFormat},
                {"pipeline_version", m.pipeline_version},
                {"global_seed", m.global_seed},
                {"shard_size", m.shard_size},
                {"profile", profile_to_json(m.profile)},
                {"shards", std::move(shards)},
                {"counts", std::move(counts)},
                {"entries", std::move(entries)},
                {"rejected", std::move(rejected)},
                {"failed", std::move(failed)}};
}

ManifestWriter ManifestWriter::create(const fs::path& root, const DatasetProfile& profile, std::uint64_t global_seed,
                                      std::size_t shard_size) {
    if (shard_size == 0) {
        throw std::invalid_argument("shard_size must be positive");
    }
    std::error_code ec;
    fs::create_directories(root / "shards", ec);
    if (ec) {
        throw IoError("cannot create " + (root / "shards").string() + ": " + ec.message());
    }
    for (const auto& item : fs::directory_iterator(root / "shards")) {
        if (item.path().extension() == ".jsonl" || item.path().extension() == ".tmp") {
            fs::remove(item.path());
        }
    }
    fs::remove(root / kIndexFile);

    ManifestWriter w;
    w.manifest_.root = root;
    w.manifest_.profile = profile;
    w.manifest_.global_seed = global_seed;
    w.manifest_.shard_size = shard_size;
    return w;
}

ManifestWriter ManifestWriter::resume(const fs::path& root) {
    ManifestWriter w;
    w.manifest_ = load_manifest(root);
    auto& shards = w.manifest_.shards;
    if (!shards.empty() && shards.back().entries < w.manifest_.shard_size) {
        w.current_shard_ = shards.size() - 1;
        w.pending_lines_ = read_lines(root / shards.back().file);
        for (const auto& line : w.pending_lines_) {
            w.pending_bytes_ += line.size() + 1;
        }
    } else {
        w.current_shard_ = shards.size();
    }
    return w;
}

bool ManifestWriter::contains(const std::string& image_id) const {
    return manifest_.index.contains(image_id) || manifest_.rejected.contains(image_id);
}

void ManifestWriter::claim_id(const std::string& image_id) {
    if (contains(image_id)) {
        throw DuplicateImageId(image_id);
    }
    manifest_.failed.erase(image_id);
}

void ManifestWriter::add(const ManifestEntry& entry) {
    if (entry.caption_set.captions.empty()) {
        throw std::invalid_argument("manifest entry '" + entry.image_id + "' has no captions");
    }
    claim_id(entry.image_id);
    std::string line = serialize_entry(entry);
    manifest_.index[entry.image_id] = {current_shard_, pending_bytes_};
    pending_bytes_ += line.size() + 1;
    pending_lines_.push_back(std::move(line));
    if (pending_lines_.size() >= manifest_.shard_size) {
        flush_shard();
        ++current_shard_;
        pending_lines_.clear();
        pending_bytes_ = 0;
    }
}

void ManifestWriter::add_rejected(const std::string& image_id, RejectReason reason) {
    claim_id(image_id);
    manifest_.rejected[image_id] = reason;
}

void ManifestWriter::add_failed(const std::string& image_id, const std::string& message) {
    if (contains(image_id)) {
        throw DuplicateImageId(image_id);
    }
    manifest_.failed[image_id] = message;
}

void ManifestWriter::flush_shard() {
    std::string content;
    content.reserve(pending_bytes_);
    for (const auto& line : pending_lines_) {
        content += line;
        content += '\n';
    }
    const std::string name = shard_name(current_shard_);
    write_atomically(manifest_.root / name, content);
    if (manifest_.shards.size() <= current_shard_) {
        manifest_.shards.resize(current_shard_ + 1);
    }
    manifest_.shards[current_shard_] = {name, pending_lines_.size()};
    write_index();
}

void ManifestWriter::write_index() const {
    write_atomically(manifest_.root / kIndexFile, manifest_index_json(manifest_).dump(2) + "\n");
}

DatasetManifest ManifestWriter::finish() {
    if (!pending_lines_.empty()) {
        flush_shard();
    } else {
        write_index();
    }
    return manifest_;
}

DatasetManifest write_entries(const std::vector<ManifestEntry>& entries, const fs::path& root, std::size_t shard_size,
                              const DatasetProfile& profile, std::uint64_t global_seed) {
    auto writer = ManifestWriter::create(root, profile, global_seed, shard_size);
    for (const auto& e : entries) {
        writer.add(e);
    }
    return writer.finish();
}

DatasetManifest load_manifest(const fs::path& root) {
    const fs::path index_path = root / kIndexFile;
    if (!fs::exists(index_path)) {
        throw CorruptIndex("missing " + index_path.string());
    }
    DatasetManifest m;
    m.root = root;
    try {
        std::ifstream in(index_path);
        const Json j = Json::parse(in);
        if (j.at("format").get<std::string>() != kManifestFormat) {
            throw CorruptIndex("unsupported manifest format in " + index_path.string());
        }
        m.pipeline_version = j.at("pipeline_version").get<std::string>();
        m.global_seed = j.at("global_seed").get<std::uint64_t>();
        m.shard_size = j.at("shard_size").get<std::size_t>();
        m.profile = profile_from_json(j.at("profile"));
        for (const auto& s : j.at("shards")) {
            m.shards.push_back({s.at("file").get<std::string>(), s.at("entries").get<std::size_t>()});
        }
        for (const auto& [id, loc] : j.at("entries").items()) {
            m.index[id] = {loc.at("shard").get<std::size_t>(), loc.at("offset").get<std::uint64_t>()};
        }
        for (const auto& [id, reason] : j.at("rejected").items()) {
            auto r = reject_reason_from_id(reason.get<std::string>());
            if (!r || *r == RejectReason::ok) {
                throw CorruptIndex("bad reject reason for '" + id + "'");
            }
            m.rejected[id] = *r;
        }
        for (const auto& [id, message] : j.at("failed").items()) {
            m.failed[id] = message.get<std::string>();
        }
    } catch (const CorruptIndex&) {
        throw;
    } catch (const std::exception& e) {
        throw CorruptIndex("unreadable index " + index_path.string() + ": " + e.what());
    }

    if (m.shard_size == 0) {
        throw CorruptIndex("shard_size is zero");
    }
    std::vector<std::size_t> per_shard(m.shards.size(), 0);
    for (const auto& [id, loc] : m.index) {
        if (loc.shard >= m.shards.size()) {
            throw CorruptIndex("entry '" + id + "' points at missing shard " + std::to_string(loc.shard));
        }
        ++per_shard[loc.shard];
    }
    for (std::size_t i = 0; i < m.shards.size(); ++i) {
        const fs::path file = root / m.shards[i].file;
        if (!fs::exists(file)) {
            throw CorruptIndex("missing shard file " + file.string());
        }
        if (per_shard[i] != m.shards[i].entries) {
            throw CorruptIndex("index and shard " + m.shards[i].file + " disagree on entry count");
        }
        std::ifstream in(file, std::ios::binary);
        const auto lines = static_cast<std::size_t>(
            std::count(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>(), '\n'));
        if (lines != m.shards[i].entries) {
            throw CorruptIndex("shard " + m.shards[i].file + " holds " + std::to_string(lines) + " lines, index expects " +
                               std::to_string(m.shards[i].entries));
        }
    }
    return m;
}

std::vector<ManifestEntry> read_all(const DatasetManifest& m) {
    std::vector<ManifestEntry> out;
    for (const auto& shard : m.shards) {
        for (const auto& line : read_lines(m.root / shard.file)) {
            out.push_back(entry_from_json(Json::parse(line)));
        }
    }
    return out;
}

ManifestEntry read_entry(const DatasetManifest& m, const std::string& image_id) {
    auto it = m.index.find(image_id);
    if (it == m.index.end()) {
        throw std::out_of_range("image_id '" + image_id + "' not in manifest");
    }
    std::ifstream in(m.root / m.shards.at(it->second.shard).file, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(it->second.offset));
    std::string line;
    if (!std::getline(in, line)) {
        throw CorruptIndex("offset for '" + image_id + "' is past the end of its shard");
    }
    auto entry = entry_from_json(Json::parse(line));
    if (entry.image_id != image_id) {
        throw CorruptIndex("offset for '" + image_id + "' points at '" + entry.image_id + "'");
    }
    return entry;
}

std::vector<std::string> resume_filter(const std::vector<std::string>& ids, const DatasetManifest& m) {
    std::vector<std::string> out;
    for (const auto& id : ids) {
        if (!m.index.contains(id) && !m.rejected.contains(id)) {
            out.push_back(id);
        }
    }
    return out;
}

const std::string& sample_caption(const ManifestEntry& e, Rng& rng) {
    const auto& captions = e.caption_set.captions;
    if (captions.empty()) {
        throw std::invalid_argument("entry '" + e.image_id + "' has no captions");
    }
    return captions[rng.index(captions.size())];
}

std::uint64_t export_seed(std::uint64_t global_seed, const std::string& image_id) {
    return stage_seed(per_image_seed(global_seed, image_id), "export");
}

void export_training_manifest(const DatasetManifest& m, ExportMode mode, const fs::path& out) {
    std::string content;
    for (const auto& shard : m.shards) {
        for (const auto& line : read_lines(m.root / shard.file)) {
            const auto e = entry_from_json(Json::parse(line));
            Json row;
            row["image_path"] = e.image_path;
            if (mode == ExportMode::all_captions) {
                row["captions"] = e.caption_set.captions;
            } else {
                Rng rng(export_seed(m.global_seed, e.image_id));
                row["caption"] = sample_caption(e, rng);
            }
            row["crop_rect"] = crop_json(e.crop_rect);
            content += row.dump(-1, ' ', false, Json::error_handler_t::strict);
            content += '\n';
        }
    }
    if (out.has_parent_path()) {
        fs::create_directories(out.parent_path());
    }
    write_atomically(out, content);
}

StatsReport stats_report(const DatasetManifest& m, const DeriveConfig& derive) {
    StatsReport r;
    CooccurrenceCounter raw;
    CooccurrenceCounter captioned;
    std::map<std::string, std::uint64_t> gender, ethnicity, age_cat, strategy, emotions;

    for (const auto& shard : m.shards) {
        for (const auto& line : read_lines(m.root / shard.file)) {
            const auto e = entry_from_json(Json::parse(line));
            ++r.entries;
            raw.add(e.attribute_record.attributes);
            captioned.add(e.captioned_flags());
            const auto& demo = e.attribute_record.demographics;
            ++gender[std::string(to_id(demo.gender))];
            ++ethnicity[std::string(to_id(demo.ethnicity))];
            ++age_cat[std::string(age_category(demo.age_pred, derive))];
            ++strategy[std::string(to_id(e.age_phrase.strategy))];
            for (auto em : e.derived.emotions_selected) {
                ++emotions[std::string(to_id(em))];
            }
            for (auto a : e.dropped_labels) {
                ++r.dropped_labels[std::string(to_id(a))];
            }
            for (const auto& caption : e.caption_set.captions) {
                const std::size_t bin = word_count(caption) / r.word_bin_width;
                if (r.word_count_histogram.size() <= bin) {
                    r.word_count_histogram.resize(bin + 1, 0);
                }
                ++r.word_count_histogram[bin];
            }
        }
    }
    if (r.entries == 0) {
        throw EmptyManifest("manifest at " + m.root.string() + " has no entries");
    }

    const double n = static_cast<double>(r.entries);
    auto normalise = [n](const std::map<std::string, std::uint64_t>& counts, std::map<std::string, double>& out) {
        for (const auto& [key, count] : counts) {
            out[key] = static_cast<double>(count) / n;
        }
    };
    normalise(gender, r.gender);
    normalise(ethnicity, r.ethnicity);
    normalise(age_cat, r.age_category);
    normalise(strategy, r.age_strategy);
    normalise(emotions, r.emotions);

    r.raw_cooccurrence = raw.report(default_conditional_pairs());
    r.captioned_cooccurrence = captioned.report(default_conditional_pairs());
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
        r.attribute_marginals[std::string(attribute_ids()[i])] = static_cast<double>(r.raw_cooccurrence.marginal[i]) / n;
    }
    r.filter_counts = m.counts();
    return r;
}

Json StatsReport::to_json() const {
    return Json{{"entries", entries},
                {"attribute_marginals", attribute_marginals},
                {"gender", gender},
                {"ethnicity", ethnicity},
                {"age_category", age_category},
                {"age_strategy", age_strategy},
                {"emotions", emotions},
                {"dropped_labels", dropped_labels},
                {"filter_counts", filter_counts},
                {"caption_word_histogram", {{"bin_width", word_bin_width}, {"counts", word_count_histogram}}},
                {"cooccurrence_raw", raw_cooccurrence.to_json()},
                {"cooccurrence_captioned", captioned_cooccurrence.to_json()}};
}

std::string StatsReport::to_text() const {
    std::ostringstream os;
    os << "entries: " << entries << "\n";
    os << "filter verdicts:\n";
    for (const auto& [key, value] : filter_counts) {
        os << "  " << std::left << std::setw(24) << key << value << "\n";
    }
    auto section = [&os](const std::string& title, const std::map<std::string, double>& values) {
        os << title << ":\n";
        for (const auto& [key, value] : values) {
            os << fraction_line(key, value);
        }
    };
    section("gender", gender);
    section("ethnicity", ethnicity);
    section("age category", age_category);
    section("age phrasing", age_strategy);
    section("emotions", emotions);
    os << "attribute marginals:\n";
    for (const auto& [key, value] : attribute_marginals) {
        if (value > 0) {
            os << fraction_line(key, value);
        }
    }
    os << "dropped labels:\n";
    for (const auto& [key, value] : dropped_labels) {
        os << "  " << std::left << std::setw(24) << key << value << "\n";
    }
    auto conditionals = [&os](const std::string& title, const CooccurrenceReport& rep) {
        os << title << ":\n";
        for (const auto& c : rep.conditionals) {
            os << fraction_line("P(" + std::string(to_id(c.event)) + " | " + std::string(to_id(c.given)) + ")",
                                c.probability);
        }
    };
    conditionals("co-occurrence (raw flags)", raw_cooccurrence);
    conditionals("co-occurrence (captioned flags)", captioned_cooccurrence);
    os << "caption word counts:\n";
    for (std::size_t i = 0; i < word_count_histogram.size(); ++i) {
        if (word_count_histogram[i] > 0) {
            os << "  " << std::setw(3) << i * word_bin_width << "-" << std::setw(3) << (i + 1) * word_bin_width - 1
               << "  " << word_count_histogram[i] << "\n";
        }
    }
    return os.str();
}

}  // namespace facecap
