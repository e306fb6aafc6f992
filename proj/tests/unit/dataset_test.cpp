#include "facecap/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "synthetic.hpp"

namespace facecap {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        root_ = fs::temp_directory_path() / (std::string("facecap_dataset_") + info->name());
        fs::remove_all(root_);
    }
    void TearDown() override { fs::remove_all(root_); }
    fs::path root_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> serialized(const std::vector<ManifestEntry>& es) {
    std::vector<std::string> out;
    for (const auto& e : es) {
        out.push_back(serialize_entry(e));
    }
    return out;
}

const std::vector<ManifestEntry>& entries25() {
    static const auto es = testing::mock_entries(25, 1);
    return es;
}

using Manifest = TempDir;

TEST_F(Manifest, ShardsOfTen) {
    const auto m = write_entries(entries25(), root_, 10);
    ASSERT_EQ(m.shards.size(), 3u);
    EXPECT_EQ(m.shards[0].entries, 10u);
    EXPECT_EQ(m.shards[1].entries, 10u);
    EXPECT_EQ(m.shards[2].entries, 5u);
    EXPECT_EQ(m.shards[0].file, "shards/shard-00000.jsonl");
    EXPECT_EQ(m.index.size(), 25u);
}

TEST_F(Manifest, WriteThenReadAllRoundTrips) {
    write_entries(entries25(), root_, 10);
    const auto m = load_manifest(root_);
    EXPECT_EQ(serialized(read_all(m)), serialized(entries25()));
    const auto& some = entries25()[13];
    EXPECT_EQ(serialize_entry(read_entry(m, some.image_id)), serialize_entry(some));
    EXPECT_EQ(manifest_index_json(m), manifest_index_json(write_entries(entries25(), root_, 10)));
}

TEST_F(Manifest, EntryJsonRoundTrip) {
    for (const auto& e : entries25()) {
        ASSERT_EQ(serialize_entry(entry_from_json(entry_to_json(e))), serialize_entry(e));
    }
}

TEST_F(Manifest, DuplicateIdNamesTheId) {
    auto es = entries25();
    es.push_back(es[4]);
    try {
        write_entries(es, root_, 10);
        FAIL() << "expected DuplicateImageId";
    } catch (const DuplicateImageId& e) {
        EXPECT_EQ(e.image_id(), es[4].image_id);
    }
}

TEST_F(Manifest, CorruptIndexDetected) {
    write_entries(entries25(), root_, 10);
    {
        std::ofstream(root_ / kIndexFile) << "{ not json";
    }
    EXPECT_THROW(load_manifest(root_), CorruptIndex);

    write_entries(entries25(), root_, 10);
    {
        std::ofstream shard(root_ / "shards/shard-00001.jsonl", std::ios::trunc);
        shard << "{}\n";
    }
    EXPECT_THROW(load_manifest(root_), CorruptIndex);
    EXPECT_THROW(load_manifest(root_ / "missing"), CorruptIndex);
}

TEST_F(Manifest, ResumedWriterMatchesSinglePass) {
    const auto whole = write_entries(entries25(), root_ / "whole", 10);

    auto first = ManifestWriter::create(root_ / "split", {}, 0, 10);
    for (std::size_t i = 0; i < 13; ++i) {
        first.add(entries25()[i]);
    }
    first.finish();
    auto second = ManifestWriter::resume(root_ / "split");
    EXPECT_TRUE(second.contains(entries25()[12].image_id));
    for (std::size_t i = 13; i < 25; ++i) {
        second.add(entries25()[i]);
    }
    second.finish();

    for (const auto* name : {"shards/shard-00000.jsonl", "shards/shard-00001.jsonl", "shards/shard-00002.jsonl",
                             "index.json"}) {
        EXPECT_EQ(slurp(root_ / "split" / name), slurp(root_ / "whole" / name)) << name;
    }
}

TEST_F(Manifest, RejectedAndFailedAreCounted) {
    auto w = ManifestWriter::create(root_, builtin_profile(SourceDataset::laion_face), 3, 10);
    w.add(entries25()[0]);
    w.add_rejected("r1", RejectReason::multiple_faces);
    w.add_rejected("r2", RejectReason::low_resolution);
    w.add_failed("f1", "no valid caption");
    EXPECT_THROW(w.add_rejected("r1", RejectReason::no_face), DuplicateImageId);
    const auto m = w.finish();
    const auto counts = load_manifest(root_).counts();
    EXPECT_EQ(counts.at("ok"), 1u);
    EXPECT_EQ(counts.at("multiple_faces"), 1u);
    EXPECT_EQ(counts.at("low_resolution"), 1u);
    EXPECT_EQ(counts.at("failed"), 1u);
    EXPECT_EQ(counts.at("input"), 4u);
    EXPECT_EQ(m.profile, builtin_profile(SourceDataset::laion_face));
}

TEST(ResumeFilter, SetDifference) {
    DatasetManifest empty;
    const std::vector<std::string> ids{"a", "b", "c", "d", "e", "f"};
    EXPECT_EQ(resume_filter(ids, empty), ids);

    DatasetManifest all;
    for (const auto& id : ids) {
        all.index[id] = {};
    }
    EXPECT_TRUE(resume_filter(ids, all).empty());

    DatasetManifest half;
    half.index["a"] = {};
    half.index["d"] = {};
    half.rejected["e"] = RejectReason::no_face;
    half.failed["b"] = "retry me";
    EXPECT_EQ(resume_filter(ids, half), (std::vector<std::string>{"b", "c", "f"}));
}

TEST(SampleCaption, SingleCaption) {
    ManifestEntry e;
    e.caption_set.captions = {"only"};
    Rng rng(1);
    EXPECT_EQ(sample_caption(e, rng), "only");
    e.caption_set.captions.clear();
    EXPECT_THROW(sample_caption(e, rng), std::invalid_argument);
}

TEST(SampleCaption, UniformOverThree) {
    ManifestEntry e;
    e.caption_set.captions = {"a", "b", "c"};
    Rng rng(123);
    std::map<std::string, int> counts;
    const int n = 30000;
    for (int i = 0; i < n; ++i) {
        ++counts[sample_caption(e, rng)];
    }
    for (const auto& [c, k] : counts) {
        EXPECT_NEAR(static_cast<double>(k) / n, 1.0 / 3.0, 0.01) << c;
    }
    Rng a(5), b(5);
    EXPECT_EQ(sample_caption(e, a), sample_caption(e, b));
}

using Export = TempDir;

TEST_F(Export, AllCaptionsRoundTrip) {
    const auto es = testing::mock_entries(2, 9);
    const auto m = write_entries(es, root_ / "m", 10, {}, 9);
    export_training_manifest(m, ExportMode::all_captions, root_ / "all.jsonl");
    std::ifstream in(root_ / "all.jsonl");
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
        const auto row = Json::parse(line);
        ASSERT_LT(i, es.size());
        EXPECT_EQ(row["image_path"], es[i].image_path);
        EXPECT_EQ(row["captions"].get<std::vector<std::string>>(), es[i].caption_set.captions);
        EXPECT_EQ(row["captions"].size(), 3u);
        EXPECT_EQ(row["crop_rect"], Json::array({es[i].crop_rect.x0, es[i].crop_rect.y0, es[i].crop_rect.x1,
                                                 es[i].crop_rect.y1}));
        ++i;
    }
    EXPECT_EQ(i, 2u);
}

TEST_F(Export, OnePerImageIsDeterministic) {
    const auto m = write_entries(entries25(), root_ / "m", 10, {}, 1);
    export_training_manifest(m, ExportMode::one_per_image, root_ / "a.jsonl");
    export_training_manifest(load_manifest(root_ / "m"), ExportMode::one_per_image, root_ / "b.jsonl");
    EXPECT_EQ(slurp(root_ / "a.jsonl"), slurp(root_ / "b.jsonl"));

    std::ifstream in(root_ / "a.jsonl");
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
        const auto row = Json::parse(line);
        const auto& caps = entries25()[i].caption_set.captions;
        EXPECT_NE(std::find(caps.begin(), caps.end(), row["caption"].get<std::string>()), caps.end());
        ++i;
    }
    EXPECT_EQ(i, 25u);
}

using Stats = TempDir;

TEST_F(Stats, AllFemaleManifest) {
    auto es = testing::mock_entries(10, 4);
    for (auto& e : es) {
        e.attribute_record.demographics.gender = Gender::female;
    }
    const auto report = stats_report(write_entries(es, root_, 10));
    EXPECT_EQ(report.entries, 10u);
    EXPECT_EQ(report.gender, (std::map<std::string, double>{{"female", 1.0}}));
}

TEST_F(Stats, MarginalsMatchGenerator) {
    // Flags drawn independently with known rates; attractive is kept off so
    // the debias drop leaves the raw marginals untouched.
    auto es = testing::mock_entries(1, 2);
    const auto base = es[0];
    es.clear();
    Rng rng(17);
    for (int i = 0; i < 5000; ++i) {
        auto e = base;
        e.image_id = "s" + std::to_string(i);
        e.caption_set.image_id = e.image_id;
        e.attribute_record.image_id = e.image_id;
        auto& flags = e.attribute_record.attributes;
        flags = AttributeFlags{};
        e.attribute_record.is_blurry = false;
        flags.set(Attribute::smiling, rng.uniform01() < 0.3);
        flags.set(Attribute::eyeglasses, rng.uniform01() < 0.1);
        flags.set(Attribute::wearing_hat, rng.uniform01() < 0.55);
        e.attribute_record.demographics.ethnicity = rng.uniform01() < 0.25 ? Ethnicity::asian : Ethnicity::black;
        e.dropped_labels.clear();
        es.push_back(std::move(e));
    }
    const auto report = stats_report(write_entries(es, root_, 1000));
    EXPECT_NEAR(report.attribute_marginals.at("smiling"), 0.3, 0.01);
    EXPECT_NEAR(report.attribute_marginals.at("eyeglasses"), 0.1, 0.01);
    EXPECT_NEAR(report.attribute_marginals.at("wearing_hat"), 0.55, 0.01);
    EXPECT_NEAR(report.ethnicity.at("asian"), 0.25, 0.01);
    EXPECT_EQ(report.raw_cooccurrence.total, 5000u);
    EXPECT_FALSE(report.to_text().empty());
    EXPECT_TRUE(report.to_json().contains("caption_word_histogram"));
}

TEST_F(Stats, EmptyManifestThrows) {
    const auto m = ManifestWriter::create(root_, {}, 0, 10).finish();
    EXPECT_THROW(stats_report(m), EmptyManifest);
}

}  // namespace
}  // namespace facecap
