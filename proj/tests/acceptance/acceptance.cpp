// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and runtime limits are fixed below.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "facecap/bow.hpp"
#include "facecap/cli.hpp"
#include "facecap/dataset.hpp"
#include "facecap/debias.hpp"
#include "facecap/derive.hpp"
#include "facecap/fusion.hpp"
#include "facecap/llm_client.hpp"
#include "facecap/pipeline.hpp"
#include "fake_llm_server.hpp"
#include "synthetic.hpp"

namespace {

using namespace facecap;
namespace fs = std::filesystem;

constexpr double kFrequencyTolerance = 0.01;
constexpr double kDebiasTolerance = 0.02;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("facecap_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

BagOfWords make_bag(std::vector<std::string> f1, std::vector<std::string> f2, bool blurry, bool mono) {
    BagOfWords b;
    b.f1 = std::move(f1);
    b.f2 = std::move(f2);
    b.blurry = blurry;
    b.monochrome = mono;
    return b;
}

Outcome prompt_fidelity() {
    Outcome o;
    const std::string golden = FACECAP_GOLDEN_DIR;
    const std::vector<std::pair<BagOfWords, std::string>> cases = {
        {make_bag({"40 year old", "white", "male"}, {"black hair"}, false, false), "prompt_basic.txt"},
        {make_bag({"adult", "female", "black"}, {"smiling"}, false, true), "prompt_monochrome.txt"},
        {make_bag({"between 25 and 35 years old", "woman", "asian"},
                  {"wearing hat", "expressing happiness and surprise", "long hair"}, true, true),
         "prompt_blurry_monochrome.txt"},
    };
    for (const auto& [bag, file] : cases) {
        const auto expected = slurp(golden + "/" + file);
        o.require(!expected.empty(), "missing golden " + file);
        o.require(build_prompt(bag).text == expected, "prompt differs from " + file);
    }
    const auto blurry = build_prompt(make_bag({"40 year old", "white", "male"}, {"black hair"}, true, false)).text;
    o.require(blurry.ends_with(" The image is blurry."), "blurry suffix missing");
    if (o.pass) {
        o.detail = "3 golden prompts byte-identical";
    }
    return o;
}

Outcome filtering() {
    Outcome o;
    const auto records = read_records(fs::path(FACECAP_FIXTURE_DIR) / "filter20.jsonl");
    o.require(records.size() == 20, "fixture should hold 20 records");

    const std::map<std::string, std::uint64_t> laion_expected = {
        {"input", 20},         {"ok", 8},           {"no_face", 1},     {"multiple_faces", 3},
        {"low_resolution", 3}, {"not_real_human", 3}, {"text_overlay", 2},
    };
    const auto laion = run_filter(records, builtin_profile(SourceDataset::laion_face)).counts;
    for (const auto& [key, value] : laion_expected) {
        const auto it = laion.find(key);
        const auto got = it == laion.end() ? 0 : it->second;
        o.require(got == value, "laion_face " + key + " = " + std::to_string(got) + ", expected " +
                                    std::to_string(value));
    }
    for (auto name : {SourceDataset::easyportrait, SourceDataset::ffhq}) {
        const auto counts = run_filter(records, builtin_profile(name)).counts;
        const auto low = counts.contains("low_resolution") ? counts.at("low_resolution") : 0;
        o.require(low == 0, std::string(to_id(name)) + " rejected on resolution");
        o.require(counts.at("ok") == 11, std::string(to_id(name)) + " ok count");
    }
    if (o.pass) {
        o.detail = "laion ok=8 multi=3 lowres=3 nonhuman=3 text=2 noface=1; curated profiles lowres=0";
    }
    return o;
}

Outcome age_strategies() {
    Outcome o;
    const auto cfg = DeriveConfig::defaults();
    Rng rng(stage_seed(2024, "age"));
    const int n = 30000;
    std::array<int, 3> counts{};
    std::int64_t lo = 1000, hi = -1;
    for (int i = 0; i < n; ++i) {
        const auto p = sample_age_phrase(30.0, rng, cfg);
        ++counts[static_cast<std::size_t>(p.strategy)];
        switch (p.strategy) {
            case AgeStrategy::noisy: {
                const auto v = std::stoll(p.text);
                o.require(p.text == std::to_string(v) + " year old", "noisy text '" + p.text + "'");
                lo = std::min<std::int64_t>(lo, v);
                hi = std::max<std::int64_t>(hi, v);
                break;
            }
            case AgeStrategy::bracket:
                o.require(p.text == "between 25 and 35 years old", "bracket text '" + p.text + "'");
                break;
            case AgeStrategy::category:
                o.require(p.text == "adult", "category text '" + p.text + "'");
                break;
        }
    }
    o.require(lo >= 28 && hi <= 32, "noisy range [" + std::to_string(lo) + "," + std::to_string(hi) + "]");
    std::string freqs;
    for (std::size_t s = 0; s < 3; ++s) {
        const double f = static_cast<double>(counts[s]) / n;
        o.require(std::abs(f - 1.0 / 3.0) <= kFrequencyTolerance, "strategy frequency " + fmt(f));
        freqs += std::string(s ? " " : "") + std::string(to_id(static_cast<AgeStrategy>(s))) + "=" + fmt(f);
    }
    if (o.pass) {
        o.detail = freqs + "; noisy in [" + std::to_string(lo) + "," + std::to_string(hi) + "]";
    }
    return o;
}

Outcome debias() {
    Outcome o;
    auto r = testing::minimal_record();
    r.attributes.set(Attribute::attractive);
    r.attributes.set(Attribute::heavy_makeup);

    Rng rng(stage_seed(2024, "debias"));
    const int n = 10000;
    int dropped = 0;
    for (int i = 0; i < n; ++i) {
        dropped += apply_debias(r, default_debias_rules(), rng).dropped.empty() ? 0 : 1;
    }
    const double rate = static_cast<double>(dropped) / n;
    o.require(std::abs(rate - 0.8) <= kDebiasTolerance, "drop rate " + fmt(rate));

    const std::vector<DebiasRule> never{{Attribute::attractive, {Attribute::heavy_makeup}, 0.0}};
    const std::vector<DebiasRule> always{{Attribute::attractive, {Attribute::heavy_makeup}, 1.0}};
    for (int i = 0; i < n; ++i) {
        const auto kept = apply_debias(r, never, rng);
        const auto gone = apply_debias(r, always, rng);
        o.require(kept.record == r && kept.dropped.empty(), "p=0 changed the record");
        o.require(!gone.record.attributes.test(Attribute::attractive) &&
                      gone.record.attributes.test(Attribute::heavy_makeup),
                  "p=1 kept attractive");
    }

    // Population with P(makeup | attractive) = 0.8 and P(makeup | not) = 0.2.
    Rng pop(stage_seed(2024, "population"));
    std::vector<AttributeRecord> population;
    for (int i = 0; i < n; ++i) {
        auto p = testing::minimal_record("pop-" + std::to_string(i));
        const bool attractive = pop.uniform01() < 0.5;
        p.attributes.set(Attribute::attractive, attractive);
        p.attributes.set(Attribute::heavy_makeup, pop.uniform01() < (attractive ? 0.8 : 0.2));
        population.push_back(std::move(p));
    }
    const double cond = cooccurrence_stats(population).conditional(Attribute::heavy_makeup, Attribute::attractive);
    o.require(std::abs(cond - 0.8) <= kDebiasTolerance, "P(makeup|attractive) = " + fmt(cond));
    if (o.pass) {
        o.detail = "drop rate " + fmt(rate) + "; p=0/p=1 exact; recovered P(makeup|attractive) " + fmt(cond);
    }
    return o;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

// F2 as a multiset, computed without assemble_bow.
std::vector<std::string> expected_f2(const AttributeRecord& debiased, const DerivedAttributes& d,
                                     const std::vector<std::string>& f1) {
    const auto& t = PhraseTable::builtin();
    std::vector<std::string> out;
    auto add = [&](const std::string& p) {
        if (std::find(out.begin(), out.end(), p) == out.end() && std::find(f1.begin(), f1.end(), p) == f1.end()) {
            out.push_back(p);
        }
    };
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
        const auto a = static_cast<Attribute>(i);
        if (debiased.attributes.test(a) && a != Attribute::blurry && a != Attribute::male) {
            add(std::string(human_name(a)));
        }
    }
    add(t.phrase(d.hair_length));
    add(t.phrase(d.eye_state));
    add(t.phrase(d.mouth_state));
    add(t.emotion_phrase(d.emotions_selected));
    if (debiased.clip.teeth_visible) {
        add("visible teeth");
    }
    if (debiased.clip.tongue_visible) {
        add("visible tongue");
    }
    return sorted(out);
}

Outcome permutation_uniformity() {
    Outcome o;
    const auto r = testing::minimal_record();
    const auto cfg = DeriveConfig::defaults();
    const auto d = derive_attributes(r, cfg);
    const AgePhrase age{AgeStrategy::category, "adult", 30};
    std::map<std::vector<std::string>, int> orders;
    const int n = 24000;
    for (int i = 0; i < n; ++i) {
        const auto bag = assemble_bow(r, d, age, splitmix64(static_cast<std::uint64_t>(i)));
        o.require(bag.f2.size() == 4, "fixture F2 should hold 4 phrases");
        ++orders[bag.f2];
    }
    o.require(orders.size() == 24, "observed " + std::to_string(orders.size()) + " of 24 orders");
    double worst = 0;
    for (const auto& [order, count] : orders) {
        worst = std::max(worst, std::abs(static_cast<double>(count) / n - 1.0 / 24.0));
    }
    o.require(worst <= kFrequencyTolerance, "max deviation " + fmt(worst));

    Rng rng(stage_seed(2024, "bags"));
    for (int i = 0; i < 1000; ++i) {
        const auto rec = testing::random_record(rng, "perm-" + std::to_string(i));
        const auto debiased = apply_debias(rec, default_debias_rules(), rng).record;
        const auto dd = derive_attributes(debiased, cfg);
        const auto a = sample_age_phrase(rec.demographics.age_pred, rng, cfg);
        const auto bag = assemble_bow(debiased, dd, a, rng.next_u64());
        o.require(sorted(bag.f2) == expected_f2(debiased, dd, bag.f1), "F2 multiset changed for bag " + std::to_string(i));
        o.require(sorted(bag.f1) == sorted({a.text, bag.gender_term, std::string(human_name(rec.demographics.ethnicity))}),
                  "F1 multiset changed for bag " + std::to_string(i));
    }
    if (o.pass) {
        o.detail = "24 orders, max |freq - 1/24| = " + fmt(worst) + "; 1000 bags preserve multisets";
    }
    return o;
}

Outcome mock_round_trip() {
    Outcome o;
    Rng rng(stage_seed(2024, "mock"));
    for (std::uint64_t i = 0; i < 1000 && o.pass; ++i) {
        const auto bag = testing::random_bag(rng, i);
        const auto text = mock_fuse(bag, rng);
        for (const auto* list : {&bag.f1, &bag.f2}) {
            for (const auto& p : *list) {
                o.require(text.find(p) != std::string::npos, "phrase '" + p + "' missing from mock output");
            }
        }
        const auto verdict = validate_caption(text, bag);
        o.require(verdict.accepted(), "validator rejected mock output (" + std::string(to_id(verdict.reason)) + ")");
    }
    if (o.pass) {
        o.detail = "1000 bags: all phrases verbatim, all accepted";
    }
    return o;
}

int cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != 0) {
        std::cerr << err.str();
    }
    return code;
}

Outcome end_to_end_determinism() {
    Outcome o;
    const auto dir = scratch("e2e");
    auto records = testing::accepted_corpus(80, 11);
    for (auto& r : read_records(fs::path(FACECAP_FIXTURE_DIR) / "filter20.jsonl")) {
        records.push_back(std::move(r));
    }
    Rng mix(3);
    mix.shuffle(std::span<AttributeRecord>(records));
    write_records(records, dir / "records.jsonl");
    std::ofstream(dir / "config.yaml") << "output: {shard_size: 16}\nconcurrency: {workers: 4, llm_in_flight: 4}\n";

    auto caption = [&](const std::string& out, std::vector<std::string> extra) {
        std::vector<std::string> args{"caption", "--config", (dir / "config.yaml").string(), "--mock-llm", "--seed", "7",
                                      "--input", (dir / "records.jsonl").string(), "--out", (dir / out).string()};
        args.insert(args.end(), extra.begin(), extra.end());
        return cli(args);
    };
    o.require(caption("a", {}) == 0, "first run failed");
    o.require(caption("b", {"--concurrency", "1"}) == 0, "second run failed");
    o.require(caption("c", {"--limit", "50"}) == 0, "interrupted run failed");
    const auto partial = load_manifest(dir / "c");
    o.require(partial.index.size() + partial.rejected.size() == 50, "interrupted run did not stop at 50");
    o.require(caption("c", {"--resume"}) == 0, "resumed run failed");

    const auto a = load_manifest(dir / "a");
    o.require(a.index.size() + a.rejected.size() == 100, "manifest does not cover all 100 records");
    o.require(!a.rejected.empty() && a.index.size() >= 80, "fixture should mix accepted and rejected records");
    for (const auto* other : {"b", "c"}) {
        const auto m = load_manifest(dir / other);
        o.require(m.shards == a.shards, std::string("shard layout differs in ") + other);
        for (const auto& shard : a.shards) {
            o.require(slurp(dir / "a" / shard.file) == slurp(dir / other / shard.file),
                      shard.file + " differs in " + other);
        }
        o.require(slurp(dir / "a/index.json") == slurp(dir / other / "index.json"),
                  std::string("index differs in ") + other);
    }
    for (const auto* name : {"a", "b", "c"}) {
        for (const auto* mode : {"all", "one"}) {
            o.require(cli({"export", "--manifest", (dir / name).string(), "--mode", mode, "--out",
                           (dir / (std::string(name) + "_" + mode + ".jsonl")).string()}) == 0,
                      "export failed");
        }
    }
    for (const auto* mode : {"all", "one"}) {
        const auto ref = slurp(dir / (std::string("a_") + mode + ".jsonl"));
        o.require(!ref.empty(), "empty export");
        o.require(ref == slurp(dir / (std::string("b_") + mode + ".jsonl")), std::string("export differs (") + mode + ")");
        o.require(ref == slurp(dir / (std::string("c_") + mode + ".jsonl")),
                  std::string("resumed export differs (") + mode + ")");
    }
    if (o.pass) {
        o.detail = std::to_string(a.index.size()) + " captioned, " + std::to_string(a.rejected.size()) +
                   " rejected, " + std::to_string(a.shards.size()) +
                   " shards; repeat, single-worker and 50+resume runs byte-identical";
        fs::remove_all(dir);
    }
    return o;
}

Outcome caption_sampling() {
    Outcome o;
    const auto entry = testing::mock_entries(1, 21).front();
    o.require(entry.caption_set.captions.size() == 3, "entry should carry 3 captions");
    Rng rng(stage_seed(2024, "sampling"));
    const auto& captions = entry.caption_set.captions;
    std::vector<int> counts(captions.size(), 0);
    const int n = 30000;
    for (int i = 0; i < n; ++i) {
        const auto& drawn = sample_caption(entry, rng);
        ++counts[static_cast<std::size_t>(&drawn - captions.data())];
    }
    std::string freqs;
    for (int c : counts) {
        const double f = static_cast<double>(c) / n;
        o.require(std::abs(f - 1.0 / 3.0) <= kFrequencyTolerance, "caption frequency " + fmt(f));
        freqs += (freqs.empty() ? "" : " ") + fmt(f);
    }
    if (o.pass) {
        o.detail = "frequencies " + freqs;
    }
    return o;
}

Outcome fusion_transport() {
    Outcome o;
    const std::string valid =
        "A forty year old white man with short black hair looks straight ahead, clearly expressing happiness.";
    const auto prompt = build_prompt(make_bag({"40 year old", "white", "man"}, {"black hair", "expressing happiness"},
                                              false, false));
    {
        testing::FakeLlmServer server(
            {{200, "I cannot describe a person's appearance, age, gender or ethnicity. Please ask something else.", {}},
             {200, prompt.text, {}}},
            {200, valid, {}});
        HttpLlmConfig cfg;
        cfg.endpoint = server.endpoint();
        cfg.model = "fake-llm";
        cfg.timeout = std::chrono::seconds(5);
        HttpLlmClient client(cfg);
        const auto set = fuse_captions(prompt, "img-transport", {}, client, 1);
        o.require(set.captions.size() == 3, "caption set holds " + std::to_string(set.captions.size()));
        o.require(set.rejected.size() == 2, "expected 2 rejects, got " + std::to_string(set.rejected.size()));
        if (set.rejected.size() == 2) {
            o.require(set.rejected[0].second == CaptionReject::refusal, "first reject not a refusal");
            o.require(set.rejected[1].second == CaptionReject::instruction_echo, "second reject not an echo");
        }
    }

    std::vector<std::chrono::milliseconds> slept;
    HttpLlmConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(testing::closed_port()) + "/v1/chat/completions";
    cfg.model = "fake-llm";
    cfg.timeout = std::chrono::seconds(2);
    HttpLlmClient client(cfg, [&](std::chrono::milliseconds d) { slept.push_back(d); });
    bool unreachable = false;
    try {
        client.complete(prompt, {}, 0);
    } catch (const ServiceUnreachable&) {
        unreachable = true;
    }
    o.require(unreachable, "no ServiceUnreachable from a closed port");
    o.require(client.attempts() == 4 && slept.size() == 3,
              "attempts=" + std::to_string(client.attempts()) + " retries=" + std::to_string(slept.size()));
    o.require(slept == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1000),
                                                              std::chrono::milliseconds(2000),
                                                              std::chrono::milliseconds(4000)},
              "backoff schedule is not 1s, 2s, 4s");
    if (o.pass) {
        o.detail = "rejects [refusal, instruction_echo], 3 captions; unreachable after 3 retries (1s/2s/4s backoff)";
    }
    return o;
}

struct Criterion {
    std::string name;
    std::function<Outcome()> run;
    // Zero means no runtime bound.
    std::chrono::milliseconds limit;
};

}  // namespace

int main() {
    using std::chrono::milliseconds;
    const std::vector<Criterion> criteria = {
        {"prompt_fidelity", prompt_fidelity, milliseconds(1000)},
        {"filtering", filtering, milliseconds(1000)},
        {"age_strategies", age_strategies, milliseconds(5000)},
        {"debias", debias, milliseconds(10000)},
        {"permutation_uniformity", permutation_uniformity, milliseconds(10000)},
        {"mock_fuser_round_trip", mock_round_trip, milliseconds(10000)},
        {"end_to_end_determinism", end_to_end_determinism, milliseconds(30000)},
        {"caption_sampling", caption_sampling, milliseconds(0)},
        {"fusion_transport", fusion_transport, milliseconds(0)},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const auto elapsed = std::chrono::duration_cast<milliseconds>(std::chrono::steady_clock::now() - start);
        if (o.pass && c.limit.count() > 0 && elapsed > c.limit) {
            o.pass = false;
            o.detail = "took " + std::to_string(elapsed.count()) + " ms, limit " + std::to_string(c.limit.count()) + " ms";
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(24) << c.name << std::right
                  << std::setw(7) << elapsed.count() << " ms  " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failures == 0 ? 0 : 1;
}
