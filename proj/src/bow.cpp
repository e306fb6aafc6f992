#include "facecap/bow.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "facecap/phrases_data.hpp"
#include "facecap/rng.hpp"

namespace facecap {

namespace {

std::string required_string(const Json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw SchemaError(path + "." + key, "expected string");
    }
    return j.at(key).get<std::string>();
}

template <std::size_t N>
void fill_table(const Json& j, const std::string& key, std::span<const std::string_view> ids,
                std::array<std::string, N>& out) {
    if (!j.contains(key) || !j.at(key).is_object()) {
        throw SchemaError(key, "expected object");
    }
    const auto& obj = j.at(key);
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = required_string(obj, std::string(ids[i]), key);
    }
    if (obj.size() != N) {
        throw SchemaError(key, "unexpected entries in phrase table");
    }
}

constexpr std::array<std::string_view, 4> kHairKeys = {"bald", "short", "medium", "long"};
constexpr std::array<std::string_view, 3> kEyeKeys = {"open", "narrow", "closed"};
constexpr std::array<std::string_view, 3> kMouthKeys = {"closed", "slightly_open", "open"};

}  // namespace

const PhraseTable& PhraseTable::builtin() {
    static const PhraseTable table = from_json(Json::parse(kBuiltinPhrasesJson));
    return table;
}

PhraseTable PhraseTable::from_json(const Json& j) {
    PhraseTable t;
    t.version_ = required_string(j, "version", "$");
    fill_table(j, "attributes", attribute_ids(), t.attributes_);
    fill_table(j, "hair_length", kHairKeys, t.hair_);
    fill_table(j, "eye_state", kEyeKeys, t.eyes_);
    fill_table(j, "mouth_state", kMouthKeys, t.mouth_);
    fill_table(j, "ethnicity", ethnicity_ids(), t.ethnicity_);
    t.teeth_ = required_string(j, "teeth_visible", "$");
    t.tongue_ = required_string(j, "tongue_visible", "$");
    t.emotion_prefix_ = required_string(j, "emotion_prefix", "$");
    t.emotion_joiner_ = required_string(j, "emotion_joiner", "$");

    if (!j.contains("gender_terms") || !j.at("gender_terms").is_object()) {
        throw SchemaError("gender_terms", "expected object");
    }
    for (auto g : {Gender::male, Gender::female}) {
        const std::string key(to_id(g));
        const auto& terms = j.at("gender_terms").value(key, Json::array());
        if (!terms.is_array() || terms.empty()) {
            throw SchemaError("gender_terms." + key, "expected non-empty list");
        }
        for (const auto& term : terms) {
            t.gender_[static_cast<std::size_t>(g)].push_back(term.get<std::string>());
        }
    }
    return t;
}

PhraseTable PhraseTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open phrase table " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json(Json::parse(buffer.str()));
}

std::string PhraseTable::emotion_phrase(std::span<const Emotion> emotions) const {
    std::string out = emotion_prefix_;
    for (std::size_t i = 0; i < emotions.size(); ++i) {
        out += i == 0 ? " " : emotion_joiner_;
        out += to_id(emotions[i]);
    }
    return out;
}

std::string PhraseTable::lookup(std::string_view key) const {
    if (auto a = attribute_from_id(key)) {
        return phrase(*a);
    }
    if (key == "teeth_visible") {
        return teeth_;
    }
    if (key == "tongue_visible") {
        return tongue_;
    }
    auto dot = key.find('.');
    if (dot != std::string_view::npos) {
        const auto group = key.substr(0, dot);
        const auto value = key.substr(dot + 1);
        auto find_in = [&](auto keys, const auto& table) -> const std::string* {
            auto it = std::find(keys.begin(), keys.end(), value);
            return it == keys.end() ? nullptr : &table[static_cast<std::size_t>(it - keys.begin())];
        };
        const std::string* hit = nullptr;
        if (group == "hair_length") {
            hit = find_in(kHairKeys, hair_);
        } else if (group == "eye_state") {
            hit = find_in(kEyeKeys, eyes_);
        } else if (group == "mouth_state") {
            hit = find_in(kMouthKeys, mouth_);
        } else if (group == "ethnicity") {
            hit = find_in(ethnicity_ids(), ethnicity_);
        } else if (group == "emotion") {
            if (auto e = emotion_from_id(value)) {
                return emotion_phrase(std::span<const Emotion>(&*e, 1));
            }
        }
        if (hit) {
            return *hit;
        }
    }
    throw UnknownAttribute("unknown attribute '" + std::string(key) + "'");
}

std::string attribute_to_phrase(std::string_view key, const PhraseTable& table) { return table.lookup(key); }

Json bag_to_json(const BagOfWords& b) {
    return Json{{"f1", b.f1},
                {"f2", b.f2},
                {"blurry", b.blurry},
                {"monochrome", b.monochrome},
                {"permutation_seed", b.permutation_seed},
                {"gender_term", b.gender_term}};
}

BagOfWords bag_from_json(const Json& j) {
    BagOfWords b;
    b.f1 = j.at("f1").get<std::vector<std::string>>();
    b.f2 = j.at("f2").get<std::vector<std::string>>();
    b.blurry = j.at("blurry").get<bool>();
    b.monochrome = j.at("monochrome").get<bool>();
    b.permutation_seed = j.at("permutation_seed").get<std::uint64_t>();
    b.gender_term = j.at("gender_term").get<std::string>();
    return b;
}

BagOfWords assemble_bow(const AttributeRecord& debiased, const DerivedAttributes& derived, const AgePhrase& age,
                        std::uint64_t seed, const PhraseTable& table) {
    Rng rng(seed);
    BagOfWords bag;
    bag.permutation_seed = seed;
    bag.blurry = debiased.is_blurry || debiased.attributes.test(Attribute::blurry);
    bag.monochrome = debiased.is_monochrome;

    auto terms = table.gender_terms(debiased.demographics.gender);
    bag.gender_term = terms[rng.index(terms.size())];
    bag.f1 = {age.text, bag.gender_term, table.phrase(debiased.demographics.ethnicity)};

    auto add_f2 = [&](const std::string& phrase) {
        const bool in_f1 = std::find(bag.f1.begin(), bag.f1.end(), phrase) != bag.f1.end();
        const bool in_f2 = std::find(bag.f2.begin(), bag.f2.end(), phrase) != bag.f2.end();
        if (!in_f1 && !in_f2) {
            bag.f2.push_back(phrase);
        }
    };
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
        const auto a = static_cast<Attribute>(i);
        if (a == Attribute::blurry || a == Attribute::male || !debiased.attributes.test(a)) {
            continue;
        }
        add_f2(table.phrase(a));
    }
    add_f2(table.phrase(derived.hair_length));
    add_f2(table.phrase(derived.eye_state));
    add_f2(table.phrase(derived.mouth_state));
    add_f2(table.emotion_phrase(derived.emotions_selected));
    if (debiased.clip.teeth_visible) {
        add_f2(table.teeth_visible());
    }
    if (debiased.clip.tongue_visible) {
        add_f2(table.tongue_visible());
    }

    rng.shuffle(std::span<std::string>(bag.f1));
    rng.shuffle(std::span<std::string>(bag.f2));
    return bag;
}

}  // namespace facecap
