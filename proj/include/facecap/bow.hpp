#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "facecap/derive.hpp"
#include "facecap/schema.hpp"

namespace facecap {

class UnknownAttribute : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Word table turning attribute flags and derived values into the phrases fed
// to the language model. Loaded from a versioned JSON data file; a copy of
// data/phrases.json is compiled in as the default.
class PhraseTable {
public:
    static const PhraseTable& builtin();
    static PhraseTable from_json(const Json& j);
    static PhraseTable load(const std::filesystem::path& path);

    const std::string& version() const { return version_; }

    const std::string& phrase(Attribute a) const { return attributes_[static_cast<std::size_t>(a)]; }
    const std::string& phrase(HairLength h) const { return hair_[static_cast<std::size_t>(h)]; }
    const std::string& phrase(EyeState e) const { return eyes_[static_cast<std::size_t>(e)]; }
    const std::string& phrase(MouthState m) const { return mouth_[static_cast<std::size_t>(m)]; }
    const std::string& phrase(Ethnicity e) const { return ethnicity_[static_cast<std::size_t>(e)]; }
    const std::string& teeth_visible() const { return teeth_; }
    const std::string& tongue_visible() const { return tongue_; }
    // "expressing X" or "expressing X and Y".
    std::string emotion_phrase(std::span<const Emotion> emotions) const;
    std::span<const std::string> gender_terms(Gender g) const { return gender_[static_cast<std::size_t>(g)]; }

    // Lookup by key: an attribute id ("wearing_hat"), a derived value
    // ("hair_length.long", "eye_state.open", "mouth_state.closed",
    // "ethnicity.middle_eastern"), "teeth_visible" or "tongue_visible".
    // Throws UnknownAttribute.
    std::string lookup(std::string_view key) const;

private:
    std::string version_;
    std::array<std::string, kAttributeCount> attributes_;
    std::array<std::string, 4> hair_;
    std::array<std::string, 3> eyes_;
    std::array<std::string, 3> mouth_;
    std::array<std::string, kEthnicityCount> ethnicity_;
    std::string teeth_;
    std::string tongue_;
    std::string emotion_prefix_;
    std::string emotion_joiner_;
    std::array<std::vector<std::string>, 2> gender_;
};

std::string attribute_to_phrase(std::string_view key, const PhraseTable& table = PhraseTable::builtin());

struct BagOfWords {
    std::vector<std::string> f1;
    std::vector<std::string> f2;
    bool blurry = false;
    bool monochrome = false;
    std::uint64_t permutation_seed = 0;
    std::string gender_term;

    bool operator==(const BagOfWords&) const = default;
};

Json bag_to_json(const BagOfWords& b);
BagOfWords bag_from_json(const Json& j);

// F1 holds age, gender and ethnicity; F2 every other retained feature. The
// attribute flags "blurry" (routed to the suffix flag) and "male" (covered by
// the gender term) never enter F2. Both lists are shuffled independently
// with a generator seeded by `seed`.
BagOfWords assemble_bow(const AttributeRecord& debiased, const DerivedAttributes& derived, const AgePhrase& age,
                        std::uint64_t seed, const PhraseTable& table = PhraseTable::builtin());

}  // namespace facecap
