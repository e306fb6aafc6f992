#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "facecap/rng.hpp"
#include "facecap/schema.hpp"

namespace facecap {

enum class HairLength : std::uint8_t { bald, short_hair, medium, long_hair };
enum class EyeState : std::uint8_t { open, narrow, closed };
enum class MouthState : std::uint8_t { closed, slightly_open, open };

std::string_view to_id(HairLength h);
std::string_view to_id(EyeState e);
std::string_view to_id(MouthState m);

class DeriveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Ratio cut points, all relative to face-skin pixel count. A ratio maps to
// the first category whose upper bound it falls below.
struct ParsingThresholds {
    double hair_bald = 0.02;
    double hair_short = 0.35;
    double hair_medium = 0.9;
    double eyes_closed = 0.002;
    double eyes_narrow = 0.01;
    double mouth_closed = 0.001;
    double mouth_slightly_open = 0.02;

    bool operator==(const ParsingThresholds&) const = default;
};

struct AgeCategory {
    std::string label;
    double lower_years = 0;  // inclusive
};

struct DeriveConfig {
    double dominance_margin = 0.15;
    ParsingThresholds parsing;
    // Sorted by lower bound; the first entry must start at 0.
    std::vector<AgeCategory> age_categories;
    double bracket_half_width_years = 5;
    double noise_fraction = 1.0 / 15.0;

    static DeriveConfig defaults();
};

struct ParsingAttributes {
    HairLength hair_length = HairLength::medium;
    EyeState eye_state = EyeState::open;
    MouthState mouth_state = MouthState::closed;
    bool operator==(const ParsingAttributes&) const = default;
};

struct DerivedAttributes {
    std::vector<Emotion> emotions_selected;
    HairLength hair_length = HairLength::medium;
    EyeState eye_state = EyeState::open;
    MouthState mouth_state = MouthState::closed;
    bool operator==(const DerivedAttributes&) const = default;
};

enum class AgeStrategy : std::uint8_t { noisy, bracket, category };
std::string_view to_id(AgeStrategy s);

struct AgePhrase {
    AgeStrategy strategy = AgeStrategy::category;
    std::string text;
    double numeric_basis = 0;
    bool operator==(const AgePhrase&) const = default;
};

// Top emotion, or the top two when their score gap is below `margin`.
// Ties are broken by enumeration order.
std::vector<Emotion> dominant_emotions(const EmotionScores& scores, double margin = 0.15);

ParsingAttributes derive_parsing_attributes(const ParsingStats& stats, const ParsingThresholds& t = {});

DerivedAttributes derive_attributes(const AttributeRecord& r, const DeriveConfig& cfg);

std::string_view age_category(double age, const DeriveConfig& cfg);

// Helpers behind each strategy; exposed for tests.
std::int64_t noisy_age_radius(double age, const DeriveConfig& cfg);
AgePhrase noisy_age_phrase(double age, Rng& rng, const DeriveConfig& cfg);
AgePhrase bracket_age_phrase(double age, const DeriveConfig& cfg);
AgePhrase category_age_phrase(double age, const DeriveConfig& cfg);

// Picks one of the three strategies with equal probability.
AgePhrase sample_age_phrase(double age, Rng& rng, const DeriveConfig& cfg);

}  // namespace facecap
