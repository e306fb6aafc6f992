#include "facecap/derive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace facecap {

namespace {

constexpr std::array<std::string_view, 4> kHairIds = {"bald", "short", "medium", "long"};
constexpr std::array<std::string_view, 3> kEyeIds = {"open", "narrow", "closed"};
constexpr std::array<std::string_view, 3> kMouthIds = {"closed", "slightly_open", "open"};
constexpr std::array<std::string_view, 3> kStrategyIds = {"noisy", "bracket", "category"};

std::int64_t round_age(double age) { return static_cast<std::int64_t>(std::llround(age)); }

}  // namespace

std::string_view to_id(HairLength h) { return kHairIds[static_cast<std::size_t>(h)]; }
std::string_view to_id(EyeState e) { return kEyeIds[static_cast<std::size_t>(e)]; }
std::string_view to_id(MouthState m) { return kMouthIds[static_cast<std::size_t>(m)]; }
std::string_view to_id(AgeStrategy s) { return kStrategyIds[static_cast<std::size_t>(s)]; }

DeriveConfig DeriveConfig::defaults() {
    DeriveConfig cfg;
    cfg.age_categories = {
        {"baby", 0},         {"toddler", 1},   {"preschooler", 3},         {"child", 5},         {"teenager", 13},
        {"young adult", 20}, {"adult", 30},    {"middle-aged adult", 45}, {"senior adult", 60}, {"elderly", 75},
    };
    return cfg;
}

std::vector<Emotion> dominant_emotions(const EmotionScores& scores, double margin) {
    std::array<std::size_t, kEmotionCount> order;
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto& v = scores.values();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });

    const auto top1 = static_cast<Emotion>(order[0]);
    const auto top2 = static_cast<Emotion>(order[1]);
    if (v[order[0]] - v[order[1]] >= margin) {
        return {top1};
    }
    return {top1, top2};
}

ParsingAttributes derive_parsing_attributes(const ParsingStats& stats, const ParsingThresholds& t) {
    const auto skin = stats[ParsingRegion::face_skin];
    if (skin <= 0) {
        throw DeriveError("face_skin pixel count is zero");
    }
    const double skin_px = static_cast<double>(skin);
    const double hair = static_cast<double>(stats[ParsingRegion::hair]) / skin_px;
    const double eyes =
        static_cast<double>(stats[ParsingRegion::left_eye] + stats[ParsingRegion::right_eye]) / skin_px;
    const double mouth = static_cast<double>(stats[ParsingRegion::inner_mouth]) / skin_px;

    ParsingAttributes out;
    if (hair < t.hair_bald) {
        out.hair_length = HairLength::bald;
    } else if (hair < t.hair_short) {
        out.hair_length = HairLength::short_hair;
    } else if (hair < t.hair_medium) {
        out.hair_length = HairLength::medium;
    } else {
        out.hair_length = HairLength::long_hair;
    }

    if (eyes < t.eyes_closed) {
        out.eye_state = EyeState::closed;
    } else if (eyes < t.eyes_narrow) {
        out.eye_state = EyeState::narrow;
    } else {
        out.eye_state = EyeState::open;
    }

    if (mouth < t.mouth_closed) {
        out.mouth_state = MouthState::closed;
    } else if (mouth < t.mouth_slightly_open) {
        out.mouth_state = MouthState::slightly_open;
    } else {
        out.mouth_state = MouthState::open;
    }
    return out;
}

DerivedAttributes derive_attributes(const AttributeRecord& r, const DeriveConfig& cfg) {
    const auto parsing = derive_parsing_attributes(r.parsing, cfg.parsing);
    DerivedAttributes d;
    d.emotions_selected = dominant_emotions(r.emotions, cfg.dominance_margin);
    d.hair_length = parsing.hair_length;
    d.eye_state = parsing.eye_state;
    d.mouth_state = parsing.mouth_state;
    return d;
}

std::string_view age_category(double age, const DeriveConfig& cfg) {
    if (!(age >= 0) || cfg.age_categories.empty()) {
        throw DeriveError("age must be a non-negative number");
    }
    std::string_view label = cfg.age_categories.front().label;
    for (const auto& cat : cfg.age_categories) {
        if (age >= cat.lower_years) {
            label = cat.label;
        } else {
            break;
        }
    }
    return label;
}

std::int64_t noisy_age_radius(double age, const DeriveConfig& cfg) {
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(age * cfg.noise_fraction)));
}

AgePhrase noisy_age_phrase(double age, Rng& rng, const DeriveConfig& cfg) {
    const auto centre = round_age(age);
    const auto radius = noisy_age_radius(age, cfg);
    const auto value = rng.uniform_int(std::max<std::int64_t>(0, centre - radius), centre + radius);
    return {AgeStrategy::noisy, std::to_string(value) + " year old", age};
}

AgePhrase bracket_age_phrase(double age, const DeriveConfig& cfg) {
    const auto centre = round_age(age);
    const auto half = static_cast<std::int64_t>(std::llround(cfg.bracket_half_width_years));
    const auto lo = std::max<std::int64_t>(0, centre - half);
    return {AgeStrategy::bracket,
            "between " + std::to_string(lo) + " and " + std::to_string(centre + half) + " years old", age};
}

AgePhrase category_age_phrase(double age, const DeriveConfig& cfg) {
    return {AgeStrategy::category, std::string(age_category(age, cfg)), age};
}

AgePhrase sample_age_phrase(double age, Rng& rng, const DeriveConfig& cfg) {
    switch (static_cast<AgeStrategy>(rng.uniform_int(0, 2))) {
        case AgeStrategy::noisy:
            return noisy_age_phrase(age, rng, cfg);
        case AgeStrategy::bracket:
            return bracket_age_phrase(age, cfg);
        case AgeStrategy::category:
            break;
    }
    return category_age_phrase(age, cfg);
}

}  // namespace facecap
