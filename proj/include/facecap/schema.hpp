#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace facecap {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kSchemaVersion = "facecap.record/1";

// Facial attribute vocabulary, in canonical order. The order is part of the
// record format version; append-only changes need a version bump.
enum class Attribute : std::uint8_t {
    five_o_clock_shadow,
    arched_eyebrows,
    attractive,
    bags_under_eyes,
    bald,
    bangs,
    big_lips,
    big_nose,
    black_hair,
    blond_hair,
    blurry,
    brown_hair,
    bushy_eyebrows,
    chubby,
    double_chin,
    eyeglasses,
    goatee,
    gray_hair,
    heavy_makeup,
    high_cheekbones,
    male,
    mouth_slightly_open,
    mustache,
    narrow_eyes,
    no_beard,
    oval_face,
    pale_skin,
    pointy_nose,
    receding_hairline,
    rosy_cheeks,
    sideburns,
    smiling,
    straight_hair,
    wavy_hair,
    wearing_earrings,
    wearing_hat,
    wearing_lipstick,
    wearing_necklace,
    wearing_necktie,
    young,
};
inline constexpr std::size_t kAttributeCount = 40;

enum class Emotion : std::uint8_t { anger, disgust, fear, happiness, sadness, surprise, neutral };
inline constexpr std::size_t kEmotionCount = 7;

enum class Gender : std::uint8_t { male, female };

enum class Ethnicity : std::uint8_t { black, white, asian, middle_eastern, indian, hispanic };
inline constexpr std::size_t kEthnicityCount = 6;

enum class SourceDataset : std::uint8_t { easyportrait, ffhq, laion_face, other };

enum class ParsingRegion : std::uint8_t { hair, face_skin, left_eye, right_eye, inner_mouth, upper_lip, lower_lip };
inline constexpr std::size_t kParsingRegionCount = 7;

// snake_case identifiers used in serialized records.
std::span<const std::string_view> attribute_ids();
// Human-readable attribute strings; these are what reach captions.
std::span<const std::string_view> attribute_names();
std::span<const std::string_view> emotion_names();
std::span<const std::string_view> ethnicity_ids();
std::span<const std::string_view> ethnicity_names();
std::span<const std::string_view> parsing_region_ids();

std::string_view to_id(Attribute a);
std::string_view human_name(Attribute a);
std::string_view to_id(Emotion e);
std::string_view to_id(Gender g);
std::string_view to_id(Ethnicity e);
std::string_view human_name(Ethnicity e);
std::string_view to_id(SourceDataset s);
std::string_view to_id(ParsingRegion r);

std::optional<Attribute> attribute_from_id(std::string_view id);
std::optional<Emotion> emotion_from_id(std::string_view id);
std::optional<Gender> gender_from_id(std::string_view id);
std::optional<Ethnicity> ethnicity_from_id(std::string_view id);
std::optional<SourceDataset> source_dataset_from_id(std::string_view id);

class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct Point {
    double x = 0;
    double y = 0;
    bool operator==(const Point&) const = default;
};

struct Rect {
    double x0 = 0;
    double y0 = 0;
    double x1 = 0;
    double y1 = 0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    Point center() const { return {(x0 + x1) / 2, (y0 + y1) / 2}; }
    bool operator==(const Rect&) const = default;
};

struct ImageSize {
    std::int64_t width = 0;
    std::int64_t height = 0;
    bool operator==(const ImageSize&) const = default;
};

// Landmark order: left pupil, right pupil, nose tip, left and right mouth commissures.
using Landmarks = std::array<Point, 5>;

struct FaceDetection {
    std::int64_t face_count = 0;
    // Present iff face_count >= 1; describes the primary face.
    std::optional<Rect> box;
    std::optional<Landmarks> landmarks;
    double confidence = 0;
    bool operator==(const FaceDetection&) const = default;
};

struct ClipVerdict {
    bool is_real_human = true;
    bool has_text_overlay = false;
    bool teeth_visible = false;
    bool tongue_visible = false;
    std::map<std::string, double> raw_scores;
    bool operator==(const ClipVerdict&) const = default;
};

class AttributeFlags {
public:
    bool test(Attribute a) const { return bits_.test(static_cast<std::size_t>(a)); }
    void set(Attribute a, bool value = true) { bits_.set(static_cast<std::size_t>(a), value); }
    void clear(Attribute a) { bits_.reset(static_cast<std::size_t>(a)); }
    std::size_t count() const { return bits_.count(); }
    bool operator==(const AttributeFlags&) const = default;

private:
    std::bitset<kAttributeCount> bits_;
};

class EmotionScores {
public:
    double operator[](Emotion e) const { return scores_[static_cast<std::size_t>(e)]; }
    double& operator[](Emotion e) { return scores_[static_cast<std::size_t>(e)]; }
    const std::array<double, kEmotionCount>& values() const { return scores_; }
    bool operator==(const EmotionScores&) const = default;

private:
    std::array<double, kEmotionCount> scores_{};
};

struct ParsingStats {
    std::array<std::int64_t, kParsingRegionCount> region_px{};
    std::int64_t face_height_px = 1;
    std::int64_t image_area_px = 1;

    std::int64_t operator[](ParsingRegion r) const { return region_px[static_cast<std::size_t>(r)]; }
    std::int64_t& operator[](ParsingRegion r) { return region_px[static_cast<std::size_t>(r)]; }
    bool operator==(const ParsingStats&) const = default;
};

struct Demographics {
    double age_pred = 0;
    Gender gender = Gender::female;
    Ethnicity ethnicity = Ethnicity::white;
    bool operator==(const Demographics&) const = default;
};

struct AttributeRecord {
    std::string image_id;
    SourceDataset source_dataset = SourceDataset::other;
    ImageSize image_size;
    FaceDetection detection;
    ClipVerdict clip;
    AttributeFlags attributes;
    EmotionScores emotions;
    ParsingStats parsing;
    Demographics demographics;
    bool is_blurry = false;
    bool is_monochrome = false;
    std::map<std::string, std::string> extractor_versions;

    bool operator==(const AttributeRecord&) const = default;
};

// Throws SchemaError naming the offending field path.
void validate_record(const AttributeRecord& r);

AttributeRecord record_from_json(const Json& j);
Json record_to_json(const AttributeRecord& r);

AttributeRecord parse_record(std::string_view text);
// Single-line JSON with a fixed key order; suitable for JSONL.
std::string serialize_record(const AttributeRecord& r);

}  // namespace facecap
