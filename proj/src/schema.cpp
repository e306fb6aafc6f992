#include "facecap/schema.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>

namespace facecap {

namespace {

constexpr std::array<std::string_view, kAttributeCount> kAttributeIds = {
    "five_o_clock_shadow", "arched_eyebrows", "attractive", "bags_under_eyes", "bald",
    "bangs", "big_lips", "big_nose", "black_hair", "blond_hair",
    "blurry", "brown_hair", "bushy_eyebrows", "chubby", "double_chin",
    "eyeglasses", "goatee", "gray_hair", "heavy_makeup", "high_cheekbones",
    "male", "mouth_slightly_open", "mustache", "narrow_eyes", "no_beard",
    "oval_face", "pale_skin", "pointy_nose", "receding_hairline", "rosy_cheeks",
    "sideburns", "smiling", "straight_hair", "wavy_hair", "wearing_earrings",
    "wearing_hat", "wearing_lipstick", "wearing_necklace", "wearing_necktie", "young",
};

constexpr std::array<std::string_view, kAttributeCount> kAttributeNames = {
    "5 o'clock shadow", "arched eyebrows", "attractive", "bags under eyes", "bald",
    "bangs", "big lips", "big nose", "black hair", "blond hair",
    "blurry", "brown hair", "bushy eyebrows", "chubby", "double chin",
    "eyeglasses", "goatee", "gray hair", "heavy makeup", "high cheekbones",
    "male", "mouth slightly open", "mustache", "narrow eyes", "no beard",
    "oval face", "pale skin", "pointy nose", "receding hairline", "rosy cheeks",
    "sideburns", "smiling", "straight hair", "wavy hair", "wearing earrings",
    "wearing hat", "wearing lipstick", "wearing necklace", "wearing necktie", "young",
};

constexpr std::array<std::string_view, kEmotionCount> kEmotionNames = {
    "anger", "disgust", "fear", "happiness", "sadness", "surprise", "neutral",
};

constexpr std::array<std::string_view, 2> kGenderIds = {"male", "female"};

constexpr std::array<std::string_view, kEthnicityCount> kEthnicityIds = {
    "black", "white", "asian", "middle_eastern", "indian", "hispanic",
};
constexpr std::array<std::string_view, kEthnicityCount> kEthnicityNames = {
    "black", "white", "asian", "middle eastern", "indian", "hispanic",
};

constexpr std::array<std::string_view, 4> kSourceIds = {"easyportrait", "ffhq", "laion_face", "other"};

constexpr std::array<std::string_view, kParsingRegionCount> kRegionIds = {
    "hair", "face_skin", "left_eye", "right_eye", "inner_mouth", "upper_lip", "lower_lip",
};

constexpr std::array<std::string_view, 5> kLandmarkIds = {
    "left_pupil", "right_pupil", "nose_tip", "left_mouth", "right_mouth",
};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N>& table, std::string_view id) {
    auto it = std::find(table.begin(), table.end(), id);
    if (it == table.end()) {
        return std::nullopt;
    }
    return static_cast<E>(it - table.begin());
}

std::string join_path(const std::string& base, std::string_view key) {
    return base.empty() ? std::string(key) : base + "." + std::string(key);
}

// Helpers for strict reading: every object must contain exactly the
// expected keys.
void expect_object(const Json& j, const std::string& path, std::initializer_list<std::string_view> keys) {
    if (!j.is_object()) {
        throw SchemaError(path.empty() ? "$" : path, "expected object");
    }
    for (auto key : keys) {
        if (!j.contains(key)) {
            throw SchemaError(join_path(path, key), "missing field");
        }
    }
    for (const auto& [key, value] : j.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw SchemaError(join_path(path, key), "unknown field");
        }
    }
}

const Json& field(const Json& j, std::string_view key) { return j.at(std::string(key)); }

bool read_bool(const Json& j, const std::string& path) {
    if (!j.is_boolean()) {
        throw SchemaError(path, "expected boolean");
    }
    return j.get<bool>();
}

double read_real(const Json& j, const std::string& path) {
    if (!j.is_number()) {
        throw SchemaError(path, "expected number");
    }
    double v = j.get<double>();
    if (!std::isfinite(v)) {
        throw SchemaError(path, "expected finite number");
    }
    return v;
}

double read_unit(const Json& j, const std::string& path) {
    double v = read_real(j, path);
    if (v < 0.0 || v > 1.0) {
        throw SchemaError(path, "value out of range [0,1]");
    }
    return v;
}

std::int64_t read_int(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) {
        throw SchemaError(path, "expected integer");
    }
    return j.get<std::int64_t>();
}

std::string read_string(const Json& j, const std::string& path) {
    if (!j.is_string()) {
        throw SchemaError(path, "expected string");
    }
    return j.get<std::string>();
}

template <typename E, typename F>
E read_enum(const Json& j, const std::string& path, F from_id) {
    auto text = read_string(j, path);
    auto value = from_id(text);
    if (!value) {
        throw SchemaError(path, "unknown value '" + text + "'");
    }
    return *value;
}

Point read_point(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) {
        throw SchemaError(path, "expected [x, y]");
    }
    return {read_real(j[0], path + "[0]"), read_real(j[1], path + "[1]")};
}

Rect read_rect(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 4) {
        throw SchemaError(path, "expected [x0, y0, x1, y1]");
    }
    return {read_real(j[0], path + "[0]"), read_real(j[1], path + "[1]"), read_real(j[2], path + "[2]"),
            read_real(j[3], path + "[3]")};
}

Json point_json(const Point& p) { return Json::array({p.x, p.y}); }
Json rect_json(const Rect& r) { return Json::array({r.x0, r.y0, r.x1, r.y1}); }

}  // namespace

std::span<const std::string_view> attribute_ids() { return kAttributeIds; }
std::span<const std::string_view> attribute_names() { return kAttributeNames; }
std::span<const std::string_view> emotion_names() { return kEmotionNames; }
std::span<const std::string_view> ethnicity_ids() { return kEthnicityIds; }
std::span<const std::string_view> ethnicity_names() { return kEthnicityNames; }
std::span<const std::string_view> parsing_region_ids() { return kRegionIds; }

std::string_view to_id(Attribute a) { return kAttributeIds[static_cast<std::size_t>(a)]; }
std::string_view human_name(Attribute a) { return kAttributeNames[static_cast<std::size_t>(a)]; }
std::string_view to_id(Emotion e) { return kEmotionNames[static_cast<std::size_t>(e)]; }
std::string_view to_id(Gender g) { return kGenderIds[static_cast<std::size_t>(g)]; }
std::string_view to_id(Ethnicity e) { return kEthnicityIds[static_cast<std::size_t>(e)]; }
std::string_view human_name(Ethnicity e) { return kEthnicityNames[static_cast<std::size_t>(e)]; }
std::string_view to_id(SourceDataset s) { return kSourceIds[static_cast<std::size_t>(s)]; }
std::string_view to_id(ParsingRegion r) { return kRegionIds[static_cast<std::size_t>(r)]; }

std::optional<Attribute> attribute_from_id(std::string_view id) { return lookup<Attribute>(kAttributeIds, id); }
std::optional<Emotion> emotion_from_id(std::string_view id) { return lookup<Emotion>(kEmotionNames, id); }
std::optional<Gender> gender_from_id(std::string_view id) { return lookup<Gender>(kGenderIds, id); }
std::optional<Ethnicity> ethnicity_from_id(std::string_view id) { return lookup<Ethnicity>(kEthnicityIds, id); }
std::optional<SourceDataset> source_dataset_from_id(std::string_view id) { return lookup<SourceDataset>(kSourceIds, id); }

void validate_record(const AttributeRecord& r) {
    if (r.image_id.empty()) {
        throw SchemaError("image_id", "must be non-empty");
    }
    if (r.image_size.width <= 0 || r.image_size.height <= 0) {
        throw SchemaError("image_size", "dimensions must be positive");
    }

    const auto& det = r.detection;
    if (det.face_count < 0) {
        throw SchemaError("detection.face_count", "must be non-negative");
    }
    if (det.confidence < 0.0 || det.confidence > 1.0 || !std::isfinite(det.confidence)) {
        throw SchemaError("detection.confidence", "value out of range [0,1]");
    }
    if (det.face_count == 0) {
        if (det.box || det.landmarks) {
            throw SchemaError("detection.box", "must be null when face_count is 0");
        }
    } else {
        if (!det.box) {
            throw SchemaError("detection.box", "missing field");
        }
        if (!det.landmarks) {
            throw SchemaError("detection.landmarks", "missing field");
        }
        if (!(det.box->x0 < det.box->x1) || !(det.box->y0 < det.box->y1)) {
            throw SchemaError("detection.box", "requires x0 < x1 and y0 < y1");
        }
        for (std::size_t i = 0; i < det.landmarks->size(); ++i) {
            const auto& p = (*det.landmarks)[i];
            if (p.x < 0 || p.y < 0 || p.x > static_cast<double>(r.image_size.width) ||
                p.y > static_cast<double>(r.image_size.height)) {
                throw SchemaError("detection.landmarks." + std::string(kLandmarkIds[i]), "outside image bounds");
            }
        }
    }

    for (const auto& [probe, score] : r.clip.raw_scores) {
        if (!(score >= 0.0 && score <= 1.0)) {
            throw SchemaError("clip.raw_scores." + probe, "value out of range [0,1]");
        }
    }

    for (std::size_t i = 0; i < kEmotionCount; ++i) {
        double v = r.emotions.values()[i];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw SchemaError("emotions." + std::string(kEmotionNames[i]), "value out of range [0,1]");
        }
    }

    const auto& p = r.parsing;
    if (p.face_height_px <= 0) {
        throw SchemaError("parsing.face_height_px", "must be positive");
    }
    if (p.image_area_px <= 0) {
        throw SchemaError("parsing.image_area_px", "must be positive");
    }
    for (std::size_t i = 0; i < kParsingRegionCount; ++i) {
        if (p.region_px[i] < 0 || p.region_px[i] > p.image_area_px) {
            throw SchemaError("parsing.region_px." + std::string(kRegionIds[i]), "count must lie in [0, image_area_px]");
        }
    }

    if (!(r.demographics.age_pred >= 0.0) || !std::isfinite(r.demographics.age_pred)) {
        throw SchemaError("demographics.age_pred", "must be finite and non-negative");
    }
    if (r.is_blurry != r.attributes.test(Attribute::blurry)) {
        throw SchemaError("is_blurry", "must mirror attributes.blurry");
    }
}

AttributeRecord record_from_json(const Json& j) {
    expect_object(j, "",
                  {"image_id", "source_dataset", "image_size", "detection", "clip", "attributes", "emotions", "parsing",
                   "demographics", "is_blurry", "is_monochrome", "extractor_versions"});
    AttributeRecord r;
    r.image_id = read_string(field(j, "image_id"), "image_id");
    r.source_dataset = read_enum<SourceDataset>(field(j, "source_dataset"), "source_dataset", source_dataset_from_id);

    const auto& size = field(j, "image_size");
    expect_object(size, "image_size", {"width", "height"});
    r.image_size.width = read_int(field(size, "width"), "image_size.width");
    r.image_size.height = read_int(field(size, "height"), "image_size.height");

    const auto& det = field(j, "detection");
    expect_object(det, "detection", {"face_count", "box", "landmarks", "confidence"});
    r.detection.face_count = read_int(field(det, "face_count"), "detection.face_count");
    if (!field(det, "box").is_null()) {
        r.detection.box = read_rect(field(det, "box"), "detection.box");
    }
    if (const auto& lm = field(det, "landmarks"); !lm.is_null()) {
        expect_object(lm, "detection.landmarks",
                      {kLandmarkIds[0], kLandmarkIds[1], kLandmarkIds[2], kLandmarkIds[3], kLandmarkIds[4]});
        Landmarks points;
        for (std::size_t i = 0; i < points.size(); ++i) {
            points[i] = read_point(field(lm, kLandmarkIds[i]), "detection.landmarks." + std::string(kLandmarkIds[i]));
        }
        r.detection.landmarks = points;
    }
    r.detection.confidence = read_unit(field(det, "confidence"), "detection.confidence");

    const auto& clip = field(j, "clip");
    expect_object(clip, "clip", {"is_real_human", "has_text_overlay", "teeth_visible", "tongue_visible", "raw_scores"});
    r.clip.is_real_human = read_bool(field(clip, "is_real_human"), "clip.is_real_human");
    r.clip.has_text_overlay = read_bool(field(clip, "has_text_overlay"), "clip.has_text_overlay");
    r.clip.teeth_visible = read_bool(field(clip, "teeth_visible"), "clip.teeth_visible");
    r.clip.tongue_visible = read_bool(field(clip, "tongue_visible"), "clip.tongue_visible");
    const auto& scores = field(clip, "raw_scores");
    if (!scores.is_object()) {
        throw SchemaError("clip.raw_scores", "expected object");
    }
    for (const auto& [probe, value] : scores.items()) {
        r.clip.raw_scores[probe] = read_unit(value, "clip.raw_scores." + probe);
    }

    const auto& attrs = field(j, "attributes");
    if (!attrs.is_object()) {
        throw SchemaError("attributes", "expected object");
    }
    for (const auto& [name, value] : attrs.items()) {
        auto a = attribute_from_id(name);
        if (!a) {
            throw SchemaError("attributes." + name, "unknown attribute");
        }
        r.attributes.set(*a, read_bool(value, "attributes." + name));
    }
    for (auto id : kAttributeIds) {
        if (!attrs.contains(id)) {
            throw SchemaError("attributes." + std::string(id), "missing field");
        }
    }

    const auto& emo = field(j, "emotions");
    expect_object(emo, "emotions",
                  {kEmotionNames[0], kEmotionNames[1], kEmotionNames[2], kEmotionNames[3], kEmotionNames[4],
                   kEmotionNames[5], kEmotionNames[6]});
    for (std::size_t i = 0; i < kEmotionCount; ++i) {
        r.emotions[static_cast<Emotion>(i)] =
            read_unit(field(emo, kEmotionNames[i]), "emotions." + std::string(kEmotionNames[i]));
    }

    const auto& parsing = field(j, "parsing");
    expect_object(parsing, "parsing", {"region_px", "face_height_px", "image_area_px"});
    const auto& regions = field(parsing, "region_px");
    expect_object(regions, "parsing.region_px",
                  {kRegionIds[0], kRegionIds[1], kRegionIds[2], kRegionIds[3], kRegionIds[4], kRegionIds[5],
                   kRegionIds[6]});
    for (std::size_t i = 0; i < kParsingRegionCount; ++i) {
        r.parsing.region_px[i] = read_int(field(regions, kRegionIds[i]), "parsing.region_px." + std::string(kRegionIds[i]));
    }
    r.parsing.face_height_px = read_int(field(parsing, "face_height_px"), "parsing.face_height_px");
    r.parsing.image_area_px = read_int(field(parsing, "image_area_px"), "parsing.image_area_px");

    const auto& demo = field(j, "demographics");
    expect_object(demo, "demographics", {"age_pred", "gender", "ethnicity"});
    r.demographics.age_pred = read_real(field(demo, "age_pred"), "demographics.age_pred");
    r.demographics.gender = read_enum<Gender>(field(demo, "gender"), "demographics.gender", gender_from_id);
    r.demographics.ethnicity =
        read_enum<Ethnicity>(field(demo, "ethnicity"), "demographics.ethnicity", ethnicity_from_id);

    r.is_blurry = read_bool(field(j, "is_blurry"), "is_blurry");
    r.is_monochrome = read_bool(field(j, "is_monochrome"), "is_monochrome");

    const auto& versions = field(j, "extractor_versions");
    if (!versions.is_object()) {
        throw SchemaError("extractor_versions", "expected object");
    }
    for (const auto& [stage, value] : versions.items()) {
        r.extractor_versions[stage] = read_string(value, "extractor_versions." + stage);
    }

    validate_record(r);
    return r;
}

Json record_to_json(const AttributeRecord& r) {
    Json j;
    j["image_id"] = r.image_id;
    j["source_dataset"] = to_id(r.source_dataset);
    j["image_size"] = {{"width", r.image_size.width}, {"height", r.image_size.height}};

    Json det;
    det["face_count"] = r.detection.face_count;
    det["box"] = r.detection.box ? rect_json(*r.detection.box) : Json(nullptr);
    if (r.detection.landmarks) {
        Json lm;
        for (std::size_t i = 0; i < kLandmarkIds.size(); ++i) {
            lm[std::string(kLandmarkIds[i])] = point_json((*r.detection.landmarks)[i]);
        }
        det["landmarks"] = std::move(lm);
    } else {
        det["landmarks"] = nullptr;
    }
    det["confidence"] = r.detection.confidence;
    j["detection"] = std::move(det);

    Json clip;
    clip["is_real_human"] = r.clip.is_real_human;
    clip["has_text_overlay"] = r.clip.has_text_overlay;
    clip["teeth_visible"] = r.clip.teeth_visible;
    clip["tongue_visible"] = r.clip.tongue_visible;
    clip["raw_scores"] = Json::object();
    for (const auto& [probe, score] : r.clip.raw_scores) {
        clip["raw_scores"][probe] = score;
    }
    j["clip"] = std::move(clip);

    Json attrs = Json::object();
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
        attrs[std::string(kAttributeIds[i])] = r.attributes.test(static_cast<Attribute>(i));
    }
    j["attributes"] = std::move(attrs);

    Json emo = Json::object();
    for (std::size_t i = 0; i < kEmotionCount; ++i) {
        emo[std::string(kEmotionNames[i])] = r.emotions.values()[i];
    }
    j["emotions"] = std::move(emo);

    Json regions = Json::object();
    for (std::size_t i = 0; i < kParsingRegionCount; ++i) {
        regions[std::string(kRegionIds[i])] = r.parsing.region_px[i];
    }
    j["parsing"] = {{"region_px", std::move(regions)},
                    {"face_height_px", r.parsing.face_height_px},
                    {"image_area_px", r.parsing.image_area_px}};

    j["demographics"] = {{"age_pred", r.demographics.age_pred},
                         {"gender", to_id(r.demographics.gender)},
                         {"ethnicity", to_id(r.demographics.ethnicity)}};
    j["is_blurry"] = r.is_blurry;
    j["is_monochrome"] = r.is_monochrome;
    j["extractor_versions"] = Json::object();
    for (const auto& [stage, version] : r.extractor_versions) {
        j["extractor_versions"][stage] = version;
    }
    return j;
}

AttributeRecord parse_record(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw SchemaError("$", std::string("malformed JSON: ") + e.what());
    }
    return record_from_json(j);
}

std::string serialize_record(const AttributeRecord& r) {
    return record_to_json(r).dump(-1, ' ', false, Json::error_handler_t::strict);
}

}  // namespace facecap
