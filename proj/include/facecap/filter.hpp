#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "facecap/schema.hpp"

namespace facecap {

struct DatasetProfile {
    SourceDataset name = SourceDataset::other;
    // Minimum of the detection box's width and height; none disables the rule.
    std::optional<std::int64_t> min_face_side_px;
    bool require_single_face = true;
    bool require_real_human = true;
    bool reject_text_overlay = true;

    bool operator==(const DatasetProfile&) const = default;
};

// Built-in profiles: EasyPortrait and FFHQ keep every sample regardless of
// face size, LAION-Face drops faces smaller than 250 px.
DatasetProfile builtin_profile(SourceDataset name);

enum class RejectReason : std::uint8_t { ok, no_face, multiple_faces, low_resolution, not_real_human, text_overlay };
inline constexpr std::size_t kRejectReasonCount = 6;

std::string_view to_id(RejectReason r);
std::optional<RejectReason> reject_reason_from_id(std::string_view id);

struct FilterVerdict {
    RejectReason reason = RejectReason::ok;
    bool accepted() const { return reason == RejectReason::ok; }
    bool operator==(const FilterVerdict&) const = default;
};

// Rules run in a fixed order (face count, resolution, real human, text
// overlay); the first failing rule decides the verdict.
FilterVerdict check_image(const AttributeRecord& r, const DatasetProfile& profile);

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CropRect {
    std::int64_t x0 = 0;
    std::int64_t y0 = 0;
    std::int64_t x1 = 0;
    std::int64_t y1 = 0;

    std::int64_t width() const { return x1 - x0; }
    std::int64_t height() const { return y1 - y0; }
    bool operator==(const CropRect&) const = default;
};

inline constexpr double kDefaultCropMargin = 1.3;

// Square crop of side round(margin * max(w, h)) centred on the box, shifted
// to fit inside the image and shrunk only when larger than the image.
// The box is clipped to the image first.
CropRect compute_crop(const Rect& box, const Landmarks& landmarks, ImageSize image, double margin = kDefaultCropMargin);

// 2x3 similarity transform [a -b tx; b a ty] mapping image coordinates to
// the aligned crop.
struct SimilarityTransform {
    double a = 1;
    double b = 0;
    double tx = 0;
    double ty = 0;

    Point apply(Point p) const { return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty}; }
    double scale() const;
};

struct AlignmentTemplate {
    Landmarks points;
    std::int64_t output_size = 112;
};

// Common five-point template on a 112x112 canvas.
AlignmentTemplate default_alignment_template();

// Least-squares similarity transform taking `landmarks` onto the template.
SimilarityTransform estimate_alignment(const Landmarks& landmarks, const AlignmentTemplate& tmpl);

}  // namespace facecap
