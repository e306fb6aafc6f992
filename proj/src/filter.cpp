#include "facecap/filter.hpp"

#include <algorithm>
#include <cmath>

namespace facecap {

namespace {

constexpr std::array<std::string_view, kRejectReasonCount> kReasonIds = {
    "ok", "no_face", "multiple_faces", "low_resolution", "not_real_human", "text_overlay",
};

}  // namespace

DatasetProfile builtin_profile(SourceDataset name) {
    DatasetProfile p;
    p.name = name;
    if (name == SourceDataset::laion_face) {
        p.min_face_side_px = 250;
    }
    return p;
}

std::string_view to_id(RejectReason r) { return kReasonIds[static_cast<std::size_t>(r)]; }

std::optional<RejectReason> reject_reason_from_id(std::string_view id) {
    auto it = std::find(kReasonIds.begin(), kReasonIds.end(), id);
    if (it == kReasonIds.end()) {
        return std::nullopt;
    }
    return static_cast<RejectReason>(it - kReasonIds.begin());
}

FilterVerdict check_image(const AttributeRecord& r, const DatasetProfile& profile) {
    const auto& det = r.detection;
    if (det.face_count == 0 || !det.box) {
        return {RejectReason::no_face};
    }
    if (profile.require_single_face && det.face_count > 1) {
        return {RejectReason::multiple_faces};
    }
    if (profile.min_face_side_px) {
        double side = std::min(det.box->width(), det.box->height());
        if (side < static_cast<double>(*profile.min_face_side_px)) {
            return {RejectReason::low_resolution};
        }
    }
    if (profile.require_real_human && !r.clip.is_real_human) {
        return {RejectReason::not_real_human};
    }
    if (profile.reject_text_overlay && r.clip.has_text_overlay) {
        return {RejectReason::text_overlay};
    }
    return {RejectReason::ok};
}

CropRect compute_crop(const Rect& box, const Landmarks& /*landmarks*/, ImageSize image, double margin) {
    if (image.width <= 0 || image.height <= 0) {
        throw GeometryError("image size must be positive");
    }
    if (!(margin >= 1.0)) {
        throw GeometryError("crop margin must be >= 1");
    }
    const double img_w = static_cast<double>(image.width);
    const double img_h = static_cast<double>(image.height);
    Rect clipped{std::clamp(box.x0, 0.0, img_w), std::clamp(box.y0, 0.0, img_h), std::clamp(box.x1, 0.0, img_w),
                 std::clamp(box.y1, 0.0, img_h)};
    if (!(clipped.width() > 0) || !(clipped.height() > 0)) {
        throw GeometryError("degenerate face box");
    }

    auto side = static_cast<std::int64_t>(std::llround(margin * std::max(clipped.width(), clipped.height())));
    side = std::clamp<std::int64_t>(side, 1, std::min(image.width, image.height));

    const Point c = clipped.center();
    auto x0 = static_cast<std::int64_t>(std::llround(c.x - static_cast<double>(side) / 2.0));
    auto y0 = static_cast<std::int64_t>(std::llround(c.y - static_cast<double>(side) / 2.0));
    x0 = std::clamp<std::int64_t>(x0, 0, image.width - side);
    y0 = std::clamp<std::int64_t>(y0, 0, image.height - side);
    return {x0, y0, x0 + side, y0 + side};
}

double SimilarityTransform::scale() const { return std::hypot(a, b); }

AlignmentTemplate default_alignment_template() {
    AlignmentTemplate t;
    t.points = {Point{38.2946, 51.6963}, Point{73.5318, 51.5014}, Point{56.0252, 71.7366}, Point{41.5493, 92.3655},
                Point{70.7299, 92.2041}};
    t.output_size = 112;
    return t;
}

SimilarityTransform estimate_alignment(const Landmarks& landmarks, const AlignmentTemplate& tmpl) {
    // Closed-form 2-D Procrustes (rotation + uniform scale + translation).
    const double n = static_cast<double>(landmarks.size());
    Point src_mean{}, dst_mean{};
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
        src_mean.x += landmarks[i].x / n;
        src_mean.y += landmarks[i].y / n;
        dst_mean.x += tmpl.points[i].x / n;
        dst_mean.y += tmpl.points[i].y / n;
    }
    double sxx = 0, dot = 0, cross = 0;
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
        const double sx = landmarks[i].x - src_mean.x;
        const double sy = landmarks[i].y - src_mean.y;
        const double dx = tmpl.points[i].x - dst_mean.x;
        const double dy = tmpl.points[i].y - dst_mean.y;
        sxx += sx * sx + sy * sy;
        dot += sx * dx + sy * dy;
        cross += sx * dy - sy * dx;
    }
    if (!(sxx > 0)) {
        throw GeometryError("landmarks are coincident");
    }
    SimilarityTransform t;
    t.a = dot / sxx;
    t.b = cross / sxx;
    t.tx = dst_mean.x - (t.a * src_mean.x - t.b * src_mean.y);
    t.ty = dst_mean.y - (t.b * src_mean.x + t.a * src_mean.y);
    return t;
}

}  // namespace facecap
