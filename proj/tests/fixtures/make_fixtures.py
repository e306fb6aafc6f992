"""Regenerates the filter fixtures. Run from this directory."""

import copy
import json

ATTRIBUTES = [
    "five_o_clock_shadow", "arched_eyebrows", "attractive", "bags_under_eyes", "bald", "bangs", "big_lips",
    "big_nose", "black_hair", "blond_hair", "blurry", "brown_hair", "bushy_eyebrows", "chubby", "double_chin",
    "eyeglasses", "goatee", "gray_hair", "heavy_makeup", "high_cheekbones", "male", "mouth_slightly_open",
    "mustache", "narrow_eyes", "no_beard", "oval_face", "pale_skin", "pointy_nose", "receding_hairline",
    "rosy_cheeks", "sideburns", "smiling", "straight_hair", "wavy_hair", "wearing_earrings", "wearing_hat",
    "wearing_lipstick", "wearing_necklace", "wearing_necktie", "young",
]

BASE = {
    "image_id": "",
    "source_dataset": "laion_face",
    "image_size": {"width": 1024, "height": 1024},
    "detection": {"face_count": 1, "box": None, "landmarks": None, "confidence": 0.98},
    "clip": {
        "is_real_human": True,
        "has_text_overlay": False,
        "teeth_visible": False,
        "tongue_visible": False,
        "raw_scores": {"real_human": 0.96, "text_overlay": 0.03},
    },
    "attributes": {a: False for a in ATTRIBUTES},
    "emotions": {"anger": 0.01, "disgust": 0.0, "fear": 0.01, "happiness": 0.85, "sadness": 0.0,
                 "surprise": 0.03, "neutral": 0.1},
    "parsing": {
        "region_px": {"hair": 30000, "face_skin": 60000, "left_eye": 400, "right_eye": 400,
                      "inner_mouth": 300, "upper_lip": 500, "lower_lip": 600},
        "face_height_px": 300,
        "image_area_px": 1024 * 1024,
    },
    "demographics": {"age_pred": 34.0, "gender": "female", "ethnicity": "asian"},
    "is_blurry": False,
    "is_monochrome": False,
    "extractor_versions": {"attributes": "farl-celeba", "clip": "vit-l-14", "demographics": "deepface",
                           "detector": "retinaface-r50", "emotion": "emotion-7"},
}


def record(image_id, w=300, h=320, faces=1, human=True, text=False):
    r = copy.deepcopy(BASE)
    r["image_id"] = image_id
    r["detection"]["face_count"] = faces
    if faces == 0:
        r["detection"]["confidence"] = 0.0
    else:
        x0, y0 = 200.0, 150.0
        r["detection"]["box"] = [x0, y0, x0 + w, y0 + h]
        cx, cy = x0 + w / 2, y0 + h / 2
        r["detection"]["landmarks"] = {
            "left_pupil": [cx - w * 0.2, cy - h * 0.15],
            "right_pupil": [cx + w * 0.2, cy - h * 0.15],
            "nose_tip": [cx, cy + h * 0.05],
            "left_mouth": [cx - w * 0.15, cy + h * 0.25],
            "right_mouth": [cx + w * 0.15, cy + h * 0.25],
        }
    r["clip"]["is_real_human"] = human
    r["clip"]["has_text_overlay"] = text
    return r


def write(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, separators=(",", ":")) + "\n")


# 7 ok, 2 multiple_faces, 1 low_resolution under laion_face.
filter10 = [record(f"f10-{i:02d}") for i in range(7)]
filter10 += [record("f10-07", faces=2), record("f10-08", faces=3), record("f10-09", w=240, h=260)]

# laion_face: ok 8, multiple_faces 3, low_resolution 3, not_real_human 3,
# text_overlay 2, no_face 1. Curated profiles: the three small faces pass.
filter20 = [record(f"f20-{i:02d}") for i in range(6)]
filter20 += [record("f20-06", w=260, h=260), record("f20-07", w=250, h=400)]
filter20 += [record("f20-08", faces=2), record("f20-09", faces=2), record("f20-10", faces=5)]
filter20 += [record("f20-11", w=240, h=260), record("f20-12", w=260, h=240), record("f20-13", w=249.5, h=300)]
filter20 += [record("f20-14", human=False), record("f20-15", human=False), record("f20-16", human=False, text=True)]
filter20 += [record("f20-17", text=True), record("f20-18", text=True)]
filter20 += [record("f20-19", faces=0)]

write("filter10.jsonl", filter10)
write("filter20.jsonl", filter20)
