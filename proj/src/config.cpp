#include "facecap/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace facecap {

namespace {

std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

void check_keys(const YAML::Node& node, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!node.IsMap()) {
        throw ConfigError(path.empty() ? "$" : path, "expected a mapping");
    }
    for (const auto& item : node) {
        const auto key = item.first.as<std::string>();
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError(join_path(path, key), "unknown key");
        }
    }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& path) {
    if (!node.IsScalar()) {
        throw ConfigError(path, "expected a scalar value");
    }
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(path, "invalid value '" + node.Scalar() + "'");
    }
}

template <typename T>
void read_if(const YAML::Node& parent, const std::string& path, const char* key, T& out) {
    if (const auto node = parent[key]) {
        out = scalar<T>(node, join_path(path, key));
    }
}

double read_real(const YAML::Node& parent, const std::string& path, const char* key, double current) {
    read_if(parent, path, key, current);
    if (!std::isfinite(current)) {
        throw ConfigError(join_path(path, key), "must be finite");
    }
    return current;
}

std::int64_t positive_int(const YAML::Node& parent, const std::string& path, const char* key, std::int64_t current) {
    read_if(parent, path, key, current);
    if (current <= 0) {
        throw ConfigError(join_path(path, key), "must be positive");
    }
    return current;
}

Attribute attribute_at(const YAML::Node& node, const std::string& path) {
    const auto id = scalar<std::string>(node, path);
    auto a = attribute_from_id(id);
    if (!a) {
        throw ConfigError(path, "unknown attribute '" + id + "'");
    }
    return *a;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    return p.is_relative() && !base.empty() ? base / p : p;
}

void parse_profile(const YAML::Node& node, DatasetProfile& profile) {
    if (node.IsScalar()) {
        auto name = source_dataset_from_id(node.Scalar());
        if (!name) {
            throw ConfigError("profile", "unknown dataset profile '" + node.Scalar() + "'");
        }
        profile = builtin_profile(*name);
        return;
    }
    check_keys(node, "profile", {"name", "min_face_side_px", "require_single_face", "require_real_human",
                                 "reject_text_overlay"});
    if (!node["name"]) {
        throw ConfigError("profile.name", "missing key");
    }
    const auto name_text = scalar<std::string>(node["name"], "profile.name");
    auto name = source_dataset_from_id(name_text);
    if (!name) {
        throw ConfigError("profile.name", "unknown dataset profile '" + name_text + "'");
    }
    profile = builtin_profile(*name);
    if (const auto side = node["min_face_side_px"]) {
        if (side.IsNull()) {
            profile.min_face_side_px.reset();
        } else {
            profile.min_face_side_px = positive_int(node, "profile", "min_face_side_px", 1);
        }
    }
    read_if(node, "profile", "require_single_face", profile.require_single_face);
    read_if(node, "profile", "require_real_human", profile.require_real_human);
    read_if(node, "profile", "reject_text_overlay", profile.reject_text_overlay);
}

void parse_crop(const YAML::Node& node, CropConfig& crop) {
    check_keys(node, "crop", {"margin", "align", "template"});
    crop.margin = read_real(node, "crop", "margin", crop.margin);
    read_if(node, "crop", "align", crop.align);
    if (const auto t = node["template"]) {
        check_keys(t, "crop.template", {"size", "points"});
        crop.alignment_template.output_size = positive_int(t, "crop.template", "size", crop.alignment_template.output_size);
        if (const auto pts = t["points"]) {
            if (!pts.IsSequence() || pts.size() != 5) {
                throw ConfigError("crop.template.points", "expected five [x, y] pairs");
            }
            for (std::size_t i = 0; i < 5; ++i) {
                const std::string p = "crop.template.points[" + std::to_string(i) + "]";
                if (!pts[i].IsSequence() || pts[i].size() != 2) {
                    throw ConfigError(p, "expected [x, y]");
                }
                crop.alignment_template.points[i] = {scalar<double>(pts[i][0], p), scalar<double>(pts[i][1], p)};
            }
        }
    }
}

void parse_derive(const YAML::Node& node, DeriveConfig& d) {
    check_keys(node, "derive",
               {"dominance_margin", "noise_fraction", "bracket_half_width_years", "parsing", "age_categories"});
    d.dominance_margin = read_real(node, "derive", "dominance_margin", d.dominance_margin);
    d.noise_fraction = read_real(node, "derive", "noise_fraction", d.noise_fraction);
    d.bracket_half_width_years = read_real(node, "derive", "bracket_half_width_years", d.bracket_half_width_years);
    if (const auto p = node["parsing"]) {
        const std::string path = "derive.parsing";
        check_keys(p, path, {"hair_bald", "hair_short", "hair_medium", "eyes_closed", "eyes_narrow", "mouth_closed",
                             "mouth_slightly_open"});
        auto& t = d.parsing;
        t.hair_bald = read_real(p, path, "hair_bald", t.hair_bald);
        t.hair_short = read_real(p, path, "hair_short", t.hair_short);
        t.hair_medium = read_real(p, path, "hair_medium", t.hair_medium);
        t.eyes_closed = read_real(p, path, "eyes_closed", t.eyes_closed);
        t.eyes_narrow = read_real(p, path, "eyes_narrow", t.eyes_narrow);
        t.mouth_closed = read_real(p, path, "mouth_closed", t.mouth_closed);
        t.mouth_slightly_open = read_real(p, path, "mouth_slightly_open", t.mouth_slightly_open);
    }
    if (const auto cats = node["age_categories"]) {
        if (!cats.IsSequence() || cats.size() == 0) {
            throw ConfigError("derive.age_categories", "expected a non-empty list");
        }
        d.age_categories.clear();
        for (std::size_t i = 0; i < cats.size(); ++i) {
            const std::string path = "derive.age_categories[" + std::to_string(i) + "]";
            check_keys(cats[i], path, {"label", "from"});
            if (!cats[i]["label"] || !cats[i]["from"]) {
                throw ConfigError(path, "needs 'label' and 'from'");
            }
            d.age_categories.push_back(
                {scalar<std::string>(cats[i]["label"], path + ".label"), scalar<double>(cats[i]["from"], path + ".from")});
        }
    }
}

void parse_debias(const YAML::Node& node, std::vector<DebiasRule>& rules) {
    check_keys(node, "debias", {"rules"});
    const auto list = node["rules"];
    if (!list) {
        return;
    }
    if (!list.IsSequence()) {
        throw ConfigError("debias.rules", "expected a list");
    }
    rules.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = "debias.rules[" + std::to_string(i) + "]";
        check_keys(list[i], path, {"target", "conditions", "drop_probability"});
        if (!list[i]["target"] || !list[i]["drop_probability"]) {
            throw ConfigError(path, "needs 'target' and 'drop_probability'");
        }
        DebiasRule rule;
        rule.target = attribute_at(list[i]["target"], path + ".target");
        if (const auto conds = list[i]["conditions"]) {
            if (!conds.IsSequence()) {
                throw ConfigError(path + ".conditions", "expected a list");
            }
            for (std::size_t k = 0; k < conds.size(); ++k) {
                rule.conditions.push_back(attribute_at(conds[k], path + ".conditions[" + std::to_string(k) + "]"));
            }
        }
        rule.drop_probability = scalar<double>(list[i]["drop_probability"], path + ".drop_probability");
        rules.push_back(std::move(rule));
    }
}

void parse_fusion(const YAML::Node& node, FusionConfig& f) {
    const std::string path = "fusion";
    check_keys(node, path, {"mock", "endpoint", "model", "token_env", "captions_per_image", "attempts_per_caption",
                            "temperature", "max_tokens", "min_words", "max_words", "max_retries",
                            "initial_backoff_ms", "timeout_s"});
    read_if(node, path, "mock", f.mock);
    read_if(node, path, "endpoint", f.endpoint);
    read_if(node, path, "model", f.model);
    read_if(node, path, "token_env", f.token_env);
    f.options.captions_per_image = static_cast<std::size_t>(
        positive_int(node, path, "captions_per_image", static_cast<std::int64_t>(f.options.captions_per_image)));
    f.options.attempts_per_caption = static_cast<std::size_t>(
        positive_int(node, path, "attempts_per_caption", static_cast<std::int64_t>(f.options.attempts_per_caption)));
    f.options.decode.temperature = read_real(node, path, "temperature", f.options.decode.temperature);
    f.options.decode.max_tokens = positive_int(node, path, "max_tokens", f.options.decode.max_tokens);
    f.options.limits.min_words = static_cast<std::size_t>(
        positive_int(node, path, "min_words", static_cast<std::int64_t>(f.options.limits.min_words)));
    f.options.limits.max_words = static_cast<std::size_t>(
        positive_int(node, path, "max_words", static_cast<std::int64_t>(f.options.limits.max_words)));
    std::int64_t retries = f.retry.max_retries;
    read_if(node, path, "max_retries", retries);
    if (retries < 0) {
        throw ConfigError("fusion.max_retries", "must be non-negative");
    }
    f.retry.max_retries = static_cast<int>(retries);
    std::int64_t backoff = f.retry.initial_backoff.count();
    read_if(node, path, "initial_backoff_ms", backoff);
    if (backoff < 0) {
        throw ConfigError("fusion.initial_backoff_ms", "must be non-negative");
    }
    f.retry.initial_backoff = std::chrono::milliseconds(backoff);
    f.timeout_s = positive_int(node, path, "timeout_s", f.timeout_s);
}

}  // namespace

void PipelineConfig::validate() const {
    if (crop.margin < 1.0) {
        throw ConfigError("crop.margin", "must be >= 1");
    }
    if (derive.dominance_margin < 0.0 || derive.dominance_margin > 1.0) {
        throw ConfigError("derive.dominance_margin", "must lie in [0, 1]");
    }
    if (derive.noise_fraction < 0.0) {
        throw ConfigError("derive.noise_fraction", "must be non-negative");
    }
    if (derive.bracket_half_width_years < 0.0) {
        throw ConfigError("derive.bracket_half_width_years", "must be non-negative");
    }
    const auto& t = derive.parsing;
    if (!(0 <= t.hair_bald && t.hair_bald <= t.hair_short && t.hair_short <= t.hair_medium)) {
        throw ConfigError("derive.parsing", "hair thresholds must be non-negative and increasing");
    }
    if (!(0 <= t.eyes_closed && t.eyes_closed <= t.eyes_narrow)) {
        throw ConfigError("derive.parsing", "eye thresholds must be non-negative and increasing");
    }
    if (!(0 <= t.mouth_closed && t.mouth_closed <= t.mouth_slightly_open)) {
        throw ConfigError("derive.parsing", "mouth thresholds must be non-negative and increasing");
    }
    if (derive.age_categories.empty() || derive.age_categories.front().lower_years != 0.0) {
        throw ConfigError("derive.age_categories", "first category must start at 0");
    }
    for (std::size_t i = 1; i < derive.age_categories.size(); ++i) {
        if (!(derive.age_categories[i].lower_years > derive.age_categories[i - 1].lower_years)) {
            throw ConfigError("derive.age_categories[" + std::to_string(i) + "].from", "must be increasing");
        }
    }
    for (std::size_t i = 0; i < debias_rules.size(); ++i) {
        try {
            validate_rule(debias_rules[i]);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("debias.rules[" + std::to_string(i) + "]", e.what());
        }
    }
    if (fusion.options.captions_per_image == 0) {
        throw ConfigError("fusion.captions_per_image", "must be positive");
    }
    if (fusion.options.limits.min_words > fusion.options.limits.max_words) {
        throw ConfigError("fusion.min_words", "must not exceed fusion.max_words");
    }
    if (fusion.options.decode.temperature < 0.0) {
        throw ConfigError("fusion.temperature", "must be non-negative");
    }
    if (!fusion.mock && fusion.endpoint.find("://") == std::string::npos) {
        throw ConfigError("fusion.endpoint", "must be an http(s) URL");
    }
    if (output.shard_size <= 0) {
        throw ConfigError("output.shard_size", "must be positive");
    }
    if (output.image_path_template.find("{image_id}") == std::string::npos) {
        throw ConfigError("output.image_path_template", "must contain {image_id}");
    }
    if (concurrency.workers <= 0) {
        throw ConfigError("concurrency.workers", "must be positive");
    }
    if (concurrency.llm_in_flight <= 0) {
        throw ConfigError("concurrency.llm_in_flight", "must be positive");
    }
}

Json PipelineConfig::to_json() const {
    Json cats = Json::array();
    for (const auto& c : derive.age_categories) {
        cats.push_back({{"label", c.label}, {"from", c.lower_years}});
    }
    Json rules = Json::array();
    for (const auto& r : debias_rules) {
        Json conds = Json::array();
        for (auto c : r.conditions) {
            conds.push_back(to_id(c));
        }
        rules.push_back({{"target", to_id(r.target)}, {"conditions", conds}, {"drop_probability", r.drop_probability}});
    }
    Json points = Json::array();
    for (const auto& p : crop.alignment_template.points) {
        points.push_back({p.x, p.y});
    }
    const auto& t = derive.parsing;
    return Json{
        {"global_seed", global_seed},
        {"profile",
         {{"name", to_id(profile.name)},
          {"min_face_side_px", profile.min_face_side_px ? Json(*profile.min_face_side_px) : Json(nullptr)},
          {"require_single_face", profile.require_single_face},
          {"require_real_human", profile.require_real_human},
          {"reject_text_overlay", profile.reject_text_overlay}}},
        {"crop",
         {{"margin", crop.margin},
          {"align", crop.align},
          {"template", {{"size", crop.alignment_template.output_size}, {"points", points}}}}},
        {"derive",
         {{"dominance_margin", derive.dominance_margin},
          {"noise_fraction", derive.noise_fraction},
          {"bracket_half_width_years", derive.bracket_half_width_years},
          {"parsing",
           {{"hair_bald", t.hair_bald},
            {"hair_short", t.hair_short},
            {"hair_medium", t.hair_medium},
            {"eyes_closed", t.eyes_closed},
            {"eyes_narrow", t.eyes_narrow},
            {"mouth_closed", t.mouth_closed},
            {"mouth_slightly_open", t.mouth_slightly_open}}},
          {"age_categories", cats}}},
        {"debias", {{"rules", rules}}},
        {"fusion",
         {{"mock", fusion.mock},
          {"endpoint", fusion.endpoint},
          {"model", fusion.model},
          {"token_env", fusion.token_env},
          {"captions_per_image", fusion.options.captions_per_image},
          {"attempts_per_caption", fusion.options.attempts_per_caption},
          {"temperature", fusion.options.decode.temperature},
          {"max_tokens", fusion.options.decode.max_tokens},
          {"min_words", fusion.options.limits.min_words},
          {"max_words", fusion.options.limits.max_words},
          {"max_retries", fusion.retry.max_retries},
          {"initial_backoff_ms", fusion.retry.initial_backoff.count()},
          {"timeout_s", fusion.timeout_s}}},
        {"output", {{"shard_size", output.shard_size}, {"image_path_template", output.image_path_template}}},
        {"concurrency", {{"workers", concurrency.workers}, {"llm_in_flight", concurrency.llm_in_flight}}},
    };
}

std::string PipelineConfig::hash() const {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << fnv1a64(to_json().dump());
    return os.str();
}

PipelineConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("$", std::string("malformed YAML: ") + e.what());
    }
    PipelineConfig cfg;
    if (root.IsNull()) {
        cfg.validate();
        return cfg;
    }
    check_keys(root, "", {"global_seed", "profile", "crop", "derive", "debias", "fusion", "output", "concurrency", "paths"});
    if (const auto seed = root["global_seed"]) {
        const auto text = scalar<std::string>(seed, "global_seed");
        if (text.empty() || text.front() == '-') {
            throw ConfigError("global_seed", "must be a non-negative integer");
        }
        cfg.global_seed = scalar<std::uint64_t>(seed, "global_seed");
    }
    if (const auto n = root["profile"]) {
        parse_profile(n, cfg.profile);
    }
    if (const auto n = root["crop"]) {
        parse_crop(n, cfg.crop);
    }
    if (const auto n = root["derive"]) {
        parse_derive(n, cfg.derive);
    }
    if (const auto n = root["debias"]) {
        parse_debias(n, cfg.debias_rules);
    }
    if (const auto n = root["fusion"]) {
        parse_fusion(n, cfg.fusion);
    }
    if (const auto n = root["output"]) {
        check_keys(n, "output", {"shard_size", "image_path_template"});
        read_if(n, "output", "shard_size", cfg.output.shard_size);
        read_if(n, "output", "image_path_template", cfg.output.image_path_template);
    }
    if (const auto n = root["concurrency"]) {
        check_keys(n, "concurrency", {"workers", "llm_in_flight"});
        read_if(n, "concurrency", "workers", cfg.concurrency.workers);
        read_if(n, "concurrency", "llm_in_flight", cfg.concurrency.llm_in_flight);
    }
    if (const auto n = root["paths"]) {
        check_keys(n, "paths", {"records", "out", "phrases"});
        if (n["records"]) {
            cfg.paths.records = resolve(base_dir, scalar<std::string>(n["records"], "paths.records"));
        }
        if (n["out"]) {
            cfg.paths.out = resolve(base_dir, scalar<std::string>(n["out"], "paths.out"));
        }
        if (n["phrases"]) {
            cfg.paths.phrases = resolve(base_dir, scalar<std::string>(n["phrases"], "paths.phrases"));
        }
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("$", "cannot read config file " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.parent_path());
}

}  // namespace facecap
