#include "facecap/fusion.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace facecap {

namespace {

constexpr std::string_view kPromptHead = "Without elaborating, describe a person with all of the following characteristics: ";
constexpr std::string_view kPromptMiddle = ". They have the following attributes: ";
constexpr std::string_view kPromptTail =
    ". Combine specific characteristics to produce a coherent description. You are encouraged to use synonyms for "
    "the provided attributes but not to add information other than what is provided. It is important to use all "
    "provided characteristics. Do not repeat characteristics that are provided more than once. Do not repeat these "
    "instructions.";

// Lower-case fragments of the instruction text; any of them in an output
// means the model echoed its prompt.
constexpr std::array<std::string_view, 8> kEchoFragments = {
    "without elaborating",
    "describe a person with all of the following",
    "they have the following attributes",
    "combine specific characteristics",
    "you are encouraged to use synonyms",
    "other than what is provided",
    "it is important to use all provided characteristics",
    "do not repeat",
};

constexpr std::array<std::string_view, 9> kRefusalPrefixes = {
    "i cannot", "i can't", "i can not", "i'm sorry", "i am sorry", "sorry,", "as an ai", "i'm unable", "i am unable",
};

constexpr std::array<std::string_view, 16> kGenderLexicon = {
    "man",   "men",   "male",  "males",     "woman",  "women", "female", "females",
    "boy",   "boys",  "girl",  "girls",     "gentleman", "lady", "guy",  "gal",
};

constexpr std::array<std::string_view, 12> kFillers = {
    "The portrait shows the face clearly.",
    "The photo is a close view of the face.",
    "The face is seen from the front in this picture.",
    "The picture is a tight head shot.",
    "The face fills most of the frame.",
    "This is a close portrait photograph.",
    "The head and shoulders are in view.",
    "The lighting on the face is even.",
    "The face is centred in the shot.",
    "The image is a natural portrait.",
    "The background stays out of focus.",
    "The expression is easy to read in this photo.",
};

constexpr std::array<std::string_view, 6> kRejectIds = {
    "ok", "too_short", "too_long", "instruction_echo", "refusal", "missing_gender",
};

std::string lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) {
            out += sep;
        }
        out += items[i];
    }
    return out;
}

bool has_gender_term(std::string_view text) {
    const std::string low = lower(text);
    std::size_t i = 0;
    while (i < low.size()) {
        while (i < low.size() && !std::isalpha(static_cast<unsigned char>(low[i]))) {
            ++i;
        }
        std::size_t j = i;
        while (j < low.size() && std::isalpha(static_cast<unsigned char>(low[j]))) {
            ++j;
        }
        if (j > i) {
            std::string_view word(low.data() + i, j - i);
            if (std::find(kGenderLexicon.begin(), kGenderLexicon.end(), word) != kGenderLexicon.end()) {
                return true;
            }
        }
        i = j;
    }
    return false;
}

}  // namespace

FusionPrompt build_prompt(const BagOfWords& bag) {
    if (bag.f1.empty()) {
        throw EmptyBag("bag has no primary descriptors");
    }
    std::string text;
    text += kPromptHead;
    text += join(bag.f1, ", ");
    text += kPromptMiddle;
    text += join(bag.f2, ", ");
    text += kPromptTail;
    if (bag.blurry) {
        text += ' ';
        text += kBlurrySuffix;
    }
    if (bag.monochrome) {
        text += ' ';
        text += kMonochromeSuffix;
    }
    return {std::move(text), bag};
}

std::string_view to_id(CaptionReject r) { return kRejectIds[static_cast<std::size_t>(r)]; }

std::optional<CaptionReject> caption_reject_from_id(std::string_view id) {
    auto it = std::find(kRejectIds.begin(), kRejectIds.end(), id);
    if (it == kRejectIds.end()) {
        return std::nullopt;
    }
    return static_cast<CaptionReject>(it - kRejectIds.begin());
}

std::size_t word_count(std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_word) {
            ++count;
        }
        in_word = !space;
    }
    return count;
}

CaptionVerdict validate_caption(std::string_view caption, const BagOfWords& /*bag*/, const CaptionLimits& limits) {
    const std::string low = lower(caption);
    auto start = low.find_first_not_of(" \t\r\n\"'");
    const std::string_view head = start == std::string::npos ? std::string_view{} : std::string_view(low).substr(start);
    for (auto prefix : kRefusalPrefixes) {
        if (head.starts_with(prefix)) {
            return {CaptionReject::refusal};
        }
    }
    for (auto fragment : kEchoFragments) {
        if (low.find(fragment) != std::string::npos) {
            return {CaptionReject::instruction_echo};
        }
    }
    const auto words = word_count(caption);
    if (words < limits.min_words) {
        return {CaptionReject::too_short};
    }
    if (words > limits.max_words) {
        return {CaptionReject::too_long};
    }
    if (!has_gender_term(caption)) {
        return {CaptionReject::missing_gender};
    }
    return {CaptionReject::ok};
}

std::string mock_fuse(const BagOfWords& bag, Rng& rng, const CaptionLimits& limits) {
    std::string text = "A " + join(bag.f1, " ");
    if (!bag.f2.empty()) {
        text += " with " + join(bag.f2, ", ");
    }
    text += '.';
    if (bag.blurry) {
        text += ' ';
        text += kBlurrySuffix;
    }
    if (bag.monochrome) {
        text += ' ';
        text += kMonochromeSuffix;
    }
    do {
        text += ' ';
        text += kFillers[rng.index(kFillers.size())];
    } while (word_count(text) < limits.min_words);
    return text;
}

std::string MockLlmClient::complete(const FusionPrompt& prompt, const DecodeParams& /*params*/,
                                    std::uint64_t request_seed) {
    Rng rng(request_seed);
    return mock_fuse(prompt.bag, rng, limits_);
}

Json caption_set_to_json(const CaptionSet& c) {
    Json rejected = Json::array();
    for (const auto& [text, reason] : c.rejected) {
        rejected.push_back({{"text", text}, {"reason", to_id(reason)}});
    }
    return Json{{"image_id", c.image_id},
                {"captions", c.captions},
                {"rejected", std::move(rejected)},
                {"decode_params", {{"temperature", c.decode_params.temperature}, {"max_tokens", c.decode_params.max_tokens}}},
                {"llm_model_id", c.llm_model_id},
                {"complete", c.complete}};
}

CaptionSet caption_set_from_json(const Json& j) {
    CaptionSet c;
    c.image_id = j.at("image_id").get<std::string>();
    c.captions = j.at("captions").get<std::vector<std::string>>();
    for (const auto& r : j.at("rejected")) {
        auto reason = caption_reject_from_id(r.at("reason").get<std::string>());
        if (!reason) {
            throw SchemaError("caption_set.rejected.reason", "unknown value");
        }
        c.rejected.emplace_back(r.at("text").get<std::string>(), *reason);
    }
    c.decode_params.temperature = j.at("decode_params").at("temperature").get<double>();
    c.decode_params.max_tokens = j.at("decode_params").at("max_tokens").get<std::int64_t>();
    c.llm_model_id = j.at("llm_model_id").get<std::string>();
    c.complete = j.at("complete").get<bool>();
    return c;
}

CaptionSet fuse_captions(const FusionPrompt& prompt, std::string image_id, const FusionOptions& options,
                         LlmClient& client, std::uint64_t seed) {
    if (options.captions_per_image == 0) {
        throw std::invalid_argument("captions_per_image must be at least 1");
    }
    CaptionSet set;
    set.image_id = std::move(image_id);
    set.decode_params = options.decode;
    set.llm_model_id = client.model_id();

    const std::size_t budget = options.attempts_per_caption * options.captions_per_image;
    for (std::size_t attempt = 0; attempt < budget && set.captions.size() < options.captions_per_image; ++attempt) {
        std::string text = client.complete(prompt, options.decode, stage_seed(seed, "request-" + std::to_string(attempt)));
        auto first = text.find_first_not_of(" \t\r\n");
        auto last = text.find_last_not_of(" \t\r\n");
        text = first == std::string::npos ? std::string{} : text.substr(first, last - first + 1);

        const auto verdict = validate_caption(text, prompt.bag, options.limits);
        if (verdict.accepted()) {
            set.captions.push_back(std::move(text));
        } else {
            set.rejected.emplace_back(std::move(text), verdict.reason);
        }
    }
    if (set.captions.empty()) {
        throw NoValidCaption("no valid caption for '" + set.image_id + "' after " + std::to_string(budget) +
                             " attempts");
    }
    set.complete = set.captions.size() == options.captions_per_image;
    return set;
}

}  // namespace facecap
