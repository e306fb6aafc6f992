#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "facecap/bow.hpp"
#include "facecap/rng.hpp"

namespace facecap {

class EmptyBag : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Transport failure that survived every retry.
class ServiceUnreachable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-retryable answer from the service (bad request, auth, malformed body).
class ServiceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoValidCaption : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FusionPrompt {
    std::string text;
    BagOfWords bag;
};

inline constexpr std::string_view kBlurrySuffix = "The image is blurry.";
inline constexpr std::string_view kMonochromeSuffix = "The image is black and white.";

FusionPrompt build_prompt(const BagOfWords& bag);

enum class CaptionReject : std::uint8_t { ok, too_short, too_long, instruction_echo, refusal, missing_gender };
std::string_view to_id(CaptionReject r);
std::optional<CaptionReject> caption_reject_from_id(std::string_view id);

struct CaptionLimits {
    std::size_t min_words = 15;
    std::size_t max_words = 120;
};

struct CaptionVerdict {
    CaptionReject reason = CaptionReject::ok;
    bool accepted() const { return reason == CaptionReject::ok; }
};

std::size_t word_count(std::string_view text);

CaptionVerdict validate_caption(std::string_view caption, const BagOfWords& bag, const CaptionLimits& limits = {});

// Offline stand-in for the language model: every bag phrase appears
// verbatim, followed by one or more filler sentences picked by `rng` until
// the word floor is reached.
std::string mock_fuse(const BagOfWords& bag, Rng& rng, const CaptionLimits& limits = {});

struct DecodeParams {
    double temperature = 0.7;
    std::int64_t max_tokens = 160;
    bool operator==(const DecodeParams&) const = default;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;

    // One completion for `prompt`. `request_seed` lets offline clients stay
    // deterministic; remote clients may ignore it.
    virtual std::string complete(const FusionPrompt& prompt, const DecodeParams& params, std::uint64_t request_seed) = 0;
    virtual std::string model_id() const = 0;
};

class MockLlmClient final : public LlmClient {
public:
    explicit MockLlmClient(CaptionLimits limits = {}) : limits_(limits) {}

    std::string complete(const FusionPrompt& prompt, const DecodeParams& params, std::uint64_t request_seed) override;
    std::string model_id() const override { return "mock-fuser/1"; }

private:
    CaptionLimits limits_;
};

struct CaptionSet {
    std::string image_id;
    std::vector<std::string> captions;
    std::vector<std::pair<std::string, CaptionReject>> rejected;
    DecodeParams decode_params;
    std::string llm_model_id;
    // False when the attempt budget ran out before `n` captions were found.
    bool complete = true;

    bool operator==(const CaptionSet&) const = default;
};

Json caption_set_to_json(const CaptionSet& c);
CaptionSet caption_set_from_json(const Json& j);

struct FusionOptions {
    std::size_t captions_per_image = 3;
    // Completion requests allowed per caption wanted.
    std::size_t attempts_per_caption = 3;
    DecodeParams decode;
    CaptionLimits limits;
};

// Requests completions until `n` captions validate or the budget of
// attempts_per_caption * n requests is spent. Throws NoValidCaption when
// nothing validates; transport errors from the client propagate.
CaptionSet fuse_captions(const FusionPrompt& prompt, std::string image_id, const FusionOptions& options,
                         LlmClient& client, std::uint64_t seed);

}  // namespace facecap
