#pragma once

#include <array>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "facecap/schema.hpp"

namespace facecap {

struct DebiasRule {
    Attribute target = Attribute::attractive;
    std::vector<Attribute> conditions;
    double drop_probability = 0;

    bool operator==(const DebiasRule&) const = default;
};

// Throws std::invalid_argument when the target is among its own conditions
// or the probability is outside [0, 1].
void validate_rule(const DebiasRule& rule);

// attractive is dropped with probability 0.8 when heavy makeup co-occurs.
std::vector<DebiasRule> default_debias_rules();

template <typename G>
concept UnitIntervalSource = requires(G g) {
    { g.uniform01() } -> std::convertible_to<double>;
};

struct DebiasResult {
    AttributeRecord record;
    std::vector<Attribute> dropped;
};

// Rules apply in list order. A draw is consumed only when a rule's target
// and all its conditions are present.
template <UnitIntervalSource G>
DebiasResult apply_debias(const AttributeRecord& r, const std::vector<DebiasRule>& rules, G& rng) {
    DebiasResult out{r, {}};
    auto& flags = out.record.attributes;
    for (const auto& rule : rules) {
        if (!flags.test(rule.target)) {
            continue;
        }
        bool conditions_met = true;
        for (auto c : rule.conditions) {
            conditions_met = conditions_met && flags.test(c);
        }
        if (!conditions_met) {
            continue;
        }
        if (rng.uniform01() < rule.drop_probability) {
            flags.clear(rule.target);
            out.dropped.push_back(rule.target);
        }
    }
    return out;
}

class EmptyInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConditionalProbability {
    Attribute event = Attribute::heavy_makeup;
    Attribute given = Attribute::attractive;
    double probability = 0;
    std::uint64_t joint = 0;
    std::uint64_t given_count = 0;
};

struct CooccurrenceReport {
    std::uint64_t total = 0;
    std::array<std::uint64_t, kAttributeCount> marginal{};
    // Symmetric; the diagonal equals the marginal.
    std::array<std::array<std::uint64_t, kAttributeCount>, kAttributeCount> joint{};
    std::vector<ConditionalProbability> conditionals;

    std::uint64_t marginal_of(Attribute a) const { return marginal[static_cast<std::size_t>(a)]; }
    std::uint64_t joint_of(Attribute a, Attribute b) const {
        return joint[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    }
    // P(event | given); 0 when `given` never occurs.
    double conditional(Attribute event, Attribute given) const;

    Json to_json() const;
};

// (event, given) pairs reported by default: makeup, lipstick and male flag
// conditioned on attractive.
std::vector<std::pair<Attribute, Attribute>> default_conditional_pairs();

// Mergeable partial counts, so shards can be reduced in any grouping.
class CooccurrenceCounter {
public:
    void add(const AttributeFlags& flags);
    void merge(const CooccurrenceCounter& other);
    std::uint64_t total() const { return total_; }

    CooccurrenceReport report(const std::vector<std::pair<Attribute, Attribute>>& pairs) const;

private:
    std::uint64_t total_ = 0;
    std::array<std::uint64_t, kAttributeCount> marginal_{};
    std::array<std::array<std::uint64_t, kAttributeCount>, kAttributeCount> joint_{};
};

CooccurrenceReport cooccurrence_stats(const std::vector<AttributeRecord>& records,
                                      const std::vector<std::pair<Attribute, Attribute>>& pairs =
                                          default_conditional_pairs());

}  // namespace facecap
