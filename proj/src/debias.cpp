#include "facecap/debias.hpp"

#include <algorithm>

namespace facecap {

void validate_rule(const DebiasRule& rule) {
    if (std::find(rule.conditions.begin(), rule.conditions.end(), rule.target) != rule.conditions.end()) {
        throw std::invalid_argument("debias rule target '" + std::string(to_id(rule.target)) +
                                    "' appears in its own condition set");
    }
    if (!(rule.drop_probability >= 0.0 && rule.drop_probability <= 1.0)) {
        throw std::invalid_argument("debias drop probability must lie in [0, 1]");
    }
}

std::vector<DebiasRule> default_debias_rules() {
    return {DebiasRule{Attribute::attractive, {Attribute::heavy_makeup}, 0.8}};
}

std::vector<std::pair<Attribute, Attribute>> default_conditional_pairs() {
    return {
        {Attribute::heavy_makeup, Attribute::attractive},
        {Attribute::wearing_lipstick, Attribute::attractive},
        {Attribute::male, Attribute::attractive},
    };
}

double CooccurrenceReport::conditional(Attribute event, Attribute given) const {
    const auto n = marginal_of(given);
    return n == 0 ? 0.0 : static_cast<double>(joint_of(event, given)) / static_cast<double>(n);
}

Json CooccurrenceReport::to_json() const {
    Json j;
    j["total"] = total;
    Json marg = Json::object();
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
        marg[std::string(attribute_ids()[i])] = marginal[i];
    }
    j["marginal"] = std::move(marg);
    Json pairs = Json::array();
    for (std::size_t a = 0; a < kAttributeCount; ++a) {
        for (std::size_t b = a + 1; b < kAttributeCount; ++b) {
            if (joint[a][b] > 0) {
                pairs.push_back({{"a", attribute_ids()[a]}, {"b", attribute_ids()[b]}, {"count", joint[a][b]}});
            }
        }
    }
    j["joint"] = std::move(pairs);
    Json cond = Json::array();
    for (const auto& c : conditionals) {
        cond.push_back({{"event", to_id(c.event)},
                        {"given", to_id(c.given)},
                        {"probability", c.probability},
                        {"joint", c.joint},
                        {"given_count", c.given_count}});
    }
    j["conditionals"] = std::move(cond);
    return j;
}

void CooccurrenceCounter::add(const AttributeFlags& flags) {
    ++total_;
    std::array<std::size_t, kAttributeCount> set{};
    std::size_t n = 0;
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
        if (flags.test(static_cast<Attribute>(i))) {
            set[n++] = i;
            ++marginal_[i];
        }
    }
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = 0; y < n; ++y) {
            ++joint_[set[x]][set[y]];
        }
    }
}

void CooccurrenceCounter::merge(const CooccurrenceCounter& other) {
    total_ += other.total_;
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
        marginal_[i] += other.marginal_[i];
        for (std::size_t k = 0; k < kAttributeCount; ++k) {
            joint_[i][k] += other.joint_[i][k];
        }
    }
}

CooccurrenceReport CooccurrenceCounter::report(const std::vector<std::pair<Attribute, Attribute>>& pairs) const {
    CooccurrenceReport r;
    r.total = total_;
    r.marginal = marginal_;
    r.joint = joint_;
    for (const auto& [event, given] : pairs) {
        ConditionalProbability c;
        c.event = event;
        c.given = given;
        c.joint = r.joint_of(event, given);
        c.given_count = r.marginal_of(given);
        c.probability = r.conditional(event, given);
        r.conditionals.push_back(c);
    }
    return r;
}

CooccurrenceReport cooccurrence_stats(const std::vector<AttributeRecord>& records,
                                      const std::vector<std::pair<Attribute, Attribute>>& pairs) {
    if (records.empty()) {
        throw EmptyInputError("co-occurrence statistics need at least one record");
    }
    CooccurrenceCounter counter;
    for (const auto& r : records) {
        counter.add(r.attributes);
    }
    return counter.report(pairs);
}

}  // namespace facecap
