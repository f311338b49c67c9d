#include "valgauge/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace valgauge {

namespace {

constexpr std::array<std::string_view, kValueCount> kDimensionNames = {
    "Self-Direction", "Stimulation", "Hedonism",  "Achievement", "Power",
    "Security",       "Conformity",  "Tradition", "Benevolence", "Universalism",
};

std::string slug(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '_' || c == ' ')
            c = '-';
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

}  // namespace

const std::array<ValueDimension, kValueCount>& canonical_order() noexcept
{
    static constexpr std::array<ValueDimension, kValueCount> order = {
        ValueDimension::self_direction, ValueDimension::stimulation, ValueDimension::hedonism,
        ValueDimension::achievement,    ValueDimension::power,       ValueDimension::security,
        ValueDimension::conformity,     ValueDimension::tradition,   ValueDimension::benevolence,
        ValueDimension::universalism,
    };
    return order;
}

std::string_view dimension_name(ValueDimension v) noexcept { return kDimensionNames[index_of(v)]; }

std::optional<ValueDimension> parse_dimension(std::string_view name)
{
    const auto wanted = slug(name);
    for (auto v : canonical_order()) {
        if (slug(dimension_name(v)) == wanted)
            return v;
    }
    return std::nullopt;
}

ValueProfile validate_profile(std::span<const double> raw)
{
    if (raw.size() != kValueCount)
        fail(Errc::wrong_arity, "value profile needs 10 entries, got " + std::to_string(raw.size()));
    ValueProfile p;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = raw[i];
        if (!std::isfinite(v))
            throw Error(Errc::non_finite, "profile entry " + std::to_string(i) + " is not finite").at_index(i);
        if (v < -1.0 || v > 1.0)
            throw Error(Errc::out_of_range, "profile entry " + std::to_string(i) + " outside [-1, 1]")
                .at_index(i)
                .with_value(v);
        p.m_scores[i] = v;
    }
    return p;
}

ValueActivation validate_activation(std::span<const double> raw)
{
    if (raw.size() != kValueCount)
        fail(Errc::wrong_arity, "value activation needs 10 entries, got " + std::to_string(raw.size()));
    ValueActivation a;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = raw[i];
        if (!std::isfinite(v))
            throw Error(Errc::non_finite, "activation entry " + std::to_string(i) + " is not finite").at_index(i);
        if (v < 0.0 || v > 1.0)
            throw Error(Errc::out_of_range, "activation entry " + std::to_string(i) + " outside [0, 1]")
                .at_index(i)
                .with_value(v);
        a.m_weights[i] = v;
    }
    return a;
}

std::string_view domain_name(DomainKind d) noexcept
{
    switch (d) {
    case DomainKind::media_review: return "media_review";
    case DomainKind::conversation: return "conversation";
    case DomainKind::mobility: return "mobility";
    }
    return "unknown";
}

std::optional<DomainKind> parse_domain(std::string_view name)
{
    const auto s = slug(name);
    if (s == "media-review" || s == "media")
        return DomainKind::media_review;
    if (s == "conversation")
        return DomainKind::conversation;
    if (s == "mobility")
        return DomainKind::mobility;
    return std::nullopt;
}

void check_record(const InteractionRecord& r)
{
    auto schema = [&](std::string field, const std::string& what) {
        throw Error(Errc::schema_error, "record '" + r.record_id + "': " + what).with_field(std::move(field));
    };
    if (r.record_id.empty())
        schema("record_id", "empty record id");
    if (r.user_id.empty())
        schema("user_id", "empty user id");
    if (r.rating && (*r.rating < 1 || *r.rating > 5))
        throw Error(Errc::vocabulary_violation, "record '" + r.record_id + "': rating " +
                                                    std::to_string(*r.rating) + " outside 1..5")
            .with_field("rating");
    if (r.stay_minutes && !(std::isfinite(*r.stay_minutes) && *r.stay_minutes >= 0.0))
        schema("stay_minutes", "stay_minutes must be finite and non-negative");
    switch (r.domain) {
    case DomainKind::media_review:
        if (!r.rating)
            schema("rating", "media review records need a rating");
        break;
    case DomainKind::mobility:
        if (!r.poi_category)
            schema("poi_category", "mobility records need a poi_category");
        if (!r.stay_minutes)
            schema("stay_minutes", "mobility records need stay_minutes");
        break;
    case DomainKind::conversation:
        break;
    }
}

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples) : m_samples(std::move(samples))
{
    if (m_samples.empty())
        fail(Errc::empty_input, "empirical distribution needs at least one sample");
    for (std::size_t i = 0; i < m_samples.size(); ++i) {
        if (!std::isfinite(m_samples[i]))
            throw Error(Errc::non_finite, "sample " + std::to_string(i) + " is not finite").at_index(i);
    }
    std::sort(m_samples.begin(), m_samples.end());
}

double EmpiricalDistribution::quantile(double u) const
{
    const auto n = static_cast<double>(m_samples.size());
    auto k = static_cast<std::size_t>(std::ceil(u * n));
    k = std::clamp<std::size_t>(k, 1, m_samples.size());
    return m_samples[k - 1];
}

double EmpiricalDistribution::cdf(double x) const
{
    const auto it = std::upper_bound(m_samples.begin(), m_samples.end(), x);
    return static_cast<double>(it - m_samples.begin()) / static_cast<double>(m_samples.size());
}

}  // namespace valgauge
