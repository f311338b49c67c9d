#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "valgauge/error.hpp"

namespace valgauge {

inline constexpr std::size_t kValueCount = 10;

/// The ten Schwartz values. Enumerator order is the circumplex order and is
/// used as the ground-truth circular sequence by the topology module.
enum class ValueDimension : std::uint8_t {
    self_direction,
    stimulation,
    hedonism,
    achievement,
    power,
    security,
    conformity,
    tradition,
    benevolence,
    universalism,
};

const std::array<ValueDimension, kValueCount>& canonical_order() noexcept;
std::string_view dimension_name(ValueDimension v) noexcept;
/// Accepts the display name ("Self-Direction") or a case-insensitive slug
/// ("self-direction", "self_direction").
std::optional<ValueDimension> parse_dimension(std::string_view name);

constexpr std::size_t index_of(ValueDimension v) noexcept { return static_cast<std::size_t>(v); }

/// An agent's value preference vector; every entry finite and in [-1, 1].
class ValueProfile {
  public:
    ValueProfile() = default;

    [[nodiscard]] double operator[](ValueDimension v) const noexcept { return m_scores[index_of(v)]; }
    [[nodiscard]] double at(std::size_t i) const { return m_scores.at(i); }
    [[nodiscard]] const std::array<double, kValueCount>& scores() const noexcept { return m_scores; }

    friend bool operator==(const ValueProfile&, const ValueProfile&) = default;

  private:
    friend ValueProfile validate_profile(std::span<const double> raw);
    std::array<double, kValueCount> m_scores{};
};

/// Throws Errc::wrong_arity, Errc::non_finite or Errc::out_of_range (with index and value).
ValueProfile validate_profile(std::span<const double> raw);

/// Per-context attention weights over the ten values, each in [0, 1].
class ValueActivation {
  public:
    ValueActivation() = default;

    [[nodiscard]] double operator[](ValueDimension v) const noexcept { return m_weights[index_of(v)]; }
    [[nodiscard]] double at(std::size_t i) const { return m_weights.at(i); }
    [[nodiscard]] const std::array<double, kValueCount>& weights() const noexcept { return m_weights; }

    friend bool operator==(const ValueActivation&, const ValueActivation&) = default;

  private:
    friend ValueActivation validate_activation(std::span<const double> raw);
    std::array<double, kValueCount> m_weights{};
};

ValueActivation validate_activation(std::span<const double> raw);

enum class DomainKind : std::uint8_t { media_review, conversation, mobility };

std::string_view domain_name(DomainKind d) noexcept;
std::optional<DomainKind> parse_domain(std::string_view name);

struct InteractionRecord {
    std::string record_id;
    std::string user_id;
    DomainKind domain = DomainKind::media_review;
    std::string context_text;
    std::string action_text;
    std::optional<int> rating;
    std::optional<std::string> sentiment;
    std::optional<std::string> attitude;
    std::optional<std::string> poi_category;
    std::optional<double> stay_minutes;
    std::optional<std::string> group_key;
    std::optional<std::string> thread_key;
    std::optional<std::int64_t> timestamp;

    friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

/// Checks the per-record invariants (rating range, stay duration sign,
/// domain-required fields). Throws Errc::schema_error with the field name.
void check_record(const InteractionRecord& r);

/// A non-empty finite sample, kept sorted ascending.
class EmpiricalDistribution {
  public:
    explicit EmpiricalDistribution(std::vector<double> samples);

    [[nodiscard]] std::span<const double> samples() const noexcept { return m_samples; }
    [[nodiscard]] std::size_t size() const noexcept { return m_samples.size(); }
    /// Left-continuous inverse CDF for u in (0, 1].
    [[nodiscard]] double quantile(double u) const;
    [[nodiscard]] double cdf(double x) const;

  private:
    std::vector<double> m_samples;
};

struct CandidateSet {
    std::vector<std::string> candidates;
    std::uint64_t seed = 0;
    double temperature = 0.0;
};

struct PreferencePair {
    std::string context_text;
    ValueProfile value_profile;
    std::string chosen;
    std::string rejected;
    double chosen_score = 0.0;
    double rejected_score = 0.0;
    bool degenerate = false;

    friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

}  // namespace valgauge
