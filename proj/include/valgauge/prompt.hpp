#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "valgauge/core.hpp"

namespace valgauge::harness {

/// Recent-context and retrieved-history strings fed into a prompt.
struct MemoryBundle {
    std::string working;
    std::vector<std::string> longterm;
};

struct Prompt {
    std::string system;
    std::string user;

    /// "[System]\n...\n\n[User]\n..." as sent to text backends.
    [[nodiscard]] std::string text() const;
};

/// "Self-Direction: 0.50, Stimulation: -0.20, ..." with two decimals.
std::string format_value_preference(const ValueProfile& profile);

/// Fills the domain's role-play template. `intro` is the optional self-introduction.
/// Throws Errc::missing_field when the record lacks what the template needs.
Prompt render_prompt(DomainKind domain, const InteractionRecord& record, const MemoryBundle& memory,
                     const ValueProfile& profile, std::string_view intro = {});

/// The assistant turn carrying the record's ground truth in sentinel form.
/// Sentiment and attitude labels, when present, follow as their own sentinels.
std::string render_completion(const InteractionRecord& record);

/// Stay durations are rendered in hours with shortest round-trip decimals.
std::string format_hours(double minutes);

struct SentinelField {
    std::string value;
    /// Marker pairs after the first one; they are ignored.
    std::size_t extra_pairs = 0;
};

/// Trimmed text between the first pair of "<|tag|>" markers.
/// Throws Errc::missing_sentinel or Errc::unbalanced_sentinel.
SentinelField parse_sentinels(std::string_view text, std::string_view tag);

/// Integer 1..5, otherwise Errc::type_error.
int parse_rating(std::string_view value);

/// Minutes from a stay value. Bare numbers and "h"/"hour(s)" are hours and
/// are converted x60; "min"/"minute(s)" are taken as minutes.
double parse_stay_minutes(std::string_view value);

std::string_view primary_tag(DomainKind domain) noexcept;

/// Fields recovered from one completion.
struct ParsedAction {
    std::string action_text;
    std::optional<int> rating;
    std::optional<std::string> sentiment;
    std::optional<std::string> attitude;
    std::optional<std::string> poi_category;
    std::optional<double> stay_minutes;
    std::optional<double> latent;
};

/// Parses every field the domain's template defines, plus the optional
/// sentiment/attitude/latent sentinels. Template fields must be present.
ParsedAction parse_completion(DomainKind domain, std::string_view text);

/// The ground-truth counterpart of the primary sentinel field: the review or
/// comment text, or the POI category for mobility.
std::string primary_field(const InteractionRecord& record);

/// The candidate's primary sentinel content, or the whole text when absent.
std::string extract_primary(DomainKind domain, std::string_view candidate);

}  // namespace valgauge::harness
