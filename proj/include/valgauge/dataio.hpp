#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "valgauge/core.hpp"
#include "valgauge/metrics.hpp"

namespace valgauge::dataio {

inline constexpr int kSchemaVersion = 1;

/// Label vocabularies are optional per field; an absent list leaves the field
/// unconstrained. Ratings are always 1..5.
struct DatasetHeader {
    int schema_version = kSchemaVersion;
    DomainKind domain = DomainKind::media_review;
    std::map<std::string, std::vector<std::string>> vocabularies;

    friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct UserProfile {
    ValueProfile values;
    std::string intro;

    friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

struct Dataset {
    DatasetHeader header;
    std::map<std::string, UserProfile> profiles;  ///< by user id
    std::vector<InteractionRecord> records;

    /// Sorted distinct user ids of the records.
    [[nodiscard]] std::vector<std::string> users() const;
    /// Records of one user in file order.
    [[nodiscard]] std::vector<InteractionRecord> records_of(std::string_view user) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Newline-delimited JSON: a header line, then "profile" and "record" lines.
/// Errors carry the 1-based line number. Throws Errc::parse_error,
/// Errc::schema_error or Errc::vocabulary_violation.
Dataset parse_dataset(std::string_view text);
/// Canonical form: header, profiles sorted by user id, records in order.
std::string format_dataset(const Dataset& d);

Dataset load(const std::string& path);
void save(const std::string& path, const Dataset& d);

/// Domain and vocabulary checks over an in-memory dataset.
void validate(const Dataset& d);

struct SplitSpec {
    double holdout_fraction = 0.10;
    std::uint64_t seed = 0;
};

/// User-level split: the sorted user ids are shuffled with the seed and the
/// first ceil(fraction * users) go to eval. Throws Errc::too_few_users or
/// Errc::invalid_argument.
std::pair<Dataset, Dataset> split_users(const Dataset& d, const SplitSpec& spec);

/// Deterministic synthetic dataset; each user gets 3 to 5 records and a profile
/// drawn uniformly from [-0.8, 0.8] per value.
Dataset synth_fixtures(DomainKind domain, std::size_t n_users, std::uint64_t seed);

/// n stratified draws from a uniform law with the given mean and variance
/// (one draw per equal-probability stratum, strata shuffled).
std::vector<double> planted_population(std::size_t n, double mean, double variance, std::uint64_t seed);

/// One simulated action, aligned to an eval record by id.
struct Prediction {
    std::string record_id;
    std::string action_text;
    std::optional<int> rating;
    std::optional<std::string> sentiment;
    std::optional<std::string> attitude;
    std::optional<std::string> poi_category;
    std::optional<double> stay_minutes;
    std::optional<double> latent;
    std::optional<std::string> error;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

std::vector<Prediction> parse_predictions(std::string_view text);
std::string format_predictions(std::span<const Prediction> preds);

/// Line-level alignment problems (unknown, duplicate or missing ids); empty when aligned.
std::vector<std::string> alignment_problems(const Dataset& eval, std::span<const Prediction> preds);

/// Domain metrics plus, for text domains, the linguistic suite. Throws
/// Errc::label_mismatch when predictions are not aligned. A missing predicted
/// label counts as wrong; a label metric is omitted when the ground truth
/// never carries that label.
metrics::MetricReport evaluate(const Dataset& eval, std::span<const Prediction> preds);

}  // namespace valgauge::dataio
