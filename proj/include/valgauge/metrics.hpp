#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "valgauge/core.hpp"
#include "valgauge/text.hpp"

namespace valgauge::metrics {

/// Named metric values for one domain, in insertion order.
struct MetricReport {
    DomainKind domain = DomainKind::media_review;
    std::size_t sample_count = 0;
    std::string tagger;
    std::vector<std::pair<std::string, double>> values;

    void set(std::string name, double value);
    [[nodiscard]] std::optional<double> get(std::string_view name) const;

    /// `key=value` lines: domain, sample_count, tagger, then every metric.
    [[nodiscard]] std::string to_text() const;
    static MetricReport from_text(std::string_view text);
};

struct PanelStats {
    std::vector<double> std_rel_pct;    ///< sigma_sim / sigma_gt * 100 per dimension
    std::vector<double> mean_abs_diff;  ///< |mean_sim| - |mean_gt| per dimension
    double avg_std_rel_pct = 0.0;
    double avg_mean_abs_diff = 0.0;
};

template <typename Label>
double accuracy(std::span<const Label> pred, std::span<const Label> truth)
{
    if (pred.size() != truth.size())
        fail(Errc::length_mismatch, "accuracy: prediction and truth lengths differ");
    if (pred.empty())
        fail(Errc::empty_input, "accuracy: no samples");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == truth[i])
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double mse(std::span<const double> pred, std::span<const double> truth);

/// Exact 1-Wasserstein distance between two empirical measures.
double wasserstein1(const EmpiricalDistribution& p, const EmpiricalDistribution& q);
/// Integrates |F_p^-1 - F_q^-1| over the merged breakpoints i/n and j/m.
double wasserstein1_quantile(const EmpiricalDistribution& p, const EmpiricalDistribution& q);
/// Mean absolute difference of order statistics; requires equal sizes.
double wasserstein1_equal_size(const EmpiricalDistribution& p, const EmpiricalDistribution& q);

double ttr(std::span<const std::string> tokens);

double population_mean(std::span<const double> xs);
/// Divides by n.
double population_variance(std::span<const double> xs);

/// Per-document statistics feeding the linguistic suite. POS fields are the
/// fraction of tokens carrying that tag.
struct DocumentStats {
    std::size_t tokens = 0;
    double avg_sentence_len = 0.0;
    double ttr = 0.0;
    double adj = 0.0;
    double adv = 0.0;
    double noun = 0.0;
    double verb = 0.0;
};

DocumentStats document_stats(std::string_view document, const text::PosTagger& tagger);

/// The seven distributional distances: doc_len, avg_len, ttr, adj, adv,
/// noun, verb (each suffixed "_wd"). Documents without tokens count toward
/// doc_len/avg_len as zeros and are skipped for the ratio statistics.
MetricReport linguistic_suite(std::span<const std::string> generated, std::span<const std::string> real,
                              const text::PosTagger& tagger = text::default_tagger());

inline constexpr std::string_view kLinguisticKeys[] = {"doc_len_wd", "avg_len_wd", "ttr_wd", "adj_wd",
                                                      "adv_wd",     "noun_wd",    "verb_wd"};

double var_pct(std::span<const double> sim, std::span<const double> gt);

PanelStats panel_stats(std::span<const std::vector<double>> sim, std::span<const std::vector<double>> gt);

double aggregate_var_pct(std::span<const double> per_domain);

}  // namespace valgauge::metrics
