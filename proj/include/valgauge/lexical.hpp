#pragma once

#include <array>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "valgauge/core.hpp"

namespace valgauge::lexical {

using StopWords = std::set<std::string, std::less<>>;

/// The bundled list (data/stopwords_en_v1.txt, compiled in).
const StopWords& default_stopwords();
std::string_view default_stopwords_version() noexcept;
/// One word per line, '#' comments, blank lines ignored.
StopWords parse_stopwords(std::string_view text);

inline constexpr std::string_view kTfidfVariant = "tf=count/len;idf=ln((1+N)/(1+df))+1";

struct WeightedCorpus {
    /// Tokens per document after stop-word removal.
    std::vector<std::vector<std::string>> documents;
    /// Sorted distinct non-stop-word tokens.
    std::vector<std::string> vocabulary;
    /// Per document: (vocabulary index, t_{w,i}) sorted by index; zero weights omitted.
    std::vector<std::vector<std::pair<std::size_t, double>>> weights;

    [[nodiscard]] double weight(std::size_t word, std::size_t doc) const;
    [[nodiscard]] std::size_t word_index(std::string_view word) const;  ///< npos when absent
};

WeightedCorpus tfidf_weights(std::span<const std::vector<std::string>> corpus, const StopWords& stopwords);

using ValueRow = std::array<double, kValueCount>;

struct RelevanceMatrix {
    std::vector<std::string> words;
    std::vector<ValueRow> raw;
    /// Filled by row_normalize.
    std::vector<ValueRow> normalized;
    /// Rows whose raw entries are all equal; their normalized entries are zeros.
    std::vector<bool> constant_rows;

    [[nodiscard]] bool is_normalized() const noexcept { return !normalized.empty(); }
};

inline constexpr double kDefaultEpsilon = 1e-8;

/// S(w, v_k) = sum_i t_{w,i} a_k^(i) / (sum_i t_{w,i} + epsilon). With epsilon = 0
/// a word carrying no weight gets S = 0.
RelevanceMatrix relevance(const WeightedCorpus& weighted, std::span<const ValueActivation> activations,
                          double epsilon = kDefaultEpsilon);

/// Row-wise min-max normalization into `normalized`; constant rows become zeros and are flagged.
RelevanceMatrix row_normalize(RelevanceMatrix m);

struct TopWords {
    std::vector<std::pair<std::string, double>> words;
    bool k_too_large = false;
};

/// Top-k by unnormalized S(w, v), ties broken lexicographically. When k exceeds
/// the vocabulary the full ranking is returned and flagged.
TopWords top_words(const RelevanceMatrix& m, ValueDimension v, std::size_t k);

struct GroupActivation {
    std::size_t count = 0;
    ValueActivation mean;
};

std::map<std::string, GroupActivation>
group_activation(std::span<const std::pair<std::string, ValueActivation>> records);

/// Tab-separated heatmap: word, ten normalized columns, primary value. Rows are
/// grouped by primary value (canonical order) and sorted by descending raw score
/// on that value; constant rows come last with primary "-".
std::string heatmap_tsv(const RelevanceMatrix& normalized);
/// Tab-separated (dimension, rank, word, raw score) for the top-k words of every value.
std::string wordcloud_tsv(const RelevanceMatrix& m, std::size_t k);
std::string group_activation_tsv(const std::map<std::string, GroupActivation>& groups);

}  // namespace valgauge::lexical
