#include "valgauge/lexical.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_map>

#include "valgauge/format.hpp"

namespace valgauge::lexical {

namespace detail {
extern const std::string_view kBundledStopwords;
}

StopWords parse_stopwords(std::string_view text)
{
    StopWords words;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty() || line.front() == '#')
            continue;
        std::string w(line);
        std::ranges::transform(w, w.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        words.insert(std::move(w));
    }
    return words;
}

const StopWords& default_stopwords()
{
    static const StopWords words = parse_stopwords(detail::kBundledStopwords);
    return words;
}

std::string_view default_stopwords_version() noexcept { return "stopwords_en_v1"; }

double WeightedCorpus::weight(std::size_t word, std::size_t doc) const
{
    const auto& row = weights.at(doc);
    const auto it = std::lower_bound(row.begin(), row.end(), word,
                                     [](const auto& entry, std::size_t w) { return entry.first < w; });
    return it != row.end() && it->first == word ? it->second : 0.0;
}

std::size_t WeightedCorpus::word_index(std::string_view word) const
{
    const auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), word);
    if (it == vocabulary.end() || *it != word)
        return static_cast<std::size_t>(-1);
    return static_cast<std::size_t>(it - vocabulary.begin());
}

WeightedCorpus tfidf_weights(std::span<const std::vector<std::string>> corpus, const StopWords& stopwords)
{
    if (corpus.empty())
        fail(Errc::empty_corpus, "tf-idf needs at least one document");
    WeightedCorpus out;
    out.documents.reserve(corpus.size());
    std::map<std::string, std::size_t> df;
    for (const auto& doc : corpus) {
        std::vector<std::string> kept;
        for (const auto& tok : doc) {
            if (!stopwords.contains(tok))
                kept.push_back(tok);
        }
        std::vector<std::string> distinct = kept;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        for (auto& w : distinct)
            ++df[w];
        out.documents.push_back(std::move(kept));
    }
    out.vocabulary.reserve(df.size());
    std::vector<double> idf;
    idf.reserve(df.size());
    const auto n_docs = static_cast<double>(corpus.size());
    for (const auto& [word, count] : df) {
        out.vocabulary.push_back(word);
        idf.push_back(std::log((1.0 + n_docs) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    out.weights.reserve(out.documents.size());
    for (const auto& doc : out.documents) {
        std::map<std::size_t, std::size_t> counts;
        for (const auto& tok : doc)
            ++counts[out.word_index(tok)];
        std::vector<std::pair<std::size_t, double>> row;
        row.reserve(counts.size());
        const auto len = static_cast<double>(doc.size());
        for (const auto& [w, c] : counts)
            row.emplace_back(w, static_cast<double>(c) / len * idf[w]);
        out.weights.push_back(std::move(row));
    }
    return out;
}

RelevanceMatrix relevance(const WeightedCorpus& weighted, std::span<const ValueActivation> activations,
                          double epsilon)
{
    if (activations.size() != weighted.weights.size())
        fail(Errc::length_mismatch, "relevance: " + std::to_string(activations.size()) + " activations for " +
                                        std::to_string(weighted.weights.size()) + " documents");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        fail(Errc::invalid_argument, "relevance: epsilon must be finite and non-negative");
    const std::size_t n_words = weighted.vocabulary.size();
    std::vector<ValueRow> numer(n_words, ValueRow{});
    std::vector<double> denom(n_words, 0.0);
    for (std::size_t i = 0; i < weighted.weights.size(); ++i) {
        const auto& a = activations[i].weights();
        for (const auto& [w, t] : weighted.weights[i]) {
            denom[w] += t;
            for (std::size_t k = 0; k < kValueCount; ++k)
                numer[w][k] += t * a[k];
        }
    }
    RelevanceMatrix m;
    m.words = weighted.vocabulary;
    m.raw.resize(n_words);
    for (std::size_t w = 0; w < n_words; ++w) {
        const double d = denom[w] + epsilon;
        for (std::size_t k = 0; k < kValueCount; ++k)
            m.raw[w][k] = d > 0.0 ? numer[w][k] / d : 0.0;
    }
    return m;
}

RelevanceMatrix row_normalize(RelevanceMatrix m)
{
    m.normalized.assign(m.raw.size(), ValueRow{});
    m.constant_rows.assign(m.raw.size(), false);
    for (std::size_t w = 0; w < m.raw.size(); ++w) {
        const auto& row = m.raw[w];
        const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
        const double span = *hi - *lo;
        if (span == 0.0) {
            m.constant_rows[w] = true;
            continue;
        }
        for (std::size_t k = 0; k < kValueCount; ++k)
            m.normalized[w][k] = (row[k] - *lo) / span;
        // Pin the extremes so max_j is exactly 1 despite rounding.
        m.normalized[w][static_cast<std::size_t>(lo - row.begin())] = 0.0;
        m.normalized[w][static_cast<std::size_t>(hi - row.begin())] = 1.0;
    }
    return m;
}

TopWords top_words(const RelevanceMatrix& m, ValueDimension v, std::size_t k)
{
    if (k < 1)
        fail(Errc::invalid_argument, "top_words: k must be at least 1");
    const auto col = index_of(v);
    std::vector<std::size_t> order(m.words.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (m.raw[a][col] != m.raw[b][col])
            return m.raw[a][col] > m.raw[b][col];
        return m.words[a] < m.words[b];
    });
    TopWords out;
    out.k_too_large = k > order.size();
    const auto take = std::min(k, order.size());
    for (std::size_t i = 0; i < take; ++i)
        out.words.emplace_back(m.words[order[i]], m.raw[order[i]][col]);
    return out;
}

std::map<std::string, GroupActivation>
group_activation(std::span<const std::pair<std::string, ValueActivation>> records)
{
    if (records.empty())
        fail(Errc::empty_input, "group_activation: no records");
    std::map<std::string, std::pair<std::size_t, ValueRow>> sums;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& [key, act] = records[i];
        if (key.empty())
            throw Error(Errc::missing_field, "record without a group key").at_index(i).with_field("group_key");
        auto& [count, sum] = sums[key];
        ++count;
        for (std::size_t k = 0; k < kValueCount; ++k)
            sum[k] += act.weights()[k];
    }
    std::map<std::string, GroupActivation> out;
    for (auto& [key, entry] : sums) {
        auto& [count, sum] = entry;
        for (auto& x : sum)
            x /= static_cast<double>(count);
        out[key] = GroupActivation{count, validate_activation(sum)};
    }
    return out;
}

namespace {

std::size_t primary_of(const ValueRow& row)
{
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::string header_columns()
{
    std::string h;
    for (auto v : canonical_order()) {
        h += '\t';
        h += dimension_name(v);
    }
    return h;
}

}  // namespace

std::string heatmap_tsv(const RelevanceMatrix& m)
{
    if (!m.is_normalized())
        fail(Errc::invalid_argument, "heatmap export needs a row-normalized matrix");
    std::vector<std::size_t> order(m.words.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (m.constant_rows[a] != m.constant_rows[b])
            return !m.constant_rows[a];
        const auto pa = primary_of(m.raw[a]);
        const auto pb = primary_of(m.raw[b]);
        if (!m.constant_rows[a] && pa != pb)
            return pa < pb;
        if (!m.constant_rows[a] && m.raw[a][pa] != m.raw[b][pb])
            return m.raw[a][pa] > m.raw[b][pb];
        return m.words[a] < m.words[b];
    });
    std::string out = "word" + header_columns() + "\tprimary\n";
    for (auto w : order) {
        out += m.words[w];
        for (double x : m.normalized[w]) {
            out += '\t';
            out += format_fixed(x, 6);
        }
        out += '\t';
        out += m.constant_rows[w] ? std::string("-") : std::string(dimension_name(canonical_order()[primary_of(m.raw[w])]));
        out += '\n';
    }
    return out;
}

std::string wordcloud_tsv(const RelevanceMatrix& m, std::size_t k)
{
    std::string out = "dimension\trank\tword\tscore\n";
    for (auto v : canonical_order()) {
        const auto top = top_words(m, v, k);
        for (std::size_t r = 0; r < top.words.size(); ++r) {
            out += std::string(dimension_name(v)) + "\t" + std::to_string(r + 1) + "\t" + top.words[r].first + "\t" +
                   format_double(top.words[r].second) + "\n";
        }
    }
    return out;
}

std::string group_activation_tsv(const std::map<std::string, GroupActivation>& groups)
{
    std::string out = "group\tcount" + header_columns() + "\n";
    for (const auto& [key, g] : groups) {
        out += key + "\t" + std::to_string(g.count);
        for (double x : g.mean.weights()) {
            out += '\t';
            out += format_fixed(x, 6);
        }
        out += '\n';
    }
    return out;
}

}  // namespace valgauge::lexical
