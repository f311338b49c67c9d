#include "valgauge/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "valgauge/format.hpp"

namespace valgauge::metrics {

void MetricReport::set(std::string name, double value)
{
    if (!std::isfinite(value))
        fail(Errc::non_finite, "metric '" + name + "' is not finite");
    for (auto& [k, v] : values) {
        if (k == name) {
            v = value;
            return;
        }
    }
    values.emplace_back(std::move(name), value);
}

std::optional<double> MetricReport::get(std::string_view name) const
{
    for (const auto& [k, v] : values) {
        if (k == name)
            return v;
    }
    return std::nullopt;
}

std::string MetricReport::to_text() const
{
    std::string out;
    out += "domain=" + std::string(domain_name(domain)) + "\n";
    out += "sample_count=" + std::to_string(sample_count) + "\n";
    out += "tagger=" + tagger + "\n";
    for (const auto& [k, v] : values)
        out += k + "=" + format_double(v) + "\n";
    return out;
}

MetricReport MetricReport::from_text(std::string_view text)
{
    MetricReport r;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(Errc::parse_error, "expected key=value").at_line(line_no);
        const auto key = line.substr(0, eq);
        const auto value = line.substr(eq + 1);
        if (key == "domain") {
            const auto d = parse_domain(value);
            if (!d)
                throw Error(Errc::parse_error, "unknown domain").at_line(line_no);
            r.domain = *d;
        } else if (key == "sample_count") {
            const auto n = parse_double(value);
            if (!n || *n < 0)
                throw Error(Errc::parse_error, "bad sample_count").at_line(line_no);
            r.sample_count = static_cast<std::size_t>(*n);
        } else if (key == "tagger") {
            r.tagger = std::string(value);
        } else {
            const auto v = parse_double(value);
            if (!v)
                throw Error(Errc::parse_error, "bad value for '" + std::string(key) + "'").at_line(line_no);
            r.set(std::string(key), *v);
        }
    }
    return r;
}

double mse(std::span<const double> pred, std::span<const double> truth)
{
    if (pred.size() != truth.size())
        fail(Errc::length_mismatch, "mse: prediction and truth lengths differ");
    if (pred.empty())
        fail(Errc::empty_input, "mse: no samples");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!std::isfinite(pred[i]) || !std::isfinite(truth[i]))
            throw Error(Errc::non_finite, "mse: non-finite entry").at_index(i);
        const double d = pred[i] - truth[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pred.size());
}

double wasserstein1_equal_size(const EmpiricalDistribution& p, const EmpiricalDistribution& q)
{
    if (p.size() != q.size())
        fail(Errc::length_mismatch, "equal-size W1 needs samples of the same size");
    const auto xs = p.samples();
    const auto ys = q.samples();
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        sum += std::abs(xs[i] - ys[i]);
    return sum / static_cast<double>(xs.size());
}

double wasserstein1_quantile(const EmpiricalDistribution& p, const EmpiricalDistribution& q)
{
    const auto xs = p.samples();
    const auto ys = q.samples();
    const std::uint64_t n = xs.size();
    const std::uint64_t m = ys.size();
    // Positions are measured in units of 1/(n*m) so every breakpoint is an integer.
    std::uint64_t pos = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    double sum = 0.0;
    while (i < n && j < m) {
        const std::uint64_t next_i = (i + 1) * m;
        const std::uint64_t next_j = (j + 1) * n;
        const std::uint64_t next = std::min(next_i, next_j);
        sum += std::abs(xs[i] - ys[j]) * static_cast<double>(next - pos);
        pos = next;
        if (pos == next_i)
            ++i;
        if (pos == next_j)
            ++j;
    }
    return sum / (static_cast<double>(n) * static_cast<double>(m));
}

double wasserstein1(const EmpiricalDistribution& p, const EmpiricalDistribution& q)
{
    if (p.size() == q.size())
        return wasserstein1_equal_size(p, q);
    return wasserstein1_quantile(p, q);
}

double ttr(std::span<const std::string> tokens)
{
    if (tokens.empty())
        fail(Errc::empty_input, "ttr: no tokens");
    std::unordered_set<std::string_view> distinct(tokens.begin(), tokens.end());
    return static_cast<double>(distinct.size()) / static_cast<double>(tokens.size());
}

double population_mean(std::span<const double> xs)
{
    if (xs.empty())
        fail(Errc::empty_input, "mean of an empty sample");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double population_variance(std::span<const double> xs)
{
    const double mean = population_mean(xs);
    double ss = 0.0;
    for (double x : xs)
        ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(xs.size());
}

DocumentStats document_stats(std::string_view document, const text::PosTagger& tagger)
{
    DocumentStats s;
    const auto tokens = text::tokenize(document);
    s.tokens = tokens.size();
    if (tokens.empty())
        return s;
    const auto sentences = text::split_sentences(document);
    s.avg_sentence_len = static_cast<double>(tokens.size()) / static_cast<double>(std::max<std::size_t>(1, sentences.size()));
    s.ttr = ttr(tokens);
    std::size_t adj = 0, adv = 0, noun = 0, verb = 0;
    for (const auto& t : tokens) {
        switch (tagger.tag(t)) {
        case text::PosTag::adj: ++adj; break;
        case text::PosTag::adv: ++adv; break;
        case text::PosTag::noun: ++noun; break;
        case text::PosTag::verb: ++verb; break;
        case text::PosTag::other: break;
        }
    }
    const auto n = static_cast<double>(tokens.size());
    s.adj = static_cast<double>(adj) / n;
    s.adv = static_cast<double>(adv) / n;
    s.noun = static_cast<double>(noun) / n;
    s.verb = static_cast<double>(verb) / n;
    return s;
}

namespace {

struct CorpusColumns {
    std::vector<double> doc_len, avg_len, ttr, adj, adv, noun, verb;
};

CorpusColumns corpus_columns(std::span<const std::string> docs, const text::PosTagger& tagger)
{
    CorpusColumns c;
    for (const auto& d : docs) {
        const auto s = document_stats(d, tagger);
        c.doc_len.push_back(static_cast<double>(s.tokens));
        c.avg_len.push_back(s.avg_sentence_len);
        if (s.tokens == 0)
            continue;
        c.ttr.push_back(s.ttr);
        c.adj.push_back(s.adj);
        c.adv.push_back(s.adv);
        c.noun.push_back(s.noun);
        c.verb.push_back(s.verb);
    }
    return c;
}

double column_w1(std::vector<double> a, std::vector<double> b, std::string_view name)
{
    if (a.empty() || b.empty())
        fail(Errc::empty_corpus, "no documents with tokens for statistic '" + std::string(name) + "'");
    return wasserstein1(EmpiricalDistribution(std::move(a)), EmpiricalDistribution(std::move(b)));
}

}  // namespace

MetricReport linguistic_suite(std::span<const std::string> generated, std::span<const std::string> real,
                              const text::PosTagger& tagger)
{
    if (generated.empty() || real.empty())
        fail(Errc::empty_corpus, "linguistic suite needs non-empty generated and real corpora");
    auto g = corpus_columns(generated, tagger);
    auto r = corpus_columns(real, tagger);
    MetricReport report;
    report.sample_count = generated.size();
    report.tagger = tagger.identity();
    report.set("doc_len_wd", column_w1(std::move(g.doc_len), std::move(r.doc_len), "doc_len"));
    report.set("avg_len_wd", column_w1(std::move(g.avg_len), std::move(r.avg_len), "avg_len"));
    report.set("ttr_wd", column_w1(std::move(g.ttr), std::move(r.ttr), "ttr"));
    report.set("adj_wd", column_w1(std::move(g.adj), std::move(r.adj), "adj"));
    report.set("adv_wd", column_w1(std::move(g.adv), std::move(r.adv), "adv"));
    report.set("noun_wd", column_w1(std::move(g.noun), std::move(r.noun), "noun"));
    report.set("verb_wd", column_w1(std::move(g.verb), std::move(r.verb), "verb"));
    return report;
}

double var_pct(std::span<const double> sim, std::span<const double> gt)
{
    if (sim.size() < 2 || gt.size() < 2)
        fail(Errc::too_few_samples, "Var% needs at least two samples per population");
    const double var_gt = population_variance(gt);
    if (var_gt == 0.0)
        fail(Errc::degenerate_ground_truth, "ground-truth variance is zero");
    const double var_sim = population_variance(sim);
    return (var_sim - var_gt) / var_gt * 100.0;
}

PanelStats panel_stats(std::span<const std::vector<double>> sim, std::span<const std::vector<double>> gt)
{
    if (sim.size() != gt.size())
        fail(Errc::length_mismatch, "panel stats: dimension counts differ");
    if (sim.empty())
        fail(Errc::empty_input, "panel stats: no dimensions");
    PanelStats out;
    for (std::size_t k = 0; k < sim.size(); ++k) {
        if (sim[k].size() < 2 || gt[k].size() < 2)
            throw Error(Errc::too_few_samples, "panel stats: fewer than two samples").at_index(k);
        const double sd_gt = std::sqrt(population_variance(gt[k]));
        if (sd_gt == 0.0)
            throw Error(Errc::degenerate_ground_truth, "panel stats: zero ground-truth spread").at_index(k);
        const double sd_sim = std::sqrt(population_variance(sim[k]));
        out.std_rel_pct.push_back(sd_sim / sd_gt * 100.0);
        out.mean_abs_diff.push_back(std::abs(population_mean(sim[k])) - std::abs(population_mean(gt[k])));
    }
    const auto dims = static_cast<double>(sim.size());
    out.avg_std_rel_pct = std::accumulate(out.std_rel_pct.begin(), out.std_rel_pct.end(), 0.0) / dims;
    out.avg_mean_abs_diff = std::accumulate(out.mean_abs_diff.begin(), out.mean_abs_diff.end(), 0.0) / dims;
    return out;
}

double aggregate_var_pct(std::span<const double> per_domain)
{
    if (per_domain.empty())
        fail(Errc::empty_input, "no per-domain Var% values");
    return std::accumulate(per_domain.begin(), per_domain.end(), 0.0) / static_cast<double>(per_domain.size());
}

}  // namespace valgauge::metrics
