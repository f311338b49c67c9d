// Acceptance run: one line per criterion, non-zero exit if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "valgauge/dataio.hpp"
#include "valgauge/harness.hpp"
#include "valgauge/lexical.hpp"
#include "valgauge/metrics.hpp"
#include "valgauge/prompt.hpp"
#include "valgauge/random.hpp"
#include "valgauge/topology.hpp"
#include "valgauge/verifier.hpp"

using namespace valgauge;
using Clock = std::chrono::steady_clock;

namespace {

/// Collects failures for one criterion; the first few are echoed as detail.
class Check {
  public:
    void expect(bool ok, const std::string& what)
    {
        ++m_checks;
        if (ok)
            return;
        ++m_failures;
        if (m_notes.size() < 3)
            m_notes.push_back(what);
    }
    void note(std::string s) { m_info.push_back(std::move(s)); }

    [[nodiscard]] bool passed() const { return m_failures == 0; }
    [[nodiscard]] std::string detail() const
    {
        std::ostringstream s;
        s << m_checks << " checks";
        if (m_failures)
            s << ", " << m_failures << " failed";
        for (const auto& i : m_info)
            s << "; " << i;
        for (const auto& n : m_notes)
            s << "; FAIL " << n;
        return s.str();
    }

  private:
    std::size_t m_checks = 0, m_failures = 0;
    std::vector<std::string> m_notes, m_info;
};

std::string fmt(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::vector<double> sample(Rng& rng, std::size_t n, double lo = -5.0, double hi = 5.0)
{
    std::vector<double> xs(n);
    for (auto& x : xs)
        x = rng.uniform(lo, hi);
    return xs;
}

double w1(std::vector<double> a, std::vector<double> b)
{
    return metrics::wasserstein1(EmpiricalDistribution(std::move(a)), EmpiricalDistribution(std::move(b)));
}

ValueProfile random_profile(Rng& rng, double h = 1.0)
{
    std::vector<double> v(kValueCount);
    for (auto& x : v)
        x = rng.uniform(-h, h);
    return validate_profile(v);
}

Eigen::VectorXd random_vector(Rng& rng, int d, double scale = 1.0)
{
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i)
        v(i) = scale * rng.normal();
    return v;
}

double plain_variance(const std::vector<double>& xs)
{
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs)
        v += (x - m) * (x - m);
    return v / static_cast<double>(xs.size());
}

// ---------------------------------------------------------------- criteria

void w1_oracle(Check& c)
{
    const auto start = Clock::now();
    Rng rng(derive_seed(101, "w1-oracle"));
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        auto x = sample(rng, 1 + rng.below(6));
        auto y = sample(rng, 1 + rng.below(6));
        if (i % 4 == 0)
            for (auto& v : y)
                v = std::round(v);
        const double got = w1(x, y);
        const double want = oracle::w1_transport(x, y);
        worst = std::max(worst, std::abs(got - want));
        c.expect(std::abs(got - want) < 1e-9, "instance " + std::to_string(i));
        if (x.size() == y.size())
            c.expect(std::abs(got - oracle::w1_permutations(x, y)) < 1e-9, "permutation route " + std::to_string(i));
    }
    for (int i = 0; i < 1000; ++i) {
        const auto p = sample(rng, 1 + rng.below(8)), q = sample(rng, 1 + rng.below(8)), r = sample(rng, 1 + rng.below(8));
        const double pq = w1(p, q);
        c.expect(w1(p, p) == 0.0, "identity");
        c.expect(pq >= 0.0, "non-negativity");
        c.expect(std::abs(pq - w1(q, p)) < 1e-12, "symmetry");
        c.expect(w1(p, r) <= pq + w1(q, r) + 1e-12, "triangle");
        const double shift = rng.uniform(-3, 3), scale = rng.uniform(-3, 3);
        auto ps = p, qs = q, pa = p, qa = q;
        for (auto& x : ps) x += shift;
        for (auto& x : qs) x += shift;
        for (auto& x : pa) x *= scale;
        for (auto& x : qa) x *= scale;
        c.expect(std::abs(w1(ps, qs) - pq) < 1e-12, "translation");
        c.expect(std::abs(w1(pa, qa) - std::abs(scale) * pq) < 1e-12, "scale");
    }
    const double elapsed = seconds_since(start);
    c.expect(elapsed < 10.0, "runtime " + fmt(elapsed) + " s");
    c.note("max |delta| " + fmt(worst));
    c.note(fmt(elapsed) + " s");
}

void w1_closed(Check& c)
{
    c.expect(w1({1.5, -2.0, 4.0}, {4.0, 1.5, -2.0}) == 0.0, "identical samples");
    c.expect(w1({0}, {5}) == 5.0, "({0},{5})");
    const double v = w1({0, 1}, {0, 0, 3});
    const double grid = oracle::w1_fine_grid({0, 1}, {0, 0, 3});
    c.expect(std::abs(v - grid) < 1e-4, "fine grid " + fmt(grid));
    c.expect(std::abs(v - 5.0 / 6.0) < 1e-12, "5/6");
    c.note("({0,1},{0,0,3}) = " + fmt(v) + ", grid " + fmt(grid));
}

void cis_oracle(Check& c)
{
    using topology::CircularSequence;
    Rng rng(derive_seed(103, "cis"));
    auto labels = [](std::size_t n) {
        return std::vector<ValueDimension>(canonical_order().begin(),
                                           canonical_order().begin() + static_cast<std::ptrdiff_t>(n));
    };
    auto ints = [](const CircularSequence& s) {
        std::vector<int> out;
        for (auto v : s.order())
            out.push_back(static_cast<int>(index_of(v)));
        return out;
    };
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 3 + rng.below(6);
        auto a = labels(n), b = labels(n);
        rng.shuffle(std::span<ValueDimension>(a));
        rng.shuffle(std::span<ValueDimension>(b));
        const CircularSequence obs(a), gt(b);
        c.expect(topology::circular_inversion_distance(obs, gt) == oracle::circular_distance_brute(ints(obs), ints(gt)),
                 "pair " + std::to_string(i));
        c.expect(topology::cis(gt, gt) == 1.0, "self");
        const double base = topology::cis(obs, gt);
        for (std::size_t k = 0; k < n; ++k) {
            c.expect(topology::cis(obs.rotated(k), gt) == base, "rotating the observation");
            // The reference is a fixed linear order, so rotating it is a different problem.
            const auto ref = gt.rotated(k);
            c.expect(topology::circular_inversion_distance(obs, ref) ==
                         oracle::circular_distance_brute(ints(obs), ints(ref)),
                     "rotated reference against brute force");
        }
    }
}

void gradient_check(Check& c)
{
    const auto start = Clock::now();
    Rng rng(derive_seed(104, "gradients"));
    std::set<std::string> groups_seen;
    double worst = 0.0;
    const int instances = 24;
    for (int n = 0; n < instances; ++n) {
        const int d = 2 + static_cast<int>(rng.below(4));
        const auto p = verifier::init_params(d, rng.next_u64(), 0);
        std::vector<verifier::EncodedPair> batch;
        for (std::size_t i = 0, b = 1 + rng.below(4); i < b; ++i)
            batch.push_back({random_vector(rng, d), random_vector(rng, d), random_vector(rng, d), random_profile(rng)});
        auto analytic = verifier::loss_and_gradient(p, batch);
        auto probe = p;
        auto views = verifier::parameter_groups(probe);
        auto grads = verifier::parameter_groups(analytic.grad);
        const double h = 1e-5;
        for (std::size_t g = 0; g < views.size(); ++g) {
            auto& view = views[g].second;
            groups_seen.insert(views[g].first);
            for (Eigen::Index i = 0; i < view.size(); ++i) {
                const double saved = view(i);
                view(i) = saved + h;
                const double up = verifier::loss_and_gradient(probe, batch).loss;
                view(i) = saved - h;
                const double down = verifier::loss_and_gradient(probe, batch).loss;
                view(i) = saved;
                const double numeric = (up - down) / (2.0 * h);
                const double a = grads[g].second(i);
                const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-7});
                worst = std::max(worst, rel);
                c.expect(rel < 1e-4, views[g].first + "[" + std::to_string(i) + "] rel " + fmt(rel));
            }
        }
    }
    // value table, three attention maps, and weights plus bias of each of the three MLP layers
    c.expect(groups_seen.size() == 10, "parameter groups " + std::to_string(groups_seen.size()));
    const double elapsed = seconds_since(start);
    c.expect(elapsed < 30.0, "runtime " + fmt(elapsed) + " s");
    c.note(std::to_string(instances) + " instances, " + std::to_string(groups_seen.size()) + " groups, max rel " +
           fmt(worst));
    c.note(fmt(elapsed) + " s");
}

void learnability(Check& c)
{
    const auto planted = verifier::planted_separable_pairs(8, 200, 1000, 42);
    const auto result = verifier::train(verifier::init_params(8, 42, 0), planted.train, {0.05, 500, 42});
    const double acc = verifier::pair_accuracy(result.params, planted.held_out);
    c.expect(planted.train.size() == 200, "train size");
    c.expect(result.loss_trace.size() == 501, "500 epochs");
    c.expect(acc >= 0.95, "held-out accuracy " + fmt(acc));
    c.note("held-out accuracy " + fmt(acc) + " after 500 epochs, loss " + fmt(result.loss_trace.front()) + " -> " +
           fmt(result.loss_trace.back()));
}

void activation_normalization(Check& c)
{
    Rng rng(derive_seed(106, "attention"));
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const int d = 2 + static_cast<int>(rng.below(15));
        const auto p = verifier::init_params(d, rng.next_u64(), 0);
        const double scale = i % 10 == 0 ? 25.0 : 2.0;
        const auto a = verifier::cross_attention(p, random_vector(rng, d, scale), random_profile(rng));
        const double dev = std::abs(a.weights.sum() - 1.0);
        worst = std::max(worst, dev);
        c.expect(dev < 1e-9, "sum deviates by " + fmt(dev));
        c.expect(a.weights.minCoeff() >= 0.0 && a.weights.maxCoeff() <= 1.0, "weight outside [0,1]");
    }
    c.note("max |sum - 1| " + fmt(worst));
}

void lexical_oracle(Check& c)
{
    Rng rng(derive_seed(107, "lexical"));
    const std::vector<std::string> vocab{"river", "stone", "light", "honest", "quick", "bread", "music", "storm", "glass"};
    const lexical::StopWords none;
    std::size_t rows_checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<std::string>> corpus(1 + rng.below(20));
        std::vector<ValueActivation> acts;
        for (auto& doc : corpus) {
            for (std::size_t i = 0, n = rng.below(10); i < n; ++i)
                doc.push_back(vocab[rng.below(vocab.size())]);
            std::vector<double> w(kValueCount);
            for (auto& x : w)
                x = rng.uniform();
            acts.push_back(validate_activation(w));
        }
        const auto weighted = lexical::tfidf_weights(corpus, none);
        const double eps = trial % 2 ? lexical::kDefaultEpsilon : 0.0;
        const auto got = lexical::relevance(weighted, acts, eps);

        // tf-idf weights recomputed from the raw corpus, not taken from the library
        const auto tfidf = oracle::tfidf(corpus, {});
        std::vector<std::vector<double>> t;
        for (const auto& word : got.words)
            t.push_back(tfidf.at(word));
        std::vector<std::array<double, kValueCount>> a;
        for (const auto& x : acts)
            a.push_back(x.weights());
        const auto want = oracle::relevance(t, a, eps);
        for (std::size_t k = 0; k < want.size(); ++k)
            for (std::size_t j = 0; j < kValueCount; ++j)
                c.expect(std::abs(got.raw[k][j] - want[k][j]) < 1e-12, "corpus " + std::to_string(trial));

        const auto norm = lexical::row_normalize(got);
        for (std::size_t k = 0; k < got.raw.size(); ++k) {
            const auto& row = got.raw[k];
            if (*std::max_element(row.begin(), row.end()) == *std::min_element(row.begin(), row.end()))
                continue;
            ++rows_checked;
            c.expect(std::max_element(row.begin(), row.end()) - row.begin() ==
                         std::max_element(norm.normalized[k].begin(), norm.normalized[k].end()) -
                             norm.normalized[k].begin(),
                     "argmax of row " + std::to_string(k));
        }
    }
    c.note(std::to_string(rows_checked) + " non-constant rows");
}

void algorithm_semantics(Check& c)
{
    harness::PlantedGenerator gen;
    harness::StereotypeScorer scorer;
    Rng rng(derive_seed(108, "algorithm"));
    for (int run = 0; run < 100; ++run) {
        harness::SimulationConfig cfg;
        cfg.seed = rng.next_u64();
        cfg.K = 1 + rng.below(5);
        const auto profile = random_profile(rng);
        const std::string ctx = "Context " + std::to_string(run) + " <|review|> prompt";

        cfg.T = 0;
        const auto bare = harness::bare_generation(gen, ctx, profile, cfg);
        const auto zero = harness::reasoning_loop(gen, scorer, ctx, profile, cfg);
        c.expect(zero.action == bare, "T = 0 differs from bare generation");
        c.expect(zero.rounds.empty(), "T = 0 has rounds");

        cfg.T = 8;
        const auto full = harness::reasoning_loop(gen, scorer, ctx, profile, cfg);
        double prev = -INFINITY;
        for (const auto& round : full.rounds) {
            const double best = round.pool[round.best].score;
            c.expect(best >= prev, "best score fell in run " + std::to_string(run));
            prev = best;
        }
        c.expect(full.initial == bare, "initial action differs from bare generation");
    }

    struct Mapped final : harness::ScorerBackend {
        harness::ScorerBackend& inner;
        std::function<double(double)> f;
        Mapped(harness::ScorerBackend& s, std::function<double(double)> g) : inner(s), f(std::move(g)) {}
        double score(const std::string& a, const std::string& x, const ValueProfile& p) override
        {
            return f(inner.score(a, x, p));
        }
        [[nodiscard]] harness::BackendInfo info() const override { return inner.info(); }
    };
    Mapped affine(scorer, [](double x) { return 0.25 * x - 4.0; });
    Mapped cubic(scorer, [](double x) { return x * x * x + x; });
    Mapped logistic(scorer, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    for (int run = 0; run < 100; ++run) {
        harness::SimulationConfig cfg;
        cfg.seed = rng.next_u64();
        cfg.T = 1 + rng.below(6);
        const auto profile = random_profile(rng);
        const auto want = harness::reasoning_loop(gen, scorer, "invariance", profile, cfg);
        for (harness::ScorerBackend* s : std::initializer_list<harness::ScorerBackend*>{&affine, &cubic, &logistic}) {
            const auto got = harness::reasoning_loop(gen, *s, "invariance", profile, cfg);
            c.expect(got.action == want.action, "transformed scorer changed the action");
            for (std::size_t t = 0; t < want.rounds.size(); ++t)
                c.expect(got.rounds[t].best == want.rounds[t].best, "transformed scorer changed a selection");
        }
    }
}

void rigidity(Check& c)
{
    const auto start = Clock::now();
    harness::PlantedGenerator gen;
    harness::StereotypeScorer scorer;
    harness::RigidityConfig cfg;
    cfg.agents = 200;
    cfg.rounds = {0, 1, 4, 8};
    cfg.seed = 2025;
    const auto r = harness::rigidity_experiment(gen, scorer, cfg);
    const auto& v = r.variance;
    c.expect(v[3] < v[2], "Var8 < Var4");
    c.expect(v[2] <= v[1], "Var4 <= Var1");
    c.expect(v[1] < v[0], "Var1 < Var0");
    c.expect(v[3] < 0.5 * v[0], "Var8 < 0.5 Var0");
    const double elapsed = seconds_since(start);
    c.expect(elapsed < 60.0, "runtime " + fmt(elapsed) + " s");
    c.note("Var0 " + fmt(v[0]) + ", Var1 " + fmt(v[1]) + ", Var4 " + fmt(v[2]) + ", Var8 " + fmt(v[3]));
    c.note(fmt(elapsed) + " s");
}

void variance_stats(Check& c)
{
    Rng rng(derive_seed(110, "variance"));
    std::vector<std::vector<double>> panel(kValueCount);
    for (auto& dim : panel) {
        dim = sample(rng, 100, -1.0, 1.0);
        c.expect(metrics::var_pct(dim, dim) == 0.0, "var_pct(gt, gt)");
    }
    const auto same = metrics::panel_stats(panel, panel);
    for (double s : same.std_rel_pct)
        c.expect(s == 100.0, "std_rel_pct " + fmt(s));
    c.expect(same.avg_std_rel_pct == 100.0, "avg_std_rel_pct");

    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto gt = dataio::planted_population(500, 0.1, 0.04, derive_seed(seed, "gt"));
        const auto sim = dataio::planted_population(500, 0.1, 0.08, derive_seed(seed, "sim"));
        const double got = metrics::var_pct(sim, gt);
        const double direct = (plain_variance(sim) - plain_variance(gt)) / plain_variance(gt) * 100.0;
        worst = std::max(worst, std::abs(got - 100.0));
        c.expect(std::abs(got - 100.0) <= 5.0, "planted doubling gave " + fmt(got));
        c.expect(std::abs(got - direct) < 1e-9, "direct formula");
    }
    c.note("planted doubling within " + fmt(worst) + " of +100");
}

void split_integrity(Check& c)
{
    Rng rng(derive_seed(111, "split"));
    for (int trial = 0; trial < 100; ++trial) {
        dataio::Dataset d;
        d.header.domain = DomainKind::conversation;
        const auto users = 2 + rng.below(40);
        int id = 0;
        for (std::uint64_t u = 0; u < users; ++u) {
            for (std::uint64_t k = 0, n = 1 + rng.below(5); k < n; ++k) {
                InteractionRecord r;
                r.record_id = "r" + std::to_string(id++);
                r.user_id = "user-" + std::to_string(rng.below(100000)) + "-" + std::to_string(u);
                r.domain = DomainKind::conversation;
                r.context_text = "c";
                r.action_text = rng.below(3) ? "dup" : "a" + std::to_string(k);
                d.records.push_back(r);
            }
        }
        rng.shuffle(std::span<InteractionRecord>(d.records));
        const dataio::SplitSpec spec{0.02 + 0.96 * rng.uniform(), rng.next_u64()};
        const auto [train, eval] = dataio::split_users(d, spec);

        const auto tu = train.users(), eu = eval.users();
        std::set<std::string> both(tu.begin(), tu.end());
        for (const auto& u : eu)
            c.expect(!both.contains(u), "user on both sides");
        c.expect(tu.size() + eu.size() == d.users().size(), "user count");

        std::multiset<std::string> original, joined;
        for (const auto& r : d.records)
            original.insert(r.record_id + "|" + r.user_id + "|" + r.action_text);
        for (const auto* part : {&train, &eval})
            for (const auto& r : part->records)
                joined.insert(r.record_id + "|" + r.user_id + "|" + r.action_text);
        c.expect(joined == original, "record multiset");
        c.expect(dataio::split_users(d, spec) == std::make_pair(train, eval), "same seed, different split");
    }
}

void sentinel_round_trip(Check& c)
{
    std::size_t records = 0;
    for (const auto* name : {"media_review", "conversation", "mobility"}) {
        const auto d = dataio::load(std::string(VALGAUGE_SOURCE_DIR) + "/data/fixtures/" + name + ".ndjson");
        for (const auto& r : d.records) {
            ++records;
            const auto& profile = d.profiles.at(r.user_id);
            const auto history = d.records_of(r.user_id);
            const auto memory = harness::construct_memory(history, r, 5);
            const auto prompt = harness::render_prompt(d.header.domain, r, memory, profile.values, profile.intro);
            harness::OracleGenerator mock;
            mock.add(prompt.text(), harness::render_completion(r));
            harness::SimulationConfig cfg;
            cfg.T = 0;
            const auto completion = harness::bare_generation(mock, prompt.text(), profile.values, cfg);
            try {
                const auto got = harness::parse_completion(d.header.domain, completion);
                const bool ok = got.action_text == harness::primary_field(r) && got.rating == r.rating &&
                                got.sentiment == r.sentiment && got.attitude == r.attitude &&
                                got.poi_category == r.poi_category && got.stay_minutes == r.stay_minutes;
                c.expect(ok, r.record_id + " fields differ");
            } catch (const Error& e) {
                c.expect(false, r.record_id + ": " + e.what());
            }
        }
    }
    c.note(std::to_string(records) + " fixture records");
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
        {"W1 oracle equivalence", w1_oracle},
        {"W1 closed cases", w1_closed},
        {"CIS oracle equivalence", cis_oracle},
        {"verifier gradient check", gradient_check},
        {"verifier learnability", learnability},
        {"activation normalization", activation_normalization},
        {"lexical oracle", lexical_oracle},
        {"reasoning loop semantics", algorithm_semantics},
        {"rigidity trend", rigidity},
        {"var_pct and panel_stats", variance_stats},
        {"split integrity", split_integrity},
        {"sentinel round-trip", sentinel_round_trip},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        try {
            criteria[i].second(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("threw: ") + e.what());
        }
        if (!c.passed())
            ++failed;
        std::cout << (c.passed() ? "PASS" : "FAIL") << "  [" << (i + 1 < 10 ? " " : "") << i + 1 << "] "
                  << criteria[i].first << ": " << c.detail() << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
              << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
