#include "valgauge/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "valgauge/format.hpp"
#include "valgauge/metrics.hpp"
#include "valgauge/random.hpp"
#include "valgauge/text.hpp"

namespace valgauge::harness {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

std::int64_t day_of(std::int64_t ts)
{
    return ts >= 0 ? ts / kSecondsPerDay : -((-ts + kSecondsPerDay - 1) / kSecondsPerDay);
}

[[noreturn]] void rethrow_in_round(const Error& e, std::size_t round)
{
    throw Error(Errc::backend_failure, "round " + std::to_string(round) + ": " + e.message()).at_index(round);
}

std::vector<std::string> expect_candidates(CandidateSet set, std::size_t n)
{
    if (set.candidates.size() != n)
        fail(Errc::backend_failure, "backend returned " + std::to_string(set.candidates.size()) +
                                        " candidates, expected " + std::to_string(n));
    return std::move(set.candidates);
}

double checked_score(ScorerBackend& scorer, const std::string& action, const std::string& context,
                     const ValueProfile& profile)
{
    const double s = scorer.score(action, context, profile);
    if (!std::isfinite(s))
        fail(Errc::backend_failure, "scorer returned a non-finite score");
    return s;
}

std::uint64_t profile_hash(const ValueProfile& p)
{
    std::uint64_t h = 0x9ae16a3b2f90404fULL;
    for (double v : p.scores())
        h = splitmix64(h ^ std::hash<double>{}(v));
    return h;
}

enum class PromptKind { media, conversation, mobility, plain };

PromptKind detect_kind(std::string_view context)
{
    if (context.find("<|review|>") != std::string_view::npos)
        return PromptKind::media;
    if (context.find("<|Comment|>") != std::string_view::npos)
        return PromptKind::conversation;
    if (context.find("<|place|>") != std::string_view::npos)
        return PromptKind::mobility;
    return PromptKind::plain;
}

template <std::size_t N>
std::string_view pick(Rng& rng, const std::array<std::string_view, N>& bank)
{
    return bank[static_cast<std::size_t>(rng.below(N))];
}

constexpr std::array<std::string_view, 8> kAdjectives{"great", "friendly", "slow",  "cozy",
                                                      "noisy", "fresh",    "pricey", "quiet"};
constexpr std::array<std::string_view, 6> kNouns{"service", "food", "staff", "atmosphere", "coffee", "menu"};
constexpr std::array<std::string_view, 6> kTopics{"this plan", "the new rule", "that game", "the update",
                                                  "this idea", "the movie"};
constexpr std::array<std::string_view, 6> kPlaces{"Coffee Shop", "Park", "Gym", "Office", "Restaurant", "Museum"};

/// Distinct words of five or more letters from the prompt, in order of appearance.
std::vector<std::string> echo_words(std::string_view context)
{
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (auto& tok : text::tokenize(context)) {
        if (tok.size() < 5 || !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= 'a' && c <= 'z'; }))
            continue;
        if (seen.insert(tok).second)
            out.push_back(std::move(tok));
    }
    return out;
}

/// A clause reusing one prompt word, so candidates differ in overlap with the context.
std::string echo(Rng& rng, const std::vector<std::string>& words)
{
    if (words.empty())
        return "";
    return " The " + words[static_cast<std::size_t>(rng.below(words.size()))] + " part stood out.";
}

std::string planted_text(PromptKind kind, Rng& rng, double latent, const std::vector<std::string>& words)
{
    std::string body;
    switch (kind) {
    case PromptKind::media: {
        const int rating = std::clamp(static_cast<int>(std::lround(3.0 + 2.0 * latent)), 1, 5);
        body = "<|review|>The " + std::string(pick(rng, kNouns)) + " was " + std::string(pick(rng, kAdjectives)) +
               " and I would come back." + echo(rng, words) + "<|review|>\n<|rating|>" + std::to_string(rating) + "<|rating|>\n<|sentiment|>" +
               (rating >= 4 ? "positive" : rating <= 2 ? "negative" : "neutral") + "<|sentiment|>";
        break;
    }
    case PromptKind::conversation:
        body = "<|Comment|>I think " + std::string(pick(rng, kTopics)) + " is " +
               std::string(pick(rng, kAdjectives)) + ", honestly." + echo(rng, words) + "<|Comment|>\n<|attitude|>" +
               (latent > 0.2 ? "agree" : latent < -0.2 ? "disagree" : "neutral") + "<|attitude|>";
        break;
    case PromptKind::mobility: {
        const double hours = 0.25 * static_cast<double>(1 + rng.below(12));
        body = "<|place|>" + std::string(pick(rng, kPlaces)) + "<|place|>, and stay for <|time|>" +
               format_double(hours) + "<|time|> hours.";
        break;
    }
    case PromptKind::plain:
        body = "I would choose the " + std::string(pick(rng, kAdjectives)) + " option.";
        break;
    }
    return body + "\n<|latent|>" + format_double(latent) + "<|latent|>";
}

}  // namespace

void SimulationConfig::validate() const
{
    if (K < 1)
        fail(Errc::invalid_argument, "K must be at least 1");
    if (N < 1)
        fail(Errc::invalid_argument, "N must be at least 1");
    if (!std::isfinite(temperature) || temperature < 0.0)
        fail(Errc::invalid_argument, "temperature must be finite and non-negative");
}

// ---------------------------------------------------------------- memory

std::vector<double> bm25_scores(std::span<const std::string> documents, std::string_view query, Bm25Params params)
{
    const std::size_t n = documents.size();
    std::vector<double> scores(n, 0.0);
    if (n == 0)
        return scores;
    std::vector<std::unordered_map<std::string, std::size_t>> tf(n);
    std::vector<double> len(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& tok : text::tokenize(documents[i]))
            ++tf[i][tok];
        len[i] = 0.0;
        for (const auto& [tok, c] : tf[i])
            len[i] += static_cast<double>(c);
        total += len[i];
    }
    const double avgdl = total / static_cast<double>(n);
    if (avgdl == 0.0)
        return scores;
    auto terms = text::tokenize(query);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    for (const auto& term : terms) {
        std::size_t df = 0;
        for (const auto& doc : tf)
            df += doc.contains(term) ? 1 : 0;
        if (df == 0)
            continue;
        const double idf =
            std::log(1.0 + (static_cast<double>(n - df) + 0.5) / (static_cast<double>(df) + 0.5));
        for (std::size_t i = 0; i < n; ++i) {
            const auto it = tf[i].find(term);
            if (it == tf[i].end())
                continue;
            const double f = static_cast<double>(it->second);
            scores[i] += idf * f * (params.k1 + 1.0) /
                         (f + params.k1 * (1.0 - params.b + params.b * len[i] / avgdl));
        }
    }
    return scores;
}

std::string render_memory_entry(const InteractionRecord& r)
{
    switch (r.domain) {
    case DomainKind::media_review:
        return r.context_text + " | My review: " + r.action_text +
               (r.rating ? " | My rating: " + std::to_string(*r.rating) : std::string());
    case DomainKind::conversation:
        return r.action_text;
    case DomainKind::mobility: {
        std::string out = "went to " + r.poi_category.value_or("somewhere");
        if (r.stay_minutes)
            out += " and stayed " + format_hours(*r.stay_minutes) + " hours";
        out += ".";
        if (!r.action_text.empty())
            out += " " + r.action_text;
        return out;
    }
    }
    return r.action_text;
}

MemoryBundle construct_memory(std::span<const InteractionRecord> history, std::string_view query, std::size_t limit)
{
    MemoryBundle m;
    if (history.empty() || limit == 0)
        return m;
    std::vector<std::string> docs;
    docs.reserve(history.size());
    for (const auto& r : history) {
        std::string d = r.context_text + " " + r.action_text;
        if (r.poi_category)
            d += " " + *r.poi_category;
        docs.push_back(std::move(d));
    }
    const auto scores = bm25_scores(docs, query);
    std::vector<std::size_t> idx(history.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b])
            return scores[a] > scores[b];
        const auto ta = history[a].timestamp.value_or(INT64_MIN);
        const auto tb = history[b].timestamp.value_or(INT64_MIN);
        if (ta != tb)
            return ta > tb;
        return history[a].record_id < history[b].record_id;
    });
    idx.resize(std::min(limit, idx.size()));
    for (auto i : idx)
        m.longterm.push_back(render_memory_entry(history[i]));
    return m;
}

MemoryBundle construct_memory(std::span<const InteractionRecord> history, const InteractionRecord& target,
                              std::size_t limit)
{
    std::vector<InteractionRecord> rest;
    std::vector<std::string> working;
    for (const auto& r : history) {
        if (r.record_id == target.record_id)
            continue;
        bool session = false;
        if (target.domain == DomainKind::conversation)
            session = target.thread_key && r.thread_key == target.thread_key;
        else if (target.domain == DomainKind::mobility)
            session = target.timestamp && r.timestamp && day_of(*r.timestamp) == day_of(*target.timestamp);
        if (session)
            working.push_back(render_memory_entry(r));
        else
            rest.push_back(r);
    }
    auto m = construct_memory(rest, target.context_text, limit);
    for (const auto& w : working) {
        if (!m.working.empty())
            m.working += "\n";
        m.working += w;
    }
    return m;
}

// ------------------------------------------------------------- protocols

std::size_t select_best(std::span<const double> scores)
{
    if (scores.empty())
        fail(Errc::empty_input, "no scores to select from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best])
            best = i;
    }
    return best;
}

std::string bare_generation(GeneratorBackend& gen, const std::string& context, const ValueProfile& profile,
                            const SimulationConfig& cfg)
{
    cfg.validate();
    return expect_candidates(gen.generate(context, profile, 1, cfg.temperature, derive_seed(cfg.seed, 0)), 1)
        .front();
}

ReasoningResult reasoning_loop(GeneratorBackend& gen, ScorerBackend& scorer, const std::string& context,
                               const ValueProfile& profile, const SimulationConfig& cfg)
{
    cfg.validate();
    ReasoningResult r;
    try {
        r.initial = bare_generation(gen, context, profile, cfg);
    } catch (const Error& e) {
        if (e.code() != Errc::backend_failure)
            throw;
        rethrow_in_round(e, 0);
    }
    r.action = r.initial;
    for (std::size_t t = 1; t <= cfg.T; ++t) {
        AuditRound round;
        round.round = t;
        try {
            round.pool.push_back({r.action, 0.0, true});
            if (cfg.K > 1) {
                auto fresh = expect_candidates(
                    gen.generate(context, profile, cfg.K - 1, cfg.temperature, derive_seed(cfg.seed, t)), cfg.K - 1);
                for (auto& c : fresh)
                    round.pool.push_back({std::move(c), 0.0, false});
            }
            for (auto& c : round.pool)
                c.score = checked_score(scorer, c.text, context, profile);
        } catch (const Error& e) {
            if (e.code() != Errc::backend_failure)
                throw;
            rethrow_in_round(e, t);
        }
        std::vector<double> scores;
        for (const auto& c : round.pool)
            scores.push_back(c.score);
        round.best = select_best(scores);
        r.action = round.pool[round.best].text;
        r.rounds.push_back(std::move(round));
    }
    return r;
}

SelectionResult generate_then_select(GeneratorBackend& gen, ScorerBackend& scorer, const std::string& context,
                                     const ValueProfile& profile, std::size_t n, double temperature,
                                     std::uint64_t seed)
{
    if (n < 1)
        fail(Errc::invalid_argument, "candidate count must be at least 1");
    SelectionResult s;
    std::vector<double> scores;
    for (auto& c : expect_candidates(gen.generate(context, profile, n, temperature, seed), n)) {
        const double v = checked_score(scorer, c, context, profile);
        scores.push_back(v);
        s.candidates.push_back({std::move(c), v, false});
    }
    s.selected = select_best(scores);
    s.action = s.candidates[s.selected].text;
    return s;
}

// ------------------------------------------------------------- rigidity

RigidityResult rigidity_experiment(GeneratorBackend& gen, ScorerBackend& scorer, const RigidityConfig& cfg)
{
    if (cfg.rounds.empty() || cfg.agents == 0)
        fail(Errc::invalid_argument, "rigidity experiment needs rounds and agents");
    if (!(cfg.profile_halfwidth >= 0.0 && cfg.profile_halfwidth <= 1.0))
        fail(Errc::invalid_argument, "profile half-width must lie in [0, 1]");
    const std::size_t t_max = *std::max_element(cfg.rounds.begin(), cfg.rounds.end());
    RigidityResult out;
    out.rounds = cfg.rounds;
    out.latents.assign(cfg.rounds.size(), std::vector<double>(cfg.agents, 0.0));
    auto latent_of = [](const std::string& action) {
        const auto v = parse_double(parse_sentinels(action, "latent").value);
        if (!v || !std::isfinite(*v))
            fail(Errc::type_error, "latent sentinel is not a number");
        return *v;
    };
    run_parallel(cfg.agents, cfg.jobs, [&](std::size_t a) {
        const auto agent_seed = derive_seed(cfg.seed, a);
        Rng rng(derive_seed(agent_seed, "profile"));
        std::vector<double> v(kValueCount);
        for (auto& x : v)
            x = rng.uniform(-cfg.profile_halfwidth, cfg.profile_halfwidth);
        const auto profile = validate_profile(v);
        const std::string context = "Agent " + std::to_string(a) + " decides what to do next.";
        SimulationConfig sim;
        sim.K = cfg.K;
        sim.T = t_max;
        sim.temperature = cfg.temperature;
        sim.seed = agent_seed;
        const auto r = reasoning_loop(gen, scorer, context, profile, sim);
        for (std::size_t i = 0; i < cfg.rounds.size(); ++i) {
            const auto t = cfg.rounds[i];
            const auto& action = t == 0 ? r.initial : r.rounds[t - 1].pool[r.rounds[t - 1].best].text;
            out.latents[i][a] = latent_of(action);
        }
    });
    for (const auto& xs : out.latents) {
        out.mean.push_back(std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size()));
        out.variance.push_back(metrics::population_variance(xs));
    }
    return out;
}

// ------------------------------------------------------- preference pairs

double unigram_f1(std::string_view candidate, std::string_view truth)
{
    const auto a = text::tokenize(candidate);
    const auto b = text::tokenize(truth);
    if (a.empty() && b.empty())
        return 1.0;
    if (a.empty() || b.empty())
        return 0.0;
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& t : b)
        ++counts[t];
    std::size_t overlap = 0;
    for (const auto& t : a) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0)
        return 0.0;
    const double p = static_cast<double>(overlap) / static_cast<double>(a.size());
    const double r = static_cast<double>(overlap) / static_cast<double>(b.size());
    return 2.0 * p * r / (p + r);
}

PairBuildResult build_preference_pairs(GeneratorBackend& gen, const SimilarityFn& similarity,
                                       std::span<const PairJob> jobs, std::size_t K, double temperature,
                                       std::uint64_t seed)
{
    if (K < 1)
        fail(Errc::invalid_argument, "K must be at least 1");
    PairBuildResult out;
    for (const auto& job : jobs) {
        std::vector<std::string> cands;
        try {
            cands = with_retry([&] {
                return expect_candidates(
                    gen.generate(job.prompt, job.profile, K, temperature, derive_seed(seed, job.record_id)), K);
            });
        } catch (const Error& e) {
            if (e.code() != Errc::backend_failure)
                throw;
            out.skipped.push_back({job.record_id, e.message()});
            continue;
        }
        std::vector<double> sims;
        for (const auto& c : cands)
            sims.push_back(similarity(extract_primary(job.domain, c), job.ground_truth));
        std::size_t hi = 0, lo = 0;
        for (std::size_t i = 1; i < sims.size(); ++i) {
            if (sims[i] > sims[hi])
                hi = i;
            if (sims[i] < sims[lo])
                lo = i;
        }
        PreferencePair p;
        p.context_text = job.prompt;
        p.value_profile = job.profile;
        p.chosen = cands[hi];
        p.rejected = cands[lo];
        p.chosen_score = sims[hi];
        p.rejected_score = sims[lo];
        p.degenerate = sims[hi] == sims[lo];
        out.pairs.push_back(std::move(p));
        out.record_ids.push_back(job.record_id);
    }
    return out;
}

void run_parallel(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn)
{
    if (jobs == 0)
        jobs = std::max(1U, std::thread::hardware_concurrency());
    jobs = std::min(jobs, count);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            while (!stop) {
                const auto i = next++;
                if (i >= count)
                    return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!first)
                        first = std::current_exception();
                    stop = true;
                }
            }
        });
    }
    for (auto& t : workers)
        t.join();
    if (first)
        std::rethrow_exception(first);
}

// ------------------------------------------------------------ mock backends

PlantedGenerator::PlantedGenerator(ValueDimension focus, double spread) : m_focus(focus), m_spread(spread)
{
    if (!std::isfinite(spread) || spread < 0.0)
        fail(Errc::invalid_argument, "spread must be finite and non-negative");
}

CandidateSet PlantedGenerator::generate(const std::string& context, const ValueProfile& profile, std::size_t n,
                                        double temperature, std::uint64_t seed)
{
    if (n < 1)
        fail(Errc::backend_failure, "n must be at least 1");
    const auto kind = detect_kind(context);
    const auto base = derive_seed(seed, fnv1a(context) ^ profile_hash(profile));
    const double width = m_spread * std::max(temperature, 0.0);
    const auto words = echo_words(context);
    CandidateSet set;
    set.seed = seed;
    set.temperature = temperature;
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(base, i));
        const double latent = std::clamp(profile[m_focus] + width * rng.uniform(-1.0, 1.0), -1.0, 1.0);
        set.candidates.push_back(planted_text(kind, rng, latent, words));
    }
    return set;
}

double StereotypeScorer::score(const std::string& action, const std::string&, const ValueProfile&)
{
    try {
        const auto latent = parse_sentinels(action, "latent").value;
        const auto x = parse_double(latent);
        if (!x || !std::isfinite(*x))
            fail(Errc::backend_failure, "latent '" + latent + "' is not a number");
        return -std::abs(*x - m_target);
    } catch (const Error& e) {
        if (e.code() == Errc::backend_failure)
            throw;
        fail(Errc::backend_failure, "candidate has no latent score: " + e.message());
    }
}

void OracleGenerator::add(std::string prompt, std::string completion)
{
    m_answers.insert_or_assign(std::move(prompt), std::move(completion));
}

CandidateSet OracleGenerator::generate(const std::string& context, const ValueProfile&, std::size_t n,
                                       double temperature, std::uint64_t seed)
{
    const auto it = m_answers.find(context);
    if (it == m_answers.end())
        fail(Errc::backend_failure, "oracle has no completion for this prompt");
    return {std::vector<std::string>(n, it->second), seed, temperature};
}

VerifierScorer::VerifierScorer(verifier::VerifierParams params) : m_params(std::move(params))
{
    m_params.validate();
}

double VerifierScorer::score(const std::string& action, const std::string& context, const ValueProfile& profile)
{
    return verifier::score(m_params, action, context, profile).score;
}

}  // namespace valgauge::harness
