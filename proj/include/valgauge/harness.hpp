#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "valgauge/core.hpp"
#include "valgauge/prompt.hpp"
#include "valgauge/verifier.hpp"

namespace valgauge::harness {

/// What a backend declares about itself during the handshake.
struct BackendInfo {
    std::string name;
    int protocol_version = 1;
    bool deterministic = true;
    /// Maximum concurrent requests; 0 means unlimited.
    int max_inflight = 0;
};

/// Failures surface as Errc::backend_failure.
class GeneratorBackend {
  public:
    virtual ~GeneratorBackend() = default;
    virtual CandidateSet generate(const std::string& context, const ValueProfile& profile, std::size_t n,
                                  double temperature, std::uint64_t seed) = 0;
    [[nodiscard]] virtual BackendInfo info() const = 0;
};

class ScorerBackend {
  public:
    virtual ~ScorerBackend() = default;
    virtual double score(const std::string& action, const std::string& context, const ValueProfile& profile) = 0;
    [[nodiscard]] virtual BackendInfo info() const = 0;
};

struct SimulationConfig {
    std::size_t K = 3;
    std::size_t T = 0;
    std::size_t N = 5;
    double temperature = 1.0;
    std::uint64_t seed = 0;
    std::size_t retrieval_limit = 5;

    /// Throws Errc::invalid_argument.
    void validate() const;
};

// ---------------------------------------------------------------- memory

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Okapi BM25 of every document against `query` using the metrics tokenizer.
/// idf = ln(1 + (N - df + 0.5) / (df + 0.5)); repeated query terms count once.
std::vector<double> bm25_scores(std::span<const std::string> documents, std::string_view query,
                                Bm25Params params = {});

/// One line per history record as it appears inside a prompt.
std::string render_memory_entry(const InteractionRecord& r);

/// Longterm memory only: the top `limit` history records by BM25 against
/// `query`, ties by recency (later timestamp, then later position) then record id.
MemoryBundle construct_memory(std::span<const InteractionRecord> history, std::string_view query, std::size_t limit);

/// Full memory for `target`: records of the same thread (conversation) or the
/// same UTC day (mobility) form the working context verbatim; the rest is
/// ranked against the target's context.
MemoryBundle construct_memory(std::span<const InteractionRecord> history, const InteractionRecord& target,
                              std::size_t limit);

// ------------------------------------------------------------- protocols

struct ScoredCandidate {
    std::string text;
    double score = 0.0;
    bool carried = false;  ///< the previous round's best
};

struct AuditRound {
    std::size_t round = 0;
    std::vector<ScoredCandidate> pool;
    std::size_t best = 0;
};

struct ReasoningResult {
    std::string action;
    std::string initial;
    std::vector<AuditRound> rounds;
};

/// Index of the maximum score, earliest on ties. Throws Errc::empty_input.
std::size_t select_best(std::span<const double> scores);

/// The initial generation on its own (seed derive_seed(cfg.seed, 0)).
std::string bare_generation(GeneratorBackend& gen, const std::string& context, const ValueProfile& profile,
                            const SimulationConfig& cfg);

/// Iterative value reasoning: initial action, then T rounds over a pool of the
/// current best plus K - 1 fresh candidates. Backend failures are rethrown with
/// the round index attached.
ReasoningResult reasoning_loop(GeneratorBackend& gen, ScorerBackend& scorer, const std::string& context,
                               const ValueProfile& profile, const SimulationConfig& cfg);

struct SelectionResult {
    std::size_t selected = 0;
    std::string action;
    std::vector<ScoredCandidate> candidates;
};

/// Sample n candidates in one batch, score each, keep the argmax.
SelectionResult generate_then_select(GeneratorBackend& gen, ScorerBackend& scorer, const std::string& context,
                                     const ValueProfile& profile, std::size_t n, double temperature,
                                     std::uint64_t seed);

// ------------------------------------------------------------- rigidity

struct RigidityConfig {
    std::vector<std::size_t> rounds{0, 1, 4, 8};
    std::size_t agents = 200;
    std::size_t K = 3;
    double temperature = 1.0;
    /// Agent profiles are uniform in [-h, h] on every dimension.
    double profile_halfwidth = 0.2;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

struct RigidityResult {
    std::vector<std::size_t> rounds;
    /// latents[r][a]: latent score of agent a's action after rounds[r] rounds.
    std::vector<std::vector<double>> latents;
    std::vector<double> mean;
    std::vector<double> variance;  ///< population variance per entry of rounds
};

/// Runs every agent once at the largest T and reads the selected action after
/// each requested round count. Agent a uses seed derive_seed(cfg.seed, a), so
/// all T share their random draws. Candidates must carry a latent sentinel.
RigidityResult rigidity_experiment(GeneratorBackend& gen, ScorerBackend& scorer, const RigidityConfig& cfg);

// ------------------------------------------------------- preference pairs

using SimilarityFn = std::function<double(std::string_view candidate, std::string_view truth)>;

/// Harmonic mean of unigram precision and recall over token multisets.
/// Two empty texts have similarity 1; one empty text gives 0.
double unigram_f1(std::string_view candidate, std::string_view truth);

struct PairJob {
    std::string record_id;
    DomainKind domain = DomainKind::media_review;
    std::string prompt;
    ValueProfile profile;
    std::string ground_truth;
};

struct SkippedJob {
    std::string record_id;
    std::string reason;
};

struct PairBuildResult {
    std::vector<PreferencePair> pairs;
    std::vector<std::string> record_ids;  ///< parallel to pairs
    std::vector<SkippedJob> skipped;
};

/// Per job: K candidates, chosen = argmax similarity of the primary field to the
/// ground truth, rejected = argmin (earliest on ties). Equal similarities give a
/// degenerate pair. A failing backend call is retried once, then the job is
/// skipped and reported.
PairBuildResult build_preference_pairs(GeneratorBackend& gen, const SimilarityFn& similarity,
                                       std::span<const PairJob> jobs, std::size_t K, double temperature,
                                       std::uint64_t seed);

inline PairBuildResult build_dpo_pairs(GeneratorBackend& gen, const SimilarityFn& similarity,
                                       std::span<const PairJob> jobs, std::uint64_t seed, std::size_t K = 10,
                                       double temperature = 0.8)
{
    return build_preference_pairs(gen, similarity, jobs, K, temperature, seed);
}

inline PairBuildResult build_verifier_pairs(GeneratorBackend& gen, const SimilarityFn& similarity,
                                            std::span<const PairJob> jobs, std::uint64_t seed, std::size_t K = 5,
                                            double temperature = 0.8)
{
    return build_preference_pairs(gen, similarity, jobs, K, temperature, seed);
}

/// Runs `fn(i)` for i in [0, count) on at most `jobs` threads. The first
/// exception is rethrown after all workers stop.
void run_parallel(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// Calls `fn`, retrying once on Errc::backend_failure.
template <typename F>
auto with_retry(F&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const Error& e) {
        if (e.code() != Errc::backend_failure)
            throw;
    }
    return fn();
}

// ------------------------------------------------------------ mock backends

/// Templated candidates with a planted latent value score
/// latent = clamp(profile[focus] + spread * temperature * U(-1, 1), -1, 1),
/// emitted as "<|latent|>x<|latent|>" next to the domain sentinels detected in
/// the prompt. Media and conversation candidates also carry a sentiment or
/// attitude label derived from the latent. Stateless: output depends only on
/// the request.
class PlantedGenerator final : public GeneratorBackend {
  public:
    explicit PlantedGenerator(ValueDimension focus = ValueDimension::self_direction, double spread = 1.0);
    CandidateSet generate(const std::string& context, const ValueProfile& profile, std::size_t n,
                          double temperature, std::uint64_t seed) override;
    [[nodiscard]] BackendInfo info() const override { return {"mock:planted", 1, true, 0}; }

  private:
    ValueDimension m_focus;
    double m_spread;
};

/// Scores candidates by -|latent - target|; biased toward one end of the scale.
class StereotypeScorer final : public ScorerBackend {
  public:
    explicit StereotypeScorer(double target = 0.9) : m_target(target) {}
    double score(const std::string& action, const std::string& context, const ValueProfile& profile) override;
    [[nodiscard]] BackendInfo info() const override { return {"mock:stereotype", 1, true, 0}; }

  private:
    double m_target;
};

/// Replays known completions for known prompts; unknown prompts fail.
class OracleGenerator final : public GeneratorBackend {
  public:
    void add(std::string prompt, std::string completion);
    CandidateSet generate(const std::string& context, const ValueProfile& profile, std::size_t n,
                          double temperature, std::uint64_t seed) override;
    [[nodiscard]] BackendInfo info() const override { return {"mock:oracle", 1, true, 0}; }

  private:
    std::map<std::string, std::string, std::less<>> m_answers;
};

/// Any candidate's length in bytes; a convenient deterministic scorer.
class LengthScorer final : public ScorerBackend {
  public:
    double score(const std::string& action, const std::string&, const ValueProfile&) override
    {
        return static_cast<double>(action.size());
    }
    [[nodiscard]] BackendInfo info() const override { return {"mock:length", 1, true, 0}; }
};

/// Scores with a trained verifier.
class VerifierScorer final : public ScorerBackend {
  public:
    explicit VerifierScorer(verifier::VerifierParams params);
    double score(const std::string& action, const std::string& context, const ValueProfile& profile) override;
    [[nodiscard]] BackendInfo info() const override { return {"verifier", 1, true, 0}; }

  private:
    verifier::VerifierParams m_params;
};

}  // namespace valgauge::harness
