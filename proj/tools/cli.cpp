#include "cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "valgauge/backend.hpp"
#include "valgauge/dataio.hpp"
#include "valgauge/format.hpp"
#include "valgauge/harness.hpp"
#include "valgauge/lexical.hpp"
#include "valgauge/random.hpp"
#include "valgauge/serialize.hpp"
#include "valgauge/topology.hpp"
#include "valgauge/verifier.hpp"

#ifndef VALGAUGE_VERSION
#define VALGAUGE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace valgauge::cli {

namespace {

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::io_error, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::io_error, "cannot write " + path.string());
    out << content;
    if (!out)
        fail(Errc::io_error, "failed writing " + path.string());
}

std::string utc_now()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// The run manifest is written when a command starts and rewritten with the
/// elapsed time when it finishes.
class Run {
  public:
    Run(const CLI::App& sub, const std::string& out_dir, std::vector<std::string> inputs,
        std::map<std::string, std::uint64_t> seeds)
        : m_dir(out_dir), m_start(std::chrono::steady_clock::now())
    {
        if (m_dir.empty())
            fail(Errc::invalid_argument, "--out-dir is required");
        std::error_code ec;
        fs::create_directories(m_dir, ec);
        if (ec)
            fail(Errc::io_error, "cannot create " + m_dir.string() + ": " + ec.message());
        m_manifest["command"] = sub.get_name();
        m_manifest["tool_version"] = VALGAUGE_VERSION;
        m_manifest["config"] = sub.config_to_str(true, false);
        m_manifest["seeds"] = Json::object();
        for (const auto& [k, v] : seeds)
            m_manifest["seeds"][k] = v;
        m_manifest["inputs"] = Json::array();
        for (const auto& path : inputs) {
            if (path.empty())
                continue;
            m_manifest["inputs"].push_back({{"path", path}, {"sha256", sha256_file(path)}});
        }
        m_manifest["started_at"] = utc_now();
        m_manifest["status"] = "running";
        flush();
    }

    [[nodiscard]] fs::path path(const std::string& name) const { return m_dir / name; }

    void finish(const std::vector<std::string>& outputs)
    {
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - m_start;
        m_manifest["status"] = "complete";
        m_manifest["outputs"] = outputs;
        m_manifest["wall_clock_seconds"] = elapsed.count();
        flush();
    }

  private:
    void flush() const { write_file(m_dir / "manifest.json", m_manifest.dump(2) + "\n"); }

    fs::path m_dir;
    std::chrono::steady_clock::time_point m_start;
    Json m_manifest;
};

int exit_code_for(Errc code)
{
    switch (code) {
    case Errc::backend_failure: return backend_error;
    case Errc::parse_error:
    case Errc::schema_error:
    case Errc::vocabulary_violation:
    case Errc::label_mismatch:
    case Errc::invalid_argument:
    case Errc::missing_field:
    case Errc::too_few_users:
    case Errc::too_few_remaining:
    case Errc::io_error:
    case Errc::wrong_arity:
    case Errc::out_of_range:
    case Errc::non_finite:
    case Errc::type_error:
    case Errc::shape_mismatch:
    case Errc::empty_input:
    case Errc::empty_corpus:
    case Errc::degenerate_pair:
    case Errc::degenerate_data:
    case Errc::centroid_coincidence:
        return input_error;
    default: return internal_error;
    }
}

std::optional<DomainKind> domain_option(const std::string& name)
{
    if (name.empty())
        return std::nullopt;
    const auto d = parse_domain(name);
    if (!d)
        fail(Errc::invalid_argument, "unknown domain '" + name + "'");
    return d;
}

std::set<ValueDimension> parse_exclusions(const std::string& spec)
{
    if (spec == "default")
        return topology::default_exclusions();
    std::set<ValueDimension> out;
    if (spec.empty() || spec == "none")
        return out;
    std::stringstream ss(spec);
    for (std::string part; std::getline(ss, part, ',');) {
        const auto v = parse_dimension(std::string(trim(part)));
        if (!v)
            fail(Errc::invalid_argument, "unknown value dimension '" + part + "'");
        out.insert(*v);
    }
    return out;
}

/// The records to act on: the eval split when a holdout is given, otherwise everything.
dataio::Dataset eval_part(const dataio::Dataset& d, std::optional<double> holdout, std::uint64_t seed)
{
    if (!holdout)
        return d;
    return dataio::split_users(d, {*holdout, seed}).second;
}

dataio::Dataset train_part(const dataio::Dataset& d, std::optional<double> holdout, std::uint64_t seed)
{
    if (!holdout)
        return d;
    return dataio::split_users(d, {*holdout, seed}).first;
}

const dataio::UserProfile& profile_of(const dataio::Dataset& d, const std::string& user)
{
    const auto it = d.profiles.find(user);
    if (it == d.profiles.end())
        throw Error(Errc::missing_field, "no value profile for user '" + user + "'").with_field("profile");
    return it->second;
}

/// Prompt for `target`, with memory drawn from the user's earlier records.
harness::Prompt prompt_for(const dataio::Dataset& d, const InteractionRecord& target, std::size_t limit)
{
    std::vector<InteractionRecord> history;
    for (const auto& r : d.records_of(target.user_id)) {
        if (r.record_id == target.record_id)
            break;
        history.push_back(r);
    }
    const auto memory = harness::construct_memory(history, target, limit);
    const auto& prof = profile_of(d, target.user_id);
    return harness::render_prompt(d.header.domain, target, memory, prof.values, prof.intro);
}

std::size_t effective_jobs(std::size_t jobs, const harness::BackendInfo& info)
{
    if (info.max_inflight > 0 && (jobs == 0 || jobs > static_cast<std::size_t>(info.max_inflight)))
        return static_cast<std::size_t>(info.max_inflight);
    return jobs;
}

std::unique_ptr<harness::ScorerBackend> scorer_for(const std::string& spec, harness::GeneratorBackend* gen,
                                                   harness::ScorerBackend*& use)
{
    if (spec == "backend") {
        use = dynamic_cast<harness::ScorerBackend*>(gen);
        if (!use)
            fail(Errc::invalid_argument, "the generator backend does not offer scoring");
        return nullptr;
    }
    auto s = harness::make_scorer(spec);
    use = s.get();
    return s;
}

Json rounds_json(const std::vector<harness::ScoredCandidate>& pool)
{
    Json arr = Json::array();
    for (const auto& c : pool)
        arr.push_back({{"text", c.text}, {"score", c.score}, {"carried", c.carried}});
    return arr;
}

dataio::Prediction to_prediction(DomainKind domain, const std::string& record_id, const std::string& completion)
{
    dataio::Prediction p;
    p.record_id = record_id;
    try {
        const auto a = harness::parse_completion(domain, completion);
        p.action_text = a.action_text;
        p.rating = a.rating;
        p.sentiment = a.sentiment;
        p.attitude = a.attitude;
        p.poi_category = a.poi_category;
        p.stay_minutes = a.stay_minutes;
        p.latent = a.latent;
    } catch (const Error& e) {
        p.action_text = harness::extract_primary(domain, completion);
        p.error = std::string(errc_name(e.code())) + ": " + e.message();
    }
    return p;
}

// ------------------------------------------------------------- commands

struct Common {
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

void add_common(CLI::App* sub, Common& c, bool seeded = true)
{
    sub->add_option("--out-dir", c.out_dir, "Directory for results and the run manifest")->required();
    if (seeded)
        sub->add_option("--seed", c.seed, "Run seed")->capture_default_str();
}

struct MetricsOpts {
    Common common;
    std::string dataset;
    std::string predictions;
    std::optional<double> holdout;
};

int cmd_metrics(const CLI::App& sub, const MetricsOpts& o, std::ostream& out, std::ostream& err)
{
    const auto d = dataio::load(o.dataset);
    const auto eval = eval_part(d, o.holdout, o.common.seed);
    const auto preds = dataio::parse_predictions(read_file(o.predictions));
    const auto problems = dataio::alignment_problems(eval, preds);
    if (!problems.empty()) {
        err << "predictions do not align with the evaluation records:\n";
        for (const auto& p : problems)
            err << "  " << p << "\n";
        return input_error;
    }
    Run run(sub, o.common.out_dir, {o.dataset, o.predictions}, {{"split", o.common.seed}});
    const auto report = dataio::evaluate(eval, preds);
    write_file(run.path("metrics.txt"), report.to_text());
    run.finish({"metrics.txt"});
    out << report.to_text();
    return ok;
}

struct SimulateOpts {
    Common common;
    std::string dataset;
    std::string backend = "mock:planted";
    std::string scorer = "mock:stereotype";
    std::string protocol = "reasoning";
    std::size_t rounds = 0;
    std::size_t candidates = 3;
    double temperature = 1.0;
    std::size_t retrieval = 5;
    std::optional<double> holdout;
};

int cmd_simulate(const CLI::App& sub, const SimulateOpts& o, std::ostream& out)
{
    if (o.protocol != "reasoning" && o.protocol != "cva" && o.protocol != "bare")
        fail(Errc::invalid_argument, "--protocol must be reasoning, cva or bare");
    const auto d = dataio::load(o.dataset);
    const auto eval = eval_part(d, o.holdout, o.common.seed);
    auto gen = harness::make_generator(o.backend);
    harness::ScorerBackend* scorer = nullptr;
    std::unique_ptr<harness::ScorerBackend> owned;
    if (o.protocol != "bare")
        owned = scorer_for(o.scorer, gen.get(), scorer);

    harness::SimulationConfig cfg;
    cfg.K = o.candidates;
    cfg.T = o.protocol == "bare" ? 0 : o.rounds;
    cfg.temperature = o.temperature;
    cfg.retrieval_limit = o.retrieval;
    cfg.validate();

    Run run(sub, o.common.out_dir, {o.dataset}, {{"run", o.common.seed}});
    const auto domain = d.header.domain;
    const auto n = eval.records.size();
    std::vector<Json> transcript(n);
    std::vector<dataio::Prediction> preds(n);
    std::size_t jobs = effective_jobs(o.common.jobs, gen->info());
    if (scorer)
        jobs = effective_jobs(jobs, scorer->info());

    harness::run_parallel(n, jobs, [&](std::size_t i) {
        const auto& r = eval.records[i];
        const auto prompt = prompt_for(eval, r, cfg.retrieval_limit).text();
        const auto& profile = profile_of(eval, r.user_id).values;
        auto local = cfg;
        local.seed = derive_seed(o.common.seed, r.record_id);
        Json t{{"record_id", r.record_id}, {"protocol", o.protocol}, {"seed", local.seed}, {"prompt", prompt}};
        std::string action;
        if (o.protocol == "cva") {
            const auto s = harness::generate_then_select(*gen, *scorer, prompt, profile, cfg.K, cfg.temperature,
                                                         local.seed);
            t["candidates"] = rounds_json(s.candidates);
            t["selected"] = s.selected;
            action = s.action;
        } else if (o.protocol == "bare") {
            action = harness::bare_generation(*gen, prompt, profile, local);
        } else {
            const auto res = harness::reasoning_loop(*gen, *scorer, prompt, profile, local);
            t["initial"] = res.initial;
            Json rounds = Json::array();
            for (const auto& round : res.rounds)
                rounds.push_back({{"round", round.round}, {"pool", rounds_json(round.pool)}, {"best", round.best}});
            t["rounds"] = std::move(rounds);
            action = res.action;
        }
        t["action"] = action;
        transcript[i] = std::move(t);
        preds[i] = to_prediction(domain, r.record_id, action);
    });

    std::string lines;
    for (const auto& t : transcript)
        lines += t.dump() + "\n";
    write_file(run.path("transcript.ndjson"), lines);
    write_file(run.path("predictions.ndjson"), dataio::format_predictions(preds));

    std::size_t failures = 0;
    std::vector<double> latents;
    for (const auto& p : preds) {
        failures += p.error ? 1 : 0;
        if (p.latent)
            latents.push_back(*p.latent);
    }
    std::string summary = "records=" + std::to_string(n) + "\nparse_failures=" + std::to_string(failures) + "\n";
    if (!latents.empty()) {
        summary += "latent_count=" + std::to_string(latents.size()) + "\n";
        summary += "latent_mean=" + format_double(metrics::population_mean(latents)) + "\n";
        summary += "latent_variance=" + format_double(metrics::population_variance(latents)) + "\n";
    }
    write_file(run.path("summary.txt"), summary);
    run.finish({"transcript.ndjson", "predictions.ndjson", "summary.txt"});
    out << summary;
    return ok;
}

struct RigidityOpts {
    Common common;
    std::string backend = "mock:planted";
    std::string scorer = "mock:stereotype";
    std::vector<std::size_t> rounds{0, 1, 4, 8};
    std::size_t agents = 200;
    std::size_t candidates = 3;
    double temperature = 1.0;
    double halfwidth = 0.2;
};

int cmd_rigidity(const CLI::App& sub, const RigidityOpts& o, std::ostream& out)
{
    auto gen = harness::make_generator(o.backend);
    harness::ScorerBackend* scorer = nullptr;
    auto owned = scorer_for(o.scorer, gen.get(), scorer);
    harness::RigidityConfig cfg;
    cfg.rounds = o.rounds;
    cfg.agents = o.agents;
    cfg.K = o.candidates;
    cfg.temperature = o.temperature;
    cfg.profile_halfwidth = o.halfwidth;
    cfg.seed = o.common.seed;
    cfg.jobs = effective_jobs(effective_jobs(o.common.jobs, gen->info()), scorer->info());
    Run run(sub, o.common.out_dir, {}, {{"run", o.common.seed}});
    const auto r = harness::rigidity_experiment(*gen, *scorer, cfg);
    std::string tsv = "rounds\tmean\tvariance\n";
    for (std::size_t i = 0; i < r.rounds.size(); ++i)
        tsv += std::to_string(r.rounds[i]) + "\t" + format_double(r.mean[i]) + "\t" + format_double(r.variance[i]) +
               "\n";
    std::string latents = "agent";
    for (auto t : r.rounds)
        latents += "\tT" + std::to_string(t);
    latents += "\n";
    for (std::size_t a = 0; a < cfg.agents; ++a) {
        latents += std::to_string(a);
        for (const auto& col : r.latents)
            latents += "\t" + format_double(col[a]);
        latents += "\n";
    }
    write_file(run.path("rigidity.tsv"), tsv);
    write_file(run.path("latents.tsv"), latents);
    run.finish({"rigidity.tsv", "latents.tsv"});
    out << tsv;
    return ok;
}

struct ProjectOpts {
    Common common;
    std::string activations;
    std::string corpus;
    std::string verifier;
    std::string dataset;
    std::string stopwords;
    std::size_t top_k = 20;
    double epsilon = lexical::kDefaultEpsilon;
};

int cmd_project(const CLI::App& sub, const ProjectOpts& o, std::ostream& out)
{
    std::vector<std::string> docs;
    std::vector<ValueActivation> acts;
    std::vector<std::pair<std::string, ValueActivation>> groups;
    if (!o.verifier.empty()) {
        if (o.dataset.empty())
            fail(Errc::invalid_argument, "--verifier needs --dataset");
        const auto params = verifier::parse_params(read_file(o.verifier));
        const auto d = dataio::load(o.dataset);
        for (const auto& r : d.records) {
            const auto e = verifier::encode_text(r.context_text, params.width, params.encoder_seed);
            const auto a = verifier::cross_attention(params, e, profile_of(d, r.user_id).values).activation;
            docs.push_back(r.action_text);
            acts.push_back(a);
            if (r.group_key)
                groups.emplace_back(*r.group_key, a);
        }
    } else {
        if (o.activations.empty() || o.corpus.empty())
            fail(Errc::invalid_argument, "give --activations and --corpus, or --verifier and --dataset");
        // Both files are NDJSON keyed by "id"; the corpus carries "text".
        std::map<std::string, std::string> text_by_id;
        std::size_t line_no = 0;
        std::istringstream cs(read_file(o.corpus));
        for (std::string line; std::getline(cs, line);) {
            ++line_no;
            if (trim(line).empty())
                continue;
            const auto j = Json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("text"))
                throw Error(Errc::parse_error, o.corpus + ":" + std::to_string(line_no) + ": expected {id, text}")
                    .at_line(line_no);
            text_by_id[j["id"].get<std::string>()] = j["text"].get<std::string>();
        }
        line_no = 0;
        std::istringstream as(read_file(o.activations));
        for (std::string line; std::getline(as, line);) {
            ++line_no;
            if (trim(line).empty())
                continue;
            const auto j = Json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("activation"))
                throw Error(Errc::parse_error,
                            o.activations + ":" + std::to_string(line_no) + ": expected {id, activation}")
                    .at_line(line_no);
            const auto id = j["id"].get<std::string>();
            const auto it = text_by_id.find(id);
            if (it == text_by_id.end())
                throw Error(Errc::label_mismatch, o.activations + ":" + std::to_string(line_no) + ": id '" + id +
                                                      "' is not in the corpus")
                    .at_line(line_no);
            const auto a = activation_from_json(j["activation"]);
            docs.push_back(it->second);
            acts.push_back(a);
            if (j.contains("group"))
                groups.emplace_back(j["group"].get<std::string>(), a);
        }
    }
    const auto stop = o.stopwords.empty() ? lexical::default_stopwords()
                                          : lexical::parse_stopwords(read_file(o.stopwords));
    std::vector<std::vector<std::string>> tokens;
    for (const auto& doc : docs)
        tokens.push_back(text::tokenize(doc));

    Run run(sub, o.common.out_dir, {o.activations, o.corpus, o.verifier, o.dataset, o.stopwords}, {});
    const auto weighted = lexical::tfidf_weights(tokens, stop);
    const auto m = lexical::row_normalize(lexical::relevance(weighted, acts, o.epsilon));
    write_file(run.path("heatmap.tsv"), lexical::heatmap_tsv(m));
    write_file(run.path("wordcloud.tsv"), lexical::wordcloud_tsv(m, o.top_k));
    std::vector<std::string> outputs{"heatmap.tsv", "wordcloud.tsv"};
    if (!groups.empty()) {
        write_file(run.path("group_activation.tsv"), lexical::group_activation_tsv(lexical::group_activation(groups)));
        outputs.emplace_back("group_activation.tsv");
    }
    run.finish(outputs);
    out << "documents=" << docs.size() << "\nvocabulary=" << m.words.size() << "\n";
    return ok;
}

struct TopologyOpts {
    Common common;
    std::string embeddings;
    std::string verifier;
    std::string exclude = "none";
    bool reflection = false;
};

int cmd_topology(const CLI::App& sub, const TopologyOpts& o, std::ostream& out)
{
    if (o.embeddings.empty() == o.verifier.empty())
        fail(Errc::invalid_argument, "give exactly one of --embeddings or --verifier");
    const auto all = o.embeddings.empty() ? verifier::export_value_embeddings(verifier::parse_params(read_file(o.verifier)))
                                          : topology::parse_embeddings(read_file(o.embeddings));
    const auto e = topology::filter_dimensions(all, parse_exclusions(o.exclude));
    Run run(sub, o.common.out_dir, {o.embeddings, o.verifier}, {});
    const auto report = topology::analyze(e, o.reflection);
    std::string summary = "n=" + std::to_string(e.size()) + "\n";
    summary += "d_circ=" + std::to_string(report.d_circ) + "\n";
    summary += "cis=" + format_double(report.cis) + "\n";
    if (report.reversed_cis)
        summary += "reversed_cis=" + format_double(*report.reversed_cis) + "\n";
    auto seq = [](const topology::CircularSequence& s) {
        std::string o;
        for (auto v : s.order())
            o += (o.empty() ? "" : ",") + std::string(dimension_name(v));
        return o;
    };
    summary += "observed=" + seq(report.observed) + "\n";
    summary += "ground_truth=" + seq(report.ground_truth) + "\n";
    summary += "explained_variance=" + format_double(report.projection.explained_variance(0)) + "," +
               format_double(report.projection.explained_variance(1)) + "\n";
    summary += "total_variance=" + format_double(report.projection.total_variance) + "\n";
    write_file(run.path("topology.txt"), summary);
    write_file(run.path("coordinates.tsv"), topology::coordinates_tsv(e, report));
    run.finish({"topology.txt", "coordinates.tsv"});
    out << summary;
    return ok;
}

struct PrefsOpts {
    Common common;
    std::string dataset;
    std::string backend = "mock:planted";
    std::string kind = "dpo";
    std::optional<std::size_t> candidates;
    double temperature = 0.8;
    std::size_t retrieval = 5;
    std::optional<double> holdout;
};

int cmd_prefs(const CLI::App& sub, const PrefsOpts& o, std::ostream& out, std::ostream& err)
{
    if (o.kind != "dpo" && o.kind != "verifier")
        fail(Errc::invalid_argument, "--kind must be dpo or verifier");
    const std::size_t K = o.candidates.value_or(o.kind == "dpo" ? 10 : 5);
    const auto d = dataio::load(o.dataset);
    const auto train = train_part(d, o.holdout, o.common.seed);
    auto gen = harness::make_generator(o.backend);

    std::vector<harness::PairJob> jobs;
    for (const auto& r : train.records) {
        harness::PairJob job;
        job.record_id = r.record_id;
        job.domain = train.header.domain;
        job.prompt = prompt_for(train, r, o.retrieval).text();
        job.profile = profile_of(train, r.user_id).values;
        job.ground_truth = harness::primary_field(r);
        jobs.push_back(std::move(job));
    }
    Run run(sub, o.common.out_dir, {o.dataset}, {{"run", o.common.seed}});
    std::vector<harness::PairBuildResult> parts(jobs.size());
    harness::run_parallel(jobs.size(), effective_jobs(o.common.jobs, gen->info()), [&](std::size_t i) {
        parts[i] = harness::build_preference_pairs(*gen, harness::unigram_f1, std::span(&jobs[i], 1), K,
                                                   o.temperature, o.common.seed);
    });
    std::string pairs, skipped;
    std::size_t n_pairs = 0, n_degenerate = 0, n_skipped = 0;
    for (const auto& part : parts) {
        for (std::size_t i = 0; i < part.pairs.size(); ++i) {
            Json j{{"record_id", part.record_ids[i]}};
            j.update(to_json(part.pairs[i]));
            pairs += j.dump() + "\n";
            ++n_pairs;
            n_degenerate += part.pairs[i].degenerate ? 1 : 0;
        }
        for (const auto& s : part.skipped) {
            skipped += Json{{"record_id", s.record_id}, {"reason", s.reason}}.dump() + "\n";
            err << "skipped " << s.record_id << ": " << s.reason << "\n";
            ++n_skipped;
        }
    }
    Json meta{{"kind", o.kind},
              {"candidates", K},
              {"temperature", o.temperature},
              {"similarity", "unigram_f1"},
              {"pairs", n_pairs},
              {"degenerate", n_degenerate},
              {"skipped", n_skipped}};
    if (o.kind == "dpo")
        meta["training_objective"] = {{"dpo_sigmoid", 1.0}, {"bco_pair", 0.2}, {"sft", 1.2}};
    write_file(run.path("pairs.ndjson"), pairs);
    write_file(run.path("skipped.ndjson"), skipped);
    write_file(run.path("pairs.meta.json"), meta.dump(2) + "\n");
    run.finish({"pairs.ndjson", "skipped.ndjson", "pairs.meta.json"});
    out << "pairs=" << n_pairs << "\ndegenerate=" << n_degenerate << "\nskipped=" << n_skipped << "\n";
    return ok;
}

struct TrainOpts {
    Common common;
    std::string pairs;
    int width = 32;
    int epochs = 200;
    double lr = 0.05;
    std::optional<std::uint64_t> encoder_seed;
};

int cmd_train_verifier(const CLI::App& sub, const TrainOpts& o, std::ostream& out)
{
    std::vector<PreferencePair> pairs;
    std::size_t line_no = 0, dropped = 0;
    std::istringstream in(read_file(o.pairs));
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto j = Json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error(Errc::parse_error, o.pairs + ":" + std::to_string(line_no) + ": not valid JSON")
                .at_line(line_no);
        try {
            auto p = pair_from_json(j);
            if (p.degenerate || p.chosen == p.rejected) {
                ++dropped;
                continue;
            }
            pairs.push_back(std::move(p));
        } catch (Error& e) {
            throw Error(e.code(), o.pairs + ":" + std::to_string(line_no) + ": " + e.message()).at_line(line_no);
        }
    }
    if (pairs.empty())
        fail(Errc::empty_input, "no usable preference pairs in " + o.pairs);
    const auto enc_seed = o.encoder_seed.value_or(derive_seed(o.common.seed, "encoder"));
    auto init = verifier::init_params(o.width, o.common.seed, enc_seed);
    std::vector<verifier::EncodedPair> data;
    for (const auto& p : pairs)
        data.push_back(verifier::encode_pair(init, p));

    Run run(sub, o.common.out_dir, {o.pairs}, {{"init", o.common.seed}, {"encoder", enc_seed}});
    const auto res = verifier::train(std::move(init), data, {o.lr, o.epochs, o.common.seed});
    std::string trace = "epoch\tloss\n";
    for (std::size_t i = 0; i < res.loss_trace.size(); ++i)
        trace += std::to_string(i) + "\t" + format_double(res.loss_trace[i]) + "\n";
    const double acc = verifier::pair_accuracy(res.params, data);
    std::string summary = "pairs=" + std::to_string(pairs.size()) + "\ndropped_degenerate=" +
                          std::to_string(dropped) + "\ninitial_loss=" + format_double(res.loss_trace.front()) +
                          "\nfinal_loss=" + format_double(res.loss_trace.back()) +
                          "\ntrain_pair_accuracy=" + format_double(acc) + "\n";
    write_file(run.path("verifier.params"), verifier::format_params(res.params));
    write_file(run.path("loss_trace.tsv"), trace);
    write_file(run.path("value_embeddings.txt"),
               topology::format_embeddings(verifier::export_value_embeddings(res.params)));
    write_file(run.path("summary.txt"), summary);
    run.finish({"verifier.params", "loss_trace.tsv", "value_embeddings.txt", "summary.txt"});
    out << summary;
    return ok;
}

struct SplitOpts {
    Common common;
    std::string dataset;
    double holdout = 0.10;
};

int cmd_split(const CLI::App& sub, const SplitOpts& o, std::ostream& out)
{
    const auto d = dataio::load(o.dataset);
    const auto [train, eval] = dataio::split_users(d, {o.holdout, o.common.seed});
    Run run(sub, o.common.out_dir, {o.dataset}, {{"split", o.common.seed}});
    dataio::save(run.path("train.ndjson").string(), train);
    dataio::save(run.path("eval.ndjson").string(), eval);
    run.finish({"train.ndjson", "eval.ndjson"});
    out << "train_users=" << train.users().size() << "\neval_users=" << eval.users().size() << "\n";
    return ok;
}

struct SynthOpts {
    Common common;
    std::string domain = "media_review";
    std::size_t users = 3;
};

int cmd_synth(const CLI::App& sub, const SynthOpts& o, std::ostream& out)
{
    const auto domain = domain_option(o.domain);
    const auto d = dataio::synth_fixtures(*domain, o.users, o.common.seed);
    Run run(sub, o.common.out_dir, {}, {{"synth", o.common.seed}});
    dataio::save(run.path("dataset.ndjson").string(), d);
    run.finish({"dataset.ndjson"});
    out << "users=" << d.users().size() << "\nrecords=" << d.records.size() << "\n";
    return ok;
}

}  // namespace

std::string sha256_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::io_error, "cannot open " + path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        fail(Errc::io_error, "sha256 unavailable");
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        if (in.gcount() > 0)
            EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Value-alignment evaluation toolkit", "valgauge"};
    app.set_version_flag("--version", VALGAUGE_VERSION);
    app.require_subcommand(1);

    MetricsOpts mo;
    auto* metrics = app.add_subcommand("metrics", "Score predictions against a dataset");
    add_common(metrics, mo.common);
    metrics->add_option("--dataset", mo.dataset, "Dataset file")->required();
    metrics->add_option("--predictions", mo.predictions, "Predictions file")->required();
    metrics->add_option("--holdout", mo.holdout, "Evaluate the eval split of this user fraction");

    SimulateOpts so;
    auto* simulate = app.add_subcommand("simulate", "Simulate actions for dataset records");
    add_common(simulate, so.common);
    simulate->add_option("--dataset", so.dataset, "Dataset file")->required();
    simulate->add_option("--backend", so.backend, "Generator: mock:planted, exec:CMD or http:URL")
        ->capture_default_str();
    simulate->add_option("--scorer", so.scorer,
                         "Scorer: mock:stereotype, mock:length, verifier:FILE, exec:CMD, http:URL or backend")
        ->capture_default_str();
    simulate->add_option("--protocol", so.protocol, "reasoning, cva or bare")->capture_default_str();
    simulate->add_option("--rounds", so.rounds, "Reasoning rounds T")->capture_default_str();
    simulate->add_option("--candidates", so.candidates, "Pool size K")->capture_default_str();
    simulate->add_option("--temperature", so.temperature, "Sampling temperature")->capture_default_str();
    simulate->add_option("--retrieval", so.retrieval, "Long-term memory entries")->capture_default_str();
    simulate->add_option("--holdout", so.holdout, "Simulate only the eval split of this user fraction");
    simulate->add_option("--jobs", so.common.jobs, "Concurrent records (0 = all cores)")->capture_default_str();

    RigidityOpts ro;
    auto* rigidity = app.add_subcommand("rigidity", "Variance of selected latent scores across reasoning rounds");
    add_common(rigidity, ro.common);
    rigidity->add_option("--backend", ro.backend, "Generator spec")->capture_default_str();
    rigidity->add_option("--scorer", ro.scorer, "Scorer spec")->capture_default_str();
    rigidity->add_option("--rounds", ro.rounds, "Comma-separated round counts")->delimiter(',')->capture_default_str();
    rigidity->add_option("--agents", ro.agents, "Number of agents")->capture_default_str();
    rigidity->add_option("--candidates", ro.candidates, "Pool size K")->capture_default_str();
    rigidity->add_option("--temperature", ro.temperature, "Sampling temperature")->capture_default_str();
    rigidity->add_option("--halfwidth", ro.halfwidth, "Profile half-width")->capture_default_str();
    rigidity->add_option("--jobs", ro.common.jobs, "Concurrent agents (0 = all cores)")->capture_default_str();

    ProjectOpts po;
    auto* project = app.add_subcommand("project", "Project value activations onto the vocabulary");
    add_common(project, po.common, false);
    project->add_option("--activations", po.activations, "NDJSON {id, activation[10], group?}");
    project->add_option("--corpus", po.corpus, "NDJSON {id, text}");
    project->add_option("--verifier", po.verifier, "Verifier params; activations come from the dataset contexts");
    project->add_option("--dataset", po.dataset, "Dataset used with --verifier");
    project->add_option("--stopwords", po.stopwords, "Stop-word list replacing the bundled one");
    project->add_option("--top-k", po.top_k, "Words per value in the word cloud")->capture_default_str();
    project->add_option("--epsilon", po.epsilon, "Relevance smoothing")->capture_default_str();

    TopologyOpts to;
    auto* topo = app.add_subcommand("topology", "Circular ordering of value embeddings");
    add_common(topo, to.common, false);
    topo->add_option("--embeddings", to.embeddings, "Embedding file");
    topo->add_option("--verifier", to.verifier, "Verifier params whose value table is analysed");
    topo->add_option("--exclude-dims", to.exclude, "none, default, or comma-separated values")
        ->capture_default_str();
    topo->add_flag("--reflection", to.reflection, "Also report the CIS of the reversed order");

    PrefsOpts fo;
    auto* prefs = app.add_subcommand("prefs", "Build preference pairs from sampled candidates");
    add_common(prefs, fo.common);
    prefs->add_option("--dataset", fo.dataset, "Dataset file")->required();
    prefs->add_option("--backend", fo.backend, "Generator spec")->capture_default_str();
    prefs->add_option("--kind", fo.kind, "dpo or verifier")->capture_default_str();
    prefs->add_option("--candidates", fo.candidates, "Candidates per record (dpo 10, verifier 5)");
    prefs->add_option("--temperature", fo.temperature, "Sampling temperature")->capture_default_str();
    prefs->add_option("--retrieval", fo.retrieval, "Long-term memory entries")->capture_default_str();
    prefs->add_option("--holdout", fo.holdout, "Use only the train split of this user fraction");
    prefs->add_option("--jobs", fo.common.jobs, "Concurrent records (0 = all cores)")->capture_default_str();

    TrainOpts tv;
    auto* trainv = app.add_subcommand("train-verifier", "Train the value-guided verifier on preference pairs");
    add_common(trainv, tv.common);
    trainv->add_option("--pairs", tv.pairs, "Pairs file from prefs")->required();
    trainv->add_option("--width", tv.width, "Embedding width d")->capture_default_str();
    trainv->add_option("--epochs", tv.epochs, "Full-batch epochs")->capture_default_str();
    trainv->add_option("--lr", tv.lr, "Learning rate")->capture_default_str();
    trainv->add_option("--encoder-seed", tv.encoder_seed, "Text encoder seed (derived from --seed by default)");

    SplitOpts sp;
    auto* split = app.add_subcommand("split", "User-level train/eval split");
    add_common(split, sp.common);
    split->add_option("--dataset", sp.dataset, "Dataset file")->required();
    split->add_option("--holdout", sp.holdout, "Eval user fraction")->capture_default_str();

    SynthOpts sy;
    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
    add_common(synth, sy.common);
    synth->add_option("--domain", sy.domain, "media_review, conversation or mobility")->capture_default_str();
    synth->add_option("--users", sy.users, "Number of users")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return input_error;
    }

    try {
        if (metrics->parsed())
            return cmd_metrics(*metrics, mo, out, err);
        if (simulate->parsed())
            return cmd_simulate(*simulate, so, out);
        if (rigidity->parsed())
            return cmd_rigidity(*rigidity, ro, out);
        if (project->parsed())
            return cmd_project(*project, po, out);
        if (topo->parsed())
            return cmd_topology(*topo, to, out);
        if (prefs->parsed())
            return cmd_prefs(*prefs, fo, out, err);
        if (trainv->parsed())
            return cmd_train_verifier(*trainv, tv, out);
        if (split->parsed())
            return cmd_split(*split, sp, out);
        if (synth->parsed())
            return cmd_synth(*synth, sy, out);
    } catch (const Error& e) {
        err << "error: " << e.what();
        if (e.line())
            err << " (line " << *e.line() << ")";
        err << "\n";
        return exit_code_for(e.code());
    } catch (const Json::exception& e) {
        err << "error: malformed input: " << e.what() << "\n";
        return input_error;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return internal_error;
    }
    return internal_error;
}

}  // namespace valgauge::cli
