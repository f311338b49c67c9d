#include "valgauge/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "valgauge/format.hpp"
#include "valgauge/random.hpp"
#include "valgauge/serialize.hpp"

namespace valgauge::dataio {

namespace {

constexpr std::string_view kVocabFields[] = {"sentiment", "attitude", "poi_category"};

/// Calls fn(line_number, line) for every non-blank line.
template <typename F>
void for_each_line(std::string_view text, F&& fn)
{
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto end = nl == std::string_view::npos ? text.size() : nl;
        ++line_no;
        const auto line = text.substr(pos, end - pos);
        if (!trim(line).empty())
            fn(line_no, line);
        if (nl == std::string_view::npos)
            break;
        pos = nl + 1;
    }
}

Json parse_line(std::size_t line_no, std::string_view line)
{
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded())
        throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": not valid JSON").at_line(line_no);
    if (!j.is_object())
        throw Error(Errc::schema_error, "line " + std::to_string(line_no) + ": expected an object").at_line(line_no);
    return j;
}

/// Runs fn, re-raising library and JSON errors with the line attached.
template <typename F>
auto at_line(std::size_t line_no, F&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const Error& e) {
        if (e.line())
            throw;
        Error out(e.code(), "line " + std::to_string(line_no) + ": " + e.message());
        out.at_line(line_no).with_field(e.field());
        if (e.index())
            out.at_index(*e.index());
        throw out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::schema_error, "line " + std::to_string(line_no) + ": " + e.what()).at_line(line_no);
    }
}

std::string kind_of(const Json& j)
{
    const auto it = j.find("kind");
    if (it == j.end() || !it->is_string())
        throw Error(Errc::schema_error, "missing string field 'kind'").with_field("kind");
    return it->get<std::string>();
}

DatasetHeader header_from_json(const Json& j)
{
    DatasetHeader h;
    const auto v = j.find("schema_version");
    if (v == j.end() || !v->is_number_integer())
        throw Error(Errc::schema_error, "header lacks schema_version").with_field("schema_version");
    h.schema_version = v->get<int>();
    if (h.schema_version != kSchemaVersion)
        throw Error(Errc::schema_error, "unsupported schema_version " + std::to_string(h.schema_version))
            .with_field("schema_version");
    const auto d = j.find("domain");
    const auto domain = d != j.end() && d->is_string() ? parse_domain(d->get<std::string>()) : std::nullopt;
    if (!domain)
        throw Error(Errc::schema_error, "header lacks a known domain").with_field("domain");
    h.domain = *domain;
    if (const auto vocab = j.find("vocabularies"); vocab != j.end()) {
        if (!vocab->is_object())
            throw Error(Errc::schema_error, "vocabularies must be an object").with_field("vocabularies");
        for (const auto& [key, list] : vocab->items()) {
            if (std::find(std::begin(kVocabFields), std::end(kVocabFields), key) == std::end(kVocabFields))
                throw Error(Errc::schema_error, "no vocabulary can be declared for '" + key + "'")
                    .with_field("vocabularies");
            if (!list.is_array())
                throw Error(Errc::schema_error, "vocabulary '" + key + "' must be an array").with_field(key);
            auto& out = h.vocabularies[key];
            for (const auto& item : list) {
                if (!item.is_string())
                    throw Error(Errc::schema_error, "vocabulary '" + key + "' must hold strings").with_field(key);
                out.push_back(item.get<std::string>());
            }
        }
    }
    return h;
}

Json header_to_json(const DatasetHeader& h)
{
    Json j;
    j["kind"] = "header";
    j["schema_version"] = h.schema_version;
    j["domain"] = std::string(domain_name(h.domain));
    Json vocab = Json::object();
    for (const auto& [key, list] : h.vocabularies)
        vocab[key] = list;
    j["vocabularies"] = vocab;
    return j;
}

void check_against_header(const DatasetHeader& h, const InteractionRecord& r)
{
    if (r.domain != h.domain)
        throw Error(Errc::schema_error, "record '" + r.record_id + "' is " + std::string(domain_name(r.domain)) +
                                            " in a " + std::string(domain_name(h.domain)) + " dataset")
            .with_field("domain");
    const std::pair<std::string_view, const std::optional<std::string>*> fields[] = {
        {"sentiment", &r.sentiment}, {"attitude", &r.attitude}, {"poi_category", &r.poi_category}};
    for (const auto& [name, value] : fields) {
        const auto vocab = h.vocabularies.find(std::string(name));
        if (!*value || vocab == h.vocabularies.end())
            continue;
        if (std::find(vocab->second.begin(), vocab->second.end(), **value) == vocab->second.end())
            throw Error(Errc::vocabulary_violation, "record '" + r.record_id + "': " + std::string(name) + " '" +
                                                        **value + "' is not in the declared vocabulary")
                .with_field(std::string(name));
    }
}

UserProfile user_profile_from_json(const Json& j)
{
    UserProfile p;
    const auto v = j.find("values");
    if (v == j.end())
        throw Error(Errc::schema_error, "profile lacks values").with_field("values");
    p.values = profile_from_json(*v);
    if (const auto it = j.find("intro"); it != j.end()) {
        if (!it->is_string())
            throw Error(Errc::schema_error, "intro must be a string").with_field("intro");
        p.intro = it->get<std::string>();
    }
    return p;
}

template <typename T>
std::optional<T> opt(const Json& j, const char* key)
{
    const auto it = j.find(key);
    if (it == j.end() || it->is_null())
        return std::nullopt;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(Errc::schema_error, std::string("field '") + key + "' has the wrong type").with_field(key);
    }
}

}  // namespace

std::vector<std::string> Dataset::users() const
{
    std::set<std::string> ids;
    for (const auto& r : records)
        ids.insert(r.user_id);
    return {ids.begin(), ids.end()};
}

std::vector<InteractionRecord> Dataset::records_of(std::string_view user) const
{
    std::vector<InteractionRecord> out;
    for (const auto& r : records) {
        if (r.user_id == user)
            out.push_back(r);
    }
    return out;
}

Dataset parse_dataset(std::string_view text)
{
    Dataset d;
    bool have_header = false;
    std::set<std::string, std::less<>> ids;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        const Json j = parse_line(line_no, line);
        at_line(line_no, [&] {
            const auto kind = kind_of(j);
            if (!have_header) {
                if (kind != "header")
                    throw Error(Errc::schema_error, "the first line must be the dataset header").with_field("kind");
                d.header = header_from_json(j);
                have_header = true;
                return;
            }
            if (kind == "profile") {
                const auto uid = j.find("user_id");
                if (uid == j.end() || !uid->is_string() || uid->get<std::string>().empty())
                    throw Error(Errc::schema_error, "profile lacks user_id").with_field("user_id");
                const auto user = uid->get<std::string>();
                if (d.profiles.contains(user))
                    throw Error(Errc::schema_error, "duplicate profile for user '" + user + "'").with_field("user_id");
                d.profiles.emplace(user, user_profile_from_json(j));
            } else if (kind == "record") {
                auto r = record_from_json(j);
                check_against_header(d.header, r);
                if (!ids.insert(r.record_id).second)
                    throw Error(Errc::schema_error, "duplicate record id '" + r.record_id + "'")
                        .with_field("record_id");
                d.records.push_back(std::move(r));
            } else if (kind == "header") {
                throw Error(Errc::schema_error, "second header").with_field("kind");
            } else {
                throw Error(Errc::schema_error, "unknown line kind '" + kind + "'").with_field("kind");
            }
        });
    });
    if (!have_header)
        throw Error(Errc::schema_error, "missing dataset header").at_line(1).with_field("kind");
    return d;
}

std::string format_dataset(const Dataset& d)
{
    std::string out = header_to_json(d.header).dump() + "\n";
    for (const auto& [user, p] : d.profiles) {
        Json j;
        j["kind"] = "profile";
        j["user_id"] = user;
        j["values"] = to_json(p.values);
        if (!p.intro.empty())
            j["intro"] = p.intro;
        out += j.dump() + "\n";
    }
    for (const auto& r : d.records) {
        Json j = Json::object();
        j["kind"] = "record";
        j.update(to_json(r));
        out += j.dump() + "\n";
    }
    return out;
}

Dataset load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::io_error, "cannot open dataset " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_dataset(ss.str());
}

void save(const std::string& path, const Dataset& d)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::io_error, "cannot write dataset " + path);
    out << format_dataset(d);
    if (!out)
        fail(Errc::io_error, "failed writing dataset " + path);
}

void validate(const Dataset& d)
{
    if (d.header.schema_version != kSchemaVersion)
        throw Error(Errc::schema_error, "unsupported schema_version").with_field("schema_version");
    std::set<std::string, std::less<>> ids;
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        try {
            check_record(d.records[i]);
            check_against_header(d.header, d.records[i]);
            if (!ids.insert(d.records[i].record_id).second)
                throw Error(Errc::schema_error, "duplicate record id '" + d.records[i].record_id + "'")
                    .with_field("record_id");
        } catch (Error& e) {
            e.at_index(i);
            throw;
        }
    }
}

std::pair<Dataset, Dataset> split_users(const Dataset& d, const SplitSpec& spec)
{
    if (!(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0))
        fail(Errc::invalid_argument, "holdout fraction must lie in (0, 1)");
    auto users = d.users();
    if (users.size() < 2)
        fail(Errc::too_few_users, "a user-level split needs at least two users, found " +
                                      std::to_string(users.size()));
    Rng rng(derive_seed(spec.seed, "split-users"));
    rng.shuffle(std::span<std::string>(users));
    const double raw = spec.holdout_fraction * static_cast<double>(users.size());
    auto n_eval = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    n_eval = std::clamp<std::size_t>(n_eval, 1, users.size() - 1);
    const std::set<std::string> eval_users(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(n_eval));
    Dataset train, eval;
    train.header = eval.header = d.header;
    for (const auto& r : d.records)
        (eval_users.contains(r.user_id) ? eval : train).records.push_back(r);
    for (const auto& [user, p] : d.profiles)
        (eval_users.contains(user) ? eval : train).profiles.emplace(user, p);
    return {std::move(train), std::move(eval)};
}

// --------------------------------------------------------------- synthetic

namespace {

constexpr std::array<std::string_view, 6> kBusinessTypes{"cafe", "bistro", "bookshop", "bakery", "diner", "gallery"};
constexpr std::array<std::string_view, 4> kCities{"Riverton", "Lakeside", "Hillcrest", "Portview"};
constexpr std::array<std::string_view, 5> kTopics{"public transit", "remote work", "city parks", "video games",
                                                  "local elections"};
constexpr std::array<std::string_view, 3> kSubs{"r/city", "r/tech", "r/games"};
constexpr std::array<std::string_view, 6> kPoi{"Coffee Shop", "Park", "Gym", "Office", "Restaurant", "Museum"};
constexpr std::array<std::string_view, 4> kPraise{"lovely", "charming", "reliable", "welcoming"};
constexpr std::array<std::string_view, 4> kCriticism{"disappointing", "crowded", "overpriced", "careless"};

template <std::size_t N>
std::string pick(Rng& rng, const std::array<std::string_view, N>& bank)
{
    return std::string(bank[static_cast<std::size_t>(rng.below(N))]);
}

}  // namespace

std::vector<double> planted_population(std::size_t n, double mean, double variance, std::uint64_t seed)
{
    if (n == 0)
        fail(Errc::invalid_argument, "population size must be positive");
    if (!std::isfinite(mean) || !std::isfinite(variance) || variance < 0.0)
        fail(Errc::invalid_argument, "population mean and variance must be finite, variance non-negative");
    const double half = std::sqrt(3.0 * variance);
    Rng rng(derive_seed(seed, "planted-population"));
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (static_cast<double>(i) + rng.uniform()) / static_cast<double>(n);
        xs[i] = mean + half * (2.0 * u - 1.0);
    }
    rng.shuffle(std::span<double>(xs));
    return xs;
}

Dataset synth_fixtures(DomainKind domain, std::size_t n_users, std::uint64_t seed)
{
    if (n_users < 1)
        fail(Errc::invalid_argument, "synth_fixtures needs at least one user");
    Dataset d;
    d.header.domain = domain;
    switch (domain) {
    case DomainKind::media_review: d.header.vocabularies["sentiment"] = {"negative", "neutral", "positive"}; break;
    case DomainKind::conversation: d.header.vocabularies["attitude"] = {"agree", "disagree", "neutral"}; break;
    case DomainKind::mobility: d.header.vocabularies["poi_category"] = {kPoi.begin(), kPoi.end()}; break;
    }
    constexpr std::int64_t kEpoch = 1704067200;  // 2024-01-01T00:00:00Z
    for (std::size_t u = 0; u < n_users; ++u) {
        char uid[32];
        std::snprintf(uid, sizeof(uid), "u%04zu", u + 1);
        Rng rng(derive_seed(seed, std::string_view(uid)));
        std::array<double, kValueCount> raw{};
        for (auto& v : raw)
            v = std::round(rng.uniform(-0.8, 0.8) * 100.0) / 100.0 + 0.0;  // no negative zero
        UserProfile profile{validate_profile(raw), "I am synthetic user " + std::string(uid) + "."};
        const double lean = profile.values[ValueDimension::hedonism];
        const std::size_t count = 3 + static_cast<std::size_t>(rng.below(3));
        const std::int64_t day = kEpoch + static_cast<std::int64_t>(u) * 86400;
        for (std::size_t i = 0; i < count; ++i) {
            InteractionRecord r;
            r.record_id = std::string(uid) + "-" + std::to_string(i + 1);
            r.user_id = uid;
            r.domain = domain;
            r.timestamp = day + 8 * 3600 + static_cast<std::int64_t>(i) * 3 * 3600;
            switch (domain) {
            case DomainKind::media_review: {
                const auto type = pick(rng, kBusinessTypes);
                const auto city = pick(rng, kCities);
                const int rating =
                    std::clamp(static_cast<int>(std::lround(3.0 + 2.0 * lean + rng.uniform(-1.0, 1.0))), 1, 5);
                r.context_text = "Business: The " + pick(rng, kPraise) + " " + type + " in " + city + ".";
                r.action_text = rating >= 3 ? "A " + pick(rng, kPraise) + " " + type + ", I enjoyed the visit."
                                            : "The " + type + " felt " + pick(rng, kCriticism) + " to me.";
                r.rating = rating;
                r.sentiment = rating >= 4 ? "positive" : rating <= 2 ? "negative" : "neutral";
                r.group_key = city;
                break;
            }
            case DomainKind::conversation: {
                const auto topic = pick(rng, kTopics);
                const double x = lean + rng.uniform(-0.6, 0.6);
                r.context_text = "Someone wrote: I think " + topic + " deserves more attention.";
                r.attitude = x > 0.2 ? "agree" : x < -0.2 ? "disagree" : "neutral";
                r.action_text = *r.attitude == "agree"      ? "Absolutely, " + topic + " matters a lot."
                                : *r.attitude == "disagree" ? "I doubt " + topic + " needs more attention."
                                                            : "Not sure how I feel about " + topic + ".";
                r.group_key = pick(rng, kSubs);
                r.thread_key = std::string(uid) + "-t" + std::to_string(i / 2 + 1);
                break;
            }
            case DomainKind::mobility: {
                r.poi_category = pick(rng, kPoi);
                r.stay_minutes = 15.0 * static_cast<double>(1 + rng.below(12));
                r.context_text = "Heading out after the previous stop.";
                r.action_text = "Spent some time at the " + *r.poi_category + ".";
                r.group_key = i % 2 == 0 ? "morning" : "afternoon";
                break;
            }
            }
            d.records.push_back(std::move(r));
        }
        d.profiles.emplace(uid, std::move(profile));
    }
    return d;
}

// ------------------------------------------------------------- predictions

std::vector<Prediction> parse_predictions(std::string_view text)
{
    std::vector<Prediction> out;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        const Json j = parse_line(line_no, line);
        at_line(line_no, [&] {
            Prediction p;
            const auto id = opt<std::string>(j, "record_id");
            if (!id || id->empty())
                throw Error(Errc::schema_error, "prediction lacks record_id").with_field("record_id");
            p.record_id = *id;
            p.action_text = opt<std::string>(j, "action").value_or(std::string());
            p.rating = opt<int>(j, "rating");
            p.sentiment = opt<std::string>(j, "sentiment");
            p.attitude = opt<std::string>(j, "attitude");
            p.poi_category = opt<std::string>(j, "poi_category");
            p.stay_minutes = opt<double>(j, "stay_minutes");
            p.latent = opt<double>(j, "latent");
            p.error = opt<std::string>(j, "error");
            out.push_back(std::move(p));
        });
    });
    return out;
}

std::string format_predictions(std::span<const Prediction> preds)
{
    std::string out;
    for (const auto& p : preds) {
        Json j;
        j["record_id"] = p.record_id;
        j["action"] = p.action_text;
        if (p.rating)
            j["rating"] = *p.rating;
        if (p.sentiment)
            j["sentiment"] = *p.sentiment;
        if (p.attitude)
            j["attitude"] = *p.attitude;
        if (p.poi_category)
            j["poi_category"] = *p.poi_category;
        if (p.stay_minutes)
            j["stay_minutes"] = *p.stay_minutes;
        if (p.latent)
            j["latent"] = *p.latent;
        if (p.error)
            j["error"] = *p.error;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<std::string> alignment_problems(const Dataset& eval, std::span<const Prediction> preds)
{
    std::vector<std::string> problems;
    std::set<std::string, std::less<>> expected;
    for (const auto& r : eval.records)
        expected.insert(r.record_id);
    std::set<std::string, std::less<>> seen;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& id = preds[i].record_id;
        const auto where = "prediction " + std::to_string(i + 1) + ": ";
        if (!expected.contains(id))
            problems.push_back(where + "record id '" + id + "' is not in the eval set");
        else if (!seen.insert(id).second)
            problems.push_back(where + "duplicate record id '" + id + "'");
    }
    for (std::size_t i = 0; i < eval.records.size(); ++i) {
        if (!seen.contains(eval.records[i].record_id))
            problems.push_back("record " + std::to_string(i + 1) + ": no prediction for '" +
                               eval.records[i].record_id + "'");
    }
    return problems;
}

metrics::MetricReport evaluate(const Dataset& eval, std::span<const Prediction> preds)
{
    const auto problems = alignment_problems(eval, preds);
    if (!problems.empty()) {
        std::string msg = std::to_string(problems.size()) + " alignment problem(s); first: " + problems.front();
        fail(Errc::label_mismatch, msg);
    }
    if (eval.records.empty())
        fail(Errc::empty_input, "eval set has no records");
    std::unordered_map<std::string, const Prediction*> by_id;
    for (const auto& p : preds)
        by_id.emplace(p.record_id, &p);

    metrics::MetricReport report;
    report.domain = eval.header.domain;
    report.sample_count = eval.records.size();
    report.tagger = text::default_tagger().identity();

    auto label_accuracy = [&](const char* name, auto truth_of, auto pred_of) {
        std::vector<std::optional<std::string>> truth, pred;
        for (const auto& r : eval.records) {
            const auto t = truth_of(r);
            if (!t)
                continue;
            truth.push_back(t);
            pred.push_back(pred_of(*by_id.at(r.record_id)));
        }
        if (!truth.empty())
            report.set(name, metrics::accuracy<std::optional<std::string>>(pred, truth));
    };
    auto as_text = [](const std::optional<int>& v) {
        return v ? std::optional<std::string>(std::to_string(*v)) : std::nullopt;
    };

    switch (eval.header.domain) {
    case DomainKind::media_review:
        label_accuracy(
            "rating_acc", [&](const InteractionRecord& r) { return as_text(r.rating); },
            [&](const Prediction& p) { return as_text(p.rating); });
        label_accuracy(
            "sentiment_acc", [](const InteractionRecord& r) { return r.sentiment; },
            [](const Prediction& p) { return p.sentiment; });
        break;
    case DomainKind::conversation:
        label_accuracy(
            "attitude_acc", [](const InteractionRecord& r) { return r.attitude; },
            [](const Prediction& p) { return p.attitude; });
        break;
    case DomainKind::mobility: {
        label_accuracy(
            "category_acc", [](const InteractionRecord& r) { return r.poi_category; },
            [](const Prediction& p) { return p.poi_category; });
        std::vector<double> pred, truth;
        for (const auto& r : eval.records) {
            const auto& p = *by_id.at(r.record_id);
            if (p.stay_minutes && r.stay_minutes) {
                pred.push_back(*p.stay_minutes);
                truth.push_back(*r.stay_minutes);
            }
        }
        report.set("stay_coverage", static_cast<double>(pred.size()) / static_cast<double>(eval.records.size()));
        if (!pred.empty())
            report.set("stay_mse", metrics::mse(pred, truth));
        break;
    }
    }

    if (eval.header.domain != DomainKind::mobility) {
        std::vector<std::string> generated, real;
        for (const auto& r : eval.records) {
            generated.push_back(by_id.at(r.record_id)->action_text);
            real.push_back(r.action_text);
        }
        try {
            const auto suite = metrics::linguistic_suite(generated, real);
            for (const auto& [k, v] : suite.values)
                report.set(k, v);
        } catch (const Error& e) {
            if (e.code() != Errc::empty_corpus)
                throw;
        }
    }
    return report;
}

}  // namespace valgauge::dataio
