#include "valgauge/prompt.hpp"

#include <cctype>
#include <cmath>
#include <ctime>

#include "valgauge/format.hpp"

namespace valgauge::harness {

namespace {

constexpr std::string_view kPreferenceLine =
    "Your value preference ([-1, 1] represents from inconsistency to consistency):\n";

std::string numbered(const std::vector<std::string>& entries)
{
    if (entries.empty())
        return "(none)\n";
    std::string out;
    for (std::size_t i = 0; i < entries.size(); ++i)
        out += std::to_string(i + 1) + ") " + entries[i] + "\n";
    return out;
}

std::string clock_time(std::int64_t epoch_seconds)
{
    const auto t = static_cast<std::time_t>(epoch_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%d %H:%M", &tm);
    return buf;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::optional<std::string> optional_sentinel(std::string_view text, std::string_view tag)
{
    try {
        return parse_sentinels(text, tag).value;
    } catch (const Error& e) {
        if (e.code() == Errc::missing_sentinel)
            return std::nullopt;
        throw;
    }
}

}  // namespace

std::string Prompt::text() const { return "[System]\n" + system + "\n[User]\n" + user; }

std::string format_value_preference(const ValueProfile& profile)
{
    std::string out;
    for (auto v : canonical_order()) {
        if (!out.empty())
            out += ", ";
        out += std::string(dimension_name(v)) + ": " + format_fixed(profile[v], 2);
    }
    return out;
}

std::string format_hours(double minutes) { return format_double(minutes / 60.0); }

Prompt render_prompt(DomainKind domain, const InteractionRecord& record, const MemoryBundle& memory,
                     const ValueProfile& profile, std::string_view intro)
{
    auto missing = [&](const char* field) {
        throw Error(Errc::missing_field, "record '" + record.record_id + "' lacks " + field).with_field(field);
    };
    if (record.context_text.empty())
        missing("context");
    Prompt p;
    const std::string preference = std::string(kPreferenceLine) + format_value_preference(profile) + "\n";
    switch (domain) {
    case DomainKind::media_review:
        p.system = "You are going to role-play a user of a media platform.\n" + preference +
                   "Based on your self-introduction, your past reviews of businesses, and the current business you "
                   "are reviewing, generate a review (between two <|review|> tokens) and rating (between two "
                   "<|rating|> tokens) for the current business.\n";
        p.user = "## My Self-introduction:\n" + std::string(intro.empty() ? "(none)" : intro) + "\n\n" +
                 "## My Past Reviews:\n" + numbered(memory.longterm) + "\n" +
                 "Currently I am reviewing this business:\n" + record.context_text + "\n\n" +
                 "My review and rating are as follows:\n";
        break;
    case DomainKind::conversation:
        p.system = "You are going to role-play a user of reddit.\n" + preference +
                   "Based on your past comments and the conversation history, generate the response (between two "
                   "<|Comment|> tokens) to the current conversation.\n";
        p.user = "## My Past Comments:\n" + numbered(memory.longterm) + "\n" + "## Current Conversation:\n" +
                 (memory.working.empty() ? std::string() : memory.working + "\n") + record.context_text + "\n\n" +
                 "According to my past comments and the current conversation, I'm going to reply that:\n";
        break;
    case DomainKind::mobility:
        if (!record.timestamp)
            missing("timestamp");
        p.system = "You are going to role-play a citizen living in a city.\n" + preference +
                   "Based on your self-introduction, your diaries, and the places you went today, plan the place "
                   "(between two <|place|> tokens) and stay time (between two <|time|> tokens) of your next "
                   "activity.\n";
        p.user = "### My Self-introduction:\n" + std::string(intro.empty() ? "(none)" : intro) + "\n\n" +
                 "### My Diaries:\n" + numbered(memory.longterm) + "\n" + "### Today's Activities:\n" +
                 (memory.working.empty() ? std::string("(none)") : memory.working) + "\n" + record.context_text +
                 "\n\n" + "Currently it is " + clock_time(*record.timestamp) + ", I am planning to go to ...\n";
        break;
    }
    return p;
}

std::string render_completion(const InteractionRecord& record)
{
    std::string out;
    switch (record.domain) {
    case DomainKind::media_review:
        if (!record.rating)
            throw Error(Errc::missing_field, "media record lacks a rating").with_field("rating");
        out = "<|review|>" + record.action_text + "<|review|>\n<|rating|>" + std::to_string(*record.rating) +
              "<|rating|>";
        break;
    case DomainKind::conversation:
        out = "<|Comment|>" + record.action_text + "<|Comment|>";
        break;
    case DomainKind::mobility:
        if (!record.poi_category || !record.stay_minutes)
            throw Error(Errc::missing_field, "mobility record lacks poi_category or stay_minutes")
                .with_field("poi_category");
        out = "<|place|>" + *record.poi_category + "<|place|>, and stay for <|time|>" +
              format_hours(*record.stay_minutes) + "<|time|> hours.";
        break;
    }
    if (record.sentiment)
        out += "\n<|sentiment|>" + *record.sentiment + "<|sentiment|>";
    if (record.attitude)
        out += "\n<|attitude|>" + *record.attitude + "<|attitude|>";
    return out;
}

SentinelField parse_sentinels(std::string_view text, std::string_view tag)
{
    const std::string marker = "<|" + std::string(tag) + "|>";
    const auto open = text.find(marker);
    if (open == std::string_view::npos)
        fail(Errc::missing_sentinel, "no " + marker + " marker");
    const auto body = open + marker.size();
    const auto close = text.find(marker, body);
    if (close == std::string_view::npos)
        fail(Errc::unbalanced_sentinel, "unmatched " + marker + " marker");
    SentinelField f;
    f.value = std::string(trim(text.substr(body, close - body)));
    auto pos = close + marker.size();
    while (true) {
        const auto a = text.find(marker, pos);
        if (a == std::string_view::npos)
            break;
        const auto b = text.find(marker, a + marker.size());
        if (b == std::string_view::npos)
            break;
        ++f.extra_pairs;
        pos = b + marker.size();
    }
    return f;
}

int parse_rating(std::string_view value)
{
    const auto v = trim(value);
    const auto x = parse_double(v);
    if (!x || *x != std::floor(*x) || *x < 1.0 || *x > 5.0)
        fail(Errc::type_error, "rating '" + std::string(v) + "' is not an integer in 1..5");
    return static_cast<int>(*x);
}

double parse_stay_minutes(std::string_view value)
{
    auto v = trim(value);
    std::size_t split = 0;
    while (split < v.size() && (std::isdigit(static_cast<unsigned char>(v[split])) != 0 || v[split] == '.' ||
                                v[split] == '+' || v[split] == '-' || v[split] == 'e' || v[split] == 'E'))
        ++split;
    const auto number = parse_double(v.substr(0, split));
    const auto unit = lower(trim(v.substr(split)));
    if (!number || !std::isfinite(*number) || *number < 0.0)
        fail(Errc::type_error, "stay time '" + std::string(v) + "' is not a non-negative number");
    if (unit.empty() || unit == "h" || unit == "hr" || unit == "hrs" || unit == "hour" || unit == "hours")
        return *number * 60.0;
    if (unit == "m" || unit == "min" || unit == "mins" || unit == "minute" || unit == "minutes")
        return *number;
    fail(Errc::type_error, "unknown stay time unit '" + unit + "'");
}

std::string_view primary_tag(DomainKind domain) noexcept
{
    switch (domain) {
    case DomainKind::media_review: return "review";
    case DomainKind::conversation: return "Comment";
    case DomainKind::mobility: return "place";
    }
    return "review";
}

ParsedAction parse_completion(DomainKind domain, std::string_view text)
{
    ParsedAction a;
    switch (domain) {
    case DomainKind::media_review:
        a.action_text = parse_sentinels(text, "review").value;
        a.rating = parse_rating(parse_sentinels(text, "rating").value);
        break;
    case DomainKind::conversation:
        a.action_text = parse_sentinels(text, "Comment").value;
        break;
    case DomainKind::mobility:
        a.poi_category = parse_sentinels(text, "place").value;
        a.action_text = *a.poi_category;
        a.stay_minutes = parse_stay_minutes(parse_sentinels(text, "time").value);
        break;
    }
    a.sentiment = optional_sentinel(text, "sentiment");
    a.attitude = optional_sentinel(text, "attitude");
    if (const auto latent = optional_sentinel(text, "latent")) {
        const auto x = parse_double(*latent);
        if (!x || !std::isfinite(*x))
            fail(Errc::type_error, "latent '" + *latent + "' is not a number");
        a.latent = *x;
    }
    return a;
}

std::string primary_field(const InteractionRecord& record)
{
    if (record.domain == DomainKind::mobility)
        return record.poi_category.value_or(std::string());
    return record.action_text;
}

std::string extract_primary(DomainKind domain, std::string_view candidate)
{
    try {
        return parse_sentinels(candidate, primary_tag(domain)).value;
    } catch (const Error&) {
        return std::string(trim(candidate));
    }
}

}  // namespace valgauge::harness
