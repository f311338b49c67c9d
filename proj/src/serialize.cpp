#include "valgauge/serialize.hpp"

#include <vector>

namespace valgauge {

namespace {

std::vector<double> real_array(const Json& j, const char* what)
{
    if (!j.is_array())
        fail(Errc::schema_error, std::string(what) + " must be an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number())
            fail(Errc::schema_error, std::string(what) + " must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

template <typename T>
std::optional<T> optional_field(const Json& j, const char* key)
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

std::string required_string(const Json& j, const char* key)
{
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        throw Error(Errc::schema_error, std::string("missing string field '") + key + "'").with_field(key);
    return it->get<std::string>();
}

}  // namespace

Json to_json(const ValueProfile& p) { return Json(p.scores()); }

ValueProfile profile_from_json(const Json& j)
{
    const auto raw = real_array(j, "profile");
    return validate_profile(raw);
}

Json to_json(const ValueActivation& a) { return Json(a.weights()); }

ValueActivation activation_from_json(const Json& j)
{
    const auto raw = real_array(j, "activation");
    return validate_activation(raw);
}

Json to_json(const InteractionRecord& r)
{
    Json j;
    j["record_id"] = r.record_id;
    j["user_id"] = r.user_id;
    j["domain"] = std::string(domain_name(r.domain));
    j["context"] = r.context_text;
    j["action"] = r.action_text;
    if (r.rating)
        j["rating"] = *r.rating;
    if (r.sentiment)
        j["sentiment"] = *r.sentiment;
    if (r.attitude)
        j["attitude"] = *r.attitude;
    if (r.poi_category)
        j["poi_category"] = *r.poi_category;
    if (r.stay_minutes)
        j["stay_minutes"] = *r.stay_minutes;
    if (r.group_key)
        j["group_key"] = *r.group_key;
    if (r.thread_key)
        j["thread_key"] = *r.thread_key;
    if (r.timestamp)
        j["timestamp"] = *r.timestamp;
    return j;
}

InteractionRecord record_from_json(const Json& j)
{
    if (!j.is_object())
        fail(Errc::schema_error, "record must be an object");
    InteractionRecord r;
    r.record_id = required_string(j, "record_id");
    r.user_id = required_string(j, "user_id");
    const auto domain = parse_domain(required_string(j, "domain"));
    if (!domain)
        throw Error(Errc::schema_error, "unknown domain").with_field("domain");
    r.domain = *domain;
    r.context_text = required_string(j, "context");
    r.action_text = required_string(j, "action");
    if (const auto it = j.find("rating"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer())
            throw Error(Errc::schema_error, "rating must be an integer").with_field("rating");
        r.rating = it->get<int>();
    }
    r.sentiment = optional_field<std::string>(j, "sentiment");
    r.attitude = optional_field<std::string>(j, "attitude");
    r.poi_category = optional_field<std::string>(j, "poi_category");
    r.stay_minutes = optional_field<double>(j, "stay_minutes");
    r.group_key = optional_field<std::string>(j, "group_key");
    r.thread_key = optional_field<std::string>(j, "thread_key");
    r.timestamp = optional_field<std::int64_t>(j, "timestamp");
    check_record(r);
    return r;
}

Json to_json(const PreferencePair& p)
{
    Json j;
    j["context"] = p.context_text;
    j["profile"] = to_json(p.value_profile);
    j["chosen"] = p.chosen;
    j["rejected"] = p.rejected;
    j["chosen_score"] = p.chosen_score;
    j["rejected_score"] = p.rejected_score;
    j["degenerate"] = p.degenerate;
    return j;
}

PreferencePair pair_from_json(const Json& j)
{
    if (!j.is_object())
        fail(Errc::schema_error, "preference pair must be an object");
    PreferencePair p;
    p.context_text = required_string(j, "context");
    if (!j.contains("profile"))
        throw Error(Errc::schema_error, "missing field 'profile'").with_field("profile");
    p.value_profile = profile_from_json(j.at("profile"));
    p.chosen = required_string(j, "chosen");
    p.rejected = required_string(j, "rejected");
    p.chosen_score = optional_field<double>(j, "chosen_score").value_or(0.0);
    p.rejected_score = optional_field<double>(j, "rejected_score").value_or(0.0);
    p.degenerate = optional_field<bool>(j, "degenerate").value_or(false);
    if (p.chosen_score < p.rejected_score)
        throw Error(Errc::schema_error, "chosen_score below rejected_score").with_field("chosen_score");
    return p;
}

}  // namespace valgauge
