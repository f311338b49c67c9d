#pragma once

#include <json.hpp>

#include "valgauge/core.hpp"

namespace valgauge {

using Json = nlohmann::ordered_json;

Json to_json(const ValueProfile& p);
ValueProfile profile_from_json(const Json& j);

Json to_json(const ValueActivation& a);
ValueActivation activation_from_json(const Json& j);

/// Record keys follow the dataset schema v1 (context/action rather than
/// context_text/action_text). Absent optionals are omitted.
Json to_json(const InteractionRecord& r);
InteractionRecord record_from_json(const Json& j);

Json to_json(const PreferencePair& p);
PreferencePair pair_from_json(const Json& j);

}  // namespace valgauge
