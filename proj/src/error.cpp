#include "valgauge/error.hpp"

namespace valgauge {

std::string_view errc_name(Errc code) noexcept
{
    switch (code) {
    case Errc::wrong_arity: return "WrongArity";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::non_finite: return "NonFinite";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::empty_input: return "EmptyInput";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::degenerate_ground_truth: return "DegenerateGroundTruth";
    case Errc::too_few_samples: return "TooFewSamples";
    case Errc::degenerate_data: return "DegenerateData";
    case Errc::centroid_coincidence: return "CentroidCoincidence";
    case Errc::label_mismatch: return "LabelMismatch";
    case Errc::too_few_remaining: return "TooFewRemaining";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::degenerate_pair: return "DegeneratePair";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::backend_failure: return "BackendFailure";
    case Errc::missing_field: return "MissingField";
    case Errc::missing_sentinel: return "MissingSentinel";
    case Errc::unbalanced_sentinel: return "UnbalancedSentinel";
    case Errc::type_error: return "TypeError";
    case Errc::parse_error: return "ParseError";
    case Errc::schema_error: return "SchemaError";
    case Errc::vocabulary_violation: return "VocabularyViolation";
    case Errc::too_few_users: return "TooFewUsers";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::io_error: return "IoError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), m_code(code), m_message(message)
{}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace valgauge
