#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace valgauge {

enum class Errc {
    wrong_arity,
    out_of_range,
    non_finite,
    length_mismatch,
    empty_input,
    empty_corpus,
    degenerate_ground_truth,
    too_few_samples,
    degenerate_data,
    centroid_coincidence,
    label_mismatch,
    too_few_remaining,
    shape_mismatch,
    degenerate_pair,
    non_finite_loss,
    backend_failure,
    missing_field,
    missing_sentinel,
    unbalanced_sentinel,
    type_error,
    parse_error,
    schema_error,
    vocabulary_violation,
    too_few_users,
    invalid_argument,
    io_error,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for the library. The code identifies the failure
/// class; index/line/field carry location details when they apply.
class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& message);

    [[nodiscard]] Errc code() const noexcept { return m_code; }
    /// The message without the "Name: " prefix.
    [[nodiscard]] const std::string& message() const noexcept { return m_message; }
    [[nodiscard]] std::optional<std::size_t> index() const noexcept { return m_index; }
    [[nodiscard]] std::optional<std::size_t> line() const noexcept { return m_line; }
    [[nodiscard]] std::optional<double> value() const noexcept { return m_value; }
    [[nodiscard]] const std::string& field() const noexcept { return m_field; }

    Error& at_index(std::size_t i) { m_index = i; return *this; }
    Error& at_line(std::size_t l) { m_line = l; return *this; }
    Error& with_value(double v) { m_value = v; return *this; }
    Error& with_field(std::string f) { m_field = std::move(f); return *this; }

  private:
    Errc m_code;
    std::string m_message;
    std::optional<std::size_t> m_index;
    std::optional<std::size_t> m_line;
    std::optional<double> m_value;
    std::string m_field;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace valgauge
