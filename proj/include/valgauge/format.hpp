#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <string_view>

namespace valgauge {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

/// Fixed-precision rendering for human-facing reports.
inline std::string format_fixed(double v, int precision)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
    return std::string(buf, ptr);
}

/// Parses the whole of `s` as a double; nullopt on any trailing garbage.
inline std::optional<double> parse_double(std::string_view s)
{
    double v = 0.0;
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

inline std::string_view trim(std::string_view s)
{
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

}  // namespace valgauge
