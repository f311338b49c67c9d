#pragma once

#include <chrono>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "valgauge/harness.hpp"
#include "valgauge/serialize.hpp"

namespace valgauge::harness {

inline constexpr int kProtocolVersion = 1;

// Wire messages, one JSON object per line (stdio) or per request body (HTTP).
//   handshake  {protocol_version, deterministic, max_inflight, name?}
//   generate   {op:"generate", context, profile:[10], n, temperature, seed} -> {candidates:[...]}
//   score      {op:"score", action, context, profile:[10]}                 -> {score}
//   failure    {error:"..."}

Json handshake_message(const BackendInfo& info);
/// Throws Errc::backend_failure on a malformed handshake or another protocol version.
BackendInfo parse_handshake(const Json& j);

Json generate_request(const std::string& context, const ValueProfile& profile, std::size_t n, double temperature,
                      std::uint64_t seed);
Json score_request(const std::string& action, const std::string& context, const ValueProfile& profile);
std::vector<std::string> parse_generate_response(const Json& j, std::size_t n);
double parse_score_response(const Json& j);

/// Server side of one request. Never throws; failures become error frames.
/// Either backend may be null when the server does not offer that op.
Json handle_request(const Json& request, GeneratorBackend* gen, ScorerBackend* scorer);

/// Writes the handshake, then answers one request per input line until EOF.
void serve_stdio(std::istream& in, std::ostream& out, const BackendInfo& info, GeneratorBackend* gen,
                 ScorerBackend* scorer);

/// VALGAUGE_BACKEND_TIMEOUT_MS, default 30000. Throws Errc::invalid_argument on junk.
std::chrono::milliseconds backend_timeout();

/// A child process speaking the protocol on its standard streams. Requests are
/// serialized; the child is terminated on destruction.
class ExecBackend final : public GeneratorBackend, public ScorerBackend {
  public:
    /// `command` is the executable path followed by whitespace-separated arguments.
    explicit ExecBackend(const std::string& command, std::chrono::milliseconds timeout = backend_timeout());
    ~ExecBackend() override;
    ExecBackend(const ExecBackend&) = delete;
    ExecBackend& operator=(const ExecBackend&) = delete;

    CandidateSet generate(const std::string& context, const ValueProfile& profile, std::size_t n,
                          double temperature, std::uint64_t seed) override;
    double score(const std::string& action, const std::string& context, const ValueProfile& profile) override;
    [[nodiscard]] BackendInfo info() const override { return m_info; }

  private:
    Json roundtrip(const Json& request);
    std::string read_line();
    void terminate();

    std::string m_command;
    std::chrono::milliseconds m_timeout;
    int m_pid = -1;
    int m_fd = -1;
    std::string m_buffer;
    BackendInfo m_info;
    std::mutex m_mutex;
};

/// POSTs each message to a URL ("http://host:port/path").
class HttpBackend final : public GeneratorBackend, public ScorerBackend {
  public:
    explicit HttpBackend(const std::string& url, std::chrono::milliseconds timeout = backend_timeout());
    ~HttpBackend() override;

    CandidateSet generate(const std::string& context, const ValueProfile& profile, std::size_t n,
                          double temperature, std::uint64_t seed) override;
    double score(const std::string& action, const std::string& context, const ValueProfile& profile) override;
    [[nodiscard]] BackendInfo info() const override { return m_info; }

  private:
    Json post(const Json& request);

    struct Impl;
    std::unique_ptr<Impl> m_impl;
    BackendInfo m_info;
};

/// "mock:planted", "exec:COMMAND" or "http:URL".
std::unique_ptr<GeneratorBackend> make_generator(std::string_view spec);
/// "mock:stereotype", "mock:length", "verifier:PARAMS_FILE", "exec:COMMAND" or "http:URL".
std::unique_ptr<ScorerBackend> make_scorer(std::string_view spec);

}  // namespace valgauge::harness
