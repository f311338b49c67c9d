#include "valgauge/backend.hpp"

#include <httplib.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "valgauge/format.hpp"

namespace valgauge::harness {

namespace {

[[noreturn]] void backend_fail(const std::string& msg) { fail(Errc::backend_failure, msg); }

Json parse_message(std::string_view line)
{
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        backend_fail("malformed protocol message: " + std::string(line.substr(0, 200)));
    if (const auto it = j.find("error"); it != j.end())
        backend_fail("backend error: " + (it->is_string() ? it->get<std::string>() : it->dump()));
    return j;
}

std::vector<std::string> split_words(const std::string& s)
{
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;)
        out.push_back(w);
    return out;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::io_error, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

Json handshake_message(const BackendInfo& info)
{
    Json j;
    j["protocol_version"] = info.protocol_version;
    j["deterministic"] = info.deterministic;
    j["max_inflight"] = info.max_inflight;
    if (!info.name.empty())
        j["name"] = info.name;
    return j;
}

BackendInfo parse_handshake(const Json& j)
{
    if (!j.is_object())
        backend_fail("handshake is not an object");
    const auto v = j.find("protocol_version");
    const auto d = j.find("deterministic");
    const auto m = j.find("max_inflight");
    if (v == j.end() || !v->is_number_integer() || d == j.end() || !d->is_boolean() || m == j.end() ||
        !m->is_number_integer())
        backend_fail("handshake lacks protocol_version, deterministic or max_inflight");
    BackendInfo info;
    info.protocol_version = v->get<int>();
    info.deterministic = d->get<bool>();
    info.max_inflight = m->get<int>();
    if (info.protocol_version != kProtocolVersion)
        backend_fail("unsupported protocol version " + std::to_string(info.protocol_version));
    if (info.max_inflight < 0)
        backend_fail("negative max_inflight");
    if (const auto n = j.find("name"); n != j.end() && n->is_string())
        info.name = n->get<std::string>();
    return info;
}

Json generate_request(const std::string& context, const ValueProfile& profile, std::size_t n, double temperature,
                      std::uint64_t seed)
{
    Json j;
    j["op"] = "generate";
    j["context"] = context;
    j["profile"] = to_json(profile);
    j["n"] = n;
    j["temperature"] = temperature;
    j["seed"] = seed;
    return j;
}

Json score_request(const std::string& action, const std::string& context, const ValueProfile& profile)
{
    Json j;
    j["op"] = "score";
    j["action"] = action;
    j["context"] = context;
    j["profile"] = to_json(profile);
    return j;
}

std::vector<std::string> parse_generate_response(const Json& j, std::size_t n)
{
    const auto it = j.find("candidates");
    if (it == j.end() || !it->is_array())
        backend_fail("generate response lacks a candidates array");
    std::vector<std::string> out;
    for (const auto& c : *it) {
        if (!c.is_string())
            backend_fail("candidate is not a string");
        out.push_back(c.get<std::string>());
    }
    if (out.size() != n)
        backend_fail("backend returned " + std::to_string(out.size()) + " candidates, expected " +
                     std::to_string(n));
    return out;
}

double parse_score_response(const Json& j)
{
    const auto it = j.find("score");
    if (it == j.end() || !it->is_number())
        backend_fail("score response lacks a numeric score");
    const double s = it->get<double>();
    if (!std::isfinite(s))
        backend_fail("non-finite score");
    return s;
}

Json handle_request(const Json& request, GeneratorBackend* gen, ScorerBackend* scorer)
{
    Json reply;
    try {
        if (!request.is_object())
            fail(Errc::schema_error, "request is not an object");
        const auto op = request.value("op", std::string());
        if (op == "handshake") {
            BackendInfo info = gen ? gen->info() : scorer ? scorer->info() : BackendInfo{};
            return handshake_message(info);
        }
        const auto profile = profile_from_json(request.at("profile"));
        const auto context = request.at("context").get<std::string>();
        if (op == "generate") {
            if (!gen)
                fail(Errc::invalid_argument, "generate is not offered");
            const auto n = request.at("n").get<std::size_t>();
            auto set = gen->generate(context, profile, n, request.at("temperature").get<double>(),
                                     request.at("seed").get<std::uint64_t>());
            reply["candidates"] = set.candidates;
        } else if (op == "score") {
            if (!scorer)
                fail(Errc::invalid_argument, "score is not offered");
            reply["score"] = scorer->score(request.at("action").get<std::string>(), context, profile);
        } else {
            fail(Errc::invalid_argument, "unknown op '" + op + "'");
        }
    } catch (const std::exception& e) {
        reply = Json::object();
        reply["error"] = e.what();
    }
    return reply;
}

void serve_stdio(std::istream& in, std::ostream& out, const BackendInfo& info, GeneratorBackend* gen,
                 ScorerBackend* scorer)
{
    out << handshake_message(info).dump() << '\n' << std::flush;
    for (std::string line; std::getline(in, line);) {
        if (trim(line).empty())
            continue;
        Json req = Json::parse(line, nullptr, false);
        Json reply;
        if (req.is_discarded()) {
            reply["error"] = "malformed request";
        } else {
            reply = handle_request(req, gen, scorer);
        }
        out << reply.dump() << '\n' << std::flush;
    }
}

std::chrono::milliseconds backend_timeout()
{
    const char* raw = std::getenv("VALGAUGE_BACKEND_TIMEOUT_MS");
    if (!raw || !*raw)
        return std::chrono::milliseconds(30000);
    const auto v = parse_double(trim(raw));
    if (!v || *v <= 0.0 || *v != std::floor(*v) || *v > 1e12)
        fail(Errc::invalid_argument, std::string("VALGAUGE_BACKEND_TIMEOUT_MS must be a positive integer, got '") +
                                         raw + "'");
    return std::chrono::milliseconds(static_cast<long long>(*v));
}

// ------------------------------------------------------------------ exec

ExecBackend::ExecBackend(const std::string& command, std::chrono::milliseconds timeout)
    : m_command(command), m_timeout(timeout)
{
    const auto argv_s = split_words(command);
    if (argv_s.empty())
        fail(Errc::invalid_argument, "empty exec backend command");
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
        backend_fail(std::string("socketpair: ") + std::strerror(errno));
    std::vector<char*> argv;
    for (const auto& a : argv_s)
        argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(sv[0]);
        ::close(sv[1]);
        backend_fail(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::dup2(sv[1], STDIN_FILENO);
        ::dup2(sv[1], STDOUT_FILENO);
        ::execv(argv[0], argv.data());
        ::_exit(127);
    }
    ::close(sv[1]);
    m_pid = pid;
    m_fd = sv[0];
    try {
        m_info = parse_handshake(parse_message(read_line()));
    } catch (...) {
        terminate();
        throw;
    }
    if (m_info.name.empty())
        m_info.name = "exec:" + command;
}

ExecBackend::~ExecBackend() { terminate(); }

void ExecBackend::terminate()
{
    if (m_fd >= 0) {
        ::close(m_fd);
        m_fd = -1;
    }
    if (m_pid > 0) {
        int status = 0;
        // Closing the socket is the shutdown signal; give the child a moment.
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(m_pid, &status, WNOHANG) == m_pid) {
                m_pid = -1;
                return;
            }
            ::usleep(2000);
        }
        ::kill(m_pid, SIGKILL);
        ::waitpid(m_pid, &status, 0);
        m_pid = -1;
    }
}

std::string ExecBackend::read_line()
{
    const auto deadline = std::chrono::steady_clock::now() + m_timeout;
    while (true) {
        const auto nl = m_buffer.find('\n');
        if (nl != std::string::npos) {
            std::string line = m_buffer.substr(0, nl);
            m_buffer.erase(0, nl + 1);
            return line;
        }
        if (m_fd < 0)
            backend_fail("backend process is gone");
        const auto left =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            terminate();
            backend_fail("backend timed out after " + std::to_string(m_timeout.count()) + " ms");
        }
        pollfd p{m_fd, POLLIN, 0};
        const int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
        if (rc < 0 && errno == EINTR)
            continue;
        if (rc < 0)
            backend_fail(std::string("poll: ") + std::strerror(errno));
        if (rc == 0)
            continue;
        char buf[4096];
        const auto got = ::read(m_fd, buf, sizeof(buf));
        if (got < 0 && errno == EINTR)
            continue;
        if (got <= 0) {
            terminate();
            backend_fail("backend closed its output");
        }
        m_buffer.append(buf, static_cast<std::size_t>(got));
    }
}

Json ExecBackend::roundtrip(const Json& request)
{
    std::lock_guard lock(m_mutex);
    if (m_fd < 0)
        backend_fail("backend process is gone");
    const std::string line = request.dump() + "\n";
    std::size_t sent = 0;
    while (sent < line.size()) {
        const auto n = ::send(m_fd, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0) {
            terminate();
            backend_fail(std::string("write to backend failed: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
    return parse_message(read_line());
}

CandidateSet ExecBackend::generate(const std::string& context, const ValueProfile& profile, std::size_t n,
                                   double temperature, std::uint64_t seed)
{
    auto reply = roundtrip(generate_request(context, profile, n, temperature, seed));
    return {parse_generate_response(reply, n), seed, temperature};
}

double ExecBackend::score(const std::string& action, const std::string& context, const ValueProfile& profile)
{
    return parse_score_response(roundtrip(score_request(action, context, profile)));
}

// ------------------------------------------------------------------ http

struct HttpBackend::Impl {
    std::unique_ptr<httplib::Client> client;
    std::string path;
};

HttpBackend::HttpBackend(const std::string& url, std::chrono::milliseconds timeout) : m_impl(std::make_unique<Impl>())
{
    constexpr std::string_view scheme = "http://";
    if (!url.starts_with(scheme))
        fail(Errc::invalid_argument, "http backend URL must start with http://, got '" + url + "'");
    const auto slash = url.find('/', scheme.size());
    const auto origin = url.substr(0, slash);
    m_impl->path = slash == std::string::npos ? "/" : url.substr(slash);
    m_impl->client = std::make_unique<httplib::Client>(origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    m_impl->client->set_connection_timeout(secs.count(), usecs.count());
    m_impl->client->set_read_timeout(secs.count(), usecs.count());
    m_impl->client->set_write_timeout(secs.count(), usecs.count());
    Json hs;
    hs["op"] = "handshake";
    m_info = parse_handshake(post(hs));
    if (m_info.name.empty())
        m_info.name = "http:" + url;
}

HttpBackend::~HttpBackend() = default;

Json HttpBackend::post(const Json& request)
{
    auto res = m_impl->client->Post(m_impl->path, request.dump(), "application/json");
    if (!res)
        backend_fail("http request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        backend_fail("http status " + std::to_string(res->status));
    return parse_message(res->body);
}

CandidateSet HttpBackend::generate(const std::string& context, const ValueProfile& profile, std::size_t n,
                                   double temperature, std::uint64_t seed)
{
    auto reply = post(generate_request(context, profile, n, temperature, seed));
    return {parse_generate_response(reply, n), seed, temperature};
}

double HttpBackend::score(const std::string& action, const std::string& context, const ValueProfile& profile)
{
    return parse_score_response(post(score_request(action, context, profile)));
}

// --------------------------------------------------------------- factory

namespace {

std::string http_url(std::string_view rest)
{
    std::string url(rest);
    if (url.starts_with("//"))
        url = "http:" + url;
    return url;
}

}  // namespace

std::unique_ptr<GeneratorBackend> make_generator(std::string_view spec)
{
    if (spec == "mock:planted")
        return std::make_unique<PlantedGenerator>();
    if (spec.starts_with("exec:"))
        return std::make_unique<ExecBackend>(std::string(spec.substr(5)));
    if (spec.starts_with("http:"))
        return std::make_unique<HttpBackend>(http_url(spec.substr(5)));
    fail(Errc::invalid_argument, "unknown generator backend '" + std::string(spec) + "'");
}

std::unique_ptr<ScorerBackend> make_scorer(std::string_view spec)
{
    if (spec == "mock:stereotype")
        return std::make_unique<StereotypeScorer>();
    if (spec == "mock:length")
        return std::make_unique<LengthScorer>();
    if (spec.starts_with("verifier:"))
        return std::make_unique<VerifierScorer>(verifier::parse_params(read_file(std::string(spec.substr(9)))));
    if (spec.starts_with("exec:"))
        return std::make_unique<ExecBackend>(std::string(spec.substr(5)));
    if (spec.starts_with("http:"))
        return std::make_unique<HttpBackend>(http_url(spec.substr(5)));
    fail(Errc::invalid_argument, "unknown scorer backend '" + std::string(spec) + "'");
}

}  // namespace valgauge::harness
