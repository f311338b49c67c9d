#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "test_util.hpp"
#include "valgauge/backend.hpp"

// After Eigen: the resolver header pulled in here defines a _res macro.
#include <httplib.h>

using namespace valgauge;
using namespace valgauge::harness;

namespace {

const std::string kMock = VALGAUGE_MOCK_BACKEND;

ValueProfile flat_profile(double x) { return validate_profile(std::vector<double>(10, x)); }

/// Serves handle_request over HTTP on an ephemeral port for the lifetime of the object.
class TestServer {
  public:
    TestServer(GeneratorBackend* gen, ScorerBackend* scorer, bool broken_handshake = false)
    {
        m_server.Post("/rpc", [=](const httplib::Request& req, httplib::Response& res) {
            const auto j = Json::parse(req.body, nullptr, false);
            Json reply = handle_request(j, gen, scorer);
            if (broken_handshake && j.value("op", "") == "handshake")
                reply = Json{{"protocol_version", 9}};
            res.set_content(reply.dump(), "application/json");
        });
        m_port = m_server.bind_to_any_port("127.0.0.1");
        m_thread = std::thread([this] { m_server.listen_after_bind(); });
        m_server.wait_until_ready();
    }
    ~TestServer()
    {
        m_server.stop();
        m_thread.join();
    }
    [[nodiscard]] std::string url() const { return "http://127.0.0.1:" + std::to_string(m_port) + "/rpc"; }

  private:
    httplib::Server m_server;
    int m_port = 0;
    std::thread m_thread;
};

class EnvGuard {
  public:
    EnvGuard(const char* name, const char* value) : m_name(name)
    {
        if (const char* old = std::getenv(name))
            m_old = old;
        ::setenv(name, value, 1);
    }
    ~EnvGuard()
    {
        if (m_old)
            ::setenv(m_name, m_old->c_str(), 1);
        else
            ::unsetenv(m_name);
    }

  private:
    const char* m_name;
    std::optional<std::string> m_old;
};

}  // namespace

TEST_SUITE("backend") {

TEST_CASE("wire messages round-trip")
{
    const auto hs = handshake_message({"x", 1, false, 4});
    const auto info = parse_handshake(hs);
    CHECK(info.name == "x");
    CHECK_FALSE(info.deterministic);
    CHECK(info.max_inflight == 4);
    CHECK(hs.at("protocol_version") == 1);
    CHECK_ERRC(parse_handshake(Json{{"protocol_version", 2}, {"deterministic", true}, {"max_inflight", 0}}),
               Errc::backend_failure);
    CHECK_ERRC(parse_handshake(Json::parse("[1,2]")), Errc::backend_failure);

    const auto g = generate_request("ctx", flat_profile(0.5), 3, 0.7, 42);
    CHECK(g.at("op") == "generate");
    CHECK(g.at("n") == 3);
    CHECK(g.at("seed") == 42);
    CHECK(g.at("profile").size() == 10);
    const auto s = score_request("act", "ctx", flat_profile(0));
    CHECK(s.at("op") == "score");
    CHECK(s.at("action") == "act");

    CHECK(parse_generate_response(Json{{"candidates", {"a", "b"}}}, 2) == std::vector<std::string>{"a", "b"});
    CHECK_ERRC(parse_generate_response(Json{{"candidates", {"a"}}}, 2), Errc::backend_failure);
    CHECK_ERRC(parse_generate_response(Json{{"error", "nope"}}, 1), Errc::backend_failure);
    CHECK(parse_score_response(Json{{"score", 1.5}}) == 1.5);
    CHECK_ERRC(parse_score_response(Json{{"score", "high"}}), Errc::backend_failure);
}

TEST_CASE("handle_request answers and never throws")
{
    PlantedGenerator gen;
    LengthScorer scorer;
    const auto reply = handle_request(generate_request("ctx", flat_profile(0.1), 2, 1.0, 7), &gen, &scorer);
    CHECK(reply.at("candidates").size() == 2);
    CHECK(reply.at("candidates")[0] == gen.generate("ctx", flat_profile(0.1), 2, 1.0, 7).candidates[0]);
    CHECK(handle_request(score_request("abcd", "c", flat_profile(0)), &gen, &scorer).at("score") == 4.0);
    CHECK(handle_request(Json{{"op", "generate"}}, &gen, &scorer).contains("error"));
    CHECK(handle_request(Json{{"op", "fly"}, {"context", ""}, {"profile", std::vector<double>(10, 0.0)}}, &gen,
                         &scorer)
              .contains("error"));
    CHECK(handle_request(score_request("a", "c", flat_profile(0)), &gen, nullptr).contains("error"));
    CHECK(handle_request(Json{{"op", "handshake"}}, &gen, nullptr).at("protocol_version") == 1);
}

TEST_CASE("stdio server writes a handshake then one reply per line")
{
    PlantedGenerator gen;
    std::istringstream in(generate_request("c", flat_profile(0), 1, 1.0, 1).dump() + "\n\nnot json\n");
    std::ostringstream out;
    serve_stdio(in, out, {"t", 1, true, 0}, &gen, nullptr);
    std::istringstream lines(out.str());
    std::string l1, l2, l3, extra;
    std::getline(lines, l1);
    std::getline(lines, l2);
    std::getline(lines, l3);
    CHECK(parse_handshake(Json::parse(l1)).name == "t");
    CHECK(Json::parse(l2).contains("candidates"));
    CHECK(Json::parse(l3).contains("error"));
    CHECK_FALSE(std::getline(lines, extra));
}

TEST_CASE("exec backend matches the in-process mock")
{
    ExecBackend remote(kMock + " --spread 0.5", std::chrono::milliseconds(10000));
    PlantedGenerator local(ValueDimension::self_direction, 0.5);
    StereotypeScorer scorer;
    CHECK(remote.info().protocol_version == 1);
    CHECK(remote.info().deterministic);
    const auto p = flat_profile(0.3);
    const auto a = remote.generate("a <|review|> prompt", p, 4, 1.0, 99);
    CHECK(a.candidates == local.generate("a <|review|> prompt", p, 4, 1.0, 99).candidates);
    for (const auto& c : a.candidates)
        CHECK(remote.score(c, "ctx", p) == scorer.score(c, "ctx", p));
}

TEST_CASE("exec backend serializes concurrent callers")
{
    ExecBackend remote(kMock, std::chrono::milliseconds(10000));
    PlantedGenerator local;
    std::vector<std::thread> threads;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 20; ++i) {
                const auto seed = static_cast<std::uint64_t>(t * 100 + i);
                if (remote.generate("ctx", flat_profile(0), 2, 1.0, seed).candidates !=
                    local.generate("ctx", flat_profile(0), 2, 1.0, seed).candidates)
                    ++mismatches;
            }
        });
    }
    for (auto& th : threads)
        th.join();
    CHECK(mismatches == 0);
}

TEST_CASE("exec backend failures")
{
    CHECK_ERRC(ExecBackend(kMock + " --protocol-version 2", std::chrono::milliseconds(5000)), Errc::backend_failure);
    CHECK_ERRC(ExecBackend(kMock + " --garbage-handshake", std::chrono::milliseconds(5000)), Errc::backend_failure);
    CHECK_ERRC(ExecBackend("/nonexistent/backend", std::chrono::milliseconds(5000)), Errc::backend_failure);
    CHECK_ERRC(ExecBackend("   "), Errc::invalid_argument);

    ExecBackend gen_only(kMock + " --scorer none", std::chrono::milliseconds(5000));
    CHECK_ERRC(gen_only.score("a", "c", flat_profile(0)), Errc::backend_failure);
    CHECK(gen_only.generate("c", flat_profile(0), 1, 1.0, 1).candidates.size() == 1);
}

TEST_CASE("exec backend honours the timeout variable")
{
    EnvGuard env("VALGAUGE_BACKEND_TIMEOUT_MS", "200");
    CHECK(backend_timeout() == std::chrono::milliseconds(200));
    const auto start = std::chrono::steady_clock::now();
    CHECK_ERRC(ExecBackend("/bin/sleep 5"), Errc::backend_failure);
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(3));

    ExecBackend slow(kMock + " --delay-ms 50", std::chrono::milliseconds(2000));
    CHECK(slow.generate("c", flat_profile(0), 1, 1.0, 1).candidates.size() == 1);
    CHECK_ERRC(ExecBackend(kMock + " --delay-ms 800", std::chrono::milliseconds(300)), Errc::backend_failure);
}

TEST_CASE("timeout variable parsing")
{
    {
        EnvGuard env("VALGAUGE_BACKEND_TIMEOUT_MS", "");
        CHECK(backend_timeout() == std::chrono::milliseconds(30000));
    }
    {
        EnvGuard env("VALGAUGE_BACKEND_TIMEOUT_MS", "soon");
        CHECK_ERRC(backend_timeout(), Errc::invalid_argument);
    }
    {
        EnvGuard env("VALGAUGE_BACKEND_TIMEOUT_MS", "-5");
        CHECK_ERRC(backend_timeout(), Errc::invalid_argument);
    }
}

TEST_CASE("http backend round-trip")
{
    PlantedGenerator gen;
    StereotypeScorer scorer;
    TestServer server(&gen, &scorer);
    HttpBackend remote(server.url(), std::chrono::milliseconds(5000));
    CHECK(remote.info().name == "mock:planted");
    const auto p = flat_profile(-0.2);
    const auto got = remote.generate("ctx", p, 3, 0.5, 11);
    CHECK(got.candidates == gen.generate("ctx", p, 3, 0.5, 11).candidates);
    CHECK(remote.score(got.candidates[0], "ctx", p) == scorer.score(got.candidates[0], "ctx", p));

    auto via_factory = make_generator("http:" + server.url());
    CHECK(via_factory->generate("ctx", p, 1, 0.5, 11).candidates.size() == 1);

    TestServer bad(&gen, &scorer, true);
    CHECK_ERRC(HttpBackend(bad.url(), std::chrono::milliseconds(5000)), Errc::backend_failure);
    CHECK_ERRC(HttpBackend("http://127.0.0.1:1/none", std::chrono::milliseconds(500)), Errc::backend_failure);
    CHECK_ERRC(HttpBackend("ftp://x"), Errc::invalid_argument);
}

TEST_CASE("backend factories")
{
    CHECK(make_generator("mock:planted")->info().name == "mock:planted");
    CHECK(make_scorer("mock:stereotype")->info().name == "mock:stereotype");
    CHECK(make_scorer("mock:length")->info().name == "mock:length");
    CHECK_ERRC(make_generator("mock:unknown"), Errc::invalid_argument);
    CHECK_ERRC(make_scorer("carrier-pigeon"), Errc::invalid_argument);
    CHECK_ERRC(make_scorer("verifier:/nonexistent.params"), Errc::io_error);

    auto exec_scorer = make_scorer("exec:" + kMock + " --scorer length");
    CHECK(exec_scorer->score("abc", "", flat_profile(0)) == 3.0);
}

TEST_CASE("reasoning over a child process equals the in-process run")
{
    ExecBackend remote(kMock, std::chrono::milliseconds(10000));
    PlantedGenerator gen;
    StereotypeScorer scorer;
    SimulationConfig cfg;
    cfg.T = 3;
    cfg.seed = 5;
    const auto a = reasoning_loop(remote, remote, "ctx", flat_profile(0.1), cfg);
    const auto b = reasoning_loop(gen, scorer, "ctx", flat_profile(0.1), cfg);
    CHECK(a.action == b.action);
    CHECK(a.rounds.size() == b.rounds.size());
}

}
