// Serves the bundled mock generator and scorers over the stdio wire protocol.

#include <CLI11.hpp>
#include <chrono>
#include <iostream>
#include <thread>

#include "valgauge/backend.hpp"

using namespace valgauge;
using namespace valgauge::harness;

namespace {

/// Delays every reply, for exercising client timeouts.
class SlowStream : public std::streambuf {
  public:
    SlowStream(std::streambuf* inner, int delay_ms) : m_inner(inner), m_delay(delay_ms) {}

  protected:
    int overflow(int c) override { return m_inner->sputc(static_cast<char>(c)); }
    int sync() override
    {
        if (m_delay > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(m_delay));
        return m_inner->pubsync();
    }

  private:
    std::streambuf* m_inner;
    int m_delay;
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mock backend speaking the valgauge wire protocol on stdio", "valgauge-mock-backend"};
    std::string generator = "planted";
    std::string scorer = "stereotype";
    double spread = 1.0;
    double target = 0.9;
    int version = kProtocolVersion;
    int max_inflight = 0;
    int delay_ms = 0;
    bool garbage = false;
    app.add_option("--generator", generator, "planted or none")->capture_default_str();
    app.add_option("--scorer", scorer, "stereotype, length or none")->capture_default_str();
    app.add_option("--spread", spread, "Planted latent spread")->capture_default_str();
    app.add_option("--target", target, "Stereotype target")->capture_default_str();
    app.add_option("--protocol-version", version, "Version announced in the handshake")->capture_default_str();
    app.add_option("--max-inflight", max_inflight, "Declared concurrency limit")->capture_default_str();
    app.add_option("--delay-ms", delay_ms, "Delay before every message")->capture_default_str();
    app.add_flag("--garbage-handshake", garbage, "Send a malformed handshake");
    CLI11_PARSE(app, argc, argv);

    std::unique_ptr<GeneratorBackend> gen;
    std::unique_ptr<ScorerBackend> sc;
    try {
        if (generator == "planted")
            gen = std::make_unique<PlantedGenerator>(ValueDimension::self_direction, spread);
        else if (generator != "none")
            fail(Errc::invalid_argument, "unknown generator " + generator);
        if (scorer == "stereotype")
            sc = std::make_unique<StereotypeScorer>(target);
        else if (scorer == "length")
            sc = std::make_unique<LengthScorer>();
        else if (scorer != "none")
            fail(Errc::invalid_argument, "unknown scorer " + scorer);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    SlowStream slow(std::cout.rdbuf(), delay_ms);
    std::ostream out(&slow);
    if (garbage) {
        out << "hello there\n" << std::flush;
        std::string line;
        while (std::getline(std::cin, line)) {
        }
        return 0;
    }
    BackendInfo info{"mock-backend:" + generator + "+" + scorer, version, true, max_inflight};
    serve_stdio(std::cin, out, info, gen.get(), sc.get());
    return 0;
}
