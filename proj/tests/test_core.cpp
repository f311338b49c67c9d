#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "valgauge/core.hpp"
#include "valgauge/random.hpp"
#include "valgauge/serialize.hpp"

using namespace valgauge;

TEST_SUITE("core") {

TEST_CASE("canonical order lists the ten values in circumplex order")
{
    const auto& order = canonical_order();
    REQUIRE(order.size() == 10);
    CHECK(dimension_name(order.front()) == "Self-Direction");
    CHECK(dimension_name(order.back()) == "Universalism");
    const char* expected[] = {"Self-Direction", "Stimulation", "Hedonism",  "Achievement", "Power",
                              "Security",       "Conformity",  "Tradition", "Benevolence", "Universalism"};
    for (std::size_t i = 0; i < 10; ++i)
        CHECK(dimension_name(order[i]) == expected[i]);
    CHECK(&canonical_order() == &order);
}

TEST_CASE("dimension names parse back in display and slug form")
{
    for (auto v : canonical_order())
        CHECK(parse_dimension(dimension_name(v)) == v);
    CHECK(parse_dimension("self_direction") == ValueDimension::self_direction);
    CHECK(parse_dimension("SELF-DIRECTION") == ValueDimension::self_direction);
    CHECK_FALSE(parse_dimension("openness").has_value());
}

TEST_CASE("validate_profile accepts exactly finite ten-vectors inside [-1, 1]")
{
    std::vector<double> zeros(10, 0.0);
    CHECK(validate_profile(zeros).scores() == std::array<double, 10>{});

    std::vector<double> nine(9, 0.0);
    CHECK_ERRC(validate_profile(nine), Errc::wrong_arity);

    auto bad = zeros;
    bad[3] = 1.2;
    try {
        validate_profile(bad);
        FAIL("expected OutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::out_of_range);
        CHECK(e.index() == 3u);
        CHECK(e.value() == 1.2);
    }

    auto nan = zeros;
    nan[7] = std::numeric_limits<double>::quiet_NaN();
    try {
        validate_profile(nan);
        FAIL("expected NonFinite");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::non_finite);
        CHECK(e.index() == 7u);
    }

    auto edges = zeros;
    edges[0] = -1.0;
    edges[9] = 1.0;
    CHECK_NOTHROW(validate_profile(edges));
}

TEST_CASE("validate_profile membership property on random vectors")
{
    Rng rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> raw(10);
        bool inside = true;
        for (auto& x : raw) {
            x = rng.uniform(-1.3, 1.3);
            inside = inside && x >= -1.0 && x <= 1.0;
        }
        bool accepted = true;
        try {
            validate_profile(raw);
        } catch (const Error&) {
            accepted = false;
        }
        CHECK(accepted == inside);
    }
}

TEST_CASE("activations must stay within [0, 1]")
{
    std::vector<double> w(10, 0.1);
    CHECK_NOTHROW(validate_activation(w));
    w[2] = -0.01;
    CHECK_ERRC(validate_activation(w), Errc::out_of_range);
}

TEST_CASE("domains parse from canonical names and aliases")
{
    for (auto d : {DomainKind::media_review, DomainKind::conversation, DomainKind::mobility})
        CHECK(parse_domain(domain_name(d)) == d);
    CHECK(parse_domain("media") == DomainKind::media_review);
    CHECK_FALSE(parse_domain("video").has_value());
}

TEST_CASE("record invariants")
{
    InteractionRecord r;
    r.record_id = "r1";
    r.user_id = "u1";
    r.domain = DomainKind::media_review;
    CHECK_ERRC(check_record(r), Errc::schema_error);
    r.rating = 7;
    CHECK_ERRC(check_record(r), Errc::vocabulary_violation);
    r.rating = 4;
    CHECK_NOTHROW(check_record(r));

    r.domain = DomainKind::mobility;
    CHECK_ERRC(check_record(r), Errc::schema_error);
    r.poi_category = "Park";
    r.stay_minutes = -5.0;
    CHECK_ERRC(check_record(r), Errc::schema_error);
    r.stay_minutes = 30.0;
    CHECK_NOTHROW(check_record(r));
}

TEST_CASE("empirical distribution sorts and rejects bad samples")
{
    EmpiricalDistribution d({3.0, 1.0, 2.0});
    CHECK(d.samples()[0] == 1.0);
    CHECK(d.samples()[2] == 3.0);
    CHECK(d.quantile(1.0 / 3.0) == 1.0);
    CHECK(d.quantile(0.5) == 2.0);
    CHECK(d.quantile(1.0) == 3.0);
    CHECK(d.cdf(2.0) == doctest::Approx(2.0 / 3.0));
    CHECK_ERRC(EmpiricalDistribution({}), Errc::empty_input);
    CHECK_ERRC(EmpiricalDistribution({1.0, std::numeric_limits<double>::infinity()}), Errc::non_finite);
}

TEST_CASE("profiles and records round-trip through JSON")
{
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> raw(10);
        for (auto& x : raw)
            x = rng.uniform(-1.0, 1.0);
        const auto p = validate_profile(raw);
        const auto text = to_json(p).dump();
        CHECK(profile_from_json(Json::parse(text)) == p);
    }

    InteractionRecord r;
    r.record_id = "m-1";
    r.user_id = "u9";
    r.domain = DomainKind::mobility;
    r.context_text = "Morning \"walk\" \xc3\xa9";
    r.action_text = "Coffee";
    r.poi_category = "Coffee Shop";
    r.stay_minutes = 37.123456789012345;
    r.timestamp = 1700000000;
    r.group_key = "weekday";
    CHECK(record_from_json(Json::parse(to_json(r).dump())) == r);

    PreferencePair pair{"ctx", validate_profile(std::vector<double>(10, 0.25)), "a", "b", 0.9, 0.1, false};
    CHECK(pair_from_json(Json::parse(to_json(pair).dump())) == pair);
}

TEST_CASE("seeded generator streams are reproducible and roughly uniform")
{
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i)
        CHECK(a.next_u64() == b.next_u64());
    Rng c(1);
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = c.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sq / n - 1.0) < 0.03);
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
}

}
