#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"
#include "valgauge/lexical.hpp"
#include "valgauge/random.hpp"

using namespace valgauge;
using namespace valgauge::lexical;

namespace {

ValueActivation constant_activation(double k0, double rest = 0.0)
{
    std::vector<double> w(10, rest);
    w[0] = k0;
    return validate_activation(w);
}

ValueActivation random_activation(Rng& rng)
{
    std::vector<double> w(10);
    for (auto& x : w)
        x = rng.uniform();
    return validate_activation(w);
}

const StopWords kNoStop;

}  // namespace

TEST_SUITE("lexical") {

TEST_CASE("bundled stop words")
{
    const auto& sw = default_stopwords();
    CHECK(default_stopwords_version() == "stopwords_en_v1");
    CHECK(sw.contains("the"));
    CHECK(sw.contains("and"));
    CHECK_FALSE(sw.contains("coffee"));
    const auto parsed = parse_stopwords("# comment\nfoo\n\n  Bar \n");
    CHECK(parsed == StopWords{"bar", "foo"});
}

TEST_CASE("tf-idf hand cases")
{
    std::vector<std::vector<std::string>> one{{"cat", "cat", "dog", "fish"}};
    const auto w = tfidf_weights(one, kNoStop);
    const auto cat = w.word_index("cat");
    REQUIRE(cat != std::string::npos);
    CHECK(w.weight(cat, 0) == doctest::Approx(0.5).epsilon(1e-15));

    std::vector<std::vector<std::string>> two{{"the", "cat"}, {"dog"}};
    const auto v = tfidf_weights(two, default_stopwords());
    CHECK(v.word_index("the") == std::string::npos);
    CHECK(v.weight(v.word_index("cat"), 1) == 0.0);
    CHECK_ERRC(tfidf_weights(std::vector<std::vector<std::string>>{}, kNoStop), Errc::empty_corpus);
}

TEST_CASE("tf-idf matches the definition on random corpora")
{
    Rng rng(8);
    const std::vector<std::string> vocab{"the", "a", "cat", "dog", "park", "sun", "rain", "coffee", "tea"};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<std::string>> corpus(1 + rng.below(8));
        for (auto& d : corpus)
            for (std::size_t i = 0, n = rng.below(7); i < n; ++i)
                d.push_back(vocab[rng.below(vocab.size())]);
        const auto got = tfidf_weights(corpus, default_stopwords());
        const auto want = oracle::tfidf(corpus, default_stopwords());
        REQUIRE(got.vocabulary.size() == want.size());
        for (const auto& [word, row] : want) {
            const auto idx = got.word_index(word);
            REQUIRE(idx != std::string::npos);
            for (std::size_t i = 0; i < row.size(); ++i)
                CHECK(std::abs(got.weight(idx, i) - row[i]) < 1e-12);
        }
    }
}

TEST_CASE("relevance hand cases")
{
    std::vector<std::vector<std::string>> one{{"word"}};
    auto w = tfidf_weights(one, kNoStop);
    std::vector<ValueActivation> a{constant_activation(0.7)};
    CHECK(relevance(w, a, 0.0).raw[0][0] == doctest::Approx(0.7).epsilon(1e-15));

    std::vector<std::vector<std::string>> two{{"word"}, {"word"}};
    w = tfidf_weights(two, kNoStop);
    std::vector<ValueActivation> b{constant_activation(0.2), constant_activation(0.8)};
    CHECK(relevance(w, b, 0.0).raw[0][0] == doctest::Approx(0.5).epsilon(1e-15));

    std::vector<ValueActivation> wrong{constant_activation(0.2)};
    CHECK_ERRC(relevance(w, wrong), Errc::length_mismatch);
    CHECK_ERRC(relevance(w, b, -1.0), Errc::invalid_argument);

    // A word whose only document is empty after filtering cannot exist, so
    // check the zero-weight path through a hand-built corpus.
    WeightedCorpus z;
    z.documents = {{}};
    z.vocabulary = {"ghost"};
    z.weights = {{}};
    std::vector<ValueActivation> c{constant_activation(0.9)};
    CHECK(relevance(z, c, 1e-8).raw[0][0] == 0.0);
    CHECK(relevance(z, c, 0.0).raw[0][0] == 0.0);
}

TEST_CASE("relevance equals the double-loop oracle")
{
    Rng rng(12);
    const std::vector<std::string> vocab{"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<std::string>> corpus(1 + rng.below(20));
        std::vector<ValueActivation> acts;
        for (auto& d : corpus) {
            for (std::size_t i = 0, n = rng.below(9); i < n; ++i)
                d.push_back(vocab[rng.below(vocab.size())]);
            acts.push_back(random_activation(rng));
        }
        const auto w = tfidf_weights(corpus, kNoStop);
        const double eps = trial % 2 == 0 ? 0.0 : 1e-8;
        const auto got = relevance(w, acts, eps);
        std::vector<std::vector<double>> t(w.vocabulary.size(), std::vector<double>(corpus.size()));
        for (std::size_t k = 0; k < w.vocabulary.size(); ++k)
            for (std::size_t i = 0; i < corpus.size(); ++i)
                t[k][i] = w.weight(k, i);
        std::vector<std::array<double, kValueCount>> a;
        for (const auto& x : acts)
            a.push_back(x.weights());
        const auto want = oracle::relevance(t, a, eps);
        for (std::size_t k = 0; k < want.size(); ++k)
            for (std::size_t j = 0; j < kValueCount; ++j)
                CHECK(std::abs(got.raw[k][j] - want[k][j]) < 1e-12);
    }
}

TEST_CASE("relevance is a weighted average of activations")
{
    Rng rng(13);
    std::vector<std::vector<std::string>> corpus{{"x", "y"}, {"x"}, {"y", "z", "z"}};
    std::vector<ValueActivation> acts;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        acts.push_back(random_activation(rng));
    const auto m = relevance(tfidf_weights(corpus, kNoStop), acts, 0.0);
    for (const auto& row : m.raw) {
        for (std::size_t k = 0; k < kValueCount; ++k) {
            double hi = 0.0;
            for (const auto& a : acts)
                hi = std::max(hi, a.at(k));
            CHECK(row[k] >= 0.0);
            CHECK(row[k] <= hi + 1e-15);
        }
    }
}

TEST_CASE("scaling a word's weights leaves relevance unchanged without smoothing")
{
    Rng rng(14);
    WeightedCorpus w;
    w.documents = {{"a"}, {"a"}, {"a"}};
    w.vocabulary = {"a"};
    w.weights = {{{0, 0.3}}, {{0, 0.5}}, {{0, 0.2}}};
    std::vector<ValueActivation> acts;
    for (int i = 0; i < 3; ++i)
        acts.push_back(random_activation(rng));
    const auto base = relevance(w, acts, 0.0);
    auto scaled = w;
    for (auto& d : scaled.weights)
        for (auto& [idx, t] : d)
            t *= 7.5;
    const auto s = relevance(scaled, acts, 0.0);
    for (std::size_t k = 0; k < kValueCount; ++k)
        CHECK(std::abs(s.raw[0][k] - base.raw[0][k]) < 1e-15);
    const auto smooth = relevance(scaled, acts, 1e-3);
    for (std::size_t k = 0; k < kValueCount; ++k)
        CHECK(std::abs(smooth.raw[0][k] - base.raw[0][k]) <= 1e-3 / (7.5 * 1.0 + 1e-3) + 1e-15);
}

TEST_CASE("row normalization")
{
    RelevanceMatrix m;
    m.words = {"rise", "unit", "flat"};
    m.raw = {ValueRow{0.2, 0.4, 0.6, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4},
             ValueRow{0, 1, 0.25, 0.5, 0.75, 0, 1, 0, 0, 0}, ValueRow{}};
    m.raw[2].fill(0.3);
    const auto n = row_normalize(m);
    CHECK(n.normalized[0][0] == 0.0);
    CHECK(n.normalized[0][1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(n.normalized[0][2] == 1.0);
    CHECK(n.normalized[1] == m.raw[1]);
    CHECK(n.constant_rows == std::vector<bool>{false, false, true});
    for (double x : n.normalized[2])
        CHECK(x == 0.0);
}

TEST_CASE("row normalization preserves argmax and the unit range")
{
    Rng rng(15);
    for (int trial = 0; trial < 200; ++trial) {
        RelevanceMatrix m;
        for (int r = 0; r < 5; ++r) {
            ValueRow row{};
            for (auto& x : row)
                x = rng.uniform();
            m.words.push_back("w" + std::to_string(r));
            m.raw.push_back(row);
        }
        const auto n = row_normalize(m);
        for (std::size_t r = 0; r < m.raw.size(); ++r) {
            const auto raw_arg = std::max_element(m.raw[r].begin(), m.raw[r].end()) - m.raw[r].begin();
            const auto n_arg =
                std::max_element(n.normalized[r].begin(), n.normalized[r].end()) - n.normalized[r].begin();
            CHECK(raw_arg == n_arg);
            for (double x : n.normalized[r]) {
                CHECK(x >= 0.0);
                CHECK(x <= 1.0);
            }
        }
    }
}

TEST_CASE("top words")
{
    RelevanceMatrix m;
    m.words = {"only"};
    m.raw = {ValueRow{0.3}};
    CHECK(top_words(m, ValueDimension::self_direction, 1).words.front().first == "only");

    m.words = {"low", "high"};
    m.raw = {ValueRow{0.1}, ValueRow{0.9}};
    CHECK(top_words(m, ValueDimension::self_direction, 1).words.front().first == "high");

    m.words = {"zebra", "apple"};
    m.raw = {ValueRow{0.5}, ValueRow{0.5}};
    const auto tie = top_words(m, ValueDimension::self_direction, 1);
    CHECK(tie.words.front().first == "apple");
    CHECK_FALSE(tie.k_too_large);

    const auto big = top_words(m, ValueDimension::self_direction, 5);
    CHECK(big.k_too_large);
    CHECK(big.words.size() == 2);
    CHECK_ERRC(top_words(m, ValueDimension::self_direction, 0), Errc::invalid_argument);
}

TEST_CASE("group activation")
{
    std::vector<std::pair<std::string, ValueActivation>> one{{"g", constant_activation(0.4)}};
    CHECK(group_activation(one).at("g").mean == constant_activation(0.4));

    std::vector<std::pair<std::string, ValueActivation>> two{{"g", constant_activation(0.2)},
                                                             {"g", constant_activation(0.8)}};
    CHECK(group_activation(two).at("g").mean[ValueDimension::self_direction] == doctest::Approx(0.5));

    Rng rng(16);
    std::vector<std::pair<std::string, ValueActivation>> many;
    std::map<std::string, std::vector<ValueActivation>> by;
    for (int i = 0; i < 30; ++i) {
        const std::string key = "g" + std::to_string(rng.below(3));
        const auto a = random_activation(rng);
        many.emplace_back(key, a);
        by[key].push_back(a);
    }
    const auto got = group_activation(many);
    for (const auto& [key, list] : by) {
        CHECK(got.at(key).count == list.size());
        for (std::size_t k = 0; k < kValueCount; ++k) {
            double s = 0.0;
            for (const auto& a : list)
                s += a.at(k);
            CHECK(std::abs(got.at(key).mean.at(k) - s / static_cast<double>(list.size())) < 1e-12);
        }
    }
    CHECK_ERRC(group_activation({}), Errc::empty_input);
    std::vector<std::pair<std::string, ValueActivation>> keyless{{"", constant_activation(0.1)}};
    CHECK_ERRC(group_activation(keyless), Errc::missing_field);
}

TEST_CASE("exports")
{
    std::vector<std::vector<std::string>> corpus{{"sunny", "park"}, {"quiet", "library"}, {"sunny", "beach"}};
    std::vector<ValueActivation> acts{constant_activation(0.9, 0.1), constant_activation(0.1, 0.5),
                                      constant_activation(0.8, 0.2)};
    const auto m = row_normalize(relevance(tfidf_weights(corpus, kNoStop), acts));
    const auto heat = heatmap_tsv(m);
    CHECK(heat.starts_with("word\tSelf-Direction"));
    CHECK(heat.find("sunny\t") != std::string::npos);
    const auto cloud = wordcloud_tsv(m, 2);
    CHECK(cloud.starts_with("dimension\trank\tword\tscore"));
    CHECK_ERRC(heatmap_tsv(relevance(tfidf_weights(corpus, kNoStop), acts)), Errc::invalid_argument);
}

}
