#include "valgauge/text.hpp"

#include <array>
#include <cctype>
#include <initializer_list>
#include <utility>

namespace valgauge::text {

namespace {

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

bool ends_with(std::string_view s, std::string_view suffix)
{
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool has_word(std::string_view s)
{
    for (char c : s) {
        if (is_word_byte(static_cast<unsigned char>(c)))
            return true;
    }
    return false;
}

struct SuffixRule {
    std::string_view suffix;
    std::size_t min_length;
    PosTag tag;
};

// Checked in order; the first match wins.
constexpr std::array<SuffixRule, 22> kSuffixRules = {{
    {"ly", 4, PosTag::adv},
    {"ing", 5, PosTag::verb},
    {"ed", 4, PosTag::verb},
    {"ize", 5, PosTag::verb},
    {"ise", 5, PosTag::verb},
    {"ify", 5, PosTag::verb},
    {"ous", 5, PosTag::adj},
    {"ful", 5, PosTag::adj},
    {"able", 6, PosTag::adj},
    {"ible", 6, PosTag::adj},
    {"ive", 5, PosTag::adj},
    {"less", 6, PosTag::adj},
    {"ish", 5, PosTag::adj},
    {"ic", 4, PosTag::adj},
    {"al", 4, PosTag::adj},
    {"tion", 5, PosTag::noun},
    {"sion", 5, PosTag::noun},
    {"ness", 5, PosTag::noun},
    {"ment", 5, PosTag::noun},
    {"ity", 5, PosTag::noun},
    {"ism", 5, PosTag::noun},
    {"ship", 6, PosTag::noun},
}};

}  // namespace

std::vector<std::string> tokenize(std::string_view s)
{
    std::vector<std::string> tokens;
    std::string current;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (is_word_byte(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
            continue;
        }
        // Apostrophe joins two word runs ("don't"), otherwise it is punctuation.
        if (c == '\'' && !current.empty() && i + 1 < s.size() &&
            is_word_byte(static_cast<unsigned char>(s[i + 1]))) {
            current.push_back('\'');
            continue;
        }
        if (!current.empty())
            tokens.push_back(std::move(current));
        current.clear();
    }
    if (!current.empty())
        tokens.push_back(std::move(current));
    return tokens;
}

std::vector<std::string> split_sentences(std::string_view s)
{
    std::vector<std::string> sentences;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        const auto piece = s.substr(start, end - start);
        if (has_word(piece))
            sentences.emplace_back(piece);
        start = end;
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c != '.' && c != '!' && c != '?')
            continue;
        const bool at_end = i + 1 == s.size();
        if (at_end || std::isspace(static_cast<unsigned char>(s[i + 1])) != 0)
            flush(i + 1);
    }
    if (start < s.size())
        flush(s.size());
    return sentences;
}

std::string_view tag_name(PosTag t) noexcept
{
    switch (t) {
    case PosTag::noun: return "noun";
    case PosTag::verb: return "verb";
    case PosTag::adj: return "adj";
    case PosTag::adv: return "adv";
    case PosTag::other: return "other";
    }
    return "other";
}

LexiconTagger::LexiconTagger()
{
    auto add = [this](PosTag tag, std::initializer_list<std::string_view> words) {
        for (auto w : words)
            m_lexicon.emplace(std::string(w), tag);
    };
    add(PosTag::other,
        {"the",   "a",     "an",    "and",   "or",    "but",   "if",    "of",    "to",    "in",
         "on",    "at",    "for",   "with",  "by",    "from",  "about", "as",    "into", "over",
         "after", "before", "than", "i",     "you",   "he",    "she",   "it",    "we",    "they",
         "me",    "him",   "her",   "us",    "them",  "my",    "your",  "his",   "its",   "our",
         "their", "this",  "that",  "these", "those", "what",  "which", "who",   "whom", "whose",
         "some",  "any",   "all",   "each",  "every", "no",    "one",   "two",   "three", "because",
         "while", "so",    "yes",   "oh",    "i'm",   "it's",  "there's", "can't", "won't", "don't"});
    add(PosTag::verb,
        {"is",     "am",     "are",    "was",     "were",  "be",     "been",    "being",  "have",
         "has",    "had",    "do",     "does",    "did",   "go",     "goes",    "went",   "gone",
         "get",    "gets",   "got",    "make",    "makes", "made",   "take",    "took",   "see",
         "saw",    "seen",   "come",   "came",    "know",  "knew",   "think",   "thought", "want",
         "like",   "love",   "hate",   "say",     "said",  "tell",   "told",    "give",   "gave",
         "find",   "found",  "feel",   "felt",    "try",   "eat",    "ate",     "drink",  "visit",
         "order",  "recommend", "need", "will",   "would", "can",    "could",   "should", "must",
         "may",    "might",  "let",    "keep",    "kept",  "stay",   "stayed",  "leave",  "left",
         "agree",  "disagree", "argue", "believe", "buy",  "bought", "pay",     "paid",   "wait",
         "return", "walk",   "run",    "work",    "play",  "read",   "write",   "wrote",  "taste"});
    add(PosTag::adv,
        {"very",   "really", "too",     "also",   "just",     "not",     "never",    "always",
         "often",  "sometimes", "quite", "still", "even",     "again",   "here",     "there",
         "now",    "then",   "soon",    "well",   "almost",   "already", "maybe",    "perhaps",
         "rather", "pretty", "once",    "twice",  "ever",     "away",    "back",     "later",
         "together", "else", "instead", "anyway", "fast",     "hard",    "n't",      "yet"});
    add(PosTag::adj,
        {"good",    "great",  "bad",      "nice",    "best",     "better",  "worse",  "worst",
         "big",     "small",  "new",      "old",     "friendly", "delicious", "amazing", "awesome",
         "terrible", "fresh", "hot",      "cold",    "clean",    "dirty",   "slow",   "cheap",
         "expensive", "happy", "sad",     "rude",    "kind",     "busy",    "quiet",  "loud",
         "little",  "tasty",  "huge",     "long",    "short",    "free",    "fair",   "wrong",
         "right",   "true",   "false",    "high",    "low",      "safe",    "warm",   "late",
         "early",   "strong", "weak",     "fine",    "awful",    "perfect", "favorite", "same",
         "different", "own",   "many",    "much",     "more",    "most",   "few",
         "local",   "sweet",  "spicy",    "crowded", "cozy",     "honest",  "simple", "strict"});
    add(PosTag::noun,
        {"food",    "place",  "service", "time",    "staff",   "price",   "menu",   "people",
         "city",    "day",    "night",   "coffee",  "restaurant", "bar",  "pizza",  "burger",
         "meal",    "dinner", "lunch",   "breakfast", "table", "waiter",  "owner",  "friend",
         "family",  "home",   "park",    "gym",     "office",  "store",  "shop",
         "morning", "evening", "week",   "year",    "hour",    "minute",  "money",  "thing",
         "way",     "point",  "post",    "comment", "opinion", "view",    "argument", "question",
         "answer",  "reason", "problem", "idea",    "life",    "world",   "country", "person",
         "man",     "woman",  "child",   "kids",    "school",  "job",     "game",   "music",
         "movie",   "book",   "car",     "bus",     "train",   "street",  "room",   "hotel",
         "beer",    "wine",   "tea",     "sushi",   "taco",    "salad",   "sandwich", "drinks"});
}

PosTag LexiconTagger::tag(std::string_view token) const
{
    if (const auto it = m_lexicon.find(std::string(token)); it != m_lexicon.end())
        return it->second;
    bool alpha = !token.empty();
    for (char c : token) {
        if (std::isalpha(static_cast<unsigned char>(c)) == 0 && c != '\'')
            alpha = false;
    }
    if (!alpha)
        return PosTag::other;
    for (const auto& rule : kSuffixRules) {
        if (token.size() >= rule.min_length && ends_with(token, rule.suffix))
            return rule.tag;
    }
    return PosTag::other;
}

const PosTagger& default_tagger()
{
    static const LexiconTagger tagger;
    return tagger;
}

}  // namespace valgauge::text
