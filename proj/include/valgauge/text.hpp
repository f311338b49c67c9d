#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace valgauge::text {

/// Lowercased word tokens. A word is a maximal run of ASCII letters/digits or
/// non-ASCII (UTF-8) bytes, with internal apostrophes kept ("don't").
/// Punctuation and whitespace never form tokens.
std::vector<std::string> tokenize(std::string_view s);

/// Sentences end at '.', '!' or '?' followed by whitespace or end of input.
/// Sentences without any word token are dropped.
std::vector<std::string> split_sentences(std::string_view s);

enum class PosTag { noun, verb, adj, adv, other };

std::string_view tag_name(PosTag t) noexcept;

class PosTagger {
  public:
    virtual ~PosTagger() = default;
    /// Tag for one lowercased token; unknown tokens map to PosTag::other.
    [[nodiscard]] virtual PosTag tag(std::string_view token) const = 0;
    /// Stable identifier recorded alongside every metric that depends on tags.
    [[nodiscard]] virtual std::string identity() const = 0;
};

/// Closed-class lexicon first, then suffix rules, then OTHER.
class LexiconTagger final : public PosTagger {
  public:
    LexiconTagger();
    [[nodiscard]] PosTag tag(std::string_view token) const override;
    [[nodiscard]] std::string identity() const override { return "lexicon-suffix-v1"; }

  private:
    std::unordered_map<std::string, PosTag> m_lexicon;
};

const PosTagger& default_tagger();

}  // namespace valgauge::text
