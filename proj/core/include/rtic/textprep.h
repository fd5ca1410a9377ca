#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rtic {

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kPadToken = "[PAD]";

// Token -> (index, frequency). Indices 0..3 are [CLS], [SEP], [UNK], [PAD];
// the rest are assigned in lexicographic token order.
class Vocabulary {
 public:
  static constexpr std::size_t kCls = 0;
  static constexpr std::size_t kSep = 1;
  static constexpr std::size_t kUnk = 2;
  static constexpr std::size_t kPad = 3;
  static constexpr std::size_t kReserved = 4;

  Vocabulary();
  // entries: (token, frequency); tokens must be unique and non-reserved.
  explicit Vocabulary(std::vector<std::pair<std::string, std::int64_t>> entries);

  std::size_t size() const { return tokens_.size(); }
  std::optional<std::size_t> index(std::string_view token) const;
  // Allocation-free variant for hot loops.
  std::optional<std::size_t> lookup(const std::string& token) const;
  std::size_t index_or_unk(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::int64_t frequency(std::size_t index) const { return freqs_.at(index); }
  // True for non-reserved tokens only.
  bool contains_word(std::string_view token) const;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::int64_t> freqs_;
  std::unordered_map<std::string, std::size_t> index_;
};

using WordList = std::vector<std::pair<std::string, std::int64_t>>;

// Lowercases and splits on whitespace and ASCII punctuation (hyphen splits).
std::vector<std::string> tokenize(std::string_view text);

// Keeps corpus tokens seen at least min_freq times plus every external word.
// Frequency = corpus count + external frequency.
Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq, const WordList* external = nullptr);

// Vocabulary file: token<TAB>frequency per line, reserved tokens implied.
WordList load_word_list(const std::string& path);
WordList vocabulary_entries(const Vocabulary& vocab);
std::string serialize_vocabulary(const Vocabulary& vocab);

// Manually curated replacements: misspelled<TAB>replacement.
using SpellOverrides = std::unordered_map<std::string, std::string>;
SpellOverrides load_overrides(const std::string& path);

// Known words come back unchanged. Otherwise the most frequent vocabulary
// word at Damerau-Levenshtein distance 1, else distance 2, wins (ties go to
// the lexicographically smaller word); with no candidate the token is
// returned as is.
std::string spell_correct(const std::string& token, const Vocabulary& vocab);

struct TokenSequence {
  std::vector<std::size_t> tokens;
  std::size_t source_captions = 0;
};

struct EncodeOptions {
  bool correct = true;
  std::optional<std::uint64_t> shuffle_seed;
  const SpellOverrides* overrides = nullptr;
};

// [CLS] c1 [SEP] c2 [SEP] ... ck, out-of-vocabulary words -> [UNK].
TokenSequence encode_captions(const std::vector<std::string>& captions, const Vocabulary& vocab,
                              const EncodeOptions& opts = {});

// One caption's vocabulary indices (no special tokens).
std::vector<std::size_t> encode_caption(const std::string& caption, const Vocabulary& vocab, bool correct,
                                        const SpellOverrides* overrides = nullptr);
// Joins pre-encoded captions with [CLS]/[SEP], optionally in a seeded
// shuffled order. encode_captions is encode_caption + join_captions.
TokenSequence join_captions(const std::vector<std::vector<std::size_t>>& captions,
                            std::optional<std::uint64_t> shuffle_seed);

// Applies overrides, then spell correction, to one token.
std::string correct_token(const std::string& token, const Vocabulary& vocab, const SpellOverrides* overrides);

}  // namespace rtic
