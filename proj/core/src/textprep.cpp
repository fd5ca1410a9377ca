#include "rtic/textprep.h"

#include <algorithm>
#include <cctype>
#include <set>
#include <string>

#include "rtic/errors.h"
#include "rtic/rng.h"
#include "rtic/textio.h"

namespace rtic {

Vocabulary::Vocabulary() : Vocabulary(WordList{}) {}

Vocabulary::Vocabulary(std::vector<std::pair<std::string, std::int64_t>> entries) {
  for (auto r : {kClsToken, kSepToken, kUnkToken, kPadToken}) {
    index_.emplace(std::string(r), tokens_.size());
    tokens_.emplace_back(r);
    freqs_.push_back(0);
  }
  std::sort(entries.begin(), entries.end());
  for (auto& [tok, f] : entries) {
    if (tok.empty()) throw ValidationError("vocabulary tokens must be non-empty");
    if (f < 0) throw ValidationError("negative frequency for '" + tok + "'");
    if (!index_.emplace(tok, tokens_.size()).second)
      throw DuplicateError("vocabulary token '" + tok + "' listed twice or reserved");
    tokens_.push_back(std::move(tok));
    freqs_.push_back(f);
  }
}

std::optional<std::size_t> Vocabulary::index(std::string_view token) const { return lookup(std::string(token)); }

std::optional<std::size_t> Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::index_or_unk(std::string_view token) const { return index(token).value_or(kUnk); }

bool Vocabulary::contains_word(std::string_view token) const {
  auto i = index(token);
  return i && *i >= kReserved;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 128 && (std::isspace(c) || std::ispunct(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    cur.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : ch);
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq, const WordList* external) {
  if (min_freq < 1) throw ValidationError("min_freq must be >= 1");
  std::map<std::string, std::int64_t> counts;
  for (const auto& t : corpus) ++counts[t];
  std::map<std::string, std::int64_t> kept;
  for (const auto& [t, c] : counts)
    if (static_cast<std::size_t>(c) >= min_freq) kept[t] = c;
  if (external)
    for (const auto& [w, f] : *external) kept[w] += f;
  for (auto r : {kClsToken, kSepToken, kUnkToken, kPadToken}) kept.erase(std::string(r));
  return Vocabulary(WordList(kept.begin(), kept.end()));
}

WordList load_word_list(const std::string& path) {
  WordList out;
  auto lines = io::read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto f = io::split(lines[ln], '\t');
    if (f.size() != 2 || f[0].empty()) throw ParseError(path, ln + 1, "expected token<TAB>frequency");
    double v;
    if (!io::parse_real(f[1], v) || v < 0 || v != static_cast<double>(static_cast<std::int64_t>(v)))
      throw ParseError(path, ln + 1, "bad frequency '" + std::string(f[1]) + "'");
    out.emplace_back(std::string(f[0]), static_cast<std::int64_t>(v));
  }
  return out;
}

WordList vocabulary_entries(const Vocabulary& vocab) {
  WordList out;
  for (std::size_t i = Vocabulary::kReserved; i < vocab.size(); ++i) out.emplace_back(vocab.token(i), vocab.frequency(i));
  return out;
}

std::string serialize_vocabulary(const Vocabulary& vocab) {
  std::string out;
  for (const auto& [w, f] : vocabulary_entries(vocab)) out += w + "\t" + std::to_string(f) + "\n";
  return out;
}

SpellOverrides load_overrides(const std::string& path) {
  SpellOverrides out;
  auto lines = io::read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto f = io::split(lines[ln], '\t');
    if (f.size() != 2 || f[0].empty() || f[1].empty())
      throw ParseError(path, ln + 1, "expected misspelled<TAB>replacement");
    out[std::string(f[0])] = std::string(f[1]);
  }
  return out;
}

namespace {

constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz0123456789";

// Calls visit(edit) for every string one delete, adjacent transpose,
// replace or insert away from w.
template <class Visit>
void for_each_edit(const std::string& w, Visit&& visit) {
  std::string e;
  for (std::size_t i = 0; i < w.size(); ++i) {
    e = w;
    e.erase(i, 1);
    visit(e);
  }
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    if (w[i] == w[i + 1]) continue;
    e = w;
    std::swap(e[i], e[i + 1]);
    visit(e);
  }
  for (std::size_t i = 0; i < w.size(); ++i)
    for (char c : kLetters) {
      if (c == w[i]) continue;
      e = w;
      e[i] = c;
      visit(e);
    }
  for (std::size_t i = 0; i <= w.size(); ++i)
    for (char c : kLetters) {
      e = w;
      e.insert(e.begin() + static_cast<std::ptrdiff_t>(i), c);
      visit(e);
    }
}

struct Best {
  const Vocabulary& vocab;
  std::optional<std::size_t> index;

  void offer(const std::string& word) {
    auto i = vocab.lookup(word);
    if (!i || *i < Vocabulary::kReserved) return;
    if (!index || vocab.frequency(*i) > vocab.frequency(*index) ||
        (vocab.frequency(*i) == vocab.frequency(*index) && vocab.token(*i) < vocab.token(*index)))
      index = *i;
  }
};

}  // namespace

std::string spell_correct(const std::string& token, const Vocabulary& vocab) {
  if (token.empty()) throw ValidationError("spell_correct: empty token");
  if (vocab.contains_word(token)) return token;
  Best best{vocab, std::nullopt};
  std::set<std::string> first;
  for_each_edit(token, [&](const std::string& e) {
    first.insert(e);
    best.offer(e);
  });
  if (best.index) return vocab.token(*best.index);
  for (const auto& e1 : first) for_each_edit(e1, [&](const std::string& e2) { best.offer(e2); });
  return best.index ? vocab.token(*best.index) : token;
}

std::string correct_token(const std::string& token, const Vocabulary& vocab, const SpellOverrides* overrides) {
  if (overrides) {
    auto it = overrides->find(token);
    if (it != overrides->end()) return it->second;
  }
  return spell_correct(token, vocab);
}

std::vector<std::size_t> encode_caption(const std::string& caption, const Vocabulary& vocab, bool correct,
                                        const SpellOverrides* overrides) {
  std::vector<std::size_t> out;
  for (auto& tok : tokenize(caption)) {
    if (correct && !vocab.contains_word(tok)) tok = correct_token(tok, vocab, overrides);
    out.push_back(vocab.index_or_unk(tok));
  }
  return out;
}

TokenSequence join_captions(const std::vector<std::vector<std::size_t>>& captions,
                            std::optional<std::uint64_t> shuffle_seed) {
  if (captions.empty()) throw ValidationError("encode_captions: no captions");
  std::vector<std::size_t> order(captions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  TokenSequence seq;
  seq.source_captions = captions.size();
  seq.tokens.push_back(Vocabulary::kCls);
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k) seq.tokens.push_back(Vocabulary::kSep);
    const auto& c = captions[order[k]];
    seq.tokens.insert(seq.tokens.end(), c.begin(), c.end());
  }
  return seq;
}

TokenSequence encode_captions(const std::vector<std::string>& captions, const Vocabulary& vocab,
                              const EncodeOptions& opts) {
  if (captions.empty()) throw ValidationError("encode_captions: no captions");
  std::vector<std::vector<std::size_t>> encoded;
  for (const auto& c : captions) encoded.push_back(encode_caption(c, vocab, opts.correct, opts.overrides));
  return join_captions(encoded, opts.shuffle_seed);
}

}  // namespace rtic
