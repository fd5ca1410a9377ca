#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.h"
#include "rtic/errors.h"
#include "rtic/rng.h"
#include "rtic/textprep.h"

using namespace rtic;

namespace {

Vocabulary fashion_vocab() {
  return Vocabulary({{"white", 40}, {"black", 35}, {"blue", 30}, {"red", 25}, {"shorter", 12}, {"longer", 12},
                     {"sleeveless", 6}, {"striped", 5}, {"is", 50}, {"and", 45}, {"with", 20}, {"while", 3}});
}

std::vector<std::string> words_of(const std::vector<std::size_t>& idx, const Vocabulary& v) {
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(v.token(i));
  return out;
}

}  // namespace

TEST_SUITE("textprep") {

TEST_CASE("tokenize lowercases and splits on punctuation") {
  CHECK(tokenize("Is blue and shorter") == std::vector<std::string>{"is", "blue", "and", "shorter"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("v-neck, sleeveless!") == std::vector<std::string>{"v", "neck", "sleeveless"});
  CHECK(tokenize("  \t...  ").empty());
}

TEST_CASE("build_vocab ordering and thresholds") {
  auto v = build_vocab({"a", "a", "b"}, 2);
  CHECK(v.size() == Vocabulary::kReserved + 1);
  CHECK(v.index("a") == Vocabulary::kReserved);
  CHECK_FALSE(v.index("b"));

  CHECK(build_vocab({}, 1).size() == Vocabulary::kReserved);

  WordList ext{{"white", 0}};
  auto w = build_vocab({"b", "a"}, 1, &ext);
  CHECK(w.index("a") == 4u);
  CHECK(w.index("b") == 5u);
  CHECK(w.index("white") == 6u);

  CHECK(w.token(Vocabulary::kCls) == "[CLS]");
  CHECK(w.token(Vocabulary::kSep) == "[SEP]");
  CHECK(w.token(Vocabulary::kUnk) == "[UNK]");
  CHECK(w.token(Vocabulary::kPad) == "[PAD]");
  CHECK_THROWS(build_vocab({"a"}, 0));
}

TEST_CASE("reserved tokens are not words") {
  auto v = fashion_vocab();
  CHECK_FALSE(v.contains_word("[UNK]"));
  CHECK(v.contains_word("white"));
  CHECK(v.index_or_unk("zzzz") == Vocabulary::kUnk);
}

TEST_CASE("spell correction examples") {
  auto v = fashion_vocab();
  CHECK(spell_correct("whtie", v) == "white");
  CHECK(spell_correct("blue", v) == "blue");
  CHECK(spell_correct("qzxv", v) == "qzxv");
  // Both "white" and "while" are one edit from "whie"; frequency decides.
  CHECK(spell_correct("whie", v) == "white");
  CHECK_THROWS_AS(spell_correct("", v), ValidationError);
}

TEST_CASE("ties at equal frequency break lexicographically") {
  Vocabulary v({{"cat", 3}, {"bat", 3}});
  CHECK(spell_correct("aat", v) == "bat");
}

TEST_CASE("distance one beats a more frequent word at distance two") {
  Vocabulary v({{"shirt", 1}, {"short", 100}});
  CHECK(spell_correct("shirtt", v) == "shirt");
}

TEST_CASE("spell correction agrees with a brute-force scan") {
  const auto v = fashion_vocab();
  const auto words = vocabulary_entries(v);
  std::vector<std::pair<std::string, long>> dict(words.begin(), words.end());
  Rng rng = make_stream(21, "data");
  const std::string letters = "abcdefghijklmnopqrstuvwxyz";
  std::uniform_int_distribution<std::size_t> pick_word(0, words.size() - 1), pick_letter(0, letters.size() - 1);
  std::uniform_int_distribution<int> n_edits(0, 3), kind(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::string t = words[pick_word(rng)].first;
    const int n = n_edits(rng);
    for (int e = 0; e < n && !t.empty(); ++e) {
      std::uniform_int_distribution<std::size_t> pos(0, t.size() - 1);
      const std::size_t p = pos(rng);
      switch (kind(rng)) {
        case 0: t.erase(p, 1); break;
        case 1: t.insert(t.begin() + static_cast<std::ptrdiff_t>(p), letters[pick_letter(rng)]); break;
        case 2: t[p] = letters[pick_letter(rng)]; break;
        default:
          if (p + 1 < t.size()) std::swap(t[p], t[p + 1]);
      }
    }
    if (t.empty()) continue;
    CAPTURE(t);
    const auto got = spell_correct(t, v);
    CHECK(got == oracle::spell_correct(t, dict));
    CHECK(spell_correct(got, v) == got);
    CHECK(oracle::damerau_levenshtein(t, got) <= 2);
  }
}

TEST_CASE("overrides take precedence over the dictionary") {
  auto v = fashion_vocab();
  SpellOverrides o{{"whtie", "black"}};
  CHECK(correct_token("whtie", v, &o) == "black");
  CHECK(correct_token("whtie", v, nullptr) == "white");
}

TEST_CASE("encode_captions joins with CLS and SEP") {
  auto v = fashion_vocab();
  auto s = encode_captions({"is blue"}, v, {false, std::nullopt, nullptr});
  CHECK(words_of(s.tokens, v) == std::vector<std::string>{"[CLS]", "is", "blue"});

  auto u = encode_captions({"zzzz blue"}, v, {false, std::nullopt, nullptr});
  CHECK(u.tokens[1] == Vocabulary::kUnk);

  auto c = encode_captions({"is whtie"}, v);
  CHECK(words_of(c.tokens, v) == std::vector<std::string>{"[CLS]", "is", "white"});

  const std::vector<std::string> caps{"is blue", "with red", "and longer", "is striped"};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto a = encode_captions(caps, v, {true, seed, nullptr});
    auto b = encode_captions(caps, v, {true, seed, nullptr});
    CHECK(a.tokens == b.tokens);
    CHECK(std::count(a.tokens.begin(), a.tokens.end(), Vocabulary::kCls) == 1);
    CHECK(std::count(a.tokens.begin(), a.tokens.end(), Vocabulary::kSep) == 3);
    CHECK(a.tokens.front() == Vocabulary::kCls);
    CHECK(a.tokens.back() != Vocabulary::kSep);
    auto sorted_a = a.tokens;
    auto plain = encode_captions(caps, v).tokens;
    std::sort(sorted_a.begin(), sorted_a.end());
    std::sort(plain.begin(), plain.end());
    CHECK(sorted_a == plain);
  }
  CHECK_THROWS(encode_captions({}, v));
}

TEST_CASE("different shuffle seeds can change caption order") {
  auto v = fashion_vocab();
  const std::vector<std::string> caps{"is blue", "with red", "and longer", "is striped"};
  const auto first = encode_captions(caps, v, {true, 0, nullptr}).tokens;
  bool changed = false;
  for (std::uint64_t seed = 1; seed < 20 && !changed; ++seed)
    changed = encode_captions(caps, v, {true, seed, nullptr}).tokens != first;
  CHECK(changed);
}

TEST_CASE("vocabulary rejects duplicates and reserved names") {
  CHECK_THROWS_AS(Vocabulary({{"a", 1}, {"a", 2}}), DuplicateError);
  CHECK_THROWS_AS(Vocabulary({{"[CLS]", 1}}), DuplicateError);
  CHECK_THROWS_AS(Vocabulary({{"a", -1}}), ValidationError);
}

}
