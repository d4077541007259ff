#pragma once

#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "triad/error.hpp"

namespace triad {

struct TokenSequence {
  std::vector<int> ids;

  int length() const { return static_cast<int>(ids.size()); }
  bool operator==(const TokenSequence& o) const { return ids == o.ids; }
};

/// Closed whitespace vocabulary. Special tokens sit at fixed ids 0-3.
class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;

  Vocabulary() {
    for (const char* s : {"<bos>", "<eos>", "<pad>", "<unk>"}) add(s);
  }

  /// Words are added in the given order after the specials; duplicates are
  /// ignored, so a sorted input yields a deterministic layout.
  static Vocabulary build(const std::vector<std::string>& words) {
    Vocabulary v;
    for (const auto& w : words) v.add(w);
    return v;
  }

  int size() const { return static_cast<int>(words_.size()); }

  int id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& word) const { return index_.count(word) > 0; }

  const std::string& word(int id) const {
    if (id < 0 || id >= size())
      throw VocabError("word id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(size()));
    return words_[static_cast<std::size_t>(id)];
  }

  /// Whitespace tokenization; unknown words map to <unk>.
  std::vector<int> tokenize(const std::string& text) const {
    std::vector<int> out;
    std::istringstream in(text);
    std::string w;
    while (in >> w) out.push_back(id(w));
    return out;
  }

  /// BOS + tokens + EOS.
  TokenSequence wrap(const std::string& text) const {
    TokenSequence t;
    t.ids.push_back(kBos);
    for (int id : tokenize(text)) t.ids.push_back(id);
    t.ids.push_back(kEos);
    return t;
  }

  /// Space-joined words; special tokens are skipped unless requested.
  std::string detokenize(const std::vector<int>& ids, bool keep_specials = false) const {
    std::string out;
    for (int id : ids) {
      if (!keep_specials && id < 4) continue;
      if (!out.empty()) out += ' ';
      out += word(id);
    }
    return out;
  }

  std::string detokenize(const TokenSequence& t, bool keep_specials = false) const {
    return detokenize(t.ids, keep_specials);
  }

 private:
  void add(const std::string& w) {
    if (index_.count(w)) return;
    index_.emplace(w, static_cast<int>(words_.size()));
    words_.push_back(w);
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace triad
