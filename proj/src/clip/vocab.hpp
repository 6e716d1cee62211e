#pragma once

#include <map>
#include <string>
#include <vector>

#include <stdexcept>

namespace cinelab {

struct VocabError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Word-level tokenizer over the closed caption vocabulary. Special tokens
// occupy the first four ids; word ids are dense after them.
class Vocab {
 public:
  static constexpr int kPad = 0, kUnk = 1, kBos = 2, kEos = 3;
  static constexpr int kMaxLen = 77;

  Vocab();  // built from caption_vocabulary()

  int size() const { return static_cast<int>(id_of_.size()) + 4; }

  // bos + lowercased alpha words + eos, truncated to kMaxLen with eos
  // preserved as the last token. Empty text (no bos/eos-only) -> error.
  std::vector<int> encode(const std::string& text) const;

 private:
  std::map<std::string, int> id_of_;
};

}  // namespace cinelab
