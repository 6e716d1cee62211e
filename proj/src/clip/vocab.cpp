#include "clip/vocab.hpp"

#include <cctype>

#include "data/scene.hpp"

namespace cinelab {

Vocab::Vocab() {
  int next = 4;
  for (const auto& w : caption_vocabulary()) id_of_[w] = next++;
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> ids = {kBos};
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    auto it = id_of_.find(cur);
    ids.push_back(it == id_of_.end() ? kUnk : it->second);
    cur.clear();
  };
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c)))
      cur += static_cast<char>(std::tolower(c));
    else
      flush();
  }
  flush();
  if (ids.size() == 1) throw VocabError("cannot tokenize empty text");
  ids.push_back(kEos);
  if (static_cast<int>(ids.size()) > kMaxLen) {
    ids.resize(kMaxLen);
    ids.back() = kEos;  // truncation preserves eos
  }
  return ids;
}

}  // namespace cinelab
