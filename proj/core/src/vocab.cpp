#include "rxnalign/vocab.hpp"

#include <stdexcept>

namespace rxnalign {

Vocabulary::Vocabulary() {
  for (const char* t : {kPadToken, kBosToken, kEosToken, kNoneToken}) add(t);
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  if (tokens.size() < 4 || tokens[0] != kPadToken || tokens[1] != kBosToken ||
      tokens[2] != kEosToken || tokens[3] != kNoneToken)
    throw std::invalid_argument("vocabulary must start with the reserved tokens");
  for (const std::string& t : tokens) add(t);
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("token id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& toks) const {
  std::vector<int> out;
  out.reserve(toks.size());
  for (const std::string& t : toks) {
    int i = id(t);
    if (i < 0) throw std::out_of_range("token not in vocabulary: " + t);
    out.push_back(i);
  }
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

}  // namespace rxnalign
