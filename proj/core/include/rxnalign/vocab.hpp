#pragma once

// Token vocabulary shared by the sequence heads.  Ids 0..3 are reserved for
// padding, begin, end, and the empty-slot marker.

#include <string>
#include <unordered_map>
#include <vector>

namespace rxnalign {

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kNone = 3;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);  // full list

  int add(const std::string& token);  // returns the id, inserting if new
  int id(const std::string& token) const;  // -1 when absent
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& toks) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

inline const char* kPadToken = "<pad>";
inline const char* kBosToken = "<bos>";
inline const char* kEosToken = "<eos>";
inline const char* kNoneToken = "<none>";

}  // namespace rxnalign
