#pragma once

// Fixed whitespace-tokenized vocabulary. File format: plain text, one token
// per line, line number = id. Ids 0 and 1 are reserved for padding and
// unknown words.

#include <string>
#include <vector>

namespace atgmoe {

class Vocabulary {
 public:
  static constexpr int64_t kPadId = 0;
  static constexpr int64_t kUnkId = 1;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  // Builds "<pad>, <unk>, words..." padded with unused slots up to `size`.
  static Vocabulary build(const std::vector<std::string>& words, size_t size);

  size_t size() const { return tokens_.size(); }
  const std::string& token(int64_t id) const { return tokens_.at(static_cast<size_t>(id)); }
  int64_t id(const std::string& token) const;  // kUnkId when missing

  // Lowercased whitespace tokenization, padded/truncated to `length`.
  // Returns ids plus the unpadded token count (capped at length).
  std::pair<std::vector<int64_t>, int64_t> encode(const std::string& text, int64_t length) const;

 private:
  std::vector<std::string> tokens_;
};

}  // namespace atgmoe
