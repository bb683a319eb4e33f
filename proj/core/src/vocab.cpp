#include "atgmoe/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace atgmoe {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2 || tokens_[0] != "<pad>" || tokens_[1] != "<unk>")
    throw std::invalid_argument("vocabulary must start with <pad>, <unk>");
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read vocabulary " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write vocabulary " + path);
  for (const auto& t : tokens_) f << t << "\n";
}

Vocabulary Vocabulary::build(const std::vector<std::string>& words, size_t size) {
  std::set<std::string> uniq(words.begin(), words.end());
  std::vector<std::string> tokens = {"<pad>", "<unk>"};
  for (const auto& w : uniq) tokens.push_back(w);
  if (tokens.size() > size)
    throw std::invalid_argument("vocabulary needs " + std::to_string(tokens.size()) +
                                " slots but only " + std::to_string(size) + " configured");
  while (tokens.size() < size) tokens.push_back("<unused_" + std::to_string(tokens.size()) + ">");
  return Vocabulary(std::move(tokens));
}

int64_t Vocabulary::id(const std::string& token) const {
  for (size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i] == token) return static_cast<int64_t>(i);
  return kUnkId;
}

std::pair<std::vector<int64_t>, int64_t> Vocabulary::encode(const std::string& text,
                                                            int64_t length) const {
  std::istringstream ss(text);
  std::string word;
  std::vector<int64_t> ids;
  while (ss >> word && static_cast<int64_t>(ids.size()) < length) {
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    ids.push_back(id(word));
  }
  int64_t count = static_cast<int64_t>(ids.size());
  ids.resize(static_cast<size_t>(length), kPadId);
  return {ids, count};
}

}  // namespace atgmoe
