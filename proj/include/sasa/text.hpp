// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sasa {

class KnowledgeGraph;

// Lowercase alphanumeric runs; whitespace and punctuation are delimiters.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kReservedCount = 4;

  // Tokenizes every entity and relation text of the graph and keeps tokens
  // with frequency >= min_freq. Non-reserved ids are assigned by frequency
  // descending, ties broken lexicographically. Throws on an empty corpus.
  static Vocabulary build(const KnowledgeGraph& kg, int min_freq);

  // Rebuilds from a full token list (reserved rows first), e.g. out of a
  // checkpoint.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  static Vocabulary load_tsv(const std::string& path);
  void save_tsv(const std::string& path) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_[id]; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  int id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct TokenSequence {
  std::vector<int> token_ids;      // length max_len
  std::vector<int> segment_ids;    // 0 entity span, 1 relation span
  std::vector<int> attention_mask; // 1 real token, 0 padding
  int true_length = 0;
};

// [CLS] head-tokens [SEP] relation-tokens [SEP], segment 0 over the head span
// (including [CLS] and the first [SEP]), segment 1 over the relation span and
// the final [SEP]. Over-long inputs truncate the entity span first, then the
// relation span; both separators always survive. Requires max_len >= 5.
TokenSequence encode_head_relation(const Vocabulary& vocab,
                                   const std::string& head_text,
                                   const std::string& relation_text,
                                   int max_len);

// [CLS] tail-tokens [SEP], all segments 0. Requires max_len >= 3.
TokenSequence encode_entity(const Vocabulary& vocab, const std::string& text,
                            int max_len);

}  // namespace sasa
