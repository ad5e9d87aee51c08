// SPDX-License-Identifier: Apache-2.0
#include "sasa/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "sasa/common.hpp"
#include "sasa/kg.hpp"

namespace sasa {

namespace {
const char* kReserved[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    const unsigned char uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

Vocabulary Vocabulary::build(const KnowledgeGraph& kg, int min_freq) {
  require(min_freq >= 1, "min_freq must be >= 1");
  std::map<std::string, long> freq;
  long total = 0;
  for (int e = 0; e < kg.entity_count(); ++e) {
    for (auto& tok : tokenize(kg.entity_text(e))) {
      ++freq[tok];
      ++total;
    }
  }
  for (int r = 0; r < kg.relation_count(); ++r) {
    for (auto& tok : tokenize(kg.relation_text(r))) {
      ++freq[tok];
      ++total;
    }
  }
  require(total > 0, "build_vocab: corpus is empty");

  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, n] : freq) {
    if (n >= min_freq) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> tokens;
  tokens.reserve(kept.size() + kReservedCount);
  for (const char* r : kReserved) tokens.emplace_back(r);
  for (auto& [tok, n] : kept) tokens.push_back(std::move(tok));
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  require(tokens.size() >= kReservedCount, "vocabulary must include reserved tokens");
  for (int i = 0; i < kReservedCount; ++i) {
    require(tokens[i] == kReserved[i], "reserved token rows out of order");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) {
    require(v.index_.emplace(v.tokens_[i], i).second,
            "duplicate token in vocabulary: " + v.tokens_[i]);
  }
  return v;
}

void Vocabulary::save_tsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  for (int i = 0; i < size(); ++i) out << tokens_[i] << '\t' << i << '\n';
}

Vocabulary Vocabulary::load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      fail(path + ":" + std::to_string(lineno) + ": expected token<TAB>id");
    }
    const int id = std::stoi(line.substr(tab + 1));
    if (id != static_cast<int>(tokens.size())) {
      fail(path + ":" + std::to_string(lineno) + ": ids must be dense and ordered");
    }
    tokens.push_back(line.substr(0, tab));
  }
  return from_tokens(std::move(tokens));
}

namespace {

std::vector<int> to_ids(const Vocabulary& vocab, const std::string& text) {
  std::vector<int> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(vocab.id_of(tok));
  if (ids.empty()) ids.push_back(Vocabulary::kUnk);  // degenerate span rule
  return ids;
}

void pad_to(TokenSequence& seq, int max_len) {
  seq.true_length = static_cast<int>(seq.token_ids.size());
  seq.token_ids.resize(max_len, Vocabulary::kPad);
  seq.segment_ids.resize(max_len, 0);
  seq.attention_mask.resize(max_len, 0);
  for (int i = 0; i < seq.true_length; ++i) seq.attention_mask[i] = 1;
}

}  // namespace

TokenSequence encode_head_relation(const Vocabulary& vocab,
                                   const std::string& head_text,
                                   const std::string& relation_text,
                                   int max_len) {
  require(max_len >= 5,
          "encode_head_relation: max_len must be >= 5 (specials plus one token per span)");
  std::vector<int> h = to_ids(vocab, head_text);
  std::vector<int> r = to_ids(vocab, relation_text);

  const int budget = max_len - 3;  // [CLS] + two [SEP]
  int h_keep = static_cast<int>(h.size());
  int r_keep = static_cast<int>(r.size());
  if (h_keep + r_keep > budget) {
    h_keep = std::max(1, budget - r_keep);
    if (h_keep + r_keep > budget) r_keep = budget - h_keep;
  }

  TokenSequence seq;
  seq.token_ids.push_back(Vocabulary::kCls);
  seq.segment_ids.push_back(0);
  for (int i = 0; i < h_keep; ++i) {
    seq.token_ids.push_back(h[i]);
    seq.segment_ids.push_back(0);
  }
  seq.token_ids.push_back(Vocabulary::kSep);
  seq.segment_ids.push_back(0);
  for (int i = 0; i < r_keep; ++i) {
    seq.token_ids.push_back(r[i]);
    seq.segment_ids.push_back(1);
  }
  seq.token_ids.push_back(Vocabulary::kSep);
  seq.segment_ids.push_back(1);

  pad_to(seq, max_len);
  return seq;
}

TokenSequence encode_entity(const Vocabulary& vocab, const std::string& text,
                            int max_len) {
  require(max_len >= 3,
          "encode_entity: max_len must be >= 3 (specials plus one token)");
  std::vector<int> t = to_ids(vocab, text);
  const int keep = std::min<int>(static_cast<int>(t.size()), max_len - 2);

  TokenSequence seq;
  seq.token_ids.push_back(Vocabulary::kCls);
  seq.segment_ids.push_back(0);
  for (int i = 0; i < keep; ++i) {
    seq.token_ids.push_back(t[i]);
    seq.segment_ids.push_back(0);
  }
  seq.token_ids.push_back(Vocabulary::kSep);
  seq.segment_ids.push_back(0);

  pad_to(seq, max_len);
  return seq;
}

}  // namespace sasa
