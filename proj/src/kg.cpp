// SPDX-License-Identifier: Apache-2.0
#include "sasa/kg.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

#include "sasa/common.hpp"
#include "sasa/random.hpp"

namespace sasa {

namespace {

// Splits on tabs, keeping empty fields (a trailing tab yields a trailing
// empty column).
std::vector<std::string> split_tsv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

void for_each_line(const std::string& path,
                   const std::function<void(int, const std::string&)>& fn) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    fn(lineno, line);
  }
}

}  // namespace

const char* to_string(RelationCategory c) {
  switch (c) {
    case RelationCategory::OneToOne: return "1-1";
    case RelationCategory::OneToMany: return "1-M";
    case RelationCategory::ManyToOne: return "M-1";
    case RelationCategory::ManyToMany: return "M-M";
  }
  return "?";
}

int KnowledgeGraph::entity_index(const std::string& id) const {
  auto it = entity_index_.find(id);
  return it == entity_index_.end() ? -1 : it->second;
}

int KnowledgeGraph::relation_index(const std::string& id) const {
  auto it = relation_index_.find(id);
  return it == relation_index_.end() ? -1 : it->second;
}

std::string KnowledgeGraph::entity_text(int e) const {
  const std::string& name = entity_names_[e];
  const std::string& desc = entity_descs_[e];
  if (name.empty() && desc.empty()) return entity_ids_[e];
  if (name.empty()) return desc;
  if (desc.empty()) return name;
  return name + " " + desc;
}

std::string KnowledgeGraph::relation_text(int r) const {
  return relation_texts_[r].empty() ? relation_ids_[r] : relation_texts_[r];
}

std::uint64_t KnowledgeGraph::triple_key(const Triple& t) const {
  // 21 bits per slot; plenty for desk-scale graphs, checked in finalize().
  return (static_cast<std::uint64_t>(t.head) << 42) |
         (static_cast<std::uint64_t>(t.relation) << 21) |
         static_cast<std::uint64_t>(t.tail);
}

bool KnowledgeGraph::is_true_triple(const Triple& t) const {
  return all_true_.count(triple_key(t)) > 0;
}

std::vector<int> KnowledgeGraph::true_tails(int head, int relation) const {
  auto it = tails_by_pair_.find((static_cast<std::uint64_t>(head) << 21) |
                                static_cast<std::uint64_t>(relation));
  return it == tails_by_pair_.end() ? std::vector<int>{} : it->second;
}

std::vector<std::pair<int, int>> KnowledgeGraph::pairs_with_tail(int tail) const {
  auto it = pairs_by_tail_.find(tail);
  return it == pairs_by_tail_.end() ? std::vector<std::pair<int, int>>{}
                                    : it->second;
}

int KnowledgeGraph::add_entity(const std::string& id, const std::string& name,
                               const std::string& description) {
  require(!id.empty(), "entity id must be non-empty");
  require(entity_index_.find(id) == entity_index_.end(),
          "duplicate entity id: " + id);
  int idx = static_cast<int>(entity_ids_.size());
  entity_ids_.push_back(id);
  entity_names_.push_back(name);
  entity_descs_.push_back(description);
  entity_index_[id] = idx;
  return idx;
}

int KnowledgeGraph::add_relation(const std::string& id, const std::string& text) {
  require(!id.empty(), "relation id must be non-empty");
  require(relation_index_.find(id) == relation_index_.end(),
          "duplicate relation id: " + id);
  int idx = static_cast<int>(relation_ids_.size());
  relation_ids_.push_back(id);
  relation_texts_.push_back(text);
  relation_index_[id] = idx;
  return idx;
}

void KnowledgeGraph::add_triple(Split s, int head, int relation, int tail) {
  require(head >= 0 && head < entity_count(), "triple head out of range");
  require(tail >= 0 && tail < entity_count(), "triple tail out of range");
  require(relation >= 0 && relation < relation_count(),
          "triple relation out of range");
  splits_[static_cast<int>(s)].push_back(Triple{head, relation, tail});
}

void KnowledgeGraph::finalize() {
  require(entity_count() < (1 << 21) && relation_count() < (1 << 21),
          "graph too large for packed triple keys");
  all_true_.clear();
  tails_by_pair_.clear();
  pairs_by_tail_.clear();
  for (int s = 0; s < 3; ++s) {
    std::vector<Triple> deduped;
    std::unordered_set<std::uint64_t> seen;
    for (const Triple& t : splits_[s]) {
      std::uint64_t key = triple_key(t);
      if (!seen.insert(key).second) continue;  // duplicate within split
      if (all_true_.count(key)) {
        fail("triple sets overlap across splits: (" + entity_ids_[t.head] +
             ", " + relation_ids_[t.relation] + ", " + entity_ids_[t.tail] +
             ")");
      }
      deduped.push_back(t);
    }
    for (const Triple& t : deduped) all_true_.insert(triple_key(t));
    splits_[s] = std::move(deduped);
  }
  for (int s = 0; s < 3; ++s) {
    for (const Triple& t : splits_[s]) {
      std::uint64_t pair = (static_cast<std::uint64_t>(t.head) << 21) |
                           static_cast<std::uint64_t>(t.relation);
      tails_by_pair_[pair].push_back(t.tail);
      pairs_by_tail_[t.tail].emplace_back(t.head, t.relation);
    }
  }
}

KnowledgeGraph KnowledgeGraph::load(const std::string& train_path,
                                    const std::string& valid_path,
                                    const std::string& test_path,
                                    const std::string& entity_desc_path,
                                    const std::string& relation_desc_path) {
  KnowledgeGraph kg;

  for_each_line(entity_desc_path, [&](int lineno, const std::string& line) {
    auto cols = split_tsv_line(line);
    if (cols.size() != 3) {
      fail(entity_desc_path + ":" + std::to_string(lineno) +
           ": expected 3 columns (id, name, description), got " +
           std::to_string(cols.size()));
    }
    kg.add_entity(cols[0], cols[1], cols[2]);
  });

  for_each_line(relation_desc_path, [&](int lineno, const std::string& line) {
    auto cols = split_tsv_line(line);
    if (cols.size() != 2) {
      fail(relation_desc_path + ":" + std::to_string(lineno) +
           ": expected 2 columns (id, text), got " + std::to_string(cols.size()));
    }
    kg.add_relation(cols[0], cols[1]);
  });

  const std::array<std::pair<Split, std::string>, 3> split_paths = {
      std::make_pair(Split::Train, train_path),
      std::make_pair(Split::Valid, valid_path),
      std::make_pair(Split::Test, test_path)};
  for (const auto& [split, path] : split_paths) {
    if (path.empty()) continue;
    for_each_line(path, [&](int lineno, const std::string& line) {
      auto cols = split_tsv_line(line);
      if (cols.size() != 3) {
        fail(path + ":" + std::to_string(lineno) +
             ": expected 3 columns (head, relation, tail), got " +
             std::to_string(cols.size()));
      }
      int h = kg.entity_index(cols[0]);
      if (h < 0) fail(path + ":" + std::to_string(lineno) + ": unknown entity '" + cols[0] + "'");
      int r = kg.relation_index(cols[1]);
      if (r < 0) fail(path + ":" + std::to_string(lineno) + ": unknown relation '" + cols[1] + "'");
      int t = kg.entity_index(cols[2]);
      if (t < 0) fail(path + ":" + std::to_string(lineno) + ": unknown entity '" + cols[2] + "'");
      kg.add_triple(split, h, r, t);
    });
  }

  kg.finalize();
  return kg;
}

void KnowledgeGraph::save_split(Split s, const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  for (const Triple& t : triples(s)) {
    out << entity_ids_[t.head] << '\t' << relation_ids_[t.relation] << '\t'
        << entity_ids_[t.tail] << '\n';
  }
}

void KnowledgeGraph::save_entities(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  for (int e = 0; e < entity_count(); ++e) {
    out << entity_ids_[e] << '\t' << entity_names_[e] << '\t' << entity_descs_[e]
        << '\n';
  }
}

void KnowledgeGraph::save_relations(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  for (int r = 0; r < relation_count(); ++r) {
    out << relation_ids_[r] << '\t' << relation_texts_[r] << '\n';
  }
}

CorruptionResult corrupt_split(const KnowledgeGraph& kg, Split split,
                               std::uint64_t seed, int max_retries) {
  const auto& triples = kg.triples(split);
  require(!triples.empty(), "corrupt_split: split is empty");

  Rng rng(seed);
  CorruptionResult result;
  result.labeled.reserve(triples.size() * 2);

  const int E = kg.entity_count();
  const int R = kg.relation_count();

  for (const Triple& pos : triples) {
    result.labeled.push_back(LabeledTriple{pos, 1});

    bool produced = false;
    for (int attempt = 0; attempt < max_retries && !produced; ++attempt) {
      const int slot = static_cast<int>(rng.bounded(3));  // 0 head, 1 tail, 2 relation
      Triple cand = pos;
      if (slot == 0) {
        if (E < 2) continue;
        int e = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(E - 1)));
        if (e >= pos.head) ++e;
        cand.head = e;
      } else if (slot == 1) {
        if (E < 2) continue;
        int e = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(E - 1)));
        if (e >= pos.tail) ++e;
        cand.tail = e;
      } else {
        if (R < 2) continue;
        int r = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(R - 1)));
        if (r >= pos.relation) ++r;
        cand.relation = r;
      }
      if (kg.is_true_triple(cand)) continue;
      result.labeled.push_back(LabeledTriple{cand, 0});
      produced = true;
    }
    if (!produced) {
      ++result.skipped;
      std::cerr << "[warn] corrupt_split: retry budget exhausted for ("
                << kg.entity_id(pos.head) << ", " << kg.relation_id(pos.relation)
                << ", " << kg.entity_id(pos.tail) << "); negative skipped\n";
    }
  }
  return result;
}

void save_labeled(const KnowledgeGraph& kg, const std::vector<LabeledTriple>& lt,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  for (const LabeledTriple& x : lt) {
    out << kg.entity_id(x.triple.head) << '\t' << kg.relation_id(x.triple.relation)
        << '\t' << kg.entity_id(x.triple.tail) << '\t' << x.label << '\n';
  }
}

std::vector<LabeledTriple> load_labeled(const KnowledgeGraph& kg,
                                        const std::string& path) {
  std::vector<LabeledTriple> out;
  for_each_line(path, [&](int lineno, const std::string& line) {
    auto cols = split_tsv_line(line);
    if (cols.size() != 4) {
      fail(path + ":" + std::to_string(lineno) +
           ": expected 4 columns (head, relation, tail, label), got " +
           std::to_string(cols.size()));
    }
    int h = kg.entity_index(cols[0]);
    int r = kg.relation_index(cols[1]);
    int t = kg.entity_index(cols[2]);
    if (h < 0 || r < 0 || t < 0) {
      fail(path + ":" + std::to_string(lineno) + ": unknown id in labeled triple");
    }
    if (cols[3] != "0" && cols[3] != "1") {
      fail(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
    }
    out.push_back(LabeledTriple{Triple{h, r, t}, cols[3] == "1" ? 1 : 0});
  });
  return out;
}

CategoryResult categorize_relations(const KnowledgeGraph& kg) {
  const auto& train = kg.triples(Split::Train);
  require(!train.empty(), "categorize_relations: train split is empty");

  // relation -> (tail -> distinct heads, head -> distinct tails)
  std::map<int, std::map<int, std::set<int>>> heads_per_tail;
  std::map<int, std::map<int, std::set<int>>> tails_per_head;
  for (const Triple& t : train) {
    heads_per_tail[t.relation][t.tail].insert(t.head);
    tails_per_head[t.relation][t.head].insert(t.tail);
  }

  CategoryResult result;
  for (int r = 0; r < kg.relation_count(); ++r) {
    auto it = heads_per_tail.find(r);
    if (it == heads_per_tail.end()) {
      result.uncategorized.push_back(r);
      continue;
    }
    double head_sum = 0;
    for (const auto& [tail, heads] : it->second) head_sum += static_cast<double>(heads.size());
    const double avg_heads_per_tail = head_sum / static_cast<double>(it->second.size());

    const auto& by_head = tails_per_head[r];
    double tail_sum = 0;
    for (const auto& [head, tails] : by_head) tail_sum += static_cast<double>(tails.size());
    const double avg_tails_per_head = tail_sum / static_cast<double>(by_head.size());

    // "below 1.5" is strict; exactly 1.5 labels the side M.
    const bool head_side_one = avg_heads_per_tail < 1.5;
    const bool tail_side_one = avg_tails_per_head < 1.5;
    RelationCategory cat;
    if (head_side_one && tail_side_one) cat = RelationCategory::OneToOne;
    else if (head_side_one) cat = RelationCategory::OneToMany;
    else if (tail_side_one) cat = RelationCategory::ManyToOne;
    else cat = RelationCategory::ManyToMany;
    result.categories[r] = cat;
  }
  return result;
}

}  // namespace sasa
