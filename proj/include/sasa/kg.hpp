// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace sasa {

// Entity / relation handles are dense indices into the graph's id tables;
// the dataset-native string ids live in those tables.
struct Triple {
  int head = -1;
  int relation = -1;
  int tail = -1;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct LabeledTriple {
  Triple triple;
  int label = 0;  // 0 invalid, 1 valid
};

enum class Split { Train = 0, Valid = 1, Test = 2 };

enum class RelationCategory { OneToOne, OneToMany, ManyToOne, ManyToMany };

const char* to_string(RelationCategory c);

class KnowledgeGraph {
 public:
  // Reads the three-split TSV layout described in the README. A split path
  // may be empty, which yields an empty split. Throws on I/O failure, wrong
  // column count (with the offending line number), unknown ids in triple
  // files, duplicate ids in description files, and split overlap.
  static KnowledgeGraph load(const std::string& train_path,
                             const std::string& valid_path,
                             const std::string& test_path,
                             const std::string& entity_desc_path,
                             const std::string& relation_desc_path);

  int entity_count() const { return static_cast<int>(entity_ids_.size()); }
  int relation_count() const { return static_cast<int>(relation_ids_.size()); }

  const std::string& entity_id(int e) const { return entity_ids_[e]; }
  const std::string& entity_name(int e) const { return entity_names_[e]; }
  const std::string& entity_description(int e) const { return entity_descs_[e]; }
  const std::string& relation_id(int r) const { return relation_ids_[r]; }
  const std::string& relation_raw_text(int r) const { return relation_texts_[r]; }

  // -1 when unknown.
  int entity_index(const std::string& id) const;
  int relation_index(const std::string& id) const;

  // Text fed to the encoders: "name description" for entities, falling back
  // to the raw id when both are empty; relation text falls back likewise.
  std::string entity_text(int e) const;
  std::string relation_text(int r) const;

  const std::vector<Triple>& triples(Split s) const {
    return splits_[static_cast<int>(s)];
  }

  bool is_true_triple(const Triple& t) const;  // union of all splits

  // Tails known to complete (h, r, ·) in any split.
  std::vector<int> true_tails(int head, int relation) const;
  // Distinct (h, r) pairs that have the given tail in any split.
  std::vector<std::pair<int, int>> pairs_with_tail(int tail) const;

  void save_split(Split s, const std::string& path) const;
  void save_entities(const std::string& path) const;
  void save_relations(const std::string& path) const;

  // Builder interface used by the synthetic generator and tests.
  int add_entity(const std::string& id, const std::string& name,
                 const std::string& description);
  int add_relation(const std::string& id, const std::string& text);
  void add_triple(Split s, int head, int relation, int tail);
  void finalize();  // rebuilds the true-triple index; validates disjointness

 private:
  std::uint64_t triple_key(const Triple& t) const;

  std::vector<std::string> entity_ids_, entity_names_, entity_descs_;
  std::vector<std::string> relation_ids_, relation_texts_;
  std::unordered_map<std::string, int> entity_index_;
  std::unordered_map<std::string, int> relation_index_;
  std::array<std::vector<Triple>, 3> splits_;
  std::unordered_set<std::uint64_t> all_true_;
  std::unordered_map<std::uint64_t, std::vector<int>> tails_by_pair_;
  std::unordered_map<int, std::vector<std::pair<int, int>>> pairs_by_tail_;
};

struct CorruptionResult {
  std::vector<LabeledTriple> labeled;
  int skipped = 0;  // positives whose retry budget was exhausted
};

// Emits every positive of the split (label 1) followed by one corrupted
// counterpart (label 0) built by replacing a uniformly chosen slot with a
// uniformly sampled distinct id. Candidates colliding with any known true
// triple are resampled up to `max_retries` times; exhaustion skips the
// negative with a warning on stderr.
CorruptionResult corrupt_split(const KnowledgeGraph& kg, Split split,
                               std::uint64_t seed, int max_retries = 100);

void save_labeled(const KnowledgeGraph& kg, const std::vector<LabeledTriple>& lt,
                  const std::string& path);
std::vector<LabeledTriple> load_labeled(const KnowledgeGraph& kg,
                                        const std::string& path);

struct CategoryResult {
  std::map<int, RelationCategory> categories;
  std::vector<int> uncategorized;  // relations with zero train triples
};

// Classifies each relation from train-split statistics: average distinct
// heads per tail and tails per head, each side labeled "1" when strictly
// below 1.5 and "M" otherwise.
CategoryResult categorize_relations(const KnowledgeGraph& kg);

}  // namespace sasa
