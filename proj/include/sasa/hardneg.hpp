// SPDX-License-Identifier: Apache-2.0
//
// Entity vector store with a pluggable embedder and brute-force exact top-k
// retrieval of hard negatives per anchor tail entity.

#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "sasa/common.hpp"

namespace sasa {

class KnowledgeGraph;

class EntityEmbedder {
 public:
  virtual ~EntityEmbedder() = default;
  // Fixed-dimension vector for a text; unit norm.
  virtual Eigen::VectorXd embed(const std::string& text) const = 0;
  virtual int dim() const = 0;
  virtual bool deterministic() const = 0;
};

// Character 3-gram hashed term-frequency embedding with a stable FNV-1a hash;
// the deterministic built-in stand-in for an external embedding model.
// Text shorter than three characters yields a uniform fallback vector with a
// warning. Requires dim >= 8.
class TrigramHashEmbedder final : public EntityEmbedder {
 public:
  explicit TrigramHashEmbedder(int dim);
  Eigen::VectorXd embed(const std::string& text) const override;
  int dim() const override { return dim_; }
  bool deterministic() const override { return true; }

 private:
  int dim_;
};

// One unit-norm vector per entity, rows sorted by entity id ascending so that
// tie-breaks and iteration order are reproducible.
struct VectorStore {
  int dim = 0;
  std::vector<std::string> ids;  // ascending
  MatrixD vectors;               // ids.size() x dim, unit rows

  int index_of(const std::string& id) const;  // -1 when unknown
};

// Embeds every entity from its description (falling back to the id string).
VectorStore build_index(const KnowledgeGraph& kg, const EntityEmbedder& embedder);

struct HardNegativeSet {
  std::string anchor;
  std::vector<std::string> negatives;  // descending similarity, <= k entries
};

// Exact cosine top-k over the store, excluding the anchor itself and every id
// in `exclusions`; ties broken by entity id ascending. Returns fewer than k
// entries when the candidate pool is small.
HardNegativeSet retrieve_topk(const VectorStore& store, const std::string& anchor,
                              int k, const std::set<std::string>& exclusions = {});

struct MineOptions {
  int k = 3;
  // Exclude entities that are true tails for any (h, r) pair that has the
  // anchor as tail (conservative false-negative filtering). Off reproduces
  // the unfiltered literal behavior.
  bool filter_true_tails = true;
};

// Hard negatives for every distinct tail of a positive train triple.
std::map<std::string, HardNegativeSet> mine_all(const KnowledgeGraph& kg,
                                                const VectorStore& store,
                                                const MineOptions& options);

void save_mined(const std::map<std::string, HardNegativeSet>& mined,
                const std::string& path);
std::map<std::string, HardNegativeSet> load_mined(const std::string& path);

}  // namespace sasa
