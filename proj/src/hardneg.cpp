// SPDX-License-Identifier: Apache-2.0
#include "sasa/hardneg.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>

#include "sasa/kg.hpp"

namespace sasa {

namespace {

std::uint64_t fnv1a_64(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

TrigramHashEmbedder::TrigramHashEmbedder(int dim) : dim_(dim) {
  require(dim >= 8, "builtin embedder requires dim >= 8");
}

Eigen::VectorXd TrigramHashEmbedder::embed(const std::string& text) const {
  std::string lowered(text.size(), '\0');
  std::transform(text.begin(), text.end(), lowered.begin(), [](char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  });

  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  if (lowered.size() < 3) {
    std::cerr << "[warn] builtin embedder: text shorter than one 3-gram ('" << text
              << "'); emitting uniform fallback vector\n";
    v.setConstant(1e-6);
  } else {
    for (std::size_t i = 0; i + 3 <= lowered.size(); ++i) {
      v[static_cast<Eigen::Index>(fnv1a_64(lowered.data() + i, 3) %
                                  static_cast<std::uint64_t>(dim_))] += 1.0;
    }
  }
  return v / v.norm();
}

int VectorStore::index_of(const std::string& id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return -1;
  return static_cast<int>(it - ids.begin());
}

VectorStore build_index(const KnowledgeGraph& kg, const EntityEmbedder& embedder) {
  require(kg.entity_count() > 0, "build_index: graph has no entities");
  VectorStore store;
  store.dim = embedder.dim();
  store.ids.reserve(kg.entity_count());
  for (int e = 0; e < kg.entity_count(); ++e) store.ids.push_back(kg.entity_id(e));
  std::sort(store.ids.begin(), store.ids.end());

  store.vectors.resize(static_cast<Index>(store.ids.size()), store.dim);
  for (std::size_t i = 0; i < store.ids.size(); ++i) {
    const int e = kg.entity_index(store.ids[i]);
    const std::string& desc = kg.entity_description(e);
    Eigen::VectorXd v = embedder.embed(desc.empty() ? store.ids[i] : desc);
    require(v.size() == store.dim, "embedder returned wrong dimension");
    store.vectors.row(static_cast<Index>(i)) = (v / v.norm()).transpose();
  }
  return store;
}

HardNegativeSet retrieve_topk(const VectorStore& store, const std::string& anchor,
                              int k, const std::set<std::string>& exclusions) {
  require(k >= 1, "retrieve_topk: k must be >= 1");
  const int anchor_idx = store.index_of(anchor);
  require(anchor_idx >= 0, "retrieve_topk: unknown anchor '" + anchor + "'");

  const Eigen::VectorXd scores =
      store.vectors * store.vectors.row(anchor_idx).transpose();

  std::vector<int> candidates;
  candidates.reserve(store.ids.size());
  for (int i = 0; i < static_cast<int>(store.ids.size()); ++i) {
    if (i == anchor_idx) continue;
    if (exclusions.count(store.ids[i])) continue;
    candidates.push_back(i);
  }

  const auto better = [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return store.ids[a] < store.ids[b];
  };
  const std::size_t take = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(k));
  std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end(), better);

  HardNegativeSet out;
  out.anchor = anchor;
  for (std::size_t i = 0; i < take; ++i) out.negatives.push_back(store.ids[candidates[i]]);
  return out;
}

std::map<std::string, HardNegativeSet> mine_all(const KnowledgeGraph& kg,
                                                const VectorStore& store,
                                                const MineOptions& options) {
  require(store.dim > 0 && !store.ids.empty(), "mine_all: store not built");

  std::set<int> anchor_tails;
  for (const Triple& t : kg.triples(Split::Train)) anchor_tails.insert(t.tail);

  std::map<std::string, HardNegativeSet> mined;
  for (int tail : anchor_tails) {
    const std::string& anchor_id = kg.entity_id(tail);
    std::set<std::string> exclusions;
    if (options.filter_true_tails) {
      for (const auto& [h, r] : kg.pairs_with_tail(tail)) {
        for (int other : kg.true_tails(h, r)) exclusions.insert(kg.entity_id(other));
      }
    }
    mined[anchor_id] = retrieve_topk(store, anchor_id, options.k, exclusions);
  }
  return mined;
}

void save_mined(const std::map<std::string, HardNegativeSet>& mined,
                const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  for (const auto& [anchor, set] : mined) {
    out << anchor << '\t';
    for (std::size_t i = 0; i < set.negatives.size(); ++i) {
      if (i) out << ',';
      out << set.negatives[i];
    }
    out << '\n';
  }
}

std::map<std::string, HardNegativeSet> load_mined(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  std::map<std::string, HardNegativeSet> mined;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      fail(path + ":" + std::to_string(lineno) + ": expected anchor<TAB>negatives");
    }
    HardNegativeSet set;
    set.anchor = line.substr(0, tab);
    std::string rest = line.substr(tab + 1);
    std::size_t start = 0;
    while (start < rest.size()) {
      std::size_t comma = rest.find(',', start);
      if (comma == std::string::npos) comma = rest.size();
      if (comma > start) set.negatives.push_back(rest.substr(start, comma - start));
      start = comma + 1;
    }
    mined[set.anchor] = std::move(set);
  }
  return mined;
}

}  // namespace sasa
