#include "hcvae/taxonomy.hpp"

#include <algorithm>

#include "hcvae/dataset.hpp"
#include "hcvae/errors.hpp"

namespace hcvae {
namespace {

void sort_unique(std::vector<std::string>& labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
}

std::size_t index_in(const std::vector<std::string>& labels, std::string_view label, const char* level) {
  const auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label)
    throw LookupError(std::string("unknown ") + level + " label '" + std::string(label) + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

}  // namespace

std::string_view to_string(ConditionMode mode) {
  switch (mode) {
    case ConditionMode::kNone: return "none";
    case ConditionMode::kLevel1Only: return "ci";
    case ConditionMode::kLevel2Only: return "cij";
    case ConditionMode::kBoth: return "both";
  }
  return "none";
}

ConditionMode parse_condition_mode(std::string_view text) {
  if (text == "none") return ConditionMode::kNone;
  if (text == "ci") return ConditionMode::kLevel1Only;
  if (text == "cij") return ConditionMode::kLevel2Only;
  if (text == "both") return ConditionMode::kBoth;
  throw ConfigError("unknown condition mode '" + std::string(text) + "' (expected none|ci|cij|both)");
}

bool uses_level1(ConditionMode mode) { return mode == ConditionMode::kLevel1Only || mode == ConditionMode::kBoth; }
bool uses_level2(ConditionMode mode) { return mode == ConditionMode::kLevel2Only || mode == ConditionMode::kBoth; }

Taxonomy::Taxonomy(std::vector<std::string> level1, std::vector<std::string> level2, std::vector<Pair> pairs)
    : level1_(std::move(level1)), level2_(std::move(level2)), pairs_(std::move(pairs)) {
  for (const auto& l : level1_)
    if (l.empty()) throw ConfigError("empty machine type label");
  for (const auto& l : level2_)
    if (l.empty()) throw ConfigError("empty model id label");
  sort_unique(level1_);
  sort_unique(level2_);
  std::sort(pairs_.begin(), pairs_.end());
  pairs_.erase(std::unique(pairs_.begin(), pairs_.end()), pairs_.end());
  for (const auto& [type, id] : pairs_) {
    type_index(type);
    id_index(id);
  }
}

Taxonomy Taxonomy::from_pairs(std::vector<Pair> pairs) {
  std::vector<std::string> types;
  std::vector<std::string> ids;
  std::vector<Pair> with_ids;
  for (auto& [type, id] : pairs) {
    types.push_back(type);
    // Clips without an id level contribute their type only.
    if (id.empty()) continue;
    ids.push_back(id);
    with_ids.emplace_back(std::move(type), std::move(id));
  }
  return Taxonomy(std::move(types), std::move(ids), std::move(with_ids));
}

std::size_t Taxonomy::type_index(std::string_view type_label) const {
  return index_in(level1_, type_label, "machine type");
}

std::size_t Taxonomy::id_index(std::string_view id_label) const { return index_in(level2_, id_label, "model id"); }

bool Taxonomy::contains_pair(std::string_view type_label, std::string_view id_label) const {
  return std::any_of(pairs_.begin(), pairs_.end(),
                     [&](const Pair& p) { return p.first == type_label && p.second == id_label; });
}

std::size_t Taxonomy::condition_dim(ConditionMode mode) const {
  return (uses_level1(mode) ? level1_.size() : 0) + (uses_level2(mode) ? level2_.size() : 0);
}

Taxonomy Taxonomy::merged_with(const Taxonomy& other) const {
  auto l1 = level1_;
  auto l2 = level2_;
  auto pairs = pairs_;
  l1.insert(l1.end(), other.level1_.begin(), other.level1_.end());
  l2.insert(l2.end(), other.level2_.begin(), other.level2_.end());
  pairs.insert(pairs.end(), other.pairs_.begin(), other.pairs_.end());
  return Taxonomy(std::move(l1), std::move(l2), std::move(pairs));
}

Taxonomy build_taxonomy(const std::filesystem::path& dataset_root) {
  std::vector<Taxonomy::Pair> pairs;
  for (const auto& clip : scan_dataset(dataset_root)) pairs.emplace_back(clip.machine_type, clip.machine_id);
  return Taxonomy::from_pairs(std::move(pairs));
}

ConditionVector encode_condition(const Taxonomy& taxonomy, std::string_view type_label, std::string_view id_label,
                                 ConditionMode mode) {
  ConditionVector c;
  c.mode = mode;
  c.values.assign(taxonomy.condition_dim(mode), 0.0f);
  std::size_t offset = 0;
  if (uses_level1(mode)) {
    c.values[taxonomy.type_index(type_label)] = 1.0f;
    offset = taxonomy.level1_labels().size();
  }
  if (uses_level2(mode)) c.values[offset + taxonomy.id_index(id_label)] = 1.0f;
  return c;
}

}  // namespace hcvae
