#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hcvae {

// Which taxonomy levels are appended to the encoder input and latent vector.
enum class ConditionMode { kNone, kLevel1Only, kLevel2Only, kBoth };

// "none", "ci", "cij", "both".
std::string_view to_string(ConditionMode mode);
ConditionMode parse_condition_mode(std::string_view text);

bool uses_level1(ConditionMode mode);
bool uses_level2(ConditionMode mode);

// Two-level machine taxonomy: machine type (level 1) and model ID (level 2).
// Labels are kept sorted so indices are stable across runs and reloads.
// Model IDs form a single global vocabulary shared by all machine types.
class Taxonomy {
 public:
  using Pair = std::pair<std::string, std::string>;

  Taxonomy() = default;
  // Sorts and deduplicates; every pair must reference known labels.
  Taxonomy(std::vector<std::string> level1, std::vector<std::string> level2, std::vector<Pair> pairs);
  static Taxonomy from_pairs(std::vector<Pair> pairs);

  const std::vector<std::string>& level1_labels() const { return level1_; }
  const std::vector<std::string>& level2_labels() const { return level2_; }
  const std::vector<Pair>& pairs() const { return pairs_; }

  std::size_t type_index(std::string_view type_label) const;  // throws LookupError
  std::size_t id_index(std::string_view id_label) const;      // throws LookupError
  bool contains_pair(std::string_view type_label, std::string_view id_label) const;

  std::size_t condition_dim(ConditionMode mode) const;

  // Union vocabulary of both taxonomies.
  Taxonomy merged_with(const Taxonomy& other) const;

  bool empty() const { return level1_.empty(); }
  bool operator==(const Taxonomy&) const = default;

 private:
  std::vector<std::string> level1_;
  std::vector<std::string> level2_;
  std::vector<Pair> pairs_;
};

// Scans a <root>/<machine_type>/<id>/<normal|abnormal>/*.wav tree.
Taxonomy build_taxonomy(const std::filesystem::path& dataset_root);

struct ConditionVector {
  std::vector<float> values;
  ConditionMode mode = ConditionMode::kNone;

  std::size_t size() const { return values.size(); }
};

// [one-hot(type) | one-hot(id)] restricted to the levels active in mode.
// Labels of inactive levels are ignored and may be empty.
ConditionVector encode_condition(const Taxonomy& taxonomy, std::string_view type_label, std::string_view id_label,
                                 ConditionMode mode);

}  // namespace hcvae
