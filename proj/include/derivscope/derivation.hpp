#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "derivscope/tokens.hpp"

namespace derivscope {

enum class Formality { Strict, Informal };
enum class Completeness { Full, Fragment };

struct RootCondition {
  Formality formality = Formality::Strict;
  Completeness completeness = Completeness::Full;

  friend bool operator==(const RootCondition&, const RootCondition&) = default;
};

/// Index 0..3 in table order: strict full, strict frag, informal full, informal frag.
int column_index(RootCondition rc);

/// Maps root labels (root_strict, root_frag, ...) to root conditions.
class RootLabelMap {
 public:
  /// root_strict, root_frag, root_informal, root_inffrag.
  static const RootLabelMap& standard();

  explicit RootLabelMap(const std::map<std::string, RootCondition>& labels) : labels_(labels.begin(), labels.end()) {}

  bool contains(std::string_view label) const;

  /// Throws DataError listing the known labels when label is unknown.
  RootCondition lookup(std::string_view label) const;

  /// Inverse of lookup for the standard inventory.
  std::string label_for(RootCondition rc) const;

 private:
  std::map<std::string, RootCondition, std::less<>> labels_;
};

RootCondition root_condition(std::string_view label,
                             const RootLabelMap& map = RootLabelMap::standard());

/// A derivation tree node. Internal nodes carry a rule label and at least one
/// child; leaves carry a token and its lexical-entry class.
struct DerivationNode {
  std::string label;  // rule label, empty on leaves
  std::string token;  // leaves only
  std::string lexentry;
  std::vector<DerivationNode> children;

  bool is_leaf() const { return children.empty(); }

  static DerivationNode leaf(std::string token, std::string lexentry);
  static DerivationNode rule(std::string label, std::vector<DerivationNode> children);

  friend bool operator==(const DerivationNode&, const DerivationNode&) = default;
};

struct Derivation {
  std::string root_label;
  RootCondition root;
  DerivationNode tree;  // root-condition wrapper already stripped

  friend bool operator==(const Derivation&, const Derivation&) = default;
};

using RuleBag = std::map<std::string, std::int64_t>;

struct RuleBagOptions {
  bool include_root = false;     // count the root-condition label as a rule
  bool include_lexical = false;  // count lexical rules (inflection, punctuation)
};

/// ERG lexical rules end in _ilr, _dlr, _olr or _plr.
bool is_lexical_rule(std::string_view label);

/// Parses the wire tree encoding. A top-level wrapper whose label is a known
/// root label is stripped into the root condition; otherwise root_label is
/// used. Throws DataError with a JSON pointer to the offending element.
Derivation parse_derivation(const nlohmann::json& encoded,
                            std::optional<std::string_view> root_label = std::nullopt,
                            const RootLabelMap& map = RootLabelMap::standard());

/// Same, from text. Syntax errors report the byte position.
Derivation parse_derivation(std::string_view encoded,
                            std::optional<std::string_view> root_label = std::nullopt,
                            const RootLabelMap& map = RootLabelMap::standard());

inline Derivation parse_derivation(const char* encoded,
                                   std::optional<std::string_view> root_label = std::nullopt,
                                   const RootLabelMap& map = RootLabelMap::standard()) {
  return parse_derivation(std::string_view(encoded), root_label, map);
}

/// Canonical encoding of the tree (without the root wrapper).
nlohmann::json serialize_tree(const DerivationNode& node);

/// Leaf tokens left to right.
Tokens leaf_tokens(const DerivationNode& node);

/// Leaf lexical-entry classes left to right.
std::vector<std::string> leaf_lexentries(const DerivationNode& node);

std::size_t count_internal_nodes(const DerivationNode& node, const RuleBagOptions& opts = {});

RuleBag bag_of_rules(const Derivation& d, const RuleBagOptions& opts = {});

}  // namespace derivscope
