#include "derivscope/derivation.hpp"

#include <fmt/format.h>

#include "derivscope/errors.hpp"

namespace derivscope {

using nlohmann::json;

int column_index(RootCondition rc) {
  const int f = rc.formality == Formality::Strict ? 0 : 2;
  const int c = rc.completeness == Completeness::Full ? 0 : 1;
  return f + c;
}

const RootLabelMap& RootLabelMap::standard() {
  static const RootLabelMap map({
      {"root_strict", {Formality::Strict, Completeness::Full}},
      {"root_frag", {Formality::Strict, Completeness::Fragment}},
      {"root_informal", {Formality::Informal, Completeness::Full}},
      {"root_inffrag", {Formality::Informal, Completeness::Fragment}},
  });
  return map;
}

bool RootLabelMap::contains(std::string_view label) const { return labels_.find(label) != labels_.end(); }

RootCondition RootLabelMap::lookup(std::string_view label) const {
  auto it = labels_.find(label);
  if (it == labels_.end()) {
    std::string known;
    for (const auto& [name, _] : labels_) {
      if (!known.empty()) known += ", ";
      known += name;
    }
    throw DataError(fmt::format("unknown root label '{}' (known: {})", label, known));
  }
  return it->second;
}

std::string RootLabelMap::label_for(RootCondition rc) const {
  for (const auto& [name, cond] : labels_) {
    if (cond == rc) return name;
  }
  throw DataError("no root label for root condition");
}

RootCondition root_condition(std::string_view label, const RootLabelMap& map) { return map.lookup(label); }

DerivationNode DerivationNode::leaf(std::string token, std::string lexentry) {
  DerivationNode n;
  n.token = std::move(token);
  n.lexentry = std::move(lexentry);
  return n;
}

DerivationNode DerivationNode::rule(std::string label, std::vector<DerivationNode> children) {
  DerivationNode n;
  n.label = std::move(label);
  n.children = std::move(children);
  return n;
}

bool is_lexical_rule(std::string_view label) {
  for (std::string_view suffix : {"_ilr", "_dlr", "_olr", "_plr"}) {
    if (label.size() >= suffix.size() && label.substr(label.size() - suffix.size()) == suffix) return true;
  }
  return false;
}

namespace {

DerivationNode decode_node(const json& j, const std::string& path) {
  if (j.is_object()) {
    auto tok = j.find("token");
    if (tok == j.end() || !tok->is_string()) {
      throw DataError(fmt::format("tree leaf at {} lacks a string \"token\"", path.empty() ? "/" : path));
    }
    std::string le;
    if (auto it = j.find("le"); it != j.end()) {
      if (!it->is_string()) throw DataError(fmt::format("tree leaf at {} has a non-string \"le\"", path));
      le = it->get<std::string>();
    }
    for (const auto& [key, _] : j.items()) {
      if (key != "token" && key != "le") {
        throw DataError(fmt::format("tree leaf at {} has unexpected key \"{}\"", path, key));
      }
    }
    return DerivationNode::leaf(tok->get<std::string>(), std::move(le));
  }
  if (!j.is_array()) throw DataError(fmt::format("tree node at {} is neither an array nor a leaf", path));
  if (j.size() < 2) throw DataError(fmt::format("rule node at {} needs a label and at least one child", path));
  if (!j[0].is_string() || j[0].get_ref<const std::string&>().empty()) {
    throw DataError(fmt::format("rule node at {} lacks a label", path));
  }
  std::vector<DerivationNode> children;
  children.reserve(j.size() - 1);
  for (std::size_t i = 1; i < j.size(); ++i) {
    children.push_back(decode_node(j[i], fmt::format("{}/{}", path, i)));
  }
  return DerivationNode::rule(j[0].get<std::string>(), std::move(children));
}

void collect_leaves(const DerivationNode& n, Tokens& tokens, std::vector<std::string>& les) {
  if (n.is_leaf()) {
    tokens.push_back(n.token);
    les.push_back(n.lexentry);
    return;
  }
  for (const auto& c : n.children) collect_leaves(c, tokens, les);
}

void accumulate_rules(const DerivationNode& n, const RuleBagOptions& opts, RuleBag& bag) {
  if (n.is_leaf()) return;
  if (opts.include_lexical || !is_lexical_rule(n.label)) ++bag[n.label];
  for (const auto& c : n.children) accumulate_rules(c, opts, bag);
}

}  // namespace

Derivation parse_derivation(const json& encoded, std::optional<std::string_view> root_label,
                            const RootLabelMap& map) {
  DerivationNode tree = decode_node(encoded, "");
  std::string label;
  // A wrapper node named by a root label holds the condition, not a rule.
  if (!tree.is_leaf() && map.contains(tree.label)) {
    if (tree.children.size() != 1) {
      throw DataError(fmt::format("root wrapper '{}' must have exactly one child", tree.label));
    }
    label = tree.label;
    DerivationNode inner = std::move(tree.children.front());
    tree = std::move(inner);
    if (root_label && *root_label != label) {
      throw DataError(fmt::format("root label '{}' disagrees with tree wrapper '{}'", *root_label, label));
    }
  } else if (root_label) {
    label = std::string(*root_label);
  } else {
    throw DataError("derivation has no root label");
  }
  const RootCondition rc = map.lookup(label);
  return Derivation{std::move(label), rc, std::move(tree)};
}

Derivation parse_derivation(std::string_view encoded, std::optional<std::string_view> root_label,
                            const RootLabelMap& map) {
  json j;
  try {
    j = json::parse(encoded);
  } catch (const json::parse_error& e) {
    throw DataError(fmt::format("malformed tree encoding at byte {}: {}", e.byte, e.what()));
  }
  return parse_derivation(j, root_label, map);
}

json serialize_tree(const DerivationNode& node) {
  if (node.is_leaf()) return json{{"token", node.token}, {"le", node.lexentry}};
  json arr = json::array();
  arr.push_back(node.label);
  for (const auto& c : node.children) arr.push_back(serialize_tree(c));
  return arr;
}

Tokens leaf_tokens(const DerivationNode& node) {
  Tokens tokens;
  std::vector<std::string> les;
  collect_leaves(node, tokens, les);
  return tokens;
}

std::vector<std::string> leaf_lexentries(const DerivationNode& node) {
  Tokens tokens;
  std::vector<std::string> les;
  collect_leaves(node, tokens, les);
  return les;
}

std::size_t count_internal_nodes(const DerivationNode& node, const RuleBagOptions& opts) {
  if (node.is_leaf()) return 0;
  std::size_t n = (opts.include_lexical || !is_lexical_rule(node.label)) ? 1 : 0;
  for (const auto& c : node.children) n += count_internal_nodes(c, opts);
  return n;
}

RuleBag bag_of_rules(const Derivation& d, const RuleBagOptions& opts) {
  RuleBag bag;
  if (opts.include_root) ++bag[d.root_label];
  accumulate_rules(d.tree, opts, bag);
  return bag;
}

}  // namespace derivscope
