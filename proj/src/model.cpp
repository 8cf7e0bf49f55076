#include "ctxshap/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "ctxshap/errors.hpp"
#include "json.hpp"

namespace ctxshap {

namespace {

using nlohmann::json;

double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

void require_keys(const json& obj, const std::set<std::string>& required,
                  const std::set<std::string>& optional, const std::string& what) {
  for (const auto& key : required) {
    if (!obj.contains(key))
      throw SchemaError(what + ": missing field \"" + key + "\"");
  }
  for (const auto& item : obj.items()) {
    if (!required.count(item.key()) && !optional.count(item.key()))
      throw SchemaError(what + ": unexpected field \"" + item.key() + "\"");
  }
}

double finite_number(const json& value, const std::string& what) {
  if (!value.is_number())
    throw SchemaError(what + ": expected a number");
  double v = value.get<double>();
  if (!std::isfinite(v)) throw ValueError(what + ": non-finite value");
  return v;
}

int64_t integer(const json& value, const std::string& what) {
  if (!value.is_number_integer())
    throw SchemaError(what + ": expected an integer");
  return value.get<int64_t>();
}

TreeNode parse_node(const json& node_json, size_t feature_count, const std::string& what) {
  if (!node_json.is_object()) throw SchemaError(what + ": expected an object");
  TreeNode node;
  if (node_json.contains("leaf")) {
    require_keys(node_json, {"id", "leaf"}, {"cover"}, what);
    node.is_leaf = true;
    node.leaf_value = finite_number(node_json.at("leaf"), what + ".leaf");
  } else {
    require_keys(node_json, {"id", "feature", "threshold", "left", "right", "cover"}, {}, what);
    node.is_leaf = false;
    int64_t feature = integer(node_json.at("feature"), what + ".feature");
    if (feature < 0 || size_t(feature) >= feature_count)
      throw StructureError(what + ": split feature index " + std::to_string(feature) +
                           " out of range for " + std::to_string(feature_count) + " features");
    node.split_feature = int(feature);
    node.threshold = finite_number(node_json.at("threshold"), what + ".threshold");
    node.left = int(integer(node_json.at("left"), what + ".left"));
    node.right = int(integer(node_json.at("right"), what + ".right"));
  }
  node.id = int(integer(node_json.at("id"), what + ".id"));
  if (node_json.contains("cover")) {
    int64_t cover = integer(node_json.at("cover"), what + ".cover");
    if (cover < 0) throw ValueError(what + ": negative cover " + std::to_string(cover));
    node.cover = cover;
  }
  return node;
}

// Recomputes every internal node's left_fraction from child covers.
void refresh_fractions(Tree& tree) {
  for (TreeNode& node : tree.nodes) {
    if (node.is_leaf) continue;
    node.left_fraction = node.cover > 0
                             ? double(tree.node(node.left).cover) / double(node.cover)
                             : quiet_nan();
  }
}

// Remaps raw node ids to dense indices and verifies the node table forms a
// proper binary tree: unique ids, existing child ids, a single root, every
// node reachable exactly once.
Tree build_tree(int root_id, std::vector<TreeNode> raw_nodes, const std::string& what) {
  if (raw_nodes.empty()) throw StructureError(what + ": empty node table");

  std::unordered_map<int, int> index_of_id;
  for (size_t i = 0; i < raw_nodes.size(); ++i) {
    if (!index_of_id.emplace(raw_nodes[i].id, int(i)).second)
      throw StructureError(what + ": duplicate node id " + std::to_string(raw_nodes[i].id));
  }
  auto lookup = [&](int id, const char* role) {
    auto it = index_of_id.find(id);
    if (it == index_of_id.end())
      throw StructureError(what + ": " + role + " references missing node id " +
                           std::to_string(id));
    return it->second;
  };

  Tree tree;
  tree.root = lookup(root_id, "root");
  tree.nodes = std::move(raw_nodes);
  for (TreeNode& node : tree.nodes) {
    if (node.is_leaf) continue;
    node.left = lookup(node.left, "left pointer");
    node.right = lookup(node.right, "right pointer");
  }

  // Reachability walk; revisiting a node means a cycle or a shared child.
  std::vector<char> seen(tree.nodes.size(), 0);
  std::vector<int> stack = {tree.root};
  while (!stack.empty()) {
    int idx = stack.back();
    stack.pop_back();
    if (seen[size_t(idx)])
      throw StructureError(what + ": node id " + std::to_string(tree.nodes[size_t(idx)].id) +
                           " reachable through more than one path");
    seen[size_t(idx)] = 1;
    const TreeNode& node = tree.nodes[size_t(idx)];
    if (!node.is_leaf) {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  for (size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i])
      throw StructureError(what + ": orphan node id " + std::to_string(tree.nodes[i].id));
  }

  refresh_fractions(tree);
  return tree;
}

int route_to_leaf(const Tree& tree, const Instance& x) {
  int idx = tree.root;
  while (!tree.node(idx).is_leaf)
    idx = routes_left(tree.node(idx), x) ? tree.node(idx).left : tree.node(idx).right;
  return idx;
}

void check_width(const TreeEnsemble& model, size_t width) {
  if (width != model.features.count())
    throw WidthError("instance width " + std::to_string(width) + " does not match model with " +
                     std::to_string(model.features.count()) + " features");
}

}  // namespace

int FeatureSet::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : int(it - names.begin());
}

TreeEnsemble parse_model(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("model document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("model: expected a top-level object");
  require_keys(doc, {"features", "base_score", "objective", "trees"}, {}, "model");

  TreeEnsemble model;
  const json& features = doc.at("features");
  if (!features.is_array() || features.empty())
    throw SchemaError("model.features: expected a non-empty array");
  std::set<std::string> unique_names;
  for (const json& name : features) {
    if (!name.is_string() || name.get<std::string>().empty())
      throw SchemaError("model.features: feature names must be non-empty strings");
    if (!unique_names.insert(name.get<std::string>()).second)
      throw SchemaError("model.features: duplicate feature name \"" + name.get<std::string>() +
                        "\"");
    model.features.names.push_back(name.get<std::string>());
  }

  model.base_score = finite_number(doc.at("base_score"), "model.base_score");

  const json& objective = doc.at("objective");
  if (objective == "raw") {
    model.objective = Objective::kRaw;
  } else if (objective == "logistic") {
    model.objective = Objective::kLogistic;
  } else {
    throw SchemaError("model.objective: expected \"raw\" or \"logistic\"");
  }

  const json& trees = doc.at("trees");
  if (!trees.is_array()) throw SchemaError("model.trees: expected an array");
  for (size_t t = 0; t < trees.size(); ++t) {
    const std::string what = "model.trees[" + std::to_string(t) + "]";
    const json& tree_json = trees[t];
    if (!tree_json.is_object()) throw SchemaError(what + ": expected an object");
    require_keys(tree_json, {"root", "nodes"}, {}, what);
    const json& nodes_json = tree_json.at("nodes");
    if (!nodes_json.is_array()) throw SchemaError(what + ".nodes: expected an array");
    std::vector<TreeNode> raw_nodes;
    raw_nodes.reserve(nodes_json.size());
    for (size_t n = 0; n < nodes_json.size(); ++n)
      raw_nodes.push_back(parse_node(nodes_json[n], model.features.count(),
                                     what + ".nodes[" + std::to_string(n) + "]"));
    int root_id = int(integer(tree_json.at("root"), what + ".root"));
    model.trees.push_back(build_tree(root_id, std::move(raw_nodes), what));
  }
  return model;
}

std::string serialize_model(const TreeEnsemble& model) {
  json doc;
  doc["features"] = model.features.names;
  doc["base_score"] = model.base_score;
  doc["objective"] = model.objective == Objective::kRaw ? "raw" : "logistic";
  doc["trees"] = json::array();
  for (const Tree& tree : model.trees) {
    json tree_json;
    tree_json["root"] = tree.root;
    tree_json["nodes"] = json::array();
    for (size_t i = 0; i < tree.nodes.size(); ++i) {
      const TreeNode& node = tree.nodes[i];
      json node_json;
      node_json["id"] = int(i);
      if (node.is_leaf) {
        node_json["leaf"] = node.leaf_value;
      } else {
        node_json["feature"] = node.split_feature;
        node_json["threshold"] = node.threshold;
        node_json["left"] = node.left;
        node_json["right"] = node.right;
      }
      node_json["cover"] = node.cover;
      tree_json["nodes"].push_back(std::move(node_json));
    }
    doc["trees"].push_back(std::move(tree_json));
  }
  return doc.dump(2);
}

double apply_objective(Objective objective, double margin) {
  return objective == Objective::kRaw ? margin : 1.0 / (1.0 + std::exp(-margin));
}

double predict_margin(const TreeEnsemble& model, const Instance& x) {
  check_width(model, x.values.size());
  double sum = model.base_score;
  for (const Tree& tree : model.trees) sum += tree.node(route_to_leaf(tree, x)).leaf_value;
  return sum;
}

double predict(const TreeEnsemble& model, const Instance& x) {
  return apply_objective(model.objective, predict_margin(model, x));
}

TreeEnsemble fit_coverage(const TreeEnsemble& model, const Dataset& background) {
  if (background.rows.empty()) throw EmptyBackgroundError("background dataset is empty");
  for (const Instance& row : background.rows) check_width(model, row.values.size());

  TreeEnsemble fitted = model;
  for (Tree& tree : fitted.trees) {
    for (TreeNode& node : tree.nodes) node.cover = 0;
    for (const Instance& row : background.rows) {
      int idx = tree.root;
      ++tree.nodes[size_t(idx)].cover;
      while (!tree.node(idx).is_leaf) {
        idx = routes_left(tree.node(idx), row) ? tree.node(idx).left : tree.node(idx).right;
        ++tree.nodes[size_t(idx)].cover;
      }
    }
    refresh_fractions(tree);
  }
  return fitted;
}

}  // namespace ctxshap
