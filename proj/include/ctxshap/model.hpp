#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctxshap {

// Ordered, unique feature identifiers shared by a model and its data.
struct FeatureSet {
  std::vector<std::string> names;

  size_t count() const { return names.size(); }
  // Index of `name`, or -1 if absent.
  int index_of(const std::string& name) const;
};

// One node of a binary decision tree. Internal nodes split on
// values[split_feature] <= threshold (ties route left); leaves carry the
// additive output. `cover` counts background rows reaching the node and
// `left_fraction` = cover(left)/cover(node), NaN while undefined.
struct TreeNode {
  int id = -1;
  bool is_leaf = false;
  int split_feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double left_fraction = 0.0;  // NaN when cover == 0
  double leaf_value = 0.0;
  int64_t cover = 0;
};

// A single tree: node ids are indices into `nodes` after parsing.
struct Tree {
  int root = 0;
  std::vector<TreeNode> nodes;

  const TreeNode& node(int id) const { return nodes[size_t(id)]; }
};

enum class Objective { kRaw, kLogistic };

// An additive tree ensemble. Immutable after construction; all operations
// on it are pure functions.
struct TreeEnsemble {
  FeatureSet features;
  std::vector<Tree> trees;
  double base_score = 0.0;
  Objective objective = Objective::kRaw;
};

// A single feature vector; width must equal features.count().
struct Instance {
  std::vector<double> values;
};

// Rows bound to a feature set; used as empirical background for
// expectations and coverage fitting.
struct Dataset {
  FeatureSet features;
  std::vector<Instance> rows;
};

// Parses and validates the model JSON document. Throws SchemaError on
// missing/extra/ill-typed fields, StructureError on broken tree shape
// (cycles, orphans, bad indices), ValueError on non-finite or negative
// numeric content.
TreeEnsemble parse_model(const std::string& document);

// Inverse of parse_model on the in-memory representation.
std::string serialize_model(const TreeEnsemble& model);

// Raw-margin prediction: routed leaf values summed over trees plus
// base_score. Throws WidthError on width mismatch.
double predict_margin(const TreeEnsemble& model, const Instance& x);

// predict_margin followed by the objective transform.
double predict(const TreeEnsemble& model, const Instance& x);

double apply_objective(Objective objective, double margin);

// Returns a copy of `model` with cover and left_fraction recomputed by
// routing every background row through every tree. Throws
// EmptyBackgroundError / WidthError.
TreeEnsemble fit_coverage(const TreeEnsemble& model, const Dataset& background);

// True if `x` routes to the left child of `node` (ties route left).
inline bool routes_left(const TreeNode& node, const Instance& x) {
  return x.values[size_t(node.split_feature)] <= node.threshold;
}

}  // namespace ctxshap
