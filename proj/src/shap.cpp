#include "ctxshap/shap.hpp"

#include <bit>
#include <cmath>
#include <thread>

#include "ctxshap/errors.hpp"
#include "json.hpp"

namespace ctxshap {

namespace {

// Re-throws the batch element's error with the row index attached,
// keeping the concrete type so callers can still dispatch on it.
[[noreturn]] void rethrow_for_row(size_t row, const Error& e) {
  const std::string msg = "row " + std::to_string(row) + ": " + e.what();
  if (dynamic_cast<const CoverageError*>(&e)) throw CoverageError(msg);
  if (dynamic_cast<const TooManyFeaturesError*>(&e)) throw TooManyFeaturesError(msg);
  if (dynamic_cast<const WidthError*>(&e)) throw WidthError(msg);
  throw Error(msg);
}

void check_width(const TreeEnsemble& model, const Instance& x) {
  if (x.values.size() != model.features.count())
    throw WidthError("instance width " + std::to_string(x.values.size()) +
                     " does not match model with " + std::to_string(model.features.count()) +
                     " features");
}

void check_coverage_fitted(const TreeEnsemble& model) {
  for (size_t t = 0; t < model.trees.size(); ++t) {
    const Tree& tree = model.trees[t];
    if (tree.node(tree.root).cover <= 0)
      throw CoverageError("tree " + std::to_string(t) +
                          " has zero root cover; run fit_coverage against a background dataset");
  }
}

double expect_node(const Tree& tree, int idx, const Instance& x, const CoalitionMask& coalition) {
  const TreeNode& node = tree.node(idx);
  if (node.is_leaf) return node.leaf_value;
  if (coalition.contains(size_t(node.split_feature)))
    return expect_node(tree, routes_left(node, x) ? node.left : node.right, x, coalition);
  double t = node.left_fraction;
  if (std::isnan(t))
    throw CoverageError("left fraction undefined at node id " + std::to_string(node.id) +
                        " (cover == 0); refit coverage");
  // Zero-weight branches are skipped, so empty subtrees below a conditioned
  // path never poison the expectation.
  double sum = 0.0;
  if (t > 0.0) sum += t * expect_node(tree, node.left, x, coalition);
  if (t < 1.0) sum += (1.0 - t) * expect_node(tree, node.right, x, coalition);
  return sum;
}

uint64_t factorial(size_t n) {
  uint64_t f = 1;
  for (size_t i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

double exp_value(const TreeEnsemble& model, const Instance& x, const CoalitionMask& coalition) {
  check_width(model, x);
  check_coverage_fitted(model);
  double sum = model.base_score;
  for (const Tree& tree : model.trees) sum += expect_node(tree, tree.root, x, coalition);
  return sum;
}

double shapley_weight(size_t n_features, size_t subset_size) {
  // |S|!(n-|S|-1)!/n!; exact integer factorials are cheap below 13!,
  // log-gamma keeps larger widths overflow-free.
  if (n_features <= 12) {
    return double(factorial(subset_size)) * double(factorial(n_features - subset_size - 1)) /
           double(factorial(n_features));
  }
  return std::exp(std::lgamma(double(subset_size) + 1.0) +
                  std::lgamma(double(n_features - subset_size)) -
                  std::lgamma(double(n_features) + 1.0));
}

Attribution shapley(const TreeEnsemble& model, const Instance& x, const ShapOptions& opts) {
  check_width(model, x);
  const size_t n = model.features.count();
  if (n > opts.enumeration_cap)
    throw TooManyFeaturesError(
        "exact enumeration over " + std::to_string(n) + " features needs 2^" + std::to_string(n) +
        " coalition evaluations, above the configured cap of " +
        std::to_string(opts.enumeration_cap) + "; raise the cap only for small models");

  // One traversal per coalition, memoized by mask.
  const uint64_t n_masks = uint64_t(1) << n;
  std::vector<double> value(n_masks);
  for (uint64_t mask = 0; mask < n_masks; ++mask)
    value[mask] = exp_value(model, x, CoalitionMask(mask, n));

  Attribution attr;
  attr.instance = x;
  attr.base_value = value[0];
  attr.prediction = value[n_masks - 1];
  attr.phi.assign(n, 0.0);

  std::vector<double> weight_by_size(n);
  for (size_t s = 0; s < n; ++s) weight_by_size[s] = shapley_weight(n, s);

  for (size_t i = 0; i < n; ++i) {
    const uint64_t bit = uint64_t(1) << i;
    double phi = 0.0;
    // Ascending mask order keeps the accumulation order deterministic.
    for (uint64_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      phi += weight_by_size[size_t(std::popcount(mask))] * (value[mask | bit] - value[mask]);
    }
    attr.phi[i] = phi;
  }
  return attr;
}

std::vector<Attribution> shapley_batch(const TreeEnsemble& model, const Dataset& rows,
                                       const ShapOptions& opts) {
  const size_t n_rows = rows.rows.size();
  std::vector<Attribution> results(n_rows);
  if (n_rows == 0) return results;

  unsigned threads = opts.threads == 0 ? std::thread::hardware_concurrency() : opts.threads;
  if (threads <= 1 || n_rows == 1) {
    for (size_t i = 0; i < n_rows; ++i) {
      try {
        results[i] = shapley(model, rows.rows[i], opts);
      } catch (const Error& e) {
        rethrow_for_row(i, e);
      }
    }
    return results;
  }

  // Rows are independent; a fixed contiguous partition keeps output
  // identical to the single-threaded run.
  threads = unsigned(std::min<size_t>(threads, n_rows));
  std::vector<std::exception_ptr> failures(threads);
  std::vector<std::thread> pool;
  const size_t chunk = (n_rows + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      const size_t begin = size_t(t) * chunk;
      const size_t end = std::min(n_rows, begin + chunk);
      for (size_t i = begin; i < end; ++i) {
        try {
          results[i] = shapley(model, rows.rows[i], opts);
        } catch (const Error& e) {
          try {
            rethrow_for_row(i, e);
          } catch (...) {
            failures[t] = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& failure : failures)
    if (failure) std::rethrow_exception(failure);
  return results;
}

GlobalAttribution aggregate_global(const std::vector<Attribution>& attrs) {
  if (attrs.empty()) throw EmptyInputError("aggregate_global requires at least one attribution");
  const size_t n = attrs.front().phi.size();
  GlobalAttribution global;
  global.n_instances = attrs.size();
  global.mean_abs_phi.assign(n, 0.0);
  for (const Attribution& attr : attrs) {
    if (attr.phi.size() != n)
      throw WidthError("attribution width " + std::to_string(attr.phi.size()) +
                       " does not match first width " + std::to_string(n));
    for (size_t i = 0; i < n; ++i) global.mean_abs_phi[i] += std::abs(attr.phi[i]);
  }
  for (double& v : global.mean_abs_phi) v /= double(attrs.size());
  return global;
}

namespace {

nlohmann::json attribution_json(const Attribution& attr, const FeatureSet& features) {
  nlohmann::json doc;
  doc["features"] = features.names;
  doc["base_value"] = attr.base_value;
  doc["prediction"] = attr.prediction;
  doc["phi"] = attr.phi;
  return doc;
}

}  // namespace

std::string attribution_to_json(const Attribution& attr, const FeatureSet& features) {
  return attribution_json(attr, features).dump(2);
}

std::string attributions_to_json(const std::vector<Attribution>& attrs,
                                 const FeatureSet& features) {
  nlohmann::json doc = nlohmann::json::array();
  for (const Attribution& attr : attrs) doc.push_back(attribution_json(attr, features));
  return doc.dump(2);
}

}  // namespace ctxshap
