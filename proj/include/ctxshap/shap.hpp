#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxshap/model.hpp"

namespace ctxshap {

// A subset of feature indices, bound to a feature-set width of at most 64.
class CoalitionMask {
 public:
  CoalitionMask(uint64_t bits, size_t width) : bits_(bits), width_(width) {}
  static CoalitionMask empty(size_t width) { return {0, width}; }
  static CoalitionMask full(size_t width) {
    return {width >= 64 ? ~uint64_t(0) : (uint64_t(1) << width) - 1, width};
  }

  bool contains(size_t feature) const { return (bits_ >> feature) & 1; }
  CoalitionMask with(size_t feature) const { return {bits_ | (uint64_t(1) << feature), width_}; }
  uint64_t bits() const { return bits_; }
  size_t width() const { return width_; }

 private:
  uint64_t bits_;
  size_t width_;
};

// Per-feature Shapley values for one instance, in raw margin space.
// Invariant: sum(phi) == prediction - base_value to 1e-9 (efficiency).
struct Attribution {
  std::vector<double> phi;
  double base_value = 0.0;  // expected margin with nothing conditioned
  double prediction = 0.0;  // margin with every feature conditioned
  Instance instance;
};

// Mean absolute Shapley value per feature over a set of instances.
struct GlobalAttribution {
  std::vector<double> mean_abs_phi;
  size_t n_instances = 0;
};

struct ShapOptions {
  size_t enumeration_cap = 16;  // refuse exact enumeration beyond this width
  unsigned threads = 1;         // row-level parallelism for shapley_batch
};

// Interventional expectation E[f(X) | do(X_S = x_S)] via the coverage-
// weighted tree walk: conditioned splits follow x, unconditioned splits
// average children by left_fraction. Raw margin space, base_score included.
// Throws CoverageError when a needed fraction is undefined (cover == 0).
double exp_value(const TreeEnsemble& model, const Instance& x, const CoalitionMask& coalition);

// Exact Shapley attribution by enumerating all feature coalitions.
// Throws TooManyFeaturesError beyond opts.enumeration_cap.
Attribution shapley(const TreeEnsemble& model, const Instance& x, const ShapOptions& opts = {});

// Element-wise shapley over rows; order preserved, deterministic for any
// thread count. Errors carry the offending row index.
std::vector<Attribution> shapley_batch(const TreeEnsemble& model, const Dataset& rows,
                                       const ShapOptions& opts = {});

// Arithmetic mean of |phi| per feature. Throws EmptyInputError.
GlobalAttribution aggregate_global(const std::vector<Attribution>& attrs);

// Shapley coalition weight |S|!(n-|S|-1)!/n! for subset size s of n
// features; exact 64-bit factorials up to n == 12, log-gamma beyond.
double shapley_weight(size_t n_features, size_t subset_size);

// {"features": [...], "base_value": n, "prediction": n, "phi": [...]}
std::string attribution_to_json(const Attribution& attr, const FeatureSet& features);
// JSON array of the per-instance objects.
std::string attributions_to_json(const std::vector<Attribution>& attrs,
                                 const FeatureSet& features);

}  // namespace ctxshap
