#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ctxshap/model.hpp"
#include "ctxshap/shap.hpp"

namespace ctxshap {

enum class Reader { kGeneral, kExpert };
enum class PlotKind { kBar, kWaterfall };

// User-supplied context that steers the generated explanation: display
// aliases, per-feature descriptions, task background, output language and
// audience level.
struct ExplanationContext {
  std::map<std::string, std::string> feature_aliases;
  std::map<std::string, std::string> feature_descriptions;
  std::string additional_background;
  std::string language = "English";
  Reader reader = Reader::kGeneral;
};

// Strict parse of the context JSON file; every key optional.
ExplanationContext parse_context(const std::string& document);

// Alias/description keys must name model features. Throws
// UnknownFeatureError.
void validate_context(const ExplanationContext& ctx, const FeatureSet& features);

struct PromptImage {
  std::string media_type;
  std::vector<uint8_t> bytes;
};

// A fully assembled multimodal chat request: guard system text, markdown
// user body, plot attachments, and how many instances made it into the
// SHAP table under the token budget.
struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::vector<PromptImage> images;
  size_t sample_count = 0;
};

// The structured response in the mandated three-section format.
struct ParsedExplanation {
  std::string summary;
  std::vector<std::pair<std::string, std::string>> per_feature;
  std::string caveats;
};

// Markdown table of feature name | alias | description, with an inference
// instruction when context is partial.
std::string build_feature_table(const FeatureSet& features, const ExplanationContext& ctx);

// Markdown table of per-feature SHAP values plus E[f(X)]/f(x) rows, one
// column per instance, first-N instances chosen to fit budget_tokens.
// Returns the table and the instance count included. Throws
// BudgetTooSmallError when not even one instance fits.
std::pair<std::string, size_t> build_shap_table(const std::vector<Attribution>& attrs,
                                                const FeatureSet& features,
                                                const ExplanationContext& ctx,
                                                size_t budget_tokens);

// The fixed guard system prompt (prediction disclaimer + E[f(X)] vs f(x)
// definitions). Constant per release.
std::string build_guard();

// Guard-clause substrings every bundle's system text must contain.
extern const char* const kGuardDisclaimerClause;
extern const char* const kGuardSymbolClause;

// Full prompt assembly. Waterfall requires exactly one attribution, bar at
// least one; exactly one plot image. Estimated user-text tokens never
// exceed budget_tokens on success.
PromptBundle assemble(PlotKind kind, const std::vector<Attribution>& attrs,
                      const std::vector<std::string>& plot_svgs, const FeatureSet& features,
                      const ExplanationContext& ctx, size_t budget_tokens);

// Parses the mandated SUMMARY / PER_FEATURE / CAVEATS sections; order-
// insensitive, tolerant of surrounding whitespace and a markdown fence.
// Throws FormatError naming the first missing, duplicated or empty
// section.
ParsedExplanation parse_response(const std::string& raw);

// Checks every PER_FEATURE display name resolves to a model feature
// directly, via alias, or as "name (alias)". Throws FormatError.
void bind_features(const ParsedExplanation& parsed, const FeatureSet& features,
                   const ExplanationContext& ctx);

std::string explanation_to_json(const ParsedExplanation& parsed);

}  // namespace ctxshap
