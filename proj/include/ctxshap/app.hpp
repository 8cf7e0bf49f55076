#pragma once

#include <iosfwd>
#include <string>

#include "ctxshap/gateway.hpp"
#include "ctxshap/prompt.hpp"

namespace ctxshap {

// Stable process exit codes, shared by every subcommand.
namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kValidationFailed = 1;
inline constexpr int kParse = 2;       // unreadable files, schema/value errors, bad config
inline constexpr int kCompat = 3;      // width mismatches, unknown features, coverage
inline constexpr int kCapExceeded = 4; // enumeration cap
inline constexpr int kGateway = 5;     // transport/auth/upstream/fixture failures
inline constexpr int kFormat = 6;      // unparseable LLM response
}  // namespace exit_code

// Resolved command-line configuration for one run.
struct RunConfig {
  std::string model_path;
  std::string background_path;
  std::string instances_path;
  std::string context_path;   // optional
  std::string theme_path;     // optional
  std::string output_dir = "out";

  PlotKind kind = PlotKind::kWaterfall;
  int instance_index = -1;     // --index selector into the instances file
  std::string instance_json;   // --instance-json inline selector

  size_t enumeration_cap = 16;
  size_t token_budget = 8192;
  unsigned threads = 1;
  size_t max_bars = 9;
  size_t max_steps = 9;
  bool no_llm = false;

  GatewayConfig gateway;
};

// `ctxshap shap`: attributions for every instance; writes
// output_dir/attributions.json, prints its path on stdout and an
// efficiency summary on stderr.
int run_shap(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// `ctxshap explain`: full pipeline through plot, prompt, LLM call and
// response parsing; writes the report artifacts under output_dir.
int run_explain(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// `ctxshap validate`: model invariant diagnostics as a pass/fail table.
int run_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace ctxshap
