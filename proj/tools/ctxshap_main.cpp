#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ctxshap/app.hpp"
#include "ctxshap/version.hpp"

namespace {

using ctxshap::GatewayMode;
using ctxshap::PlotKind;
using ctxshap::RunConfig;

void add_common_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--model", cfg.model_path, "Model JSON file")->required();
  cmd->add_option("--background", cfg.background_path,
                  "Background CSV used for coverage and E[f(X)]");
  cmd->add_option("--context", cfg.context_path, "Explanation context JSON file");
  cmd->add_option("--out", cfg.output_dir, "Output directory");
  cmd->add_option("--budget", cfg.token_budget, "Prompt token budget");
  cmd->add_option("--cap", cfg.enumeration_cap, "Feature-count cap for exact enumeration");
  cmd->add_option("--threads", cfg.threads, "Worker threads for batch attribution");
}

void add_gateway_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_flag("--no-llm", cfg.no_llm, "Stop after the plot and prompt dump");
  std::map<std::string, GatewayMode> modes = {{"live", GatewayMode::kLive},
                                              {"record", GatewayMode::kRecord},
                                              {"replay", GatewayMode::kReplay}};
  cmd->add_option("--mode", cfg.gateway.mode, "Gateway mode")
      ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
  cmd->add_option("--gateway-url", cfg.gateway.base_url, "Chat-completions base URL");
  cmd->add_option("--gateway-model", cfg.gateway.model_name, "Model name sent to the endpoint");
  cmd->add_option("--fixtures", cfg.gateway.fixture_dir, "Fixture directory (record/replay)");
  cmd->add_option("--timeout", cfg.gateway.timeout_s, "Request timeout in seconds");
  cmd->add_option("--retries", cfg.gateway.max_retries, "Max retries on HTTP 429");
  cmd->add_flag("--keep-svg", [&cfg](size_t) { cfg.gateway.raster_images = false; },
                "Attach SVG bytes instead of rasterized PNG");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shapley attributions, plots and contextualized LLM explanations "
               "for tree-ensemble models"};
  app.set_version_flag("--version", ctxshap::kVersion);
  app.require_subcommand(1);

  RunConfig cfg;

  CLI::App* shap = app.add_subcommand("shap", "Compute Shapley attributions for instances");
  add_common_options(shap, cfg);
  shap->add_option("--instances", cfg.instances_path, "Instances CSV file")->required();

  CLI::App* explain =
      app.add_subcommand("explain", "Plot and explain attributions through the LLM gateway");
  add_common_options(explain, cfg);
  add_gateway_options(explain, cfg);
  std::map<std::string, PlotKind> kinds = {{"bar", PlotKind::kBar},
                                           {"waterfall", PlotKind::kWaterfall}};
  explain->add_option("--kind", cfg.kind, "Plot kind")
      ->transform(CLI::CheckedTransformer(kinds, CLI::ignore_case))
      ->required();
  explain->add_option("--instances", cfg.instances_path, "Instances CSV file");
  explain->add_option("--index", cfg.instance_index, "Instance row to explain (waterfall)");
  explain->add_option("--instance-json", cfg.instance_json,
                      "Inline instance as a JSON array or object (waterfall)");
  explain->add_option("--theme", cfg.theme_path, "Plot theme JSON file");
  explain->add_option("--max-bars", cfg.max_bars, "Bars before folding into the other row");
  explain->add_option("--max-steps", cfg.max_steps, "Waterfall steps before collapsing");

  CLI::App* validate = app.add_subcommand("validate", "Check model invariants");
  validate->add_option("--model", cfg.model_path, "Model JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : ctxshap::exit_code::kParse;
  }

  // shap/explain need a background; validate does not.
  if ((shap->parsed() || explain->parsed()) && cfg.background_path.empty()) {
    std::cerr << "error: --background is required\n";
    return ctxshap::exit_code::kParse;
  }

  if (shap->parsed()) return ctxshap::run_shap(cfg, std::cout, std::cerr);
  if (explain->parsed()) return ctxshap::run_explain(cfg, std::cout, std::cerr);
  return ctxshap::run_validate(cfg, std::cout, std::cerr);
}
