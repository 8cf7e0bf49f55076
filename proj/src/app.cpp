#include "ctxshap/app.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ctxshap/csv.hpp"
#include "ctxshap/errors.hpp"
#include "ctxshap/plot.hpp"
#include "ctxshap/shap.hpp"
#include "ctxshap/util.hpp"
#include "ctxshap/version.hpp"
#include "json.hpp"

namespace ctxshap {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot read file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SchemaError("cannot write file: " + path.string());
  out << content;
}

int map_error(const Error& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  if (dynamic_cast<const TooManyFeaturesError*>(&e)) return exit_code::kCapExceeded;
  if (dynamic_cast<const WidthError*>(&e) || dynamic_cast<const UnknownFeatureError*>(&e) ||
      dynamic_cast<const CoverageError*>(&e) || dynamic_cast<const KindArityError*>(&e))
    return exit_code::kCompat;
  if (dynamic_cast<const AuthError*>(&e) || dynamic_cast<const RateLimitError*>(&e) ||
      dynamic_cast<const TransportError*>(&e) || dynamic_cast<const UpstreamError*>(&e) ||
      dynamic_cast<const FixtureMissError*>(&e))
    return exit_code::kGateway;
  if (dynamic_cast<const FormatError*>(&e)) return exit_code::kFormat;
  return exit_code::kParse;
}

struct LoadedInputs {
  TreeEnsemble model;  // coverage already fitted
  Dataset background;
};

LoadedInputs load_model_and_background(const RunConfig& cfg) {
  LoadedInputs loaded;
  loaded.model = parse_model(read_file(cfg.model_path));
  loaded.background =
      align_columns(parse_csv(read_file(cfg.background_path)), loaded.model.features);
  loaded.model = fit_coverage(loaded.model, loaded.background);
  return loaded;
}

Instance parse_instance_json(const std::string& text, const FeatureSet& features) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("instance JSON is invalid: ") + e.what());
  }
  Instance x;
  if (doc.is_array()) {
    if (doc.size() != features.count())
      throw WidthError("inline instance has " + std::to_string(doc.size()) +
                       " values but the model has " + std::to_string(features.count()) +
                       " features");
    for (const json& v : doc) {
      if (!v.is_number()) throw SchemaError("inline instance: expected numbers");
      x.values.push_back(v.get<double>());
    }
  } else if (doc.is_object()) {
    x.values.assign(features.count(), 0.0);
    std::vector<bool> found(features.count(), false);
    for (const auto& item : doc.items()) {
      const int idx = features.index_of(item.key());
      if (idx < 0) throw WidthError("inline instance: unknown feature \"" + item.key() + "\"");
      if (!item.value().is_number())
        throw SchemaError("inline instance: expected numbers");
      x.values[size_t(idx)] = item.value().get<double>();
      found[size_t(idx)] = true;
    }
    for (size_t i = 0; i < found.size(); ++i)
      if (!found[i])
        throw WidthError("inline instance: missing feature \"" + features.names[i] + "\"");
  } else {
    throw SchemaError("inline instance: expected a JSON array or object");
  }
  for (double v : x.values)
    if (!std::isfinite(v)) throw ValueError("inline instance: non-finite value");
  return x;
}

double max_efficiency_residual(const std::vector<Attribution>& attrs) {
  double worst = 0.0;
  for (const Attribution& attr : attrs) {
    double sum = 0.0;
    for (double phi : attr.phi) sum += phi;
    worst = std::max(worst, std::abs(sum - (attr.prediction - attr.base_value)));
  }
  return worst;
}

ShapOptions shap_options(const RunConfig& cfg) {
  ShapOptions opts;
  opts.enumeration_cap = cfg.enumeration_cap;
  opts.threads = cfg.threads;
  return opts;
}

}  // namespace

int run_shap(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    LoadedInputs loaded = load_model_and_background(cfg);
    Dataset instances =
        align_columns(parse_csv(read_file(cfg.instances_path)), loaded.model.features);
    std::vector<Attribution> attrs = shapley_batch(loaded.model, instances, shap_options(cfg));

    fs::create_directories(cfg.output_dir);
    const fs::path path = fs::path(cfg.output_dir) / "attributions.json";
    write_file(path, attributions_to_json(attrs, loaded.model.features) + "\n");

    err << "instances: " << attrs.size()
        << "  max efficiency residual: " << format_general(max_efficiency_residual(attrs), 3)
        << "\n";
    out << path.string() << "\n";
    return exit_code::kOk;
  } catch (const Error& e) {
    return map_error(e, err);
  }
}

int run_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::string document;
  try {
    document = read_file(cfg.model_path);
  } catch (const Error& e) {
    return map_error(e, err);
  }

  bool all_pass = true;
  auto report = [&](bool pass, const std::string& name, const std::string& detail) {
    out << (pass ? "PASS  " : "FAIL  ") << name;
    if (!detail.empty()) out << " — " << detail;
    out << "\n";
    all_pass = all_pass && pass;
  };

  TreeEnsemble model;
  try {
    model = parse_model(document);
    report(true, "document schema and tree structure", "");
  } catch (const Error& e) {
    report(false, "document schema and tree structure", e.what());
    return exit_code::kValidationFailed;
  }

  // Cover sums: every internal node's cover must equal its children's.
  std::string cover_detail;
  for (size_t t = 0; t < model.trees.size() && cover_detail.empty(); ++t) {
    for (const TreeNode& node : model.trees[t].nodes) {
      if (node.is_leaf || node.cover == 0) continue;
      const int64_t left = model.trees[t].node(node.left).cover;
      const int64_t right = model.trees[t].node(node.right).cover;
      if (left + right != node.cover) {
        cover_detail = "tree " + std::to_string(t) + ", node id " + std::to_string(node.id) +
                       ": cover " + std::to_string(node.cover) + " != " + std::to_string(left) +
                       " + " + std::to_string(right);
        break;
      }
    }
  }
  report(cover_detail.empty(), "cover sums", cover_detail);

  // Left fractions must stay inside [0, 1] wherever defined.
  std::string fraction_detail;
  for (size_t t = 0; t < model.trees.size() && fraction_detail.empty(); ++t) {
    for (const TreeNode& node : model.trees[t].nodes) {
      if (node.is_leaf || std::isnan(node.left_fraction)) continue;
      if (node.left_fraction < 0.0 || node.left_fraction > 1.0) {
        fraction_detail = "tree " + std::to_string(t) + ", node id " + std::to_string(node.id) +
                          ": left fraction " + format_general(node.left_fraction, 6);
        break;
      }
    }
  }
  report(fraction_detail.empty(), "left fractions in [0, 1]", fraction_detail);

  // Dummy features are legal; list them so surprises are visible.
  std::vector<bool> used(model.features.count(), false);
  for (const Tree& tree : model.trees)
    for (const TreeNode& node : tree.nodes)
      if (!node.is_leaf) used[size_t(node.split_feature)] = true;
  std::string unused;
  for (size_t i = 0; i < used.size(); ++i)
    if (!used[i]) unused += (unused.empty() ? "" : ", ") + model.features.names[i];
  report(true, "dummy feature scan",
         unused.empty() ? "every feature appears in a split" : "unused features: " + unused);

  err << (all_pass ? "model OK" : "model has failing invariants") << "\n";
  return all_pass ? exit_code::kOk : exit_code::kValidationFailed;
}

int run_explain(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    LoadedInputs loaded = load_model_and_background(cfg);
    const FeatureSet& features = loaded.model.features;

    ExplanationContext ctx;
    if (!cfg.context_path.empty()) ctx = parse_context(read_file(cfg.context_path));
    validate_context(ctx, features);
    Theme theme;
    if (!cfg.theme_path.empty()) theme = parse_theme(read_file(cfg.theme_path));

    // Attributions and the plot for the requested kind.
    std::vector<Attribution> attrs;
    std::string svg;
    if (cfg.kind == PlotKind::kWaterfall) {
      Instance x;
      if (!cfg.instance_json.empty()) {
        x = parse_instance_json(cfg.instance_json, features);
      } else if (cfg.instance_index >= 0) {
        Dataset instances =
            align_columns(parse_csv(read_file(cfg.instances_path)), features);
        if (size_t(cfg.instance_index) >= instances.rows.size())
          throw ValueError("--index " + std::to_string(cfg.instance_index) +
                           " is out of range for " + std::to_string(instances.rows.size()) +
                           " instances");
        x = instances.rows[size_t(cfg.instance_index)];
      } else {
        throw ValueError("waterfall explanations need --index or --instance-json");
      }
      attrs.push_back(shapley(loaded.model, x, shap_options(cfg)));
      svg = render_svg(
          build_waterfall(attrs[0], features.names, x.values, cfg.max_steps), theme);
    } else {
      Dataset instances = align_columns(parse_csv(read_file(cfg.instances_path)), features);
      attrs = shapley_batch(loaded.model, instances, shap_options(cfg));
      svg = render_svg(build_bar(aggregate_global(attrs), features.names, cfg.max_bars), theme);
    }

    PromptBundle bundle =
        assemble(cfg.kind, attrs, {svg}, features, ctx, cfg.token_budget);

    fs::create_directories(cfg.output_dir);
    const fs::path out_dir(cfg.output_dir);
    write_file(out_dir / "attributions.json",
               attributions_to_json(attrs, features) + "\n");
    write_file(out_dir / "plot.svg", svg);

    std::string prompt_md = "# System\n\n" + bundle.system_text + "\n# User\n\n" +
                            bundle.user_text + "\n# Attachments\n\n";
    for (const PromptImage& image : bundle.images)
      prompt_md += "- " + image.media_type + ": plot.svg (" +
                   std::to_string(image.bytes.size()) + " bytes)\n";
    write_file(out_dir / "prompt.md", prompt_md);

    json report;
    report["version"] = kVersion;
    report["kind"] = cfg.kind == PlotKind::kWaterfall ? "waterfall" : "bar";
    report["sample_count"] = bundle.sample_count;
    report["artifacts"] = {{"attributions", "attributions.json"},
                           {"plot", "plot.svg"},
                           {"prompt", "prompt.md"}};

    if (cfg.no_llm) {
      report["explanation"] = nullptr;
    } else {
      LlmResult result;
      try {
        result = send(bundle, cfg.gateway);
      } catch (const Error& e) {
        return map_error(e, err);
      }
      json telemetry;
      telemetry["latency_s"] = result.latency_s;
      telemetry["attempts"] = result.attempts;
      if (result.usage) {
        telemetry["prompt_tokens"] = result.usage->prompt_tokens;
        telemetry["completion_tokens"] = result.usage->completion_tokens;
      }
      if (result.estimated_cost) telemetry["estimated_cost"] = *result.estimated_cost;
      report["telemetry"] = std::move(telemetry);

      ParsedExplanation parsed;
      try {
        parsed = parse_response(result.raw_text);
        bind_features(parsed, features, ctx);
      } catch (const FormatError& e) {
        // Keep the raw reply next to the other artifacts for debugging.
        write_file(out_dir / "response_raw.txt", result.raw_text);
        err << "error: " << e.what() << " (raw response saved to "
            << (out_dir / "response_raw.txt").string() << ")\n";
        return exit_code::kFormat;
      }
      write_file(out_dir / "explanation.json", explanation_to_json(parsed) + "\n");
      report["artifacts"]["explanation"] = "explanation.json";
    }

    json hashes;
    for (const auto& item : report["artifacts"].items())
      hashes[item.value().get<std::string>()] =
          sha256_hex(read_file((out_dir / item.value().get<std::string>()).string()));
    report["hashes"] = std::move(hashes);
    write_file(out_dir / "report.json", report.dump(2) + "\n");

    err << "sample_count: " << bundle.sample_count << "\n";
    out << (out_dir / "report.json").string() << "\n";
    return exit_code::kOk;
  } catch (const Error& e) {
    return map_error(e, err);
  }
}

}  // namespace ctxshap
