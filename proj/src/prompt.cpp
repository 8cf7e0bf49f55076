#include "ctxshap/prompt.hpp"

#include <algorithm>
#include <sstream>

#include "ctxshap/errors.hpp"
#include "ctxshap/prompt_assets.hpp"
#include "ctxshap/util.hpp"
#include "json.hpp"

namespace ctxshap {

const char* const kGuardDisclaimerClause =
    "estimates, not deterministic conclusions, and must not be treated as definitive diagnoses";
const char* const kGuardSymbolClause =
    "E[f(X)] represents the expected prediction value, i.e., the average model output across "
    "the entire dataset. f(x) is the model's prediction for the specific instance being "
    "explained.";

namespace {

std::string trim(const std::string& s) {
  size_t begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  size_t end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string md_cell(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out += c;
  }
  return out;
}

const char* reader_directive(Reader reader) {
  // The two fixed audience directives.
  return reader == Reader::kGeneral
             ? "The reader is a non-technical general audience: use intuitive, everyday "
               "language and avoid jargon."
             : "The reader is a domain specialist: emphasize critical assessment of the "
               "data, methods, and results.";
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      if (!current.empty() && current.back() == '\r') current.pop_back();
      lines.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  lines.push_back(current);
  return lines;
}

// "### NAME" (any heading level, optional trailing colon) for one of the
// three mandated section names; returns empty string otherwise.
std::string heading_name(const std::string& line) {
  size_t i = line.find_first_not_of(' ');
  if (i == std::string::npos || i > 3 || line[i] != '#') return "";
  size_t hashes = 0;
  while (i < line.size() && line[i] == '#') {
    ++i;
    ++hashes;
  }
  if (hashes > 6 || i >= line.size() || line[i] != ' ') return "";
  std::string name = trim(line.substr(i));
  if (!name.empty() && name.back() == ':') name = trim(name.substr(0, name.size() - 1));
  if (name == "SUMMARY" || name == "PER_FEATURE" || name == "CAVEATS") return name;
  return "";
}

}  // namespace

ExplanationContext parse_context(const std::string& document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("context document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("context: expected a top-level object");

  ExplanationContext ctx;
  for (const auto& item : doc.items()) {
    const std::string& key = item.key();
    const nlohmann::json& value = item.value();
    if (key == "feature_aliases" || key == "feature_descriptions") {
      if (!value.is_object()) throw SchemaError("context." + key + ": expected an object");
      auto& target = key == "feature_aliases" ? ctx.feature_aliases : ctx.feature_descriptions;
      for (const auto& entry : value.items()) {
        if (!entry.value().is_string())
          throw SchemaError("context." + key + "." + entry.key() + ": expected a string");
        target[entry.key()] = entry.value().get<std::string>();
      }
    } else if (key == "additional_background") {
      if (!value.is_string()) throw SchemaError("context.additional_background: expected a string");
      ctx.additional_background = value.get<std::string>();
    } else if (key == "language") {
      if (!value.is_string() || value.get<std::string>().empty())
        throw SchemaError("context.language: expected a non-empty string");
      ctx.language = value.get<std::string>();
    } else if (key == "reader") {
      if (value == "general") ctx.reader = Reader::kGeneral;
      else if (value == "expert") ctx.reader = Reader::kExpert;
      else throw SchemaError("context.reader: expected \"general\" or \"expert\"");
    } else {
      throw SchemaError("context: unexpected field \"" + key + "\"");
    }
  }
  return ctx;
}

void validate_context(const ExplanationContext& ctx, const FeatureSet& features) {
  for (const auto* map : {&ctx.feature_aliases, &ctx.feature_descriptions}) {
    for (const auto& [name, _] : *map) {
      if (features.index_of(name) < 0)
        throw UnknownFeatureError("context references unknown feature \"" + name + "\"");
    }
  }
}

std::string build_feature_table(const FeatureSet& features, const ExplanationContext& ctx) {
  validate_context(ctx, features);
  std::string table = "| Feature | Alias | Description |\n|---|---|---|\n";
  bool any_missing = false;
  for (const std::string& name : features.names) {
    auto alias_it = ctx.feature_aliases.find(name);
    auto desc_it = ctx.feature_descriptions.find(name);
    const bool has_alias = alias_it != ctx.feature_aliases.end();
    const bool has_desc = desc_it != ctx.feature_descriptions.end();
    any_missing = any_missing || !has_alias || !has_desc;
    table += "| " + md_cell(name) + " | " + (has_alias ? md_cell(alias_it->second) : "—") +
             " | " + (has_desc ? md_cell(desc_it->second) : "model should infer") + " |\n";
  }
  if (any_missing)
    table +=
        "\nAliases or descriptions marked \"—\" or \"model should infer\" were not provided; "
        "interpret those features yourself from their names and the background given.\n";
  return table;
}

std::pair<std::string, size_t> build_shap_table(const std::vector<Attribution>& attrs,
                                                const FeatureSet& features,
                                                const ExplanationContext& ctx,
                                                size_t budget_tokens) {
  if (attrs.empty()) throw EmptyInputError("build_shap_table requires at least one attribution");
  validate_context(ctx, features);

  auto render = [&](size_t count) {
    std::string table = "| Feature |";
    for (size_t j = 0; j < count; ++j) table += " Instance " + std::to_string(j + 1) + " |";
    table += "\n|---|";
    for (size_t j = 0; j < count; ++j) table += "---|";
    table += "\n";
    for (size_t i = 0; i < features.count(); ++i) {
      table += "| " + md_cell(features.names[i]) + " |";
      for (size_t j = 0; j < count; ++j)
        table += " " + format_general(attrs[j].phi[i], 4) + " |";
      table += "\n";
    }
    table += "| E[f(X)] (base value) |";
    for (size_t j = 0; j < count; ++j) table += " " + format_general(attrs[j].base_value, 4) + " |";
    table += "\n| f(x) (prediction) |";
    for (size_t j = 0; j < count; ++j) table += " " + format_general(attrs[j].prediction, 4) + " |";
    table += "\n";
    return table;
  };

  // First-N selection: grow while the rendered table stays inside budget.
  std::string best;
  size_t best_count = 0;
  for (size_t count = 1; count <= attrs.size(); ++count) {
    std::string candidate = render(count);
    if (estimate_tokens(candidate) > budget_tokens) break;
    best = std::move(candidate);
    best_count = count;
  }
  if (best_count == 0)
    throw BudgetTooSmallError("token budget " + std::to_string(budget_tokens) +
                              " cannot fit the SHAP table for even one instance");
  return {best, best_count};
}

std::string build_guard() { return prompt_assets::kGuard; }

PromptBundle assemble(PlotKind kind, const std::vector<Attribution>& attrs,
                      const std::vector<std::string>& plot_svgs, const FeatureSet& features,
                      const ExplanationContext& ctx, size_t budget_tokens) {
  if (kind == PlotKind::kWaterfall && attrs.size() != 1)
    throw KindArityError("waterfall explanations take exactly one attribution, got " +
                         std::to_string(attrs.size()));
  if (attrs.empty()) throw KindArityError("bar explanations take at least one attribution");
  if (plot_svgs.size() != 1)
    throw KindArityError("assemble takes exactly one plot image, got " +
                         std::to_string(plot_svgs.size()));

  std::string head = "## Task\n";
  head +=
      "Explain the SHAP (Shapley additive explanation) feature attribution results below.\n";
  if (!ctx.additional_background.empty())
    head += "\nBackground: " + ctx.additional_background + "\n";
  head += "\n## Features\n" + build_feature_table(features, ctx);
  head +=
      "\n## SHAP values\n"
      "Each column is one explained instance; values are that feature's SHAP contribution. "
      "The last two rows give the base value E[f(X)] and the prediction f(x).\n";

  std::string tail = "\n## Plot\n";
  if (kind == PlotKind::kWaterfall) {
    tail +=
        "The attached image is a waterfall plot of a single instance of prediction (a single "
        "SHAP value per feature), moving the output from the base value E[f(X)] to the "
        "prediction f(x).\n";
  } else {
    tail += "The attached image is a bar plot containing an average SHAP value for each "
            "feature, aggregated over " +
            std::to_string(attrs.size()) + " instance(s).\n";
  }
  tail += "\n## Audience and language\n";
  tail += std::string(reader_directive(ctx.reader)) + "\n";
  tail += "Write the entire response in " + ctx.language + ".\n";
  tail += "\n## Response format\n";
  tail += prompt_assets::kResponseFormat;

  const size_t overhead = estimate_tokens(head) + estimate_tokens(tail);
  if (overhead >= budget_tokens)
    throw BudgetTooSmallError("token budget " + std::to_string(budget_tokens) +
                              " is below the fixed prompt scaffolding (" +
                              std::to_string(overhead) + " tokens)");

  PromptBundle bundle;
  auto [table, sample_count] =
      build_shap_table(attrs, features, ctx, budget_tokens - overhead);
  bundle.system_text = build_guard();
  bundle.user_text = head + table + tail;
  bundle.sample_count = sample_count;
  for (const std::string& svg : plot_svgs)
    bundle.images.push_back(
        {"image/svg+xml", std::vector<uint8_t>(svg.begin(), svg.end())});
  return bundle;
}

ParsedExplanation parse_response(const std::string& raw) {
  std::vector<std::string> lines = split_lines(raw);

  // Strip a markdown fence wrapping the whole response.
  size_t first = 0, last = lines.size();
  while (first < last && trim(lines[first]).empty()) ++first;
  while (last > first && trim(lines[last - 1]).empty()) --last;
  if (first < last && trim(lines[first]).rfind("```", 0) == 0 &&
      trim(lines[last - 1]) == "```") {
    ++first;
    --last;
  }

  std::map<std::string, std::vector<std::string>> sections;
  std::string current;
  for (size_t i = first; i < last; ++i) {
    const std::string name = heading_name(lines[i]);
    if (!name.empty()) {
      if (sections.count(name))
        throw FormatError(name, "duplicated section " + name);
      sections[name];
      current = name;
    } else if (!current.empty()) {
      sections[current].push_back(lines[i]);
    }
    // Content before the first heading is ignored (LLM preamble noise).
  }

  for (const char* name : {"SUMMARY", "PER_FEATURE", "CAVEATS"}) {
    if (!sections.count(name)) throw FormatError(name, std::string("missing section ") + name);
  }

  auto body_text = [&](const char* name) {
    std::string text;
    for (const std::string& line : sections[name]) text += line + "\n";
    text = trim(text);
    if (text.empty()) throw FormatError(name, std::string("empty section ") + name);
    return text;
  };

  ParsedExplanation parsed;
  parsed.summary = body_text("SUMMARY");
  parsed.caveats = body_text("CAVEATS");

  const std::string per_feature_text = body_text("PER_FEATURE");
  for (const std::string& raw_line : split_lines(per_feature_text)) {
    const std::string line = trim(raw_line);
    if (line.empty()) continue;
    if (line.rfind("- ", 0) == 0 || line.rfind("* ", 0) == 0) {
      const size_t colon = line.find(':', 2);
      if (colon == std::string::npos)
        throw FormatError("PER_FEATURE", "bullet without a \"name: text\" separator: " + line);
      const std::string name = trim(line.substr(2, colon - 2));
      if (name.empty()) throw FormatError("PER_FEATURE", "bullet with an empty feature name");
      parsed.per_feature.emplace_back(name, trim(line.substr(colon + 1)));
    } else if (!parsed.per_feature.empty()) {
      auto& text = parsed.per_feature.back().second;
      text += (text.empty() ? "" : " ") + line;
    } else {
      throw FormatError("PER_FEATURE", "expected \"- name: text\" bullets, got: " + line);
    }
  }
  if (parsed.per_feature.empty())
    throw FormatError("PER_FEATURE", "no feature bullets found");
  return parsed;
}

void bind_features(const ParsedExplanation& parsed, const FeatureSet& features,
                   const ExplanationContext& ctx) {
  auto resolves = [&](const std::string& display) {
    if (features.index_of(display) >= 0) return true;
    for (const auto& [name, alias] : ctx.feature_aliases)
      if (alias == display) return true;
    // "name (alias)" or "alias (name)" composites.
    const size_t paren = display.find(" (");
    if (paren != std::string::npos && display.back() == ')') {
      const std::string outer = display.substr(0, paren);
      const std::string inner = display.substr(paren + 2, display.size() - paren - 3);
      if (features.index_of(outer) >= 0 || features.index_of(inner) >= 0) return true;
      for (const auto& [name, alias] : ctx.feature_aliases)
        if (alias == outer || alias == inner) return true;
    }
    return false;
  };
  for (const auto& [display, _] : parsed.per_feature) {
    if (!resolves(display))
      throw FormatError("PER_FEATURE",
                        "feature name \"" + display + "\" does not resolve to a model feature");
  }
}

std::string explanation_to_json(const ParsedExplanation& parsed) {
  nlohmann::json doc;
  doc["summary"] = parsed.summary;
  doc["per_feature"] = nlohmann::json::array();
  for (const auto& [name, text] : parsed.per_feature)
    doc["per_feature"].push_back({{"feature", name}, {"text", text}});
  doc["caveats"] = parsed.caveats;
  return doc.dump(2);
}

}  // namespace ctxshap
