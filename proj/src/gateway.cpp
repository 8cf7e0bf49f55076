#include "ctxshap/gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "ctxshap/errors.hpp"
#include "ctxshap/raster.hpp"
#include "ctxshap/util.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ctxshap {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path_prefix;
};

SplitUrl split_url(const std::string& base_url) {
  const size_t scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw TransportError("base_url must include a scheme: " + base_url);
  const size_t path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

fs::path fixture_path(const GatewayConfig& cfg, const std::string& fingerprint) {
  return fs::path(cfg.fixture_dir) / (fingerprint + ".json");
}

LlmResult parse_completion(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error&) {
    throw UpstreamError("endpoint returned a non-JSON body");
  }
  LlmResult result;
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty() ||
      !doc["choices"][0].contains("message") ||
      !doc["choices"][0]["message"].contains("content") ||
      !doc["choices"][0]["message"]["content"].is_string())
    throw UpstreamError("endpoint response lacks choices[0].message.content");
  result.raw_text = doc["choices"][0]["message"]["content"].get<std::string>();
  if (doc.contains("usage") && doc["usage"].is_object() &&
      doc["usage"].value("prompt_tokens", -1) >= 0 &&
      doc["usage"].value("completion_tokens", -1) >= 0) {
    result.usage = TokenUsage{doc["usage"]["prompt_tokens"].get<int64_t>(),
                              doc["usage"]["completion_tokens"].get<int64_t>()};
  }
  return result;
}

LlmResult read_fixture(const GatewayConfig& cfg, const std::string& fingerprint) {
  const fs::path path = fixture_path(cfg, fingerprint);
  std::ifstream in(path);
  if (!in)
    throw FixtureMissError("no recorded fixture for bundle " + fingerprint + " under " +
                           cfg.fixture_dir);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error&) {
    throw FixtureMissError("fixture for bundle " + fingerprint + " is unreadable");
  }
  LlmResult result;
  result.raw_text = doc.value("raw_text", "");
  if (doc.contains("usage")) {
    result.usage = TokenUsage{doc["usage"].value("prompt_tokens", int64_t(0)),
                              doc["usage"].value("completion_tokens", int64_t(0))};
  }
  result.latency_s = 0.0;
  result.attempts = 0;
  return result;
}

void write_fixture(const GatewayConfig& cfg, const std::string& fingerprint,
                   const LlmResult& result) {
  fs::create_directories(cfg.fixture_dir);
  json doc;
  doc["raw_text"] = result.raw_text;
  if (result.usage) {
    doc["usage"] = {{"prompt_tokens", result.usage->prompt_tokens},
                    {"completion_tokens", result.usage->completion_tokens}};
  }
  std::ofstream out(fixture_path(cfg, fingerprint), std::ios::trunc);
  out << doc.dump(2) << "\n";
}

LlmResult http_exchange(const PromptBundle& bundle, const GatewayConfig& cfg) {
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key == nullptr || *key == '\0')
    throw AuthError("environment variable " + cfg.api_key_env +
                    " is not set; required outside replay mode");

  const SplitUrl url = split_url(cfg.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(std::chrono::milliseconds(int64_t(cfg.timeout_s * 1000)));
  client.set_read_timeout(std::chrono::milliseconds(int64_t(cfg.timeout_s * 1000)));
  client.set_write_timeout(std::chrono::milliseconds(int64_t(cfg.timeout_s * 1000)));

  const std::string body = request_body_json(bundle, cfg);
  const std::string path = url.path_prefix + "/chat/completions";
  httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};

  int attempts = 0;
  for (;;) {
    ++attempts;
    httplib::Result res = client.Post(path, headers, body, "application/json");
    if (!res) {
      // Error messages never carry headers, so the key cannot leak.
      throw TransportError("transport failure contacting " + url.origin + ": " +
                           httplib::to_string(res.error()));
    }
    if (res->status == 200) {
      LlmResult result = parse_completion(res->body);
      result.attempts = attempts;
      return result;
    }
    if (res->status == 401 || res->status == 403)
      throw AuthError("endpoint rejected credentials from " + cfg.api_key_env +
                      " (HTTP " + std::to_string(res->status) + ")");
    if (res->status == 429) {
      if (attempts > cfg.max_retries)
        throw RateLimitError("rate limited after " + std::to_string(attempts) + " attempts");
      const double delay_s = cfg.backoff_base_s * double(1 << (attempts - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(delay_s));
      continue;
    }
    if (res->status >= 500)
      throw UpstreamError("endpoint failure (HTTP " + std::to_string(res->status) + ")");
    throw UpstreamError("unexpected endpoint status (HTTP " + std::to_string(res->status) + ")");
  }
}

}  // namespace

std::string bundle_fingerprint(const PromptBundle& bundle) {
  std::string canonical = "system\n" + bundle.system_text + "\nuser\n" + bundle.user_text;
  for (const PromptImage& image : bundle.images) {
    canonical += "\nimage " + image.media_type + " " + std::to_string(image.bytes.size()) + "\n";
    canonical.append(reinterpret_cast<const char*>(image.bytes.data()), image.bytes.size());
  }
  return sha256_hex(canonical);
}

std::string request_body_json(const PromptBundle& bundle, const GatewayConfig& cfg) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", bundle.user_text}});
  for (const PromptImage& image : bundle.images) {
    std::string media_type = image.media_type;
    std::string b64;
    if (cfg.raster_images && media_type == "image/svg+xml") {
      const std::vector<uint8_t> png = svg_to_png(
          std::string(image.bytes.begin(), image.bytes.end()), cfg.raster_scale);
      media_type = "image/png";
      b64 = base64_encode(png.data(), png.size());
    } else {
      b64 = base64_encode(image.bytes.data(), image.bytes.size());
    }
    content.push_back(
        {{"type", "image_url"},
         {"image_url", {{"url", "data:" + media_type + ";base64," + b64}}}});
  }
  json doc;
  doc["model"] = cfg.model_name;
  doc["messages"] = json::array();
  doc["messages"].push_back({{"role", "system"}, {"content", bundle.system_text}});
  doc["messages"].push_back({{"role", "user"}, {"content", std::move(content)}});
  return doc.dump();
}

LlmResult send(const PromptBundle& bundle, const GatewayConfig& cfg) {
  const std::string fingerprint = bundle_fingerprint(bundle);
  if (cfg.mode == GatewayMode::kReplay) return read_fixture(cfg, fingerprint);

  const auto start = std::chrono::steady_clock::now();
  LlmResult result = http_exchange(bundle, cfg);
  result.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (cfg.prices && result.usage) result.estimated_cost = estimate_cost(result.usage, *cfg.prices);
  if (cfg.mode == GatewayMode::kRecord) write_fixture(cfg, fingerprint, result);
  return result;
}

double estimate_cost(const std::optional<TokenUsage>& usage, const PriceTable& prices) {
  if (!usage)
    throw MissingPriceError("cost estimation requires token usage from the endpoint");
  return double(usage->prompt_tokens) / 1000.0 * prices.input_per_1k +
         double(usage->completion_tokens) / 1000.0 * prices.output_per_1k;
}

}  // namespace ctxshap
