#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ctxshap/prompt.hpp"

namespace ctxshap {

enum class GatewayMode { kLive, kRecord, kReplay };

// Per-1K-token prices used for telemetry cost estimates.
struct PriceTable {
  double input_per_1k = 0.0;
  double output_per_1k = 0.0;
};

struct GatewayConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-4o";
  std::string api_key_env = "CTXSHAP_API_KEY";
  double timeout_s = 120.0;
  int max_retries = 3;
  GatewayMode mode = GatewayMode::kLive;
  std::string fixture_dir;
  bool raster_images = true;  // rasterize SVG attachments to PNG
  int raster_scale = 2;
  double backoff_base_s = 0.5;
  std::optional<PriceTable> prices;
};

struct TokenUsage {
  int64_t prompt_tokens = 0;
  int64_t completion_tokens = 0;
};

struct LlmResult {
  std::string raw_text;
  double latency_s = 0.0;
  std::optional<TokenUsage> usage;
  std::optional<double> estimated_cost;
  int attempts = 0;  // HTTP attempts made; 0 in replay mode
};

// SHA-256 over the canonicalized bundle (system text, user text, image
// bytes); the replay fixture key.
std::string bundle_fingerprint(const PromptBundle& bundle);

// The chat-completions JSON body (exposed for tests and prompt dumps).
// Rasterizes SVG attachments per cfg.
std::string request_body_json(const PromptBundle& bundle, const GatewayConfig& cfg);

// Delivers the bundle. Live/record POST {base_url}/chat/completions with
// retried 429s; record also writes a fixture keyed by bundle_fingerprint;
// replay serves fixtures with no network activity. Throws AuthError,
// RateLimitError, TransportError, UpstreamError, FixtureMissError.
LlmResult send(const PromptBundle& bundle, const GatewayConfig& cfg);

// Linear token pricing. Throws MissingPriceError when usage is absent.
double estimate_cost(const std::optional<TokenUsage>& usage, const PriceTable& prices);

}  // namespace ctxshap
