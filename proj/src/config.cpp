#include "interleaf/config.hpp"

#include <algorithm>
#include <cctype>

#include "interleaf/errors.hpp"
#include "interleaf/io_util.hpp"

extern char** environ;

namespace interleaf {

std::string_view to_string(FailurePolicy p) {
  return p == FailurePolicy::KeepTextOnly ? "keep-text-only" : "drop";
}

FailurePolicy failure_policy_from_string(std::string_view s) {
  if (s == "keep-text-only") return FailurePolicy::KeepTextOnly;
  if (s == "drop") return FailurePolicy::Drop;
  throw ValidationError("unknown failure_policy '" + std::string(s) +
                        "' (expected keep-text-only|drop)");
}

std::string_view to_string(ParserChoice p) {
  switch (p) {
    case ParserChoice::Auto: return "auto";
    case ParserChoice::Rule: return "rule";
    case ParserChoice::Service: return "service";
  }
  return "auto";
}

ParserChoice parser_choice_from_string(std::string_view s) {
  if (s == "auto") return ParserChoice::Auto;
  if (s == "rule") return ParserChoice::Rule;
  if (s == "service") return ParserChoice::Service;
  throw ValidationError("unknown parser '" + std::string(s) + "' (expected auto|rule|service)");
}

void PipelineConfig::validate() const {
  if (workers < 1) throw ValidationError("workers must be at least 1");
  if (!mock_in_process) {
    endpoints.validate();
    if (!endpoints.complete()) {
      throw ValidationError("detect, verify and segment endpoints are required unless "
                            "mock_in_process is set");
    }
    if (parser == ParserChoice::Service && endpoints.parse.empty()) {
      throw ValidationError("parser=service needs a parse endpoint");
    }
  }
  mock.validate();
  augment.validate();
  if (detection.score_threshold < 0.0 || detection.score_threshold > 1.0) {
    throw ValidationError("detection.score_threshold must be in [0, 1]");
  }
  if (detection.frame_stride < 1 || detection.max_candidates < 1) {
    throw ValidationError("detection.frame_stride and max_candidates must be at least 1");
  }
  if (crop.pad_fraction < 0.0 || crop.width < 1 || crop.height < 1) {
    throw ValidationError("crop needs pad_fraction >= 0 and a positive resolution");
  }
  if (tokenizer.patch_count < 1) throw ValidationError("tokenizer.patch_count must be at least 1");
  if (client.retries < 0 || client.timeout_s <= 0 || client.max_in_flight < 1) {
    throw ValidationError("client needs retries >= 0, timeout_s > 0, max_in_flight >= 1");
  }
}

nlohmann::ordered_json PipelineConfig::to_json() const {
  nlohmann::ordered_json j;
  j["endpoints"] = {{"parse", endpoints.parse},
                    {"detect", endpoints.detect},
                    {"verify", endpoints.verify},
                    {"segment", endpoints.segment}};
  j["client"] = {{"timeout_s", client.timeout_s},
                 {"retries", client.retries},
                 {"backoff_initial_s", client.backoff_initial_s},
                 {"backoff_max_s", client.backoff_max_s},
                 {"jitter", client.jitter},
                 {"max_in_flight", client.max_in_flight}};
  j["mock_in_process"] = mock_in_process;
  j["mock"] = mock.to_json();
  j["truth"] = truth;
  j["detection"] = {{"score_threshold", detection.score_threshold},
                    {"frame_stride", detection.frame_stride},
                    {"max_candidates", detection.max_candidates}};
  j["crop"] = {{"pad_fraction", crop.pad_fraction},
               {"width", crop.width},
               {"height", crop.height},
               {"fill", crop.fill}};
  j["tokenizer"] = {{"patch_count", tokenizer.patch_count},
                    {"text_tokenizer", to_string(tokenizer.text_tokenizer)},
                    {"boi", tokenizer.boi},
                    {"eoi", tokenizer.eoi},
                    {"image_prefix", tokenizer.image_prefix}};
  j["augment"] = {{"mode", to_string(augment.mode)},
                  {"mix_ratio", augment.mix_ratio},
                  {"pool_root", pool_root}};
  j["lexicon"] = lexicon;
  j["parser"] = to_string(parser);
  j["workers"] = workers;
  j["seed"] = seed;
  j["mode"] = to_string(mode);
  j["failure_policy"] = to_string(failure_policy);
  j["normalize_actions"] = normalize_actions;
  return j;
}

namespace {

void check_keys(const nlohmann::json& given, const nlohmann::json& known, const std::string& prefix) {
  if (!given.is_object()) {
    throw ValidationError("config " + (prefix.empty() ? std::string("document") : prefix) +
                          " must be an object");
  }
  for (const auto& [k, v] : given.items()) {
    const std::string path = prefix.empty() ? k : prefix + "." + k;
    if (!known.contains(k)) throw ValidationError("unknown config key '" + path + "'");
    if (known[k].is_object()) check_keys(v, known[k], path);
  }
}

template <typename T>
T get(const nlohmann::json& j, const char* section, const char* key) {
  try {
    return section ? j.at(section).at(key).get<T>() : j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("config key '") + (section ? std::string(section) + "." : "") +
                          key + "' has the wrong type");
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& given) {
  const PipelineConfig defaults;
  nlohmann::json j = defaults.to_json();
  check_keys(given, j, "");
  j.merge_patch(given);

  PipelineConfig c;
  c.endpoints.parse = get<std::string>(j, "endpoints", "parse");
  c.endpoints.detect = get<std::string>(j, "endpoints", "detect");
  c.endpoints.verify = get<std::string>(j, "endpoints", "verify");
  c.endpoints.segment = get<std::string>(j, "endpoints", "segment");
  c.client.timeout_s = get<double>(j, "client", "timeout_s");
  c.client.retries = get<int>(j, "client", "retries");
  c.client.backoff_initial_s = get<double>(j, "client", "backoff_initial_s");
  c.client.backoff_max_s = get<double>(j, "client", "backoff_max_s");
  c.client.jitter = get<double>(j, "client", "jitter");
  c.client.max_in_flight = get<int>(j, "client", "max_in_flight");
  c.mock_in_process = get<bool>(j, nullptr, "mock_in_process");
  c.mock.p_detect_fail = get<double>(j, "mock", "p_detect_fail");
  c.mock.p_verify_fail = get<double>(j, "mock", "p_verify_fail");
  c.mock.correlation = get<double>(j, "mock", "correlation");
  c.mock.seed = get<std::uint64_t>(j, "mock", "seed");
  c.mock.detect_score = get<double>(j, "mock", "detect_score");
  c.mock.distractor_score = get<double>(j, "mock", "distractor_score");
  c.mock.occluded_score = get<double>(j, "mock", "occluded_score");
  c.mock.match_iou = get<double>(j, "mock", "match_iou");
  c.truth = get<std::string>(j, nullptr, "truth");
  c.detection.score_threshold = get<double>(j, "detection", "score_threshold");
  c.detection.frame_stride = get<int>(j, "detection", "frame_stride");
  c.detection.max_candidates = get<int>(j, "detection", "max_candidates");
  c.crop.pad_fraction = get<double>(j, "crop", "pad_fraction");
  c.crop.width = get<int>(j, "crop", "width");
  c.crop.height = get<int>(j, "crop", "height");
  c.crop.fill = get<std::array<std::uint8_t, 3>>(j, "crop", "fill");
  c.tokenizer.patch_count = get<std::size_t>(j, "tokenizer", "patch_count");
  c.tokenizer.text_tokenizer =
      text_tokenizer_from_string(get<std::string>(j, "tokenizer", "text_tokenizer"));
  c.tokenizer.boi = get<std::string>(j, "tokenizer", "boi");
  c.tokenizer.eoi = get<std::string>(j, "tokenizer", "eoi");
  c.tokenizer.image_prefix = get<std::string>(j, "tokenizer", "image_prefix");
  c.augment.mode = augment_mode_from_string(get<std::string>(j, "augment", "mode"));
  c.augment.mix_ratio = get<double>(j, "augment", "mix_ratio");
  c.pool_root = get<std::string>(j, "augment", "pool_root");
  c.lexicon = get<std::string>(j, nullptr, "lexicon");
  c.parser = parser_choice_from_string(get<std::string>(j, nullptr, "parser"));
  c.workers = get<int>(j, nullptr, "workers");
  c.seed = get<std::uint64_t>(j, nullptr, "seed");
  c.mode = locate_mode_from_string(get<std::string>(j, nullptr, "mode"));
  c.failure_policy = failure_policy_from_string(get<std::string>(j, nullptr, "failure_policy"));
  c.normalize_actions = get<bool>(j, nullptr, "normalize_actions");
  c.augment.seed = c.seed;
  return c;
}

std::string PipelineConfig::digest() const {
  nlohmann::ordered_json j = to_json();
  strip_execution_keys(j);
  return sha256_hex(j.dump());
}

void apply_overrides(nlohmann::json& doc, const std::map<std::string, std::string>& overrides) {
  for (const auto& [key, raw] : overrides) {
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    for (;;) {
      const std::size_t sep = key.find("__", start);
      const std::string part = key.substr(start, sep == std::string::npos ? sep : sep - start);
      if (part.empty()) throw ValidationError("malformed override key '" + key + "'");
      if (sep == std::string::npos) {
        nlohmann::json value;
        try {
          value = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::exception&) {
          value = raw;
        }
        (*node)[part] = std::move(value);
        break;
      }
      node = &(*node)[part];
      if (!node->is_object()) *node = nlohmann::json::object();
      start = sep + 2;
    }
  }
}

std::map<std::string, std::string> env_overrides(std::string_view prefix) {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string_view entry(*e);
    if (!entry.starts_with(prefix)) continue;
    const std::size_t eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    std::string key(entry.substr(prefix.size(), eq - prefix.size()));
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    // Variables like INTERLEAF_LOG_LEVEL are not config keys.
    if (key == "log_level") continue;
    out[key] = std::string(entry.substr(eq + 1));
  }
  return out;
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                           const std::map<std::string, std::string>& overrides) {
  nlohmann::json doc = nlohmann::json::object();
  if (file) {
    try {
      doc = nlohmann::json::parse(read_file(*file));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("config file " + file->string() + ": " + e.what());
    }
  }
  apply_overrides(doc, overrides);
  PipelineConfig c = PipelineConfig::from_json(doc);
  c.validate();
  return c;
}

}  // namespace interleaf
