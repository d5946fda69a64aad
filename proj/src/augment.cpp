#include "interleaf/augment.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <spdlog/spdlog.h>

#include "interleaf/errors.hpp"
#include "interleaf/instruction.hpp"
#include "interleaf/io_util.hpp"
#include "interleaf/rng.hpp"

namespace fs = std::filesystem;

namespace interleaf {

std::string_view to_string(AugmentMode m) {
  switch (m) {
    case AugmentMode::InternetOnly: return "internet-only";
    case AugmentMode::TaskOnly: return "task-only";
    case AugmentMode::Mixed: return "mixed";
  }
  return "task-only";
}

AugmentMode augment_mode_from_string(std::string_view s) {
  if (s == "internet-only") return AugmentMode::InternetOnly;
  if (s == "task-only") return AugmentMode::TaskOnly;
  if (s == "mixed") return AugmentMode::Mixed;
  throw ValidationError("unknown augment mode '" + std::string(s) +
                        "' (expected internet-only|task-only|mixed)");
}

AugmentPolicy AugmentPolicy::preset(std::string_view name, std::uint64_t seed) {
  AugmentPolicy p;
  p.mode = augment_mode_from_string(name);
  p.mix_ratio = p.mode == AugmentMode::InternetOnly ? 1.0 : p.mode == AugmentMode::TaskOnly ? 0.0 : 0.5;
  p.seed = seed;
  return p;
}

void AugmentPolicy::validate() const {
  if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) {
    throw ValidationError("mix_ratio must be in [0, 1]");
  }
}

std::string_view to_string(ImageSource s) { return s == ImageSource::Crop ? "crop" : "web"; }

namespace {

std::string singular(std::string w) {
  auto ends = [&](std::string_view suf) {
    return w.size() > suf.size() + 1 && w.compare(w.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends("ies")) return w.substr(0, w.size() - 3) + "y";
  if (ends("sses") || ends("ches") || ends("shes") || ends("xes") || ends("zes")) {
    return w.substr(0, w.size() - 2);
  }
  if (ends("s") && !ends("ss") && !ends("us") && !ends("is")) return w.substr(0, w.size() - 1);
  return w;
}

std::vector<std::string> lower_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) {
    std::string clean;
    for (char c : w) {
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') {
        clean.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      }
    }
    if (!clean.empty()) words.push_back(std::move(clean));
  }
  return words;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".webp";
}

struct Listing {
  // (category, relative ref) sorted by ref.
  std::vector<std::pair<std::string, std::string>> files;
  std::string fingerprint;
};

Listing list_pool(const fs::path& root) {
  Listing out;
  std::string digest_input;
  std::vector<std::tuple<std::string, std::string, std::uintmax_t, std::int64_t>> rows;
  for (const auto& dir : fs::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    const std::string dirname = dir.path().filename().string();
    if (dirname.starts_with(".")) continue;
    for (const auto& f : fs::directory_iterator(dir.path())) {
      if (!f.is_regular_file() || !is_image_file(f.path())) continue;
      const std::string ref = dirname + "/" + f.path().filename().string();
      const auto mtime = f.last_write_time().time_since_epoch().count();
      rows.emplace_back(normalize_category(dirname), ref, f.file_size(),
                        static_cast<std::int64_t>(mtime));
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return std::get<1>(a) < std::get<1>(b); });
  for (const auto& [cat, ref, size, mtime] : rows) {
    digest_input += ref + "\t" + std::to_string(size) + "\t" + std::to_string(mtime) + "\n";
    out.files.emplace_back(cat, ref);
  }
  out.fingerprint = sha256_hex(digest_input);
  return out;
}

}  // namespace

std::string normalize_category(std::string_view text) {
  std::vector<std::string> words = lower_words(text);
  if (words.empty()) return {};
  words.back() = singular(words.back());
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string head_noun(std::string_view phrase, const Lexicon& lexicon) {
  const std::vector<std::string> words = lower_words(phrase);
  std::string last_noun;
  std::string last_word;
  for (const auto& w : words) {
    if (lexicon.is_preposition(w)) break;
    last_word = w;
    if (lexicon.is_noun(w) || lexicon.is_noun(singular(w))) last_noun = w;
  }
  return last_noun.empty() ? last_word : last_noun;
}

WebImagePool WebImagePool::build(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw IoError("web image pool root '" + root.string() + "' is not a directory");
  }
  WebImagePool pool;
  pool.root_ = root;
  Listing listing = list_pool(root);
  pool.fingerprint_ = listing.fingerprint;

  const fs::path sidecar = root / kIndexFile;
  if (fs::exists(sidecar)) {
    try {
      const auto j = nlohmann::json::parse(read_file(sidecar));
      if (j.at("fingerprint").get<std::string>() == listing.fingerprint) {
        for (const auto& [cat, refs] : j.at("index").items()) {
          pool.index_[cat] = refs.get<std::vector<std::string>>();
        }
        pool.from_cache_ = true;
        return pool;
      }
    } catch (const std::exception& e) {
      spdlog::warn("ignoring unreadable pool index {}: {}", sidecar.string(), e.what());
    }
  }

  for (const auto& [cat, ref] : listing.files) {
    if (cv::imread((root / ref).string(), cv::IMREAD_UNCHANGED).empty()) {
      spdlog::warn("pool image {} does not decode; skipped", ref);
      continue;
    }
    pool.index_[cat].push_back(ref);
  }
  nlohmann::ordered_json j;
  j["fingerprint"] = pool.fingerprint_;
  j["index"] = nlohmann::ordered_json::object();
  for (const auto& [cat, refs] : pool.index_) j["index"][cat] = refs;
  try {
    atomic_write_file(sidecar, j.dump(1) + "\n");
  } catch (const IoError& e) {
    spdlog::warn("could not cache pool index: {}", e.what());
  }
  return pool;
}

WebImagePool WebImagePool::from_index(
    fs::path root, std::map<std::string, std::vector<std::string>, std::less<>> index) {
  WebImagePool pool;
  pool.root_ = std::move(root);
  for (auto& [cat, refs] : index) {
    if (!refs.empty()) pool.index_[normalize_category(cat)] = std::move(refs);
  }
  return pool;
}

const std::vector<std::string>* WebImagePool::bucket(std::string_view category) const {
  auto it = index_.find(category);
  return it == index_.end() ? nullptr : &it->second;
}

std::size_t WebImagePool::image_count() const {
  std::size_t n = 0;
  for (const auto& [cat, refs] : index_) n += refs.size();
  return n;
}

ImageChoice choose_instruction_image(std::string_view phrase, const CropArtifact* crop,
                                     const WebImagePool& pool, const AugmentPolicy& policy,
                                     std::string_view draw_key) {
  policy.validate();
  const std::uint64_t key = rng::derive(policy.seed, {"augment", draw_key});
  const double u_mode = rng::unit(rng::splitmix64(key));
  const std::uint64_t u_pick = rng::splitmix64(key ^ 0x5bd1e995ULL);

  auto crop_choice = [&](std::string lookup) {
    if (!crop) {
      throw AugmentUnavailable("no crop and no web image for '" + std::string(phrase) + "'");
    }
    return ImageChoice{ImageSource::Crop, crop->image_ref, "", std::move(lookup)};
  };
  if (policy.mode == AugmentMode::TaskOnly) return crop_choice("");

  const bool want_web = policy.mode == AugmentMode::InternetOnly || u_mode < policy.mix_ratio;
  if (!want_web && crop) return crop_choice("");

  std::string category = normalize_category(phrase);
  std::string lookup = "exact";
  const std::vector<std::string>* refs = pool.bucket(category);
  if (!refs) {
    category = normalize_category(head_noun(phrase));
    lookup = "head-noun";
    refs = pool.bucket(category);
  }
  if (!refs) {
    spdlog::debug("no pool category for '{}' (tried exact and head noun)", phrase);
    return crop_choice("miss");
  }
  spdlog::debug("pool category '{}' for '{}' via {}", category, phrase, lookup);
  const std::string& ref = (*refs)[u_pick % refs->size()];
  return ImageChoice{ImageSource::Web, ref, category, lookup};
}

}  // namespace interleaf
