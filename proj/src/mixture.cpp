#include "interleaf/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "json.hpp"

#include "interleaf/errors.hpp"
#include "interleaf/io_util.hpp"

namespace interleaf {

MixtureAllocation plan_mixture(const MixtureWeights& weights, std::uint64_t total) {
  double sum = 0.0;
  for (const auto& [label, w] : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw ValidationError("weight for '" + label + "' must be finite and nonnegative");
    }
    sum += w;
  }
  if (!(sum > 0.0)) throw ValidationError("at least one mixture weight must be positive");

  struct Row {
    std::string label;
    std::uint64_t floor;
    double remainder;
  };
  std::vector<Row> rows;
  std::uint64_t assigned = 0;
  for (const auto& [label, w] : weights) {
    double quota = w / sum * static_cast<double>(total);
    // Quotas within rounding noise of an integer are that integer, so
    // 41.01% of 10,000 is exactly 4,101 however the weights were summed.
    const double nearest = std::round(quota);
    if (std::abs(quota - nearest) < 1e-9 * std::max(1.0, quota)) quota = nearest;
    const auto fl = static_cast<std::uint64_t>(std::floor(quota));
    rows.push_back({label, fl, quota - static_cast<double>(fl)});
    assigned += fl;
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.remainder != b.remainder) return a.remainder > b.remainder;
    return a.label < b.label;
  });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % rows.size()) {
    ++rows[i].floor;
    ++assigned;
  }
  MixtureAllocation out;
  for (const auto& r : rows) out[r.label] = r.floor;
  return out;
}

MixtureWeights load_mixture_weights(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("weights file " + path.string() + ": " + e.what());
  }
  if (j.contains("weights")) j = j["weights"];
  if (!j.is_object()) throw ValidationError("weights file must map labels to numbers");
  MixtureWeights w;
  for (const auto& [label, v] : j.items()) {
    if (!v.is_number()) throw ValidationError("weight for '" + label + "' is not a number");
    w[label] = v.get<double>();
  }
  return w;
}

}  // namespace interleaf
