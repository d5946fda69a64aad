#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace interleaf {

using MixtureWeights = std::map<std::string, double, std::less<>>;
using MixtureAllocation = std::map<std::string, std::uint64_t, std::less<>>;

/// Normalizes the weights and splits `total` by largest remainder. Equal
/// remainders go to the lexicographically smaller label first. Throws
/// ValidationError on negative or non-finite weights, or when all are zero.
MixtureAllocation plan_mixture(const MixtureWeights& weights, std::uint64_t total);

/// Reads {"label": weight, ...}; a top-level "weights" object is also accepted.
MixtureWeights load_mixture_weights(const std::filesystem::path& path);

}  // namespace interleaf
