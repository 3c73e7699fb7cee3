#pragma once

#include <filesystem>
#include <string_view>

#include "bftt3d/benchmark.hpp"

namespace bftt3d {

// Reads a TOML run configuration. Missing keys keep their defaults; unknown
// keys, wrong types and invalid values raise ConfigError.
//
//   seed, severity, domains, memory_ratio, threads, trace
//   [encoder]  d0, alpha, beta, stages, k_neighbors, fps_ratio
//   [data]     classes, train_per_class, test_per_class, points
//   [subspace] method, m, mu, kernel, rbf_bandwidth, batch, center_features,
//              normalize_features
//   [fusion]   gamma, mode, p, entropy_epsilon, space, aggregation
//   [source]   kind, temperature, logits
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::string_view toml_text, std::string_view source_name = "<string>");

FusionMode parse_fusion_mode(std::string_view name);
std::string_view to_string(FusionMode mode) noexcept;

}  // namespace bftt3d
