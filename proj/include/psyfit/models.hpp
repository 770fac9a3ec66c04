#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace psyfit {

/// Architecture metadata for the language model variants the harness knows about.
struct ModelInfo {
  std::string_view name;
  std::string_view family;
  int layers;
  int heads;
  int d_model;
  std::uint64_t parameter_count;  // nominal
};

inline constexpr std::array<ModelInfo, 24> kModelRegistry{{
    {"gpt2", "gpt2", 12, 12, 768, 124'000'000},
    {"gpt2-medium", "gpt2", 24, 16, 1024, 355'000'000},
    {"gpt2-large", "gpt2", 36, 20, 1280, 774'000'000},
    {"gpt2-xl", "gpt2", 48, 25, 1600, 1'600'000'000},
    {"gpt-neo-125m", "gpt-neo", 12, 12, 768, 125'000'000},
    {"gpt-neo-1.3b", "gpt-neo", 24, 16, 2048, 1'300'000'000},
    {"gpt-neo-2.7b", "gpt-neo", 32, 20, 2560, 2'700'000'000},
    {"gpt-j-6b", "gpt-neo", 28, 16, 4096, 6'000'000'000},
    {"gpt-neox-20b", "gpt-neo", 44, 64, 6144, 20'000'000'000},
    {"opt-125m", "opt", 12, 12, 768, 125'000'000},
    {"opt-1.3b", "opt", 24, 32, 2048, 1'300'000'000},
    {"opt-2.7b", "opt", 32, 32, 2560, 2'700'000'000},
    {"opt-6.7b", "opt", 32, 32, 4096, 6'700'000'000},
    {"opt-13b", "opt", 40, 40, 5120, 13'000'000'000},
    {"opt-30b", "opt", 48, 56, 7168, 30'000'000'000},
    {"opt-66b", "opt", 64, 72, 9216, 66'000'000'000},
    {"pythia-70m", "pythia", 6, 8, 512, 70'000'000},
    {"pythia-160m", "pythia", 12, 12, 768, 160'000'000},
    {"pythia-410m", "pythia", 24, 16, 1024, 410'000'000},
    {"pythia-1b", "pythia", 16, 8, 2048, 1'000'000'000},
    {"pythia-1.4b", "pythia", 24, 16, 2048, 1'400'000'000},
    {"pythia-2.8b", "pythia", 32, 32, 2560, 2'800'000'000},
    {"pythia-6.9b", "pythia", 32, 32, 4096, 6'900'000'000},
    {"pythia-12b", "pythia", 36, 40, 5120, 12'000'000'000},
}};

inline constexpr std::optional<ModelInfo> find_model(std::string_view name) {
  for (const auto& m : kModelRegistry) {
    if (m.name == name) return m;
  }
  return std::nullopt;
}

/// Noise ceiling for the per-sentence fMRI (Pereira) correlations.
inline constexpr double kPereiraCeiling = 0.32;

} // namespace psyfit
