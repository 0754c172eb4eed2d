#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wmg/atlas_geometry.hpp"
#include "wmg/benchmark.hpp"
#include "wmg/synthetic.hpp"

namespace wmg {

struct PathConfig {
  std::string atlas = "atlas.json";
  std::string truth = "truth.csv";
  std::string corrupted = "corrupted.csv";
  std::string labels = "labels.csv";
  std::string distances = "distances.csv";
  std::string checkpoint = "checkpoint";
  std::string train_log = "";  // empty: <checkpoint>/loss.csv
  std::string imputed = "imputed.csv";
  std::string report_dir = "report";
};

struct GeometryConfig {
  int resample_points = static_cast<int>(kDefaultResamplePoints);
  ClusterAggregate aggregate = ClusterAggregate::min;
};

struct ImputeConfig {
  std::string method = "diffusion";
  int samples = kDefaultImputeSamples;
};

/// Everything a subcommand needs. Relative paths resolve against `base_dir`.
struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  PathConfig paths;
  SynthConfig synthetic;
  GeometryConfig geometry;
  MaskPolicyConfig mask;
  DenoiserConfig denoiser;
  ScheduleConfig schedule;
  TrainConfig train;
  ImputeConfig impute;
  ChainedConfig chained;
  LogisticConfig logistic;
  int folds = 5;
  double missing_fraction = 0.2;
  std::vector<std::string> methods = {"mean", "median", "zero", "chained", "diffusion-random",
                                      "diffusion-geometry"};
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const;
  /// Pushes the root seed down into every module config.
  void propagate_seed();
  void validate() const;
  BenchmarkConfig benchmark() const;
};

/// Parses JSON. Every key is optional; unknown keys raise ConfigError naming
/// the full key path.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Full resolved configuration, defaults included. Parsing the echo yields
/// the same configuration.
std::string format_run_config(const RunConfig& cfg);

}  // namespace wmg
