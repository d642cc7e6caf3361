#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "gaapo/optimizer.hpp"
#include "gaapo/synthetic_oracle.hpp"

namespace gaapo {

/// Backend section of a manifest: gateway settings plus the synthetic
/// landscape used when kind is "mock".
struct BackendSection {
    BackendConfig gateway;
    SyntheticOracleConfig mock;
};

BackendSection parse_backend_section(const Json& j, const std::filesystem::path& base_dir);

/// Everything `gaapo optimize` needs. Relative paths are resolved against the
/// manifest's directory.
struct RunManifest {
    GaapoConfig config;
    std::filesystem::path dataset_manifest;
    std::filesystem::path seed_prompt;
    std::filesystem::path output_dir;
    BackendSection backend;
};

/// Throws ManifestInvalid on unreadable JSON, missing keys or missing files.
RunManifest load_run_manifest(const std::filesystem::path& path);

/// Dataset manifest + data file -> validated task and splits.
struct LoadedDataset {
    DatasetManifest manifest;
    std::vector<Sample> samples;
    DatasetSplits splits;
};

LoadedDataset load_and_split(const std::filesystem::path& dataset_manifest, std::optional<MetricKind> metric = {});

/// Gateway for a backend section; mock backends serve the synthetic oracle
/// over `samples`.
std::unique_ptr<LlmGateway> build_gateway(const BackendSection& backend, const TaskSpec& task,
                                          const std::vector<Sample>& samples);

/// 2 usage/config, 3 backend, 4 internal.
int exit_code_for(ErrorCode code);

/// {"error":{"code":...,"message":...}}
std::string error_json(std::string_view code, std::string_view message);

struct OptimizeOptions {
    std::filesystem::path manifest;
    std::optional<std::string> backend;
    std::optional<std::uint64_t> seed;
    bool resume = false;
    std::optional<std::filesystem::path> out;
    std::optional<int> generations;
    std::optional<std::size_t> population;
    std::optional<std::string> selection;
    bool allow_config_mismatch = false;
};

/// Runs an optimization and writes report.json, scores.csv,
/// strategy_improvements.csv, hall_of_fame.txt, history.jsonl,
/// checkpoint.json and run_meta.json into the output directory.
int cmd_optimize(const OptimizeOptions& options, std::ostream& out, std::ostream& err);

struct EvaluateOptions {
    std::filesystem::path dataset;
    std::filesystem::path prompt;
    std::string split = "test";
    std::optional<std::string> metric;
    std::string backend = "mock";
    /// JSON file with a backend section; defaults apply when absent.
    std::optional<std::filesystem::path> backend_config;
    std::string target_model = "target";
    std::optional<std::filesystem::path> out;
};

/// Scores one prompt on one split; prints accuracy and per-sample results.
int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err);

}  // namespace gaapo
