#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gaapo/domain.hpp"

namespace gaapo {

struct HallOfFameEntry {
    CandidateId id;
    std::string text;
    Score score;
    int generation = 0;
    friend bool operator==(const HallOfFameEntry&, const HallOfFameEntry&) = default;
};

void to_json(Json& j, const HallOfFameEntry& e);
void from_json(const Json& j, HallOfFameEntry& e);

struct GenerationSummary {
    int generation = 0;
    /// Hall-of-fame best after the generation's selection.
    Score best_val;
    /// Unweighted mean accuracy of the candidates evaluated this generation.
    double mean_val = 0.0;
    std::optional<Score> test;
    std::optional<CandidateId> test_candidate;
    /// Requests of all purposes issued during the generation.
    std::uint64_t calls = 0;
};

struct StrategyImprovementRow {
    int generation = 0;
    StrategyKind strategy = StrategyKind::Mutator;
    double mean_improvement = 0.0;
    double max_improvement = 0.0;
    std::size_t child_count = 0;
};

struct ArchivedEvaluation {
    int generation = 0;
    Split split = Split::Validation;
    Score score;
};

struct ArchivedCandidate {
    CandidateId id;
    std::string text;
    int generation = 0;
    Lineage lineage;
    /// Baseline the child is compared against (best of its parents).
    std::optional<Score> parent_score;
    std::vector<ArchivedEvaluation> evaluations;
};

struct FinalResult {
    CandidateId id;
    std::string text;
    Score validation;
    std::optional<Score> test;
};

struct OptimizationReport {
    std::string task;
    std::uint64_t seed = 0;
    std::string config_hash;
    Json config;
    std::vector<GenerationSummary> generations;
    std::vector<StrategyImprovementRow> improvements;
    std::vector<HallOfFameEntry> hall_of_fame;
    std::optional<FinalResult> final_result;
    std::vector<ArchivedCandidate> archive;
    /// Requests per purpose over the whole run.
    std::uint64_t generation_calls = 0;
    std::uint64_t prediction_calls = 0;
    std::uint64_t judging_calls = 0;
};

/// Rebuilds the report from the run history alone.
///
/// Event types: run_started, generation_started, candidate_created,
/// candidate_evaluated, selection_completed, test_evaluated,
/// generation_completed. Improvements are recomputed as child validation
/// score minus the parent score recorded at creation.
OptimizationReport build_report(std::span<const Json> events);

/// Stable JSON form without timestamps or durations.
Json report_json(const OptimizationReport& report);

std::string scores_csv(const OptimizationReport& report);
std::string strategy_improvements_csv(const OptimizationReport& report);
std::string hall_of_fame_text(const OptimizationReport& report);

/// Writes scores.csv, strategy_improvements.csv, hall_of_fame.txt and
/// report.json into out_dir (created if needed).
void emit_report(const OptimizationReport& report, const std::filesystem::path& out_dir);

/// Reads a line-delimited JSON history file.
std::vector<Json> read_history(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace gaapo
