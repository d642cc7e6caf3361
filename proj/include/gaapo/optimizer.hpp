#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gaapo/report.hpp"
#include "gaapo/selection.hpp"
#include "gaapo/strategies.hpp"

namespace gaapo {

/// Share of each generation's children per strategy (Seed excluded).
struct StrategyWeights {
    std::map<StrategyKind, double> weights;

    /// Mutator 0.4, APO 0.2, OPRO 0.2, FewShot 0.1, Crossover 0.1.
    static StrategyWeights defaults();

    /// Throws ConfigError on negative weights, Seed, or a sum off 1 by more than 1e-9.
    void validate() const;
    [[nodiscard]] double of(StrategyKind kind) const;

    friend bool operator==(const StrategyWeights&, const StrategyWeights&) = default;
};

/// floor(w * P) per strategy; the remainder goes to the highest weight
/// (earliest strategy on ties). Counts sum to population_size.
std::map<StrategyKind, std::size_t> allocate_slots(const StrategyWeights& weights, std::size_t population_size);

struct SelectionSettings {
    SelectionMethod method = SelectionMethod::Complete;
    HalvingConfig halving;
    BanditConfig bandit;
    friend bool operator==(const SelectionSettings&, const SelectionSettings&) = default;
};

struct GaapoConfig {
    /// Children generated per generation.
    std::size_t population_size = 50;
    int generations = 10;
    StrategyWeights strategy_weights = StrategyWeights::defaults();
    std::size_t parent_pool_size = 5;
    SelectionSettings selection;
    /// Parents compete with their children in every selection round.
    bool elitism = true;
    TaskSpec task;
    std::string generator_model = "generator";
    std::string target_model = "target";
    double generation_temperature = 0.7;
    double prediction_temperature = 0.0;
    int generation_max_tokens = 2048;
    int prediction_max_tokens = 1024;
    std::uint64_t seed = 0;
    /// Test-set check of the current best every N generations; off when unset.
    std::optional<int> test_eval_every = 1;
    int repeat_evaluations = 1;
    std::size_t hall_of_fame_size = 10;
    ApoConfig apo;
    OproConfig opro;
    /// Overrides for the built-in meta-prompt templates.
    std::filesystem::path template_dir;

    void validate() const;
    friend bool operator==(const GaapoConfig&, const GaapoConfig&) = default;
};

void to_json(Json& j, const GaapoConfig& c);
/// Missing keys keep their defaults, including "task" (run manifests take
/// the task from the dataset manifest).
void from_json(const Json& j, GaapoConfig& c);

/// SHA-256 of the canonical config JSON, ignoring `generations` so a run can
/// be extended on resume.
std::string config_hash(const GaapoConfig& config);

/// Best validation scores ever seen, best first, bounded.
class HallOfFame {
public:
    explicit HallOfFame(std::size_t capacity = 10) : capacity_(capacity) {}

    /// Keeps a candidate's best score; ties by ascending id.
    void update(const HallOfFameEntry& entry);

    [[nodiscard]] const std::vector<HallOfFameEntry>& entries() const { return entries_; }
    [[nodiscard]] bool empty() const { return entries_.empty(); }
    [[nodiscard]] const HallOfFameEntry& best() const { return entries_.front(); }
    [[nodiscard]] std::size_t capacity() const { return capacity_; }

    friend bool operator==(const HallOfFame&, const HallOfFame&) = default;
    friend void to_json(Json& j, const HallOfFame& h);
    friend void from_json(const Json& j, HallOfFame& h);

private:
    std::size_t capacity_;
    std::vector<HallOfFameEntry> entries_;
};

struct TestCheck {
    CandidateId id;
    Score score;
    int generation = 0;
    friend bool operator==(const TestCheck&, const TestCheck&) = default;
};

struct GenerationState {
    int generation_index = 0;
    /// Best first.
    std::vector<ScoredCandidate> parent_pool;
    /// Candidates evaluated in the latest generation.
    std::vector<PromptCandidate> population;
    Trajectory trajectory;
    HallOfFame hall_of_fame;
    /// Calls issued by this run so far.
    LedgerSnapshot ledger;
    std::uint64_t next_candidate_id = 1;
    std::optional<TestCheck> last_test;
    /// Append-only history, one JSON object per event.
    std::vector<Json> events;

    friend bool operator==(const GenerationState&, const GenerationState&) = default;
};

void to_json(Json& j, const GenerationState& s);
void from_json(const Json& j, GenerationState& s);

inline constexpr int kCheckpointVersion = 1;

/// Atomic write (temporary file + rename).
void checkpoint_save(const GenerationState& state, const GaapoConfig& config, const std::filesystem::path& path);

/// Throws CorruptCheckpoint naming the offending field. A checkpoint written
/// under a different config hash throws ConfigMismatch unless
/// `allow_config_mismatch`, in which case it only warns.
GenerationState checkpoint_load(const std::filesystem::path& path, const GaapoConfig& config,
                                bool allow_config_mismatch = false);

struct RunOptions {
    /// Empty paths disable the corresponding file.
    std::filesystem::path checkpoint_path;
    std::filesystem::path history_path;
    bool resume = false;
    bool allow_config_mismatch = false;
    /// Milliseconds since the epoch for EvalRecord timestamps.
    std::function<std::int64_t()> clock;
    /// Called after each generation's checkpoint; may throw to stop the run.
    std::function<void(const GenerationState&)> after_generation;
};

class Optimizer {
public:
    Optimizer(GaapoConfig config, const DatasetSplits& splits, LlmGateway& gateway, RunOptions options = {});

    /// Generation 0: the seed evaluated on validation.
    GenerationState initialize_run(const std::string& seed_prompt);

    /// Generation, evaluation and selection for one more generation.
    GenerationState run_generation(GenerationState state);

    /// Runs (or resumes) all generations and evaluates the final best on test.
    OptimizationReport run(const std::string& seed_prompt);

    [[nodiscard]] const GaapoConfig& config() const { return config_; }

private:
    EvalSettings eval_settings() const;
    GeneratorSettings generator_settings() const;
    SelectionOutcome select(std::span<const PromptCandidate> population, std::uint64_t seed);
    std::vector<PromptCandidate> produce_children(GenerationState& state, int generation, IdAllocator& ids);
    void check_test(GenerationState& state, int generation, bool final);
    void emit(GenerationState& state, Json event);
    void flush_history(const GenerationState& state, bool rewrite);
    std::int64_t now() const;

    GaapoConfig config_;
    const DatasetSplits& splits_;
    LlmGateway& gateway_;
    RunOptions options_;
    TemplateLibrary templates_;
    std::size_t flushed_events_ = 0;
};

}  // namespace gaapo
