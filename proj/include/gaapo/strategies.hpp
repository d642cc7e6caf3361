#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gaapo/evaluation.hpp"
#include "gaapo/rng.hpp"

namespace gaapo {

struct ScoredCandidate {
    PromptCandidate candidate;
    Score score;
    friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

void to_json(Json& j, const ScoredCandidate& s);
void from_json(const Json& j, ScoredCandidate& s);

/// Best prompts seen so far, best first, one entry per candidate.
class Trajectory {
public:
    struct Entry {
        CandidateId id;
        std::string text;
        Score score;
        friend bool operator==(const Entry&, const Entry&) = default;
    };

    explicit Trajectory(std::size_t max_length = 10) : max_length_(max_length) {}

    /// Inserts or rescores a candidate, then trims to max_length.
    void update(CandidateId id, std::string text, Score score);

    [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
    [[nodiscard]] bool empty() const { return entries_.empty(); }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] std::size_t max_length() const { return max_length_; }
    [[nodiscard]] const Entry& best() const { return entries_.front(); }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
    friend void to_json(Json& j, const Trajectory& t);
    friend void from_json(const Json& j, Trajectory& t);

private:
    std::size_t max_length_;
    std::vector<Entry> entries_;
};

struct GeneratorSettings {
    std::string model = "generator";
    double temperature = 0.7;
    int max_tokens = 2048;
    const TemplateLibrary* templates = &TemplateLibrary::builtin();
};

/// Appends "\n\nInput: {input}" when the placeholder is missing and keeps only
/// the first occurrence when there are several.
std::string repair_placeholder(std::string text);

/// The rewritten prompt inside a generator reply: reasoning blocks dropped,
/// then the content of the last <prompt>...</prompt> block, or the whole
/// reply when there is none. Trimmed.
std::string extract_prompt_text(std::string_view reply);

MutationKind pick_mutation_kind(Rng& rng);

CompletionRequest mutation_request(const PromptCandidate& parent, MutationKind kind, const GeneratorSettings& settings);

struct MutationJob {
    const PromptCandidate* parent = nullptr;
    MutationKind kind = MutationKind::InstructionExpansion;
    /// Strategy whose slot this mutation fills, if any.
    std::optional<StrategyKind> fallback_from;
};

/// Runs all jobs in one batch; empty or failed replies are retried once.
/// Children come back positionally; nullopt marks a job that failed twice.
std::vector<std::optional<PromptCandidate>> mutate_many(std::span<const MutationJob> jobs, LlmGateway& gateway,
                                                        const GeneratorSettings& settings, int generation,
                                                        IdAllocator& ids);

/// Throws GenerationFailed when the generator returns empty text twice.
PromptCandidate mutate(const PromptCandidate& parent, MutationKind kind, LlmGateway& gateway,
                       const GeneratorSettings& settings, int generation, IdAllocator& ids);

/// First ceil(n/2) whitespace tokens of a, then b from token ceil(m/2) on.
std::string crossover_text(std::string_view a, std::string_view b);

/// Throws IdenticalParents when both parents are the same candidate.
PromptCandidate crossover(const PromptCandidate& a, const PromptCandidate& b, int generation, IdAllocator& ids);

/// Appends 1-3 (clamped) distinct training examples as an "Examples:" block.
/// Throws EmptyTrainSet.
PromptCandidate few_shot_augment(const PromptCandidate& parent, std::span<const Sample> train, Rng& rng,
                                 int generation, IdAllocator& ids);

struct ApoConfig {
    std::size_t train_subsample = 25;
    std::size_t errors_per_gradient = 4;
    std::size_t num_reasons = 3;
    friend bool operator==(const ApoConfig&, const ApoConfig&) = default;
};

struct ErrorCase {
    Sample sample;
    Prediction predicted;
    std::string raw_output;
};

/// "Example i" transcripts of input, expected answer and model output.
std::string render_error_cases(std::span<const ErrorCase> errors);

/// Wrong answers of `prompt` on `samples` (failed calls are skipped).
std::vector<ErrorCase> collect_errors(const PromptCandidate& prompt, std::span<const Sample> samples,
                                      const EvalSettings& eval, LlmGateway& gateway);

/// Children from error diagnosis. Parents are used round-robin; each used
/// parent runs once on a seeded train subsample, then every child costs one
/// gradient and one edit call. A parent without errors yields Mutator
/// children marked as APO fallbacks. Children that fail are left out; throws
/// GenerationFailed only when none succeeds.
std::vector<PromptCandidate> apo_generate(std::span<const ScoredCandidate> parents, std::span<const Sample> train,
                                          LlmGateway& gateway, std::size_t count, const ApoConfig& config,
                                          const GeneratorSettings& generator, const EvalSettings& eval,
                                          int generation, std::uint64_t seed, IdAllocator& ids);

struct OproConfig {
    std::size_t max_length = 10;
    double dropout = 0.1;
    friend bool operator==(const OproConfig&, const OproConfig&) = default;
};

/// Entries kept after independent dropout; the best survives if all drop.
/// Returned best first.
std::vector<Trajectory::Entry> apply_dropout(const Trajectory& trajectory, double dropout_p, Rng& rng);

/// Retained entries listed worst to best with their scores.
std::string render_trajectory(std::span<const Trajectory::Entry> best_first);

std::vector<PromptCandidate> opro_generate(const Trajectory& trajectory, LlmGateway& gateway, std::size_t count,
                                           double dropout_p, std::uint64_t seed, const GeneratorSettings& generator,
                                           int generation, IdAllocator& ids);

}  // namespace gaapo
