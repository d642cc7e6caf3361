#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "gaapo/evaluation.hpp"

namespace gaapo {

enum class SelectionMethod { Complete, SuccessiveHalving, Bandit };

std::string_view to_string(SelectionMethod method);
/// Accepts "all"/"complete", "sh"/"successive_halving", "bandit"/"ucb_e".
SelectionMethod parse_selection_method(std::string_view name);

struct HalvingConfig {
    double batch_fraction = 0.2;
    double elimination_fraction = 0.4;
    std::size_t target_survivors = 5;

    /// Throws ConfigError on fractions outside (0, 1] / [0, 1) or a zero target.
    void validate() const;
    friend bool operator==(const HalvingConfig&, const HalvingConfig&) = default;
};

struct BanditConfig {
    std::size_t arms_evaluated = 20;
    std::size_t batch_size = 15;
    std::size_t iterations = 5;
    double exploration = 1.0;

    void validate() const;
    friend bool operator==(const BanditConfig&, const BanditConfig&) = default;
};

struct RankedEntry {
    CandidateId id;
    Score score;
    /// Predictions scored for this candidate; 0 when it was never evaluated.
    std::size_t samples_seen = 0;
};

struct SelectionOutcome {
    /// Best first.
    std::vector<RankedEntry> ranked;
    /// Prediction calls issued (judge calls excluded).
    std::uint64_t total_calls = 0;
    SelectionMethod method = SelectionMethod::Complete;
};

/// Every candidate on the full validation set.
SelectionOutcome select_complete(std::span<const PromptCandidate> population, std::span<const Sample> validation,
                                 const EvalSettings& settings, LlmGateway& gateway);

/// Population sizes after each elimination round, starting with `population`.
/// Each round removes floor(fraction * survivors), at least one, never going
/// below the target.
std::vector<std::size_t> halving_schedule(std::size_t population, const HalvingConfig& config);

/// ceil(fraction * n), tolerant to binary rounding of the fraction.
std::size_t fraction_of(double fraction, std::size_t n);

/// Rounds on fresh random validation batches; the lowest running means are
/// eliminated until `target_survivors` remain. Survivors rank by running mean,
/// eliminated candidates after them (later rounds first).
SelectionOutcome select_successive_halving(std::span<const PromptCandidate> population,
                                           std::span<const Sample> validation, const HalvingConfig& config,
                                           const EvalSettings& settings, LlmGateway& gateway, std::uint64_t seed);

/// UCB-E index mean + sqrt(a / n) with n counted in scored samples;
/// unevaluated arms have an infinite index.
double ucb_index(const Score& score, double exploration);

/// Each round scores the `arms_evaluated` highest-index arms on one fresh
/// batch. Final ranking by empirical mean; never-evaluated arms last.
SelectionOutcome select_bandit_ucbe(std::span<const PromptCandidate> population, std::span<const Sample> validation,
                                    const BanditConfig& config, const EvalSettings& settings, LlmGateway& gateway,
                                    std::uint64_t seed);

}  // namespace gaapo
