#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gaapo/dataset.hpp"
#include "gaapo/llm_gateway.hpp"

namespace gaapo {

/// Knobs of the synthetic landscape served by the mock backend.
///
/// A prompt's per-sample success probability is
///   min(1, base_probability + keyword_increment * (#keywords present)),
/// so the optimum is reached by any prompt that contains every keyword.
struct SyntheticOracleConfig {
    std::vector<std::string> keywords{"carefully", "step by step", "expert"};
    double base_probability = 0.3;
    double keyword_increment = 0.2;
    /// Chance that a rewrite request injects one missing keyword.
    double injection_probability = 0.5;
    /// Chance that a rewrite drops the placeholder (exercises repair).
    double drop_placeholder_probability = 0.0;
    std::uint64_t seed = 0;

    [[nodiscard]] double optimum() const;
};

void to_json(Json& j, const SyntheticOracleConfig& c);
void from_json(const Json& j, SyntheticOracleConfig& c);

/// Mock LLM with a learnable, analytically known landscape.
///
/// - prediction: finds the sample whose input was substituted into the prompt
///   and answers it correctly with the keyword-driven probability. Draws are
///   seeded from the request hash, so a given request always gets the same answer.
/// - generation: rewrites the last <prompt> block of the meta-prompt, sometimes
///   injecting a missing keyword; diagnosis requests (with an <errors> block)
///   get a canned list of reasons.
/// - judging: compares option letters of <reference> and <candidate>.
class SyntheticOracle {
public:
    SyntheticOracle(SyntheticOracleConfig config, TaskSpec task, std::vector<Sample> samples);

    std::string operator()(const CompletionRequest& request) const;

    [[nodiscard]] double success_probability(std::string_view prompt_text) const;
    [[nodiscard]] std::size_t keyword_count(std::string_view prompt_text) const;
    [[nodiscard]] const SyntheticOracleConfig& config() const { return config_; }

    /// Index of the sample whose input occurs outside a few-shot example block.
    [[nodiscard]] std::optional<std::size_t> find_query_sample(std::string_view text) const;

    /// Wraps the oracle for MockBackend (shares state).
    [[nodiscard]] MockOracle as_mock() const;

private:
    std::string predict(const CompletionRequest& request, std::uint64_t draw_seed) const;
    std::string rewrite(const CompletionRequest& request, std::uint64_t draw_seed) const;
    std::string wrong_answer(const GoldAnswer& gold) const;

    SyntheticOracleConfig config_;
    TaskSpec task_;
    std::vector<Sample> samples_;
    std::size_t prefix_len_ = 0;
    std::unordered_map<std::string, std::vector<std::size_t>> by_prefix_;
};

/// Option letter (A-J) of an answer: a leading "B)"-style label, the token
/// after an "ANSWER:" marker, or the last standalone capital letter.
std::optional<char> extract_option_letter(std::string_view text);

/// Judge that says YES iff both answers carry the same option letter.
std::string letter_judge(const CompletionRequest& request);

/// First 64 bits of the canonical request hash.
std::uint64_t request_hash64(const CompletionRequest& request);

}  // namespace gaapo
