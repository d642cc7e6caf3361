#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gaapo/dataset.hpp"
#include "gaapo/llm_gateway.hpp"
#include "gaapo/templates.hpp"

namespace gaapo {

/// A parsed model answer: a label set or a normalized option.
using Prediction = std::variant<LabelSet, std::string>;

/// Parses a raw completion. Reasoning blocks are dropped; when an "ANSWER:"
/// marker is present only the text after the last one is read.
/// Multilabel: every vocabulary label found as a word ("none" or nothing -> {}).
/// Choice: the first token after the marker, else the last token of the reply.
Prediction extract_prediction(std::string_view raw_output, const TaskSpec& task);

/// Uppercases and strips brackets and trailing punctuation: "(b)." -> "B".
std::string normalize_choice(std::string_view raw);

/// Reads "VERDICT: YES|NO" (or a lone YES/NO). Throws JudgeUnparseable.
bool parse_judge_verdict(std::string_view judge_output);

struct EvalSettings {
    TaskSpec task;
    std::string target_model = "target";
    double temperature = 0.0;
    int max_tokens = 1024;
    /// Each sample is predicted this many times; all predictions are scored.
    int repeats = 1;
    const TemplateLibrary* templates = &TemplateLibrary::builtin();
};

/// System message telling the model how to format its final answer.
std::string answer_format_instruction(const EvalSettings& settings);

CompletionRequest prediction_request(std::string_view prompt_text, const Sample& sample,
                                     const EvalSettings& settings);

CompletionRequest judge_request(std::string_view question, const GoldAnswer& gold,
                                std::string_view candidate_answer, const EvalSettings& settings);

/// Deterministic metrics only (strict set accuracy, exact choice).
bool score_locally(std::string_view raw_output, const GoldAnswer& gold, const TaskSpec& task);

/// Scores one output. Semantic equivalence issues a judge call through
/// `gateway` (required for that metric) and may throw JudgeUnparseable.
bool score_sample(std::string_view raw_output, const Sample& sample, const EvalSettings& settings,
                  LlmGateway* gateway = nullptr);

struct SampleOutcome {
    std::string sample_id;
    bool correct = false;
    std::string raw_output;
    /// Prediction (or judge) call failed; counted as incorrect.
    bool failed = false;
    bool judge_unparseable = false;
};

struct EvalResult {
    CandidateId candidate_id;
    Score score;
    std::vector<SampleOutcome> per_sample;
    std::uint64_t llm_calls = 0;
    std::uint64_t failed_calls = 0;
};

struct EvalJob {
    CandidateId candidate_id;
    std::string_view prompt_text;
    std::span<const Sample> samples;
};

/// Evaluates many prompts in one batch through the gateway. Failed calls
/// count as incorrect; when more than half of one job's calls fail the whole
/// evaluation throws BackendUnavailable.
std::vector<EvalResult> evaluate_many(std::span<const EvalJob> jobs, const EvalSettings& settings,
                                      LlmGateway& gateway);

EvalResult evaluate_prompt(const PromptCandidate& candidate, std::span<const Sample> samples,
                           const EvalSettings& settings, LlmGateway& gateway);

}  // namespace gaapo
