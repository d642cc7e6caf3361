#include "gaapo/evaluation.hpp"

#include <algorithm>
#include <cctype>

#include "gaapo/text.hpp"

namespace gaapo {

namespace {

constexpr std::string_view kAnswerMarker = "ANSWER:";

/// Lowercase with '_' and '-' read as spaces, so "sexual_orientation" matches
/// "sexual orientation".
std::string label_form(std::string_view s) {
    std::string out = text::to_lower(s);
    std::replace_if(out.begin(), out.end(), [](char c) { return c == '_' || c == '-'; }, ' ');
    return out;
}

/// Text after the last answer marker, or the whole reply.
std::string_view answer_region(std::string_view reply) {
    const auto pos = text::rfind_icase(reply, kAnswerMarker);
    if (pos == std::string_view::npos) return reply;
    return reply.substr(pos + kAnswerMarker.size());
}

std::string_view last_token_of_last_line(std::string_view s) {
    s = text::trim(s);
    const auto nl = s.find_last_of('\n');
    const auto line = nl == std::string_view::npos ? s : s.substr(nl + 1);
    const auto tokens = text::whitespace_tokens(line);
    if (tokens.empty()) return {};
    return line.substr(tokens.back().begin, tokens.back().end - tokens.back().begin);
}

}  // namespace

std::string normalize_choice(std::string_view raw) {
    auto s = text::trim(raw);
    auto strip = [](char c) {
        return c == '(' || c == ')' || c == '[' || c == ']' || c == '.' || c == ':' || c == ',' ||
               c == '"' || c == '\'' || c == '*';
    };
    while (!s.empty() && strip(s.front())) s.remove_prefix(1);
    while (!s.empty() && strip(s.back())) s.remove_suffix(1);
    return text::to_upper(text::trim(s));
}

Prediction extract_prediction(std::string_view raw_output, const TaskSpec& task) {
    const std::string reply = text::strip_think_blocks(raw_output);
    const auto region = answer_region(reply);
    if (task.answer_mode == AnswerMode::MultiLabel) {
        LabelSet labels;
        const auto haystack = label_form(region);
        for (const auto& label : *task.label_vocabulary)
            if (text::contains_word(haystack, label_form(label))) labels.insert(label);
        return labels;
    }
    const bool has_marker = text::rfind_icase(reply, kAnswerMarker) != std::string_view::npos;
    if (has_marker) {
        const auto tokens = text::whitespace_tokens(region);
        if (tokens.empty()) return std::string{};
        return normalize_choice(region.substr(tokens.front().begin, tokens.front().end - tokens.front().begin));
    }
    return normalize_choice(last_token_of_last_line(reply));
}

bool parse_judge_verdict(std::string_view judge_output) {
    const std::string reply = text::strip_think_blocks(judge_output);
    const auto pos = text::rfind_icase(reply, "VERDICT:");
    if (pos != std::string_view::npos) {
        const auto rest = text::trim(std::string_view(reply).substr(pos + 8));
        const auto tokens = text::whitespace_tokens(rest);
        if (!tokens.empty()) {
            const auto word = normalize_choice(rest.substr(tokens.front().begin, tokens.front().end - tokens.front().begin));
            if (word == "YES") return true;
            if (word == "NO") return false;
        }
    }
    const bool yes = text::contains_word(reply, "yes");
    const bool no = text::contains_word(reply, "no");
    if (yes != no) return yes;
    throw Error(ErrorCode::JudgeUnparseable, "judge reply has no verdict: " + std::string(text::trim(reply)).substr(0, 200));
}

std::string answer_format_instruction(const EvalSettings& settings) {
    const auto& task = settings.task;
    if (task.answer_mode == AnswerMode::MultiLabel) {
        std::string labels;
        for (const auto& l : *task.label_vocabulary) {
            if (!labels.empty()) labels += ", ";
            labels += l;
        }
        return settings.templates->render("predict_multilabel", {{"labels", labels}});
    }
    return settings.templates->render("predict_choice", {});
}

CompletionRequest prediction_request(std::string_view prompt_text, const Sample& sample,
                                     const EvalSettings& settings) {
    std::string rendered(prompt_text);
    if (const auto pos = rendered.find(kPlaceholder); pos != std::string::npos)
        rendered.replace(pos, kPlaceholder.size(), sample.input);
    CompletionRequest req;
    req.messages = {{Role::System, answer_format_instruction(settings)}, {Role::User, std::move(rendered)}};
    req.model_id = settings.target_model;
    req.temperature = settings.temperature;
    req.max_tokens = settings.max_tokens;
    req.purpose = Purpose::Prediction;
    return req;
}

CompletionRequest judge_request(std::string_view question, const GoldAnswer& gold,
                                std::string_view candidate_answer, const EvalSettings& settings) {
    CompletionRequest req;
    req.messages = {{Role::User, settings.templates->render("judge", {{"question", std::string(question)},
                                                                      {"reference", render_gold(gold)},
                                                                      {"candidate", text::strip_think_blocks(candidate_answer)}})}};
    req.model_id = settings.task.metric.judge_model;
    req.temperature = 0.0;
    req.max_tokens = 64;
    req.purpose = Purpose::Judging;
    return req;
}

bool score_locally(std::string_view raw_output, const GoldAnswer& gold, const TaskSpec& task) {
    const auto prediction = extract_prediction(raw_output, task);
    if (const auto* labels = std::get_if<LabelSet>(&gold)) {
        const auto* predicted = std::get_if<LabelSet>(&prediction);
        if (predicted == nullptr) throw Error(ErrorCode::MetricMismatch, "label-set gold on a choice task");
        return *predicted == *labels;
    }
    const auto* predicted = std::get_if<std::string>(&prediction);
    if (predicted == nullptr) throw Error(ErrorCode::MetricMismatch, "choice gold on a multilabel task");
    return *predicted == normalize_choice(std::get<Choice>(gold).value);
}

bool score_sample(std::string_view raw_output, const Sample& sample, const EvalSettings& settings,
                  LlmGateway* gateway) {
    if (settings.task.metric.kind != MetricKind::SemanticEquivalence)
        return score_locally(raw_output, sample.gold, settings.task);
    if (gateway == nullptr) throw Error(ErrorCode::ConfigError, "semantic equivalence needs a judge gateway");
    const auto response = gateway->complete(judge_request(sample.input, sample.gold, raw_output, settings));
    return parse_judge_verdict(response.text);
}

std::vector<EvalResult> evaluate_many(std::span<const EvalJob> jobs, const EvalSettings& settings,
                                      LlmGateway& gateway) {
    const auto repeats = static_cast<std::size_t>(std::max(1, settings.repeats));
    struct Slot {
        std::size_t job;
        const Sample* sample;
    };
    std::vector<Slot> slots;
    std::vector<CompletionRequest> requests;
    for (std::size_t j = 0; j < jobs.size(); ++j)
        for (const auto& sample : jobs[j].samples)
            for (std::size_t r = 0; r < repeats; ++r) {
                slots.push_back({j, &sample});
                requests.push_back(prediction_request(jobs[j].prompt_text, sample, settings));
            }

    const auto replies = gateway.complete_batch(requests);

    std::vector<EvalResult> results(jobs.size());
    for (std::size_t j = 0; j < jobs.size(); ++j) results[j].candidate_id = jobs[j].candidate_id;

    std::vector<SampleOutcome> outcomes(slots.size());
    std::vector<std::string> first_error(jobs.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        auto& out = outcomes[i];
        auto& res = results[slots[i].job];
        out.sample_id = slots[i].sample->id;
        ++res.llm_calls;
        if (!replies[i].ok()) {
            out.failed = true;
            ++res.failed_calls;
            if (first_error[slots[i].job].empty()) first_error[slots[i].job] = replies[i].error->what();
            continue;
        }
        out.raw_output = replies[i].response->text;
    }

    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto calls = results[j].llm_calls;
        if (calls > 0 && results[j].failed_calls * 2 > calls)
            throw Error(ErrorCode::BackendUnavailable,
                        "evaluation aborted: " + std::to_string(results[j].failed_calls) + " of " +
                            std::to_string(calls) + " prediction calls failed; first error: " + first_error[j]);
    }

    if (settings.task.metric.kind == MetricKind::SemanticEquivalence) {
        std::vector<std::size_t> judged;
        std::vector<CompletionRequest> judge_requests;
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (outcomes[i].failed) continue;
            judged.push_back(i);
            judge_requests.push_back(judge_request(slots[i].sample->input, slots[i].sample->gold,
                                                   outcomes[i].raw_output, settings));
        }
        const auto verdicts = gateway.complete_batch(judge_requests);
        for (std::size_t k = 0; k < judged.size(); ++k) {
            auto& out = outcomes[judged[k]];
            auto& res = results[slots[judged[k]].job];
            ++res.llm_calls;
            if (!verdicts[k].ok()) {
                out.failed = true;
                ++res.failed_calls;
                continue;
            }
            try {
                out.correct = parse_judge_verdict(verdicts[k].response->text);
            } catch (const Error&) {
                out.judge_unparseable = true;
            }
        }
    } else {
        for (std::size_t i = 0; i < slots.size(); ++i)
            if (!outcomes[i].failed)
                outcomes[i].correct = score_locally(outcomes[i].raw_output, slots[i].sample->gold, settings.task);
    }

    for (std::size_t i = 0; i < slots.size(); ++i) {
        auto& res = results[slots[i].job];
        res.score.total += 1;
        if (outcomes[i].correct) res.score.correct += 1;
        res.per_sample.push_back(std::move(outcomes[i]));
    }
    return results;
}

EvalResult evaluate_prompt(const PromptCandidate& candidate, std::span<const Sample> samples,
                           const EvalSettings& settings, LlmGateway& gateway) {
    const EvalJob job{candidate.id(), candidate.text(), samples};
    return std::move(evaluate_many(std::span(&job, 1), settings, gateway).front());
}

}  // namespace gaapo
