#include "gaapo/strategies.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "gaapo/text.hpp"

namespace gaapo {

namespace {

constexpr std::string_view kRepairSuffix = "\n\nInput: {input}";

CompletionRequest generator_request(std::string user_text, const GeneratorSettings& settings) {
    CompletionRequest req;
    req.messages = {{Role::User, std::move(user_text)}};
    req.model_id = settings.model;
    req.temperature = settings.temperature;
    req.max_tokens = settings.max_tokens;
    req.purpose = Purpose::Generation;
    return req;
}

/// Sends every request; empty or failed replies get one more try.
/// Returns the extracted prompt text per request, empty when both tries failed.
std::vector<std::string> generate_prompts(std::span<const CompletionRequest> requests, LlmGateway& gateway) {
    std::vector<std::string> texts(requests.size());
    std::vector<std::size_t> pending(requests.size());
    for (std::size_t i = 0; i < requests.size(); ++i) pending[i] = i;
    for (int attempt = 0; attempt < 2 && !pending.empty(); ++attempt) {
        std::vector<CompletionRequest> batch;
        batch.reserve(pending.size());
        for (const auto i : pending) batch.push_back(requests[i]);
        const auto replies = gateway.complete_batch(batch);
        std::vector<std::size_t> again;
        for (std::size_t k = 0; k < pending.size(); ++k) {
            if (replies[k].ok()) texts[pending[k]] = extract_prompt_text(replies[k].response->text);
            if (texts[pending[k]].empty()) again.push_back(pending[k]);
        }
        pending = std::move(again);
    }
    return texts;
}

/// Content of the last <tag>...</tag> block, or nullopt.
std::optional<std::string_view> tagged_block(std::string_view s, std::string_view open, std::string_view close) {
    const auto start = s.rfind(open);
    if (start == std::string_view::npos) return std::nullopt;
    const auto body = start + open.size();
    const auto end = s.find(close, body);
    return s.substr(body, end == std::string_view::npos ? std::string_view::npos : end - body);
}

}  // namespace

void to_json(Json& j, const ScoredCandidate& s) { j = Json{{"candidate", s.candidate}, {"score", s.score}}; }

void from_json(const Json& j, ScoredCandidate& s) {
    j.at("candidate").get_to(s.candidate);
    j.at("score").get_to(s.score);
}

void Trajectory::update(CandidateId id, std::string text, Score score) {
    const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.id == id; });
    if (it != entries_.end()) {
        it->text = std::move(text);
        it->score = score;
    } else {
        entries_.push_back({id, std::move(text), score});
    }
    std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        const auto c = compare_accuracy(a.score, b.score);
        if (c != 0) return c > 0;
        return a.id < b.id;
    });
    if (entries_.size() > max_length_) entries_.resize(max_length_);
}

void to_json(Json& j, const Trajectory& t) {
    Json entries = Json::array();
    for (const auto& e : t.entries_) entries.push_back({{"id", e.id}, {"text", e.text}, {"score", e.score}});
    j = Json{{"max_length", t.max_length_}, {"entries", std::move(entries)}};
}

void from_json(const Json& j, Trajectory& t) {
    t.max_length_ = j.at("max_length").get<std::size_t>();
    t.entries_.clear();
    for (const auto& e : j.at("entries"))
        t.entries_.push_back({e.at("id").get<CandidateId>(), e.at("text").get<std::string>(), e.at("score").get<Score>()});
}

std::string repair_placeholder(std::string text) {
    const auto first = text.find(kPlaceholder);
    if (first == std::string::npos) return text + std::string(kRepairSuffix);
    auto pos = text.find(kPlaceholder, first + kPlaceholder.size());
    while (pos != std::string::npos) {
        text.erase(pos, kPlaceholder.size());
        pos = text.find(kPlaceholder, pos);
    }
    return text;
}

std::string extract_prompt_text(std::string_view reply) {
    const std::string cleaned = text::strip_think_blocks(reply);
    if (const auto block = tagged_block(cleaned, "<prompt>", "</prompt>")) return std::string(text::trim(*block));
    return std::string(text::trim(cleaned));
}

MutationKind pick_mutation_kind(Rng& rng) {
    return kAllMutationKinds[rng.uniform_index(std::size(kAllMutationKinds))];
}

CompletionRequest mutation_request(const PromptCandidate& parent, MutationKind kind, const GeneratorSettings& settings) {
    return generator_request(settings.templates->render(mutation_template_id(kind), {{"parent", parent.text()}}), settings);
}

std::vector<std::optional<PromptCandidate>> mutate_many(std::span<const MutationJob> jobs, LlmGateway& gateway,
                                                        const GeneratorSettings& settings, int generation,
                                                        IdAllocator& ids) {
    std::vector<CompletionRequest> requests;
    requests.reserve(jobs.size());
    for (const auto& job : jobs) requests.push_back(mutation_request(*job.parent, job.kind, settings));
    const auto texts = generate_prompts(requests, gateway);

    std::vector<std::optional<PromptCandidate>> children(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (texts[i].empty()) continue;
        Lineage lineage{StrategyKind::Mutator, {jobs[i].parent->id()}, jobs[i].kind, jobs[i].fallback_from};
        children[i] = new_candidate(repair_placeholder(texts[i]), std::move(lineage), generation, ids);
    }
    return children;
}

PromptCandidate mutate(const PromptCandidate& parent, MutationKind kind, LlmGateway& gateway,
                       const GeneratorSettings& settings, int generation, IdAllocator& ids) {
    const MutationJob job{&parent, kind, std::nullopt};
    auto children = mutate_many(std::span(&job, 1), gateway, settings, generation, ids);
    if (!children.front())
        throw Error(ErrorCode::GenerationFailed,
                    "mutation " + std::string(to_string(kind)) + " returned no text twice");
    return std::move(*children.front());
}

std::string crossover_text(std::string_view a, std::string_view b) {
    const auto ta = text::whitespace_tokens(a);
    const auto tb = text::whitespace_tokens(b);
    std::string head;
    if (!ta.empty()) {
        const auto keep = (ta.size() + 1) / 2;
        head = std::string(a.substr(ta.front().begin, ta[keep - 1].end - ta.front().begin));
    }
    std::string tail;
    const auto skip = (tb.size() + 1) / 2;
    if (skip < tb.size()) tail = std::string(b.substr(tb[skip].begin, tb.back().end - tb[skip].begin));
    if (head.empty()) return tail;
    if (tail.empty()) return head;
    return head + " " + tail;
}

PromptCandidate crossover(const PromptCandidate& a, const PromptCandidate& b, int generation, IdAllocator& ids) {
    if (a.id() == b.id()) throw Error(ErrorCode::IdenticalParents, "crossover needs two distinct parents");
    Lineage lineage{StrategyKind::Crossover, {a.id(), b.id()}, std::nullopt, std::nullopt};
    return new_candidate(repair_placeholder(crossover_text(a.text(), b.text())), std::move(lineage), generation, ids);
}

PromptCandidate few_shot_augment(const PromptCandidate& parent, std::span<const Sample> train, Rng& rng,
                                 int generation, IdAllocator& ids) {
    if (train.empty()) throw Error(ErrorCode::EmptyTrainSet, "few-shot augmentation needs training samples");
    const auto k = std::min<std::size_t>(1 + rng.uniform_index(3), train.size());
    std::string text = parent.text() + "\n\nExamples:";
    for (const auto idx : rng.sample_indices(train.size(), k))
        text += "\nInput: " + train[idx].input + "\nOutput: " + render_gold(train[idx].gold) + "\n";
    while (!text.empty() && text.back() == '\n') text.pop_back();
    Lineage lineage{StrategyKind::FewShot, {parent.id()}, std::nullopt, std::nullopt};
    return new_candidate(std::move(text), std::move(lineage), generation, ids);
}

std::string render_error_cases(std::span<const ErrorCase> errors) {
    std::string out;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += fmt::format("Example {}\nInput: {}\nExpected: {}\nModel output: {}", i + 1, errors[i].sample.input,
                           render_gold(errors[i].sample.gold), text::trim(errors[i].raw_output));
    }
    return out;
}

std::vector<ErrorCase> collect_errors(const PromptCandidate& prompt, std::span<const Sample> samples,
                                      const EvalSettings& eval, LlmGateway& gateway) {
    const auto result = evaluate_prompt(prompt, samples, eval, gateway);
    const auto repeats = static_cast<std::size_t>(std::max(1, eval.repeats));
    std::vector<ErrorCase> errors;
    for (std::size_t i = 0; i < result.per_sample.size(); ++i) {
        const auto& o = result.per_sample[i];
        if (o.correct || o.failed || o.judge_unparseable) continue;
        errors.push_back({samples[i / repeats], extract_prediction(o.raw_output, eval.task), o.raw_output});
    }
    return errors;
}

std::vector<PromptCandidate> apo_generate(std::span<const ScoredCandidate> parents, std::span<const Sample> train,
                                          LlmGateway& gateway, std::size_t count, const ApoConfig& config,
                                          const GeneratorSettings& generator, const EvalSettings& eval,
                                          int generation, std::uint64_t seed, IdAllocator& ids) {
    if (train.empty()) throw Error(ErrorCode::EmptyTrainSet, "APO needs training samples");
    if (parents.empty()) throw Error(ErrorCode::GenerationFailed, "APO needs at least one parent");
    if (count == 0) return {};

    // One evaluation per parent that will be used, all in a single batch.
    const auto used = std::min(parents.size(), count);
    const auto subsample = std::min(config.train_subsample, train.size());
    std::vector<std::vector<Sample>> subsets(used);
    std::vector<EvalJob> jobs;
    for (std::size_t p = 0; p < used; ++p) {
        Rng rng(derive_seed(seed, p, "apo_subsample"));
        for (const auto idx : rng.sample_indices(train.size(), subsample)) subsets[p].push_back(train[idx]);
    }
    for (std::size_t p = 0; p < used; ++p)
        jobs.push_back({parents[p].candidate.id(), parents[p].candidate.text(), subsets[p]});
    const auto results = evaluate_many(jobs, eval, gateway);

    const auto repeats = static_cast<std::size_t>(std::max(1, eval.repeats));
    std::vector<std::vector<ErrorCase>> errors(used);
    for (std::size_t p = 0; p < used; ++p)
        for (std::size_t i = 0; i < results[p].per_sample.size(); ++i) {
            const auto& o = results[p].per_sample[i];
            if (o.correct || o.failed || o.judge_unparseable) continue;
            errors[p].push_back({subsets[p][i / repeats], extract_prediction(o.raw_output, eval.task), o.raw_output});
        }

    // Gradient requests for children whose parent has errors; the rest fall back to mutation.
    std::vector<std::size_t> diagnosed;
    std::vector<CompletionRequest> gradient_requests;
    std::vector<MutationJob> fallbacks;
    std::vector<std::size_t> fallback_children;
    for (std::size_t i = 0; i < count; ++i) {
        const auto p = i % used;
        Rng rng(derive_seed(seed, i, "apo_child"));
        if (errors[p].empty()) {
            fallbacks.push_back({&parents[p].candidate, pick_mutation_kind(rng), StrategyKind::APO});
            fallback_children.push_back(i);
            continue;
        }
        const auto n = std::min(config.errors_per_gradient, errors[p].size());
        std::vector<ErrorCase> picked;
        for (const auto idx : rng.sample_indices(errors[p].size(), n)) picked.push_back(errors[p][idx]);
        diagnosed.push_back(i);
        gradient_requests.push_back(generator_request(
            generator.templates->render("apo_gradient", {{"num_reasons", std::to_string(config.num_reasons)},
                                                         {"prompt", parents[p].candidate.text()},
                                                         {"errors", render_error_cases(picked)}}),
            generator));
    }

    const auto gradients = gateway.complete_batch(gradient_requests);
    std::vector<std::size_t> edited;
    std::vector<CompletionRequest> edit_requests;
    for (std::size_t k = 0; k < diagnosed.size(); ++k) {
        if (!gradients[k].ok()) continue;
        const std::string reply = text::strip_think_blocks(gradients[k].response->text);
        const auto reasons = tagged_block(reply, "<reasons>", "</reasons>");
        const auto gradient = std::string(text::trim(reasons ? *reasons : std::string_view(reply)));
        if (gradient.empty()) continue;
        const auto& parent = parents[diagnosed[k] % used].candidate;
        edited.push_back(diagnosed[k]);
        edit_requests.push_back(generator_request(
            generator.templates->render("apo_edit", {{"gradient", gradient}, {"prompt", parent.text()}}), generator));
    }

    const auto edits = gateway.complete_batch(edit_requests);
    std::vector<std::optional<PromptCandidate>> children(count);
    for (std::size_t k = 0; k < edited.size(); ++k) {
        if (!edits[k].ok()) continue;
        auto revised = extract_prompt_text(edits[k].response->text);
        if (revised.empty()) continue;
        const auto i = edited[k];
        Lineage lineage{StrategyKind::APO, {parents[i % used].candidate.id()}, std::nullopt, std::nullopt};
        children[i] = new_candidate(repair_placeholder(std::move(revised)), std::move(lineage), generation, ids);
    }
    auto mutated = mutate_many(fallbacks, gateway, generator, generation, ids);
    for (std::size_t k = 0; k < fallbacks.size(); ++k) children[fallback_children[k]] = std::move(mutated[k]);

    std::vector<PromptCandidate> out;
    for (auto& c : children)
        if (c) out.push_back(std::move(*c));
    if (out.empty()) throw Error(ErrorCode::GenerationFailed, "APO produced no children");
    return out;
}

std::vector<Trajectory::Entry> apply_dropout(const Trajectory& trajectory, double dropout_p, Rng& rng) {
    std::vector<Trajectory::Entry> kept;
    for (const auto& e : trajectory.entries())
        if (!rng.bernoulli(dropout_p)) kept.push_back(e);
    if (kept.empty() && !trajectory.empty()) kept.push_back(trajectory.best());
    return kept;
}

std::string render_trajectory(std::span<const Trajectory::Entry> best_first) {
    std::string out;
    for (auto it = best_first.rbegin(); it != best_first.rend(); ++it) {
        if (!out.empty()) out += "\n\n";
        out += fmt::format("<prompt>\n{}\n</prompt>\nscore: {:.3f}", it->text, it->score.value());
    }
    return out;
}

std::vector<PromptCandidate> opro_generate(const Trajectory& trajectory, LlmGateway& gateway, std::size_t count,
                                           double dropout_p, std::uint64_t seed, const GeneratorSettings& generator,
                                           int generation, IdAllocator& ids) {
    if (trajectory.empty()) throw Error(ErrorCode::GenerationFailed, "OPRO needs a non-empty trajectory");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error(ErrorCode::ConfigError, "OPRO dropout must be in [0, 1)");
    std::vector<CompletionRequest> requests;
    requests.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, i, "opro_dropout"));
        const auto kept = apply_dropout(trajectory, dropout_p, rng);
        requests.push_back(generator_request(
            generator.templates->render("opro", {{"trajectory", render_trajectory(kept)}}), generator));
    }
    const auto texts = generate_prompts(requests, gateway);

    std::vector<PromptCandidate> out;
    for (const auto& t : texts) {
        if (t.empty()) continue;
        Lineage lineage{StrategyKind::OPRO, {trajectory.best().id}, std::nullopt, std::nullopt};
        out.push_back(new_candidate(repair_placeholder(t), std::move(lineage), generation, ids));
    }
    if (out.empty() && count > 0) throw Error(ErrorCode::GenerationFailed, "OPRO produced no children");
    return out;
}

}  // namespace gaapo
