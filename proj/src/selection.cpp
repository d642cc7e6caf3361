#include "gaapo/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gaapo/rng.hpp"

namespace gaapo {

namespace {

/// Best first; ties by ascending id.
bool better(const RankedEntry& a, const RankedEntry& b) {
    const auto c = compare_accuracy(a.score, b.score);
    if (c != 0) return c > 0;
    return a.id < b.id;
}

std::vector<Sample> draw_batch(std::span<const Sample> validation, std::size_t size, Rng& rng) {
    std::vector<Sample> batch;
    batch.reserve(size);
    for (const auto idx : rng.sample_indices(validation.size(), size)) batch.push_back(validation[idx]);
    return batch;
}

std::uint64_t evaluate_into(std::span<const PromptCandidate> population, const std::vector<std::size_t>& members,
                            std::span<const Sample> batch, const EvalSettings& settings, LlmGateway& gateway,
                            std::vector<RankedEntry>& entries) {
    std::vector<EvalJob> jobs;
    jobs.reserve(members.size());
    for (const auto m : members) jobs.push_back({population[m].id(), population[m].text(), batch});
    std::uint64_t calls = 0;
    const auto results = evaluate_many(jobs, settings, gateway);
    for (std::size_t k = 0; k < members.size(); ++k) {
        auto& e = entries[members[k]];
        e.score += results[k].score;
        e.samples_seen += results[k].score.total;
        calls += results[k].score.total;
    }
    return calls;
}

std::vector<RankedEntry> blank_entries(std::span<const PromptCandidate> population) {
    std::vector<RankedEntry> entries;
    entries.reserve(population.size());
    for (const auto& c : population) entries.push_back({c.id(), {}, 0});
    return entries;
}

}  // namespace

std::string_view to_string(SelectionMethod method) {
    switch (method) {
        case SelectionMethod::Complete: return "complete";
        case SelectionMethod::SuccessiveHalving: return "successive_halving";
        case SelectionMethod::Bandit: return "bandit";
    }
    return "?";
}

SelectionMethod parse_selection_method(std::string_view name) {
    if (name == "all" || name == "complete") return SelectionMethod::Complete;
    if (name == "sh" || name == "successive_halving") return SelectionMethod::SuccessiveHalving;
    if (name == "bandit" || name == "ucb_e") return SelectionMethod::Bandit;
    throw Error(ErrorCode::ConfigError, "unknown selection method '" + std::string(name) + "'");
}

void HalvingConfig::validate() const {
    if (!(batch_fraction > 0.0 && batch_fraction <= 1.0))
        throw Error(ErrorCode::ConfigError, "halving batch_fraction must be in (0, 1]");
    if (!(elimination_fraction >= 0.0 && elimination_fraction < 1.0))
        throw Error(ErrorCode::ConfigError, "halving elimination_fraction must be in [0, 1)");
    if (target_survivors == 0) throw Error(ErrorCode::ConfigError, "halving target_survivors must be positive");
}

void BanditConfig::validate() const {
    if (arms_evaluated == 0 || batch_size == 0 || iterations == 0)
        throw Error(ErrorCode::ConfigError, "bandit arms_evaluated, batch_size and iterations must be positive");
    if (!(exploration >= 0.0)) throw Error(ErrorCode::ConfigError, "bandit exploration must be non-negative");
}

std::size_t fraction_of(double fraction, std::size_t n) {
    const double exact = fraction * static_cast<double>(n);
    return static_cast<std::size_t>(std::ceil(exact - 1e-9));
}

std::vector<std::size_t> halving_schedule(std::size_t population, const HalvingConfig& config) {
    config.validate();
    std::vector<std::size_t> sizes{population};
    auto n = population;
    while (n > config.target_survivors) {
        auto eliminate = static_cast<std::size_t>(std::floor(config.elimination_fraction * static_cast<double>(n) + 1e-9));
        eliminate = std::clamp<std::size_t>(eliminate, 1, n - config.target_survivors);
        n -= eliminate;
        sizes.push_back(n);
    }
    return sizes;
}

SelectionOutcome select_complete(std::span<const PromptCandidate> population, std::span<const Sample> validation,
                                 const EvalSettings& settings, LlmGateway& gateway) {
    SelectionOutcome out;
    out.method = SelectionMethod::Complete;
    out.ranked = blank_entries(population);
    std::vector<std::size_t> all(population.size());
    std::iota(all.begin(), all.end(), 0);
    out.total_calls = evaluate_into(population, all, validation, settings, gateway, out.ranked);
    std::sort(out.ranked.begin(), out.ranked.end(), better);
    return out;
}

SelectionOutcome select_successive_halving(std::span<const PromptCandidate> population,
                                           std::span<const Sample> validation, const HalvingConfig& config,
                                           const EvalSettings& settings, LlmGateway& gateway, std::uint64_t seed) {
    config.validate();
    if (config.target_survivors > population.size())
        throw Error(ErrorCode::ConfigError, "halving target_survivors exceeds the population");
    if (validation.empty()) throw Error(ErrorCode::EmptySplit, "validation split is empty");

    SelectionOutcome out;
    out.method = SelectionMethod::SuccessiveHalving;
    auto entries = blank_entries(population);
    const auto batch_size = std::min(validation.size(), std::max<std::size_t>(1, fraction_of(config.batch_fraction, validation.size())));
    const auto schedule = halving_schedule(population.size(), config);

    std::vector<std::size_t> alive(population.size());
    std::iota(alive.begin(), alive.end(), 0);
    // Eliminated candidates grouped by round, last round first in the final ranking.
    std::vector<std::vector<std::size_t>> eliminated;
    Rng rng(seed);

    for (std::size_t round = 1; round < schedule.size(); ++round) {
        const auto batch = draw_batch(validation, batch_size, rng);
        out.total_calls += evaluate_into(population, alive, batch, settings, gateway, entries);
        std::sort(alive.begin(), alive.end(), [&](std::size_t a, std::size_t b) { return better(entries[a], entries[b]); });
        const auto keep = schedule[round];
        eliminated.emplace_back(alive.begin() + static_cast<std::ptrdiff_t>(keep), alive.end());
        alive.resize(keep);
    }
    for (const auto i : alive) out.ranked.push_back(entries[i]);
    for (auto it = eliminated.rbegin(); it != eliminated.rend(); ++it)
        for (const auto i : *it) out.ranked.push_back(entries[i]);
    return out;
}

double ucb_index(const Score& score, double exploration) {
    if (score.total == 0) return std::numeric_limits<double>::infinity();
    return score.value() + std::sqrt(exploration / static_cast<double>(score.total));
}

SelectionOutcome select_bandit_ucbe(std::span<const PromptCandidate> population, std::span<const Sample> validation,
                                    const BanditConfig& config, const EvalSettings& settings, LlmGateway& gateway,
                                    std::uint64_t seed) {
    config.validate();
    if (validation.empty()) throw Error(ErrorCode::EmptySplit, "validation split is empty");

    SelectionOutcome out;
    out.method = SelectionMethod::Bandit;
    auto entries = blank_entries(population);
    const auto arms = std::min(config.arms_evaluated, population.size());
    const auto batch_size = std::min(config.batch_size, validation.size());
    Rng rng(seed);

    for (std::size_t round = 0; round < config.iterations; ++round) {
        std::vector<std::size_t> order(population.size());
        std::iota(order.begin(), order.end(), 0);
        std::vector<double> index(population.size());
        for (std::size_t i = 0; i < population.size(); ++i) index[i] = ucb_index(entries[i].score, config.exploration);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (index[a] != index[b]) return index[a] > index[b];
            return entries[a].id < entries[b].id;
        });
        order.resize(arms);
        const auto batch = draw_batch(validation, batch_size, rng);
        out.total_calls += evaluate_into(population, order, batch, settings, gateway, entries);
    }

    std::stable_sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        const bool ea = a.samples_seen > 0;
        const bool eb = b.samples_seen > 0;
        if (ea != eb) return ea;
        return better(a, b);
    });
    out.ranked = std::move(entries);
    return out;
}

}  // namespace gaapo
