#include "gaapo/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

namespace gaapo {

namespace {

constexpr std::string_view kCheckpointFormat = "gaapo-checkpoint";

Json requests_json(const LedgerSnapshot& s) {
    return Json{{"generation", s.of(Purpose::Generation).requests},
                {"prediction", s.of(Purpose::Prediction).requests},
                {"judging", s.of(Purpose::Judging).requests}};
}

void accumulate(LedgerSnapshot& into, const LedgerSnapshot& delta) {
    for (std::size_t i = 0; i < into.by_purpose.size(); ++i) {
        into.by_purpose[i].requests += delta.by_purpose[i].requests;
        into.by_purpose[i].cache_hits += delta.by_purpose[i].cache_hits;
        into.by_purpose[i].failures += delta.by_purpose[i].failures;
        into.by_purpose[i].attempts += delta.by_purpose[i].attempts;
    }
}

Json candidate_header(const PromptCandidate& c) {
    return Json{{"id", c.id()}, {"text", c.text()}, {"generation", c.generation()}, {"lineage", c.lineage()}};
}

const Score* better_of(const Score* a, const Score* b) {
    if (a == nullptr) return b;
    if (b == nullptr) return a;
    return compare_accuracy(*a, *b) >= 0 ? a : b;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

StrategyWeights StrategyWeights::defaults() {
    return {{{StrategyKind::Mutator, 0.4},
             {StrategyKind::Crossover, 0.1},
             {StrategyKind::FewShot, 0.1},
             {StrategyKind::APO, 0.2},
             {StrategyKind::OPRO, 0.2}}};
}

double StrategyWeights::of(StrategyKind kind) const {
    const auto it = weights.find(kind);
    return it == weights.end() ? 0.0 : it->second;
}

void StrategyWeights::validate() const {
    double sum = 0.0;
    for (const auto& [kind, w] : weights) {
        if (kind == StrategyKind::Seed) throw Error(ErrorCode::ConfigError, "the seed strategy cannot have a weight");
        if (!(w >= 0.0) || !std::isfinite(w))
            throw Error(ErrorCode::ConfigError, "strategy weight for " + std::string(to_string(kind)) + " must be >= 0");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error(ErrorCode::ConfigError, "strategy weights must sum to 1 (got " + std::to_string(sum) + ")");
}

std::map<StrategyKind, std::size_t> allocate_slots(const StrategyWeights& weights, std::size_t population_size) {
    weights.validate();
    std::map<StrategyKind, std::size_t> slots;
    std::size_t assigned = 0;
    std::optional<StrategyKind> top;
    for (const auto kind : kGenerativeStrategies) {
        const double w = weights.of(kind);
        // The epsilon keeps products such as 0.1 * 30 = 2.9999999999999996 at 3.
        const auto n = static_cast<std::size_t>(std::floor(w * static_cast<double>(population_size) + 1e-9));
        slots[kind] = n;
        assigned += n;
        if (!top || w > weights.of(*top)) top = kind;
    }
    slots[*top] += population_size - std::min(assigned, population_size);
    return slots;
}

void GaapoConfig::validate() const {
    if (population_size == 0) throw Error(ErrorCode::ConfigError, "population_size must be positive");
    if (generations < 0) throw Error(ErrorCode::ConfigError, "generations must be >= 0");
    if (parent_pool_size == 0 || parent_pool_size > population_size)
        throw Error(ErrorCode::ConfigError, "parent_pool_size must be in [1, population_size]");
    strategy_weights.validate();
    task.validate();
    if (selection.method == SelectionMethod::SuccessiveHalving) {
        selection.halving.validate();
        if (selection.halving.target_survivors > population_size)
            throw Error(ErrorCode::ConfigError, "halving target_survivors exceeds population_size");
    }
    if (selection.method == SelectionMethod::Bandit) selection.bandit.validate();
    if (test_eval_every && *test_eval_every < 1) throw Error(ErrorCode::ConfigError, "test_eval_every must be >= 1");
    if (repeat_evaluations < 1) throw Error(ErrorCode::ConfigError, "repeat_evaluations must be >= 1");
    if (hall_of_fame_size == 0) throw Error(ErrorCode::ConfigError, "hall_of_fame_size must be positive");
    if (apo.train_subsample == 0 || apo.errors_per_gradient == 0 || apo.num_reasons == 0)
        throw Error(ErrorCode::ConfigError, "apo settings must be positive");
    if (opro.max_length == 0) throw Error(ErrorCode::ConfigError, "opro.max_length must be positive");
    if (!(opro.dropout >= 0.0 && opro.dropout < 1.0)) throw Error(ErrorCode::ConfigError, "opro.dropout must be in [0, 1)");
    if (generation_temperature < 0.0 || prediction_temperature < 0.0)
        throw Error(ErrorCode::ConfigError, "temperatures must be >= 0");
}

void to_json(Json& j, const GaapoConfig& c) {
    Json weights = Json::object();
    for (const auto& [kind, w] : c.strategy_weights.weights) weights[std::string(to_string(kind))] = w;
    j = Json{{"population_size", c.population_size},
             {"generations", c.generations},
             {"strategy_weights", std::move(weights)},
             {"parent_pool_size", c.parent_pool_size},
             {"selection",
              {{"method", to_string(c.selection.method)},
               {"halving",
                {{"batch_fraction", c.selection.halving.batch_fraction},
                 {"elimination_fraction", c.selection.halving.elimination_fraction},
                 {"target_survivors", c.selection.halving.target_survivors}}},
               {"bandit",
                {{"arms_evaluated", c.selection.bandit.arms_evaluated},
                 {"batch_size", c.selection.bandit.batch_size},
                 {"iterations", c.selection.bandit.iterations},
                 {"exploration", c.selection.bandit.exploration}}}}},
             {"elitism", c.elitism},
             {"task", c.task},
             {"generator_model", c.generator_model},
             {"target_model", c.target_model},
             {"generation_temperature", c.generation_temperature},
             {"prediction_temperature", c.prediction_temperature},
             {"generation_max_tokens", c.generation_max_tokens},
             {"prediction_max_tokens", c.prediction_max_tokens},
             {"seed", c.seed},
             {"test_eval_every", c.test_eval_every ? Json(*c.test_eval_every) : Json(nullptr)},
             {"repeat_evaluations", c.repeat_evaluations},
             {"hall_of_fame_size", c.hall_of_fame_size},
             {"apo",
              {{"train_subsample", c.apo.train_subsample},
               {"errors_per_gradient", c.apo.errors_per_gradient},
               {"num_reasons", c.apo.num_reasons}}},
             {"opro", {{"max_length", c.opro.max_length}, {"dropout", c.opro.dropout}}},
             {"template_dir", c.template_dir.generic_string()}};
}

void from_json(const Json& j, GaapoConfig& c) {
    const GaapoConfig d;
    c.population_size = j.value("population_size", d.population_size);
    c.generations = j.value("generations", d.generations);
    if (const auto it = j.find("strategy_weights"); it != j.end()) {
        c.strategy_weights.weights.clear();
        for (const auto& [name, w] : it->items()) c.strategy_weights.weights[parse_strategy_kind(name)] = w.get<double>();
    } else {
        c.strategy_weights = d.strategy_weights;
    }
    c.parent_pool_size = j.value("parent_pool_size", d.parent_pool_size);
    c.selection = d.selection;
    if (const auto it = j.find("selection"); it != j.end()) {
        if (it->contains("method")) c.selection.method = parse_selection_method(it->at("method").get<std::string>());
        if (const auto h = it->find("halving"); h != it->end()) {
            c.selection.halving.batch_fraction = h->value("batch_fraction", d.selection.halving.batch_fraction);
            c.selection.halving.elimination_fraction =
                h->value("elimination_fraction", d.selection.halving.elimination_fraction);
            c.selection.halving.target_survivors = h->value("target_survivors", d.selection.halving.target_survivors);
        }
        if (const auto b = it->find("bandit"); b != it->end()) {
            c.selection.bandit.arms_evaluated = b->value("arms_evaluated", d.selection.bandit.arms_evaluated);
            c.selection.bandit.batch_size = b->value("batch_size", d.selection.bandit.batch_size);
            c.selection.bandit.iterations = b->value("iterations", d.selection.bandit.iterations);
            c.selection.bandit.exploration = b->value("exploration", d.selection.bandit.exploration);
        }
    }
    c.elitism = j.value("elitism", d.elitism);
    if (const auto it = j.find("task"); it != j.end()) it->get_to(c.task);
    c.generator_model = j.value("generator_model", d.generator_model);
    c.target_model = j.value("target_model", d.target_model);
    c.generation_temperature = j.value("generation_temperature", d.generation_temperature);
    c.prediction_temperature = j.value("prediction_temperature", d.prediction_temperature);
    c.generation_max_tokens = j.value("generation_max_tokens", d.generation_max_tokens);
    c.prediction_max_tokens = j.value("prediction_max_tokens", d.prediction_max_tokens);
    c.seed = j.value("seed", d.seed);
    if (const auto it = j.find("test_eval_every"); it != j.end())
        c.test_eval_every = it->is_null() ? std::nullopt : std::optional<int>(it->get<int>());
    else
        c.test_eval_every = d.test_eval_every;
    c.repeat_evaluations = j.value("repeat_evaluations", d.repeat_evaluations);
    c.hall_of_fame_size = j.value("hall_of_fame_size", d.hall_of_fame_size);
    c.apo = d.apo;
    if (const auto it = j.find("apo"); it != j.end()) {
        c.apo.train_subsample = it->value("train_subsample", d.apo.train_subsample);
        c.apo.errors_per_gradient = it->value("errors_per_gradient", d.apo.errors_per_gradient);
        c.apo.num_reasons = it->value("num_reasons", d.apo.num_reasons);
    }
    c.opro = d.opro;
    if (const auto it = j.find("opro"); it != j.end()) {
        c.opro.max_length = it->value("max_length", d.opro.max_length);
        c.opro.dropout = it->value("dropout", d.opro.dropout);
    }
    c.template_dir = j.value("template_dir", std::string{});
}

std::string config_hash(const GaapoConfig& config) {
    Json j = config;
    j.erase("generations");
    return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Hall of fame and state serialization

void HallOfFame::update(const HallOfFameEntry& entry) {
    const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.id == entry.id; });
    if (it != entries_.end()) {
        if (compare_accuracy(entry.score, it->score) <= 0) return;
        it->score = entry.score;
    } else {
        entries_.push_back(entry);
    }
    std::stable_sort(entries_.begin(), entries_.end(), [](const HallOfFameEntry& a, const HallOfFameEntry& b) {
        const auto c = compare_accuracy(a.score, b.score);
        if (c != 0) return c > 0;
        return a.id < b.id;
    });
    if (entries_.size() > capacity_) entries_.resize(capacity_);
}

void to_json(Json& j, const HallOfFame& h) { j = Json{{"capacity", h.capacity_}, {"entries", h.entries_}}; }

void from_json(const Json& j, HallOfFame& h) {
    h.capacity_ = j.at("capacity").get<std::size_t>();
    h.entries_ = j.at("entries").get<std::vector<HallOfFameEntry>>();
}

void to_json(Json& j, const GenerationState& s) {
    j = Json{{"generation_index", s.generation_index},
             {"parent_pool", s.parent_pool},
             {"population", s.population},
             {"trajectory", s.trajectory},
             {"hall_of_fame", s.hall_of_fame},
             {"ledger", s.ledger},
             {"next_candidate_id", s.next_candidate_id},
             {"last_test", s.last_test ? Json{{"id", s.last_test->id},
                                              {"score", s.last_test->score},
                                              {"generation", s.last_test->generation}}
                                       : Json(nullptr)},
             {"events", s.events}};
}

void from_json(const Json& j, GenerationState& s) {
    // Each field is read separately so a failure names it.
    auto field = [&](const char* name, auto& target) {
        try {
            j.at(name).get_to(target);
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::CorruptCheckpoint, std::string("checkpoint field '") + name + "': " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::CorruptCheckpoint, std::string("checkpoint field '") + name + "': " + e.what());
        }
    };
    field("generation_index", s.generation_index);
    field("parent_pool", s.parent_pool);
    field("population", s.population);
    field("trajectory", s.trajectory);
    field("hall_of_fame", s.hall_of_fame);
    field("ledger", s.ledger);
    field("next_candidate_id", s.next_candidate_id);
    Json last_test;
    field("last_test", last_test);
    s.last_test.reset();
    if (!last_test.is_null()) {
        TestCheck t;
        try {
            last_test.at("id").get_to(t.id);
            last_test.at("score").get_to(t.score);
            last_test.at("generation").get_to(t.generation);
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::CorruptCheckpoint, std::string("checkpoint field 'last_test': ") + e.what());
        }
        s.last_test = t;
    }
    field("events", s.events);
}

void checkpoint_save(const GenerationState& state, const GaapoConfig& config, const std::filesystem::path& path) {
    const Json doc{{"format", kCheckpointFormat},
                   {"version", kCheckpointVersion},
                   {"config_hash", config_hash(config)},
                   {"state", state}};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    write_text_file(tmp, doc.dump() + "\n");
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot move checkpoint into place: " + ec.message());
}

GenerationState checkpoint_load(const std::filesystem::path& path, const GaapoConfig& config,
                                bool allow_config_mismatch) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    Json doc;
    try {
        doc = Json::parse(ss.str());
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, "checkpoint is not valid JSON: " + std::string(e.what()));
    }
    if (!doc.is_object()) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint is not a JSON object");
    if (doc.value("format", std::string{}) != kCheckpointFormat)
        throw Error(ErrorCode::CorruptCheckpoint, "checkpoint field 'format' missing or wrong");
    if (!doc.contains("version") || !doc["version"].is_number_integer())
        throw Error(ErrorCode::CorruptCheckpoint, "checkpoint field 'version' missing");
    if (doc["version"].get<int>() != kCheckpointVersion)
        throw Error(ErrorCode::CorruptCheckpoint, "checkpoint field 'version': unsupported " + doc["version"].dump());
    if (!doc.contains("config_hash") || !doc["config_hash"].is_string())
        throw Error(ErrorCode::CorruptCheckpoint, "checkpoint field 'config_hash' missing");
    if (!doc.contains("state") || !doc["state"].is_object())
        throw Error(ErrorCode::CorruptCheckpoint, "checkpoint field 'state' missing");

    const auto stored = doc["config_hash"].get<std::string>();
    if (stored != config_hash(config)) {
        if (!allow_config_mismatch)
            throw Error(ErrorCode::ConfigMismatch,
                        "checkpoint " + path.string() + " was written with a different configuration");
        spdlog::warn("checkpoint {} was written with a different configuration; resuming anyway", path.string());
    }
    return doc["state"].get<GenerationState>();
}

// ---------------------------------------------------------------------------
// Optimizer

Optimizer::Optimizer(GaapoConfig config, const DatasetSplits& splits, LlmGateway& gateway, RunOptions options)
    : config_(std::move(config)),
      splits_(splits),
      gateway_(gateway),
      options_(std::move(options)),
      templates_(config_.template_dir.empty() ? TemplateLibrary::builtin()
                                              : TemplateLibrary::with_overrides(config_.template_dir)) {
    config_.validate();
    if (splits_.validation.empty()) throw Error(ErrorCode::EmptySplit, "validation split is empty");
}

std::int64_t Optimizer::now() const {
    if (options_.clock) return options_.clock();
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

EvalSettings Optimizer::eval_settings() const {
    EvalSettings s;
    s.task = config_.task;
    s.target_model = config_.target_model;
    s.temperature = config_.prediction_temperature;
    s.max_tokens = config_.prediction_max_tokens;
    s.repeats = config_.repeat_evaluations;
    s.templates = &templates_;
    return s;
}

GeneratorSettings Optimizer::generator_settings() const {
    GeneratorSettings g;
    g.model = config_.generator_model;
    g.temperature = config_.generation_temperature;
    g.max_tokens = config_.generation_max_tokens;
    g.templates = &templates_;
    return g;
}

void Optimizer::emit(GenerationState& state, Json event) { state.events.push_back(std::move(event)); }

void Optimizer::flush_history(const GenerationState& state, bool rewrite) {
    if (rewrite) flushed_events_ = 0;
    if (options_.history_path.empty()) {
        flushed_events_ = state.events.size();
        return;
    }
    if (options_.history_path.has_parent_path()) std::filesystem::create_directories(options_.history_path.parent_path());
    std::ofstream out(options_.history_path, rewrite ? std::ios::trunc : std::ios::app);
    if (!out) throw Error(ErrorCode::Io, "cannot write history " + options_.history_path.string());
    for (auto i = flushed_events_; i < state.events.size(); ++i) out << state.events[i].dump() << '\n';
    flushed_events_ = state.events.size();
}

SelectionOutcome Optimizer::select(std::span<const PromptCandidate> population, std::uint64_t seed) {
    const auto settings = eval_settings();
    switch (config_.selection.method) {
        case SelectionMethod::Complete: return select_complete(population, splits_.validation, settings, gateway_);
        case SelectionMethod::SuccessiveHalving: {
            auto halving = config_.selection.halving;
            halving.target_survivors = std::min(halving.target_survivors, population.size());
            return select_successive_halving(population, splits_.validation, halving, settings, gateway_, seed);
        }
        case SelectionMethod::Bandit:
            return select_bandit_ucbe(population, splits_.validation, config_.selection.bandit, settings, gateway_, seed);
    }
    throw Error(ErrorCode::InvariantViolation, "unknown selection method");
}

void Optimizer::check_test(GenerationState& state, int generation, bool final) {
    if (splits_.test.empty() || state.hall_of_fame.empty()) return;
    const auto& best = state.hall_of_fame.best();
    const auto before = gateway_.ledger().snapshot();
    bool reused = false;
    Score score;
    if (state.last_test && state.last_test->id == best.id) {
        score = state.last_test->score;
        reused = true;
    } else {
        const EvalJob job{best.id, best.text, splits_.test};
        score = evaluate_many(std::span(&job, 1), eval_settings(), gateway_).front().score;
        state.last_test = TestCheck{best.id, score, generation};
    }
    Json event{{"type", "test_evaluated"}, {"generation", generation}, {"id", best.id},
               {"score", score},          {"final", final},           {"reused", reused}};
    if (final) {
        const auto delta = gateway_.ledger().snapshot() - before;
        accumulate(state.ledger, delta);
        event["requests"] = requests_json(delta);
    }
    emit(state, std::move(event));
}

GenerationState Optimizer::initialize_run(const std::string& seed_prompt) {
    GenerationState state;
    state.trajectory = Trajectory(config_.opro.max_length);
    state.hall_of_fame = HallOfFame(config_.hall_of_fame_size);
    IdAllocator ids(1);
    const auto before = gateway_.ledger().snapshot();

    emit(state, {{"type", "run_started"},
                 {"task", config_.task.name},
                 {"seed", config_.seed},
                 {"config_hash", config_hash(config_)},
                 {"config", config_}});
    emit(state, {{"type", "generation_started"}, {"generation", 0}});

    auto seed = new_candidate(seed_prompt, Lineage{StrategyKind::Seed, {}, std::nullopt, std::nullopt}, 0, ids);
    emit(state, {{"type", "candidate_created"}, {"generation", 0}, {"candidate", candidate_header(seed)}, {"parent_score", nullptr}});

    const auto result = evaluate_prompt(seed, splits_.validation, eval_settings(), gateway_);
    seed.add_record({Split::Validation, config_.task.metric, result.score, result.llm_calls, now(), 0});
    emit(state, {{"type", "candidate_evaluated"},
                 {"generation", 0},
                 {"id", seed.id()},
                 {"split", to_string(Split::Validation)},
                 {"score", result.score},
                 {"improvement", nullptr}});

    state.parent_pool = {ScoredCandidate{seed, result.score}};
    state.population = {seed};
    state.trajectory.update(seed.id(), seed.text(), result.score);
    state.hall_of_fame.update({seed.id(), seed.text(), result.score, 0});
    emit(state, {{"type", "selection_completed"},
                 {"generation", 0},
                 {"method", to_string(SelectionMethod::Complete)},
                 {"total_calls", result.score.total},
                 {"parent_pool", Json::array({{{"id", seed.id()}, {"score", result.score}}})},
                 {"hall_of_fame", state.hall_of_fame.entries()}});

    if (config_.test_eval_every) check_test(state, 0, false);

    const auto delta = gateway_.ledger().snapshot() - before;
    accumulate(state.ledger, delta);
    emit(state, {{"type", "generation_completed"}, {"generation", 0}, {"requests", requests_json(delta)}});
    state.next_candidate_id = ids.peek();
    return state;
}

std::vector<PromptCandidate> Optimizer::produce_children(GenerationState& state, int generation, IdAllocator& ids) {
    const auto slots = allocate_slots(config_.strategy_weights, config_.population_size);
    const auto generator = generator_settings();
    const auto& pool = state.parent_pool;
    const auto& train = splits_.train;
    std::vector<PromptCandidate> children;

    // Mutator children that fill `missing` slots, retried a few times.
    auto top_up = [&](StrategyKind origin, std::size_t missing, std::vector<PromptCandidate>& out) {
        const auto fallback = origin == StrategyKind::Mutator ? std::nullopt : std::optional<StrategyKind>(origin);
        for (int round = 0; round < 3 && missing > 0; ++round) {
            Rng rng(derive_seed(config_.seed, static_cast<std::uint64_t>(generation),
                                "top_up/" + std::string(to_string(origin)) + "/" + std::to_string(round)));
            std::vector<MutationJob> jobs;
            for (std::size_t i = 0; i < missing; ++i)
                jobs.push_back({&pool[(out.size() + i) % pool.size()].candidate, pick_mutation_kind(rng), fallback});
            for (auto& child : mutate_many(jobs, gateway_, generator, generation, ids))
                if (child) {
                    out.push_back(std::move(*child));
                    --missing;
                }
        }
        if (missing > 0)
            throw Error(ErrorCode::StrategyFailure, "generation " + std::to_string(generation) + ": could not fill " +
                                                         std::to_string(missing) + " slots of " +
                                                         std::string(to_string(origin)));
    };

    for (const auto kind : kGenerativeStrategies) {
        const auto quota = slots.at(kind);
        if (quota == 0) continue;
        const auto seed = derive_seed(config_.seed, static_cast<std::uint64_t>(generation), to_string(kind));
        std::vector<PromptCandidate> made;
        try {
            switch (kind) {
                case StrategyKind::Mutator: {
                    Rng rng(seed);
                    std::vector<MutationJob> jobs;
                    for (std::size_t i = 0; i < quota; ++i)
                        jobs.push_back({&pool[i % pool.size()].candidate, pick_mutation_kind(rng), std::nullopt});
                    for (auto& child : mutate_many(jobs, gateway_, generator, generation, ids))
                        if (child) made.push_back(std::move(*child));
                    break;
                }
                case StrategyKind::Crossover: {
                    if (pool.size() < 2) throw Error(ErrorCode::IdenticalParents, "crossover needs two parents in the pool");
                    Rng rng(seed);
                    for (std::size_t i = 0; i < quota; ++i) {
                        const auto a = rng.uniform_index(pool.size());
                        auto b = rng.uniform_index(pool.size() - 1);
                        if (b >= a) ++b;
                        made.push_back(crossover(pool[a].candidate, pool[b].candidate, generation, ids));
                    }
                    break;
                }
                case StrategyKind::FewShot: {
                    Rng rng(seed);
                    for (std::size_t i = 0; i < quota; ++i)
                        made.push_back(few_shot_augment(pool[i % pool.size()].candidate, train, rng, generation, ids));
                    break;
                }
                case StrategyKind::APO:
                    made = apo_generate(pool, train, gateway_, quota, config_.apo, generator, eval_settings(),
                                        generation, seed, ids);
                    break;
                case StrategyKind::OPRO:
                    made = opro_generate(state.trajectory, gateway_, quota, config_.opro.dropout, seed, generator,
                                         generation, ids);
                    break;
                case StrategyKind::Seed: break;
            }
        } catch (const Error& e) {
            spdlog::warn("generation {}: {} failed ({}: {}); filling its slots with mutations", generation,
                         to_string(kind), error_code_name(e.code()), e.what());
        }
        if (made.size() > quota) made.resize(quota);
        if (made.size() < quota) top_up(kind, quota - made.size(), made);
        for (auto& c : made) children.push_back(std::move(c));
    }
    if (children.size() != config_.population_size)
        throw Error(ErrorCode::InvariantViolation, "generation produced " + std::to_string(children.size()) +
                                                       " children instead of " +
                                                       std::to_string(config_.population_size));
    return children;
}

GenerationState Optimizer::run_generation(GenerationState state) {
    const int generation = state.generation_index + 1;
    const auto before = gateway_.ledger().snapshot();
    IdAllocator ids(state.next_candidate_id);
    emit(state, {{"type", "generation_started"}, {"generation", generation}});

    // Baseline scores children are compared against.
    std::map<CandidateId, Score> known;
    for (const auto& e : state.trajectory.entries()) known[e.id] = e.score;
    for (const auto& p : state.parent_pool) known[p.candidate.id()] = p.score;

    auto children = produce_children(state, generation, ids);
    std::map<CandidateId, Score> parent_scores;
    for (const auto& child : children) {
        const Score* baseline = nullptr;
        for (const auto pid : child.lineage().parent_ids)
            if (const auto it = known.find(pid); it != known.end()) baseline = better_of(baseline, &it->second);
        Json event{{"type", "candidate_created"}, {"generation", generation}, {"candidate", candidate_header(child)}};
        event["parent_score"] = baseline ? Json(*baseline) : Json(nullptr);
        if (baseline) parent_scores[child.id()] = *baseline;
        emit(state, std::move(event));
    }

    std::vector<PromptCandidate> population = std::move(children);
    if (config_.elitism)
        for (const auto& p : state.parent_pool) population.push_back(p.candidate);

    const auto outcome = select(population, derive_seed(config_.seed, static_cast<std::uint64_t>(generation), "selection"));

    std::map<CandidateId, std::size_t> index;
    for (std::size_t i = 0; i < population.size(); ++i) index[population[i].id()] = i;

    std::vector<ScoredCandidate> pool;
    const auto metric = config_.task.metric;
    for (const auto& entry : outcome.ranked) {
        if (entry.samples_seen == 0) continue;
        auto& candidate = population[index.at(entry.id)];
        candidate.add_record({Split::Validation, metric, entry.score, entry.samples_seen, now(), generation});
        Json event{{"type", "candidate_evaluated"},
                   {"generation", generation},
                   {"id", entry.id},
                   {"split", to_string(Split::Validation)},
                   {"score", entry.score}};
        const auto it = parent_scores.find(entry.id);
        event["improvement"] = it != parent_scores.end() ? Json(entry.score.value() - it->second.value()) : Json(nullptr);
        emit(state, std::move(event));

        if (pool.size() < config_.parent_pool_size) pool.push_back({candidate, entry.score});
        state.trajectory.update(candidate.id(), candidate.text(), entry.score);
        if (const auto best = best_score(candidate, Split::Validation, metric.kind))
            state.hall_of_fame.update({candidate.id(), candidate.text(), *best, candidate.generation()});
    }
    if (pool.empty()) throw Error(ErrorCode::InvariantViolation, "selection evaluated no candidate");

    Json pool_json = Json::array();
    for (const auto& p : pool) pool_json.push_back({{"id", p.candidate.id()}, {"score", p.score}});
    emit(state, {{"type", "selection_completed"},
                 {"generation", generation},
                 {"method", to_string(outcome.method)},
                 {"total_calls", outcome.total_calls},
                 {"parent_pool", std::move(pool_json)},
                 {"hall_of_fame", state.hall_of_fame.entries()}});

    state.parent_pool = std::move(pool);
    state.population = std::move(population);
    state.generation_index = generation;
    state.next_candidate_id = ids.peek();

    if (config_.test_eval_every && generation % *config_.test_eval_every == 0) check_test(state, generation, false);

    const auto delta = gateway_.ledger().snapshot() - before;
    accumulate(state.ledger, delta);
    emit(state, {{"type", "generation_completed"}, {"generation", generation}, {"requests", requests_json(delta)}});
    return state;
}

OptimizationReport Optimizer::run(const std::string& seed_prompt) {
    GenerationState state;
    const bool resuming = options_.resume && !options_.checkpoint_path.empty() &&
                          std::filesystem::exists(options_.checkpoint_path);
    if (resuming) {
        state = checkpoint_load(options_.checkpoint_path, config_, options_.allow_config_mismatch);
        spdlog::info("resuming from generation {}", state.generation_index);
        flush_history(state, true);
    } else {
        state = initialize_run(seed_prompt);
        flush_history(state, true);
        if (!options_.checkpoint_path.empty()) checkpoint_save(state, config_, options_.checkpoint_path);
        if (options_.after_generation) options_.after_generation(state);
    }

    while (state.generation_index < config_.generations) {
        state = run_generation(std::move(state));
        flush_history(state, false);
        if (!options_.checkpoint_path.empty()) checkpoint_save(state, config_, options_.checkpoint_path);
        if (options_.after_generation) options_.after_generation(state);
    }

    check_test(state, state.generation_index, true);
    flush_history(state, false);
    return build_report(state.events);
}

}  // namespace gaapo
