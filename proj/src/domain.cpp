#include "gaapo/domain.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "gaapo/error.hpp"

namespace gaapo {

namespace {

template <typename Enum, std::size_t N>
using NameTable = std::array<std::pair<Enum, std::string_view>, N>;

constexpr NameTable<StrategyKind, 6> kStrategyNames{{
    {StrategyKind::Seed, "seed"},
    {StrategyKind::Mutator, "mutator"},
    {StrategyKind::Crossover, "crossover"},
    {StrategyKind::FewShot, "few_shot"},
    {StrategyKind::APO, "apo"},
    {StrategyKind::OPRO, "opro"},
}};

constexpr NameTable<MutationKind, 8> kMutationNames{{
    {MutationKind::InstructionExpansion, "instruction_expansion"},
    {MutationKind::ExpertPersona, "expert_persona"},
    {MutationKind::StructuralVariation, "structural_variation"},
    {MutationKind::ConstraintAddition, "constraint_addition"},
    {MutationKind::CreativeBackstory, "creative_backstory"},
    {MutationKind::TaskDecomposition, "task_decomposition"},
    {MutationKind::ConciseOptimization, "concise_optimization"},
    {MutationKind::RoleAssignment, "role_assignment"},
}};

constexpr NameTable<Split, 3> kSplitNames{{
    {Split::Train, "train"},
    {Split::Validation, "validation"},
    {Split::Test, "test"},
}};

constexpr NameTable<MetricKind, 3> kMetricNames{{
    {MetricKind::StrictSetAccuracy, "strict_set_accuracy"},
    {MetricKind::ExactChoice, "exact_choice"},
    {MetricKind::SemanticEquivalence, "semantic_equivalence"},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(const NameTable<Enum, N>& table, Enum value) {
    for (const auto& [e, name] : table)
        if (e == value) return name;
    return "unknown";
}

template <typename Enum, std::size_t N>
Enum parse_name(const NameTable<Enum, N>& table, std::string_view name, std::string_view what) {
    for (const auto& [e, n] : table)
        if (n == name) return e;
    throw Error(ErrorCode::ParseError, "unknown " + std::string(what) + " '" + std::string(name) + "'");
}

}  // namespace

std::string_view to_string(StrategyKind kind) { return name_of(kStrategyNames, kind); }
std::string_view to_string(MutationKind kind) { return name_of(kMutationNames, kind); }
std::string_view to_string(Split split) { return name_of(kSplitNames, split); }
std::string_view to_string(MetricKind kind) { return name_of(kMetricNames, kind); }

StrategyKind parse_strategy_kind(std::string_view name) { return parse_name(kStrategyNames, name, "strategy"); }
MutationKind parse_mutation_kind(std::string_view name) { return parse_name(kMutationNames, name, "mutation kind"); }
Split parse_split(std::string_view name) { return parse_name(kSplitNames, name, "split"); }
MetricKind parse_metric_kind(std::string_view name) { return parse_name(kMetricNames, name, "metric"); }

std::strong_ordering compare_accuracy(const Score& a, const Score& b) {
    if (a.total == 0 || b.total == 0) {
        const bool a_pos = a.total != 0 && a.correct != 0;
        const bool b_pos = b.total != 0 && b.correct != 0;
        return a_pos <=> b_pos;
    }
    const auto lhs = static_cast<unsigned __int128>(a.correct) * b.total;
    const auto rhs = static_cast<unsigned __int128>(b.correct) * a.total;
    return lhs <=> rhs;
}

std::size_t count_placeholders(std::string_view text) {
    std::size_t count = 0;
    for (auto pos = text.find(kPlaceholder); pos != std::string_view::npos;
         pos = text.find(kPlaceholder, pos + kPlaceholder.size()))
        ++count;
    return count;
}

void validate_lineage(const Lineage& lineage) {
    std::size_t expected = 1;
    switch (lineage.strategy) {
        case StrategyKind::Seed: expected = 0; break;
        case StrategyKind::Crossover: expected = 2; break;
        default: break;
    }
    if (lineage.parent_ids.size() != expected)
        throw Error(ErrorCode::InvalidLineage,
                    std::string(to_string(lineage.strategy)) + " lineage needs " +
                        std::to_string(expected) + " parent(s), got " +
                        std::to_string(lineage.parent_ids.size()));
    if (expected == 2 && lineage.parent_ids[0] == lineage.parent_ids[1])
        throw Error(ErrorCode::InvalidLineage, "crossover parents must be distinct");
    if (lineage.mutation && lineage.strategy != StrategyKind::Mutator)
        throw Error(ErrorCode::InvalidLineage, "mutation subtype only applies to mutator lineage");
}

std::string PromptCandidate::render(std::string_view input) const {
    std::string out = text_;
    if (const auto pos = out.find(kPlaceholder); pos != std::string::npos)
        out.replace(pos, kPlaceholder.size(), input);
    return out;
}

PromptCandidate new_candidate(std::string text, Lineage lineage, int generation, IdAllocator& ids) {
    const auto n = count_placeholders(text);
    if (text.empty() || n != 1)
        throw Error(ErrorCode::MissingPlaceholder,
                    "prompt must contain " + std::string(kPlaceholder) + " exactly once (found " +
                        std::to_string(n) + ")");
    if (generation < 0) throw Error(ErrorCode::InvalidLineage, "negative generation");
    validate_lineage(lineage);
    PromptCandidate c;
    c.id_ = ids.allocate();
    c.text_ = std::move(text);
    c.generation_ = generation;
    c.lineage_ = std::move(lineage);
    return c;
}

int child_generation(std::span<const PromptCandidate* const> parents) {
    int g = -1;
    for (const auto* p : parents) g = std::max(g, p->generation());
    return g + 1;
}

std::optional<Score> best_score(const PromptCandidate& candidate, Split split, MetricKind metric) {
    std::optional<Score> best;
    for (const auto& r : candidate.eval_records()) {
        if (r.split != split || r.metric.kind != metric) continue;
        if (!best || compare_accuracy(r.score, *best) > 0) best = r.score;
    }
    return best;
}

void to_json(Json& j, const CandidateId& id) { j = id.value; }
void from_json(const Json& j, CandidateId& id) { id.value = j.get<std::uint64_t>(); }

void to_json(Json& j, const MetricSpec& m) {
    j = Json{{"kind", to_string(m.kind)}};
    if (!m.judge_model.empty()) j["judge_model"] = m.judge_model;
}

void from_json(const Json& j, MetricSpec& m) {
    m.kind = parse_metric_kind(j.at("kind").get<std::string>());
    m.judge_model = j.value("judge_model", std::string{});
}

void to_json(Json& j, const Score& s) { j = Json{{"correct", s.correct}, {"total", s.total}}; }
void from_json(const Json& j, Score& s) {
    s.correct = j.at("correct").get<std::uint64_t>();
    s.total = j.at("total").get<std::uint64_t>();
}

void to_json(Json& j, const EvalRecord& r) {
    j = Json{{"split", to_string(r.split)},
             {"metric", r.metric},
             {"score", r.score},
             {"sample_count", r.score.total},
             {"llm_calls", r.llm_calls},
             {"generation", r.generation},
             {"timestamp_ms", r.timestamp_ms}};
}

void from_json(const Json& j, EvalRecord& r) {
    r.split = parse_split(j.at("split").get<std::string>());
    r.metric = j.at("metric").get<MetricSpec>();
    r.score = j.at("score").get<Score>();
    r.llm_calls = j.at("llm_calls").get<std::uint64_t>();
    r.generation = j.at("generation").get<int>();
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
}

void to_json(Json& j, const Lineage& l) {
    j = Json{{"strategy", to_string(l.strategy)}, {"parent_ids", l.parent_ids}};
    j["mutation_subtype"] = l.mutation ? Json(to_string(*l.mutation)) : Json(nullptr);
    j["fallback_from"] = l.fallback_from ? Json(to_string(*l.fallback_from)) : Json(nullptr);
}

void from_json(const Json& j, Lineage& l) {
    l.strategy = parse_strategy_kind(j.at("strategy").get<std::string>());
    l.parent_ids = j.at("parent_ids").get<std::vector<CandidateId>>();
    l.mutation.reset();
    l.fallback_from.reset();
    if (const auto it = j.find("mutation_subtype"); it != j.end() && !it->is_null())
        l.mutation = parse_mutation_kind(it->get<std::string>());
    if (const auto it = j.find("fallback_from"); it != j.end() && !it->is_null())
        l.fallback_from = parse_strategy_kind(it->get<std::string>());
}

void to_json(Json& j, const PromptCandidate& c) {
    j = Json{{"id", c.id()},
             {"text", c.text()},
             {"generation", c.generation()},
             {"lineage", c.lineage()},
             {"eval_records", c.eval_records()}};
}

void from_json(const Json& j, PromptCandidate& c) {
    c.id_ = j.at("id").get<CandidateId>();
    c.text_ = j.at("text").get<std::string>();
    c.generation_ = j.at("generation").get<int>();
    c.lineage_ = j.at("lineage").get<Lineage>();
    c.records_ = j.at("eval_records").get<std::vector<EvalRecord>>();
}

}  // namespace gaapo
