#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gaapo {

using Json = nlohmann::json;

/// The single input placeholder every prompt template carries.
inline constexpr std::string_view kPlaceholder = "{input}";

/// Run-scoped candidate identifier. Ordering is creation order and doubles as
/// the deterministic tie-breaker in every ranking.
struct CandidateId {
    std::uint64_t value = 0;
    friend auto operator<=>(const CandidateId&, const CandidateId&) = default;
};

/// Hands out unique ids for one run. Thread-safe.
class IdAllocator {
public:
    explicit IdAllocator(std::uint64_t next = 1) : next_(next) {}
    CandidateId allocate() { return CandidateId{next_.fetch_add(1, std::memory_order_relaxed)}; }
    [[nodiscard]] std::uint64_t peek() const { return next_.load(std::memory_order_relaxed); }
    void reset(std::uint64_t next) { next_.store(next, std::memory_order_relaxed); }

private:
    std::atomic<std::uint64_t> next_;
};

enum class StrategyKind { Seed, Mutator, Crossover, FewShot, APO, OPRO };

/// Strategies that produce children, in merge order.
inline constexpr StrategyKind kGenerativeStrategies[] = {
    StrategyKind::Mutator, StrategyKind::Crossover, StrategyKind::FewShot,
    StrategyKind::APO, StrategyKind::OPRO};

enum class MutationKind {
    InstructionExpansion,
    ExpertPersona,
    StructuralVariation,
    ConstraintAddition,
    CreativeBackstory,
    TaskDecomposition,
    ConciseOptimization,
    RoleAssignment,
};

inline constexpr MutationKind kAllMutationKinds[] = {
    MutationKind::InstructionExpansion, MutationKind::ExpertPersona,
    MutationKind::StructuralVariation,  MutationKind::ConstraintAddition,
    MutationKind::CreativeBackstory,    MutationKind::TaskDecomposition,
    MutationKind::ConciseOptimization,  MutationKind::RoleAssignment};

enum class Split { Train, Validation, Test };

enum class MetricKind { StrictSetAccuracy, ExactChoice, SemanticEquivalence };

struct MetricSpec {
    MetricKind kind = MetricKind::StrictSetAccuracy;
    std::string judge_model;  // required for SemanticEquivalence

    friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

std::string_view to_string(StrategyKind kind);
std::string_view to_string(MutationKind kind);
std::string_view to_string(Split split);
std::string_view to_string(MetricKind kind);
StrategyKind parse_strategy_kind(std::string_view name);
MutationKind parse_mutation_kind(std::string_view name);
Split parse_split(std::string_view name);
MetricKind parse_metric_kind(std::string_view name);

/// Exact accuracy as a (correct, total) pair. The real-valued score is derived
/// on demand so rankings never depend on accumulated rounding.
struct Score {
    std::uint64_t correct = 0;
    std::uint64_t total = 0;

    [[nodiscard]] double value() const {
        return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    }
    Score& operator+=(const Score& other) {
        correct += other.correct;
        total += other.total;
        return *this;
    }
    friend bool operator==(const Score&, const Score&) = default;
};

/// Compares accuracies exactly (cross-multiplication). Empty scores rank as 0.
std::strong_ordering compare_accuracy(const Score& a, const Score& b);

struct EvalRecord {
    Split split = Split::Validation;
    MetricSpec metric;
    Score score;  // score.total is the sample count
    std::uint64_t llm_calls = 0;
    std::int64_t timestamp_ms = 0;
    int generation = 0;

    friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct Lineage {
    StrategyKind strategy = StrategyKind::Seed;
    std::vector<CandidateId> parent_ids;
    std::optional<MutationKind> mutation;
    /// Set when the child filled a slot of another strategy that could not deliver.
    std::optional<StrategyKind> fallback_from;

    friend bool operator==(const Lineage&, const Lineage&) = default;
};

/// Throws InvalidLineage when the parent count does not match the strategy.
void validate_lineage(const Lineage& lineage);

std::size_t count_placeholders(std::string_view text);

class PromptCandidate {
public:
    PromptCandidate() = default;

    [[nodiscard]] CandidateId id() const { return id_; }
    [[nodiscard]] const std::string& text() const { return text_; }
    [[nodiscard]] int generation() const { return generation_; }
    [[nodiscard]] const Lineage& lineage() const { return lineage_; }
    [[nodiscard]] const std::vector<EvalRecord>& eval_records() const { return records_; }

    void add_record(EvalRecord record) { records_.push_back(std::move(record)); }

    /// Substitutes the sample input for the placeholder.
    [[nodiscard]] std::string render(std::string_view input) const;

    friend bool operator==(const PromptCandidate&, const PromptCandidate&) = default;

    friend PromptCandidate new_candidate(std::string text, Lineage lineage, int generation,
                                         IdAllocator& ids);
    friend void from_json(const Json& j, PromptCandidate& c);

private:
    CandidateId id_;
    std::string text_;
    int generation_ = 0;
    Lineage lineage_;
    std::vector<EvalRecord> records_;
};

/// Validated constructor. Throws MissingPlaceholder unless the text contains
/// the placeholder exactly once, InvalidLineage on malformed lineage.
PromptCandidate new_candidate(std::string text, Lineage lineage, int generation, IdAllocator& ids);

/// Lower bound for a child's generation: one past the oldest-generation parent.
int child_generation(std::span<const PromptCandidate* const> parents);

/// Highest score among records matching split and metric kind.
std::optional<Score> best_score(const PromptCandidate& candidate, Split split, MetricKind metric);

void to_json(Json& j, const CandidateId& id);
void from_json(const Json& j, CandidateId& id);
void to_json(Json& j, const MetricSpec& m);
void from_json(const Json& j, MetricSpec& m);
void to_json(Json& j, const Score& s);
void from_json(const Json& j, Score& s);
void to_json(Json& j, const EvalRecord& r);
void from_json(const Json& j, EvalRecord& r);
void to_json(Json& j, const Lineage& l);
void from_json(const Json& j, Lineage& l);
void to_json(Json& j, const PromptCandidate& c);
void from_json(const Json& j, PromptCandidate& c);

}  // namespace gaapo
