#include <doctest.h>

#include "gaapo/domain.hpp"
#include "gaapo/error.hpp"
#include "gaapo/rng.hpp"
#include "support.hpp"

using namespace gaapo;

namespace {

ErrorCode code_of(const auto& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvariantViolation;
}

EvalRecord record(Split split, std::uint64_t correct, std::uint64_t total) {
    return EvalRecord{split, MetricSpec{}, Score{correct, total}, total, 0, 0};
}

}  // namespace

TEST_CASE("new_candidate builds a seed with no records") {
    IdAllocator ids;
    const auto c = new_candidate("Classify: {input}", Lineage{}, 0, ids);
    CHECK(c.generation() == 0);
    CHECK(c.eval_records().empty());
    CHECK(c.lineage().strategy == StrategyKind::Seed);
    CHECK(c.render("hello") == "Classify: hello");
}

TEST_CASE("placeholder must appear exactly once") {
    IdAllocator ids;
    CHECK(code_of([&] { (void)new_candidate("Classify {input} then {input}", Lineage{}, 0, ids); }) ==
          ErrorCode::MissingPlaceholder);
    CHECK(code_of([&] { (void)new_candidate("no placeholder", Lineage{}, 0, ids); }) == ErrorCode::MissingPlaceholder);
    CHECK(code_of([&] { (void)new_candidate("", Lineage{}, 0, ids); }) == ErrorCode::MissingPlaceholder);
}

TEST_CASE("lineage parent counts are enforced") {
    IdAllocator ids;
    const auto a = testing::seed_candidate("A {input}", ids);
    const auto b = testing::seed_candidate("B {input}", ids);
    CHECK(code_of([&] { (void)new_candidate("C {input}", Lineage{StrategyKind::Crossover, {a.id()}}, 1, ids); }) ==
          ErrorCode::InvalidLineage);
    CHECK(code_of([&] {
              (void)new_candidate("C {input}", Lineage{StrategyKind::Crossover, {a.id(), a.id()}}, 1, ids);
          }) == ErrorCode::InvalidLineage);
    CHECK(code_of([&] { (void)new_candidate("C {input}", Lineage{StrategyKind::Mutator, {}}, 1, ids); }) ==
          ErrorCode::InvalidLineage);
    CHECK(code_of([&] { (void)new_candidate("C {input}", Lineage{StrategyKind::Seed, {a.id()}}, 1, ids); }) ==
          ErrorCode::InvalidLineage);
    CHECK_NOTHROW((void)new_candidate("C {input}", Lineage{StrategyKind::Crossover, {a.id(), b.id()}}, 1, ids));
}

TEST_CASE("child generation is one past the oldest parent") {
    IdAllocator ids;
    const auto p3 = new_candidate("x {input}", Lineage{}, 3, ids);
    const auto p5 = new_candidate("y {input}", Lineage{}, 5, ids);
    const PromptCandidate* parents[] = {&p3, &p5};
    CHECK(child_generation(parents) == 6);
}

TEST_CASE("ids are unique across many allocations") {
    IdAllocator ids;
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 5000; ++i) CHECK(seen.insert(ids.allocate().value).second);
}

TEST_CASE("best_score") {
    IdAllocator ids;
    auto c = testing::seed_candidate("Classify: {input}", ids);
    CHECK_FALSE(best_score(c, Split::Validation, MetricKind::StrictSetAccuracy).has_value());
    c.add_record(record(Split::Test, 9, 10));
    CHECK_FALSE(best_score(c, Split::Validation, MetricKind::StrictSetAccuracy).has_value());
    c.add_record(record(Split::Validation, 4, 10));
    c.add_record(record(Split::Validation, 5, 10));
    const auto best = best_score(c, Split::Validation, MetricKind::StrictSetAccuracy);
    REQUIRE(best);
    CHECK(best->value() == doctest::Approx(0.5));
    CHECK_FALSE(best_score(c, Split::Validation, MetricKind::ExactChoice).has_value());
}

TEST_CASE("compare_accuracy is exact") {
    CHECK(compare_accuracy({1, 3}, {2, 6}) == std::strong_ordering::equal);
    CHECK(compare_accuracy({1, 3}, {33, 100}) == std::strong_ordering::greater);
    CHECK(compare_accuracy({0, 0}, {0, 5}) == std::strong_ordering::equal);
    CHECK(compare_accuracy({1, 2}, {0, 0}) == std::strong_ordering::greater);
}

TEST_CASE("enum names round-trip") {
    for (const auto k : kAllMutationKinds) CHECK(parse_mutation_kind(to_string(k)) == k);
    for (const auto k : {StrategyKind::Seed, StrategyKind::Mutator, StrategyKind::Crossover, StrategyKind::FewShot,
                         StrategyKind::APO, StrategyKind::OPRO})
        CHECK(parse_strategy_kind(to_string(k)) == k);
    for (const auto s : {Split::Train, Split::Validation, Split::Test}) CHECK(parse_split(to_string(s)) == s);
    CHECK(std::size(kAllMutationKinds) == 8);
}

TEST_CASE("property: candidates survive a JSON round-trip") {
    Rng rng(17);
    IdAllocator ids;
    std::vector<PromptCandidate> made{testing::seed_candidate("Seed {input}", ids)};
    for (int i = 0; i < 300; ++i) {
        const auto& parent = made[rng.uniform_index(made.size())];
        const auto& other = made[rng.uniform_index(made.size())];
        const int gen = std::max(parent.generation(), other.generation()) + 1;
        Lineage lineage;
        if (other.id() != parent.id() && rng.bernoulli(0.3)) {
            lineage = {StrategyKind::Crossover, {parent.id(), other.id()}, std::nullopt, std::nullopt};
        } else {
            const auto kind = kAllMutationKinds[rng.uniform_index(8)];
            const bool fallback = rng.bernoulli(0.2);
            lineage = {StrategyKind::Mutator, {parent.id()}, kind,
                       fallback ? std::optional<StrategyKind>(StrategyKind::APO) : std::nullopt};
        }
        auto child = new_candidate("Variant " + std::to_string(i) + " \"quoted\"\n{input}", lineage, gen, ids);
        for (std::uint64_t r = 0; r < rng.uniform_index(3); ++r)
            child.add_record(EvalRecord{Split::Validation, MetricSpec{MetricKind::SemanticEquivalence, "judge"},
                                        Score{rng.uniform_index(51), 50}, 50 + r, 1700000000000 + i, gen});
        const Json j = child;
        const auto back = j.get<PromptCandidate>();
        CHECK(back == child);
        CHECK(Json(back).dump() == j.dump());
        made.push_back(std::move(child));
    }
    // Lineage is a DAG ordered by generation.
    std::map<std::uint64_t, int> generation_of;
    for (const auto& c : made) generation_of[c.id().value] = c.generation();
    for (const auto& c : made)
        for (const auto pid : c.lineage().parent_ids) CHECK(generation_of.at(pid.value) < c.generation());
}
