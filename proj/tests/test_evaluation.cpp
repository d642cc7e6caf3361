#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gaapo/error.hpp"
#include "gaapo/selection.hpp"
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

EvalSettings multilabel_settings() {
    EvalSettings e;
    e.task = testing::multilabel_task();
    return e;
}

Sample labelled(LabelSet gold) { return {"x", "some input", std::move(gold)}; }

std::vector<PromptCandidate> tagged_population(const std::vector<double>& accuracies, IdAllocator& ids) {
    std::vector<PromptCandidate> out;
    for (std::size_t i = 0; i < accuracies.size(); ++i)
        out.push_back(testing::seed_candidate(testing::tagged_prompt(accuracies[i], i), ids));
    return out;
}

void check_permutation(const SelectionOutcome& outcome, std::span<const PromptCandidate> population) {
    std::set<CandidateId> ranked;
    for (const auto& e : outcome.ranked) CHECK(ranked.insert(e.id).second);
    CHECK(ranked.size() == population.size());
    for (const auto& c : population) CHECK(ranked.count(c.id()) == 1);
}

}  // namespace

TEST_CASE("strict set accuracy") {
    const auto task = testing::multilabel_task();
    CHECK(score_locally("gender, race", LabelSet{"race", "gender"}, task));
    CHECK_FALSE(score_locally("race, gender", LabelSet{"race"}, task));
    CHECK(score_locally("no hate speech detected", LabelSet{}, task));
    CHECK(score_locally("This targets gender and race. ANSWER: gender, race", LabelSet{"gender", "race"}, task));
    CHECK(score_locally("Race is discussed, but ANSWER: none", LabelSet{}, task));
    CHECK(score_locally("ANSWER: Sexual Orientation; national-origin", LabelSet{"sexual_orientation", "national_origin"},
                        task));
    CHECK(code_of([&] { (void)score_locally("B", Choice{"B"}, task); }) == ErrorCode::MetricMismatch);
}

TEST_CASE("label matching respects word boundaries") {
    const auto task = testing::multilabel_task();
    CHECK(std::get<LabelSet>(extract_prediction("what a disgrace", task)).empty());
    CHECK(std::get<LabelSet>(extract_prediction("raced off; nonviolence", task)).empty());
    CHECK(std::get<LabelSet>(extract_prediction("race-based violence.", task)) == LabelSet{"race", "violence"});
    CHECK(std::get<LabelSet>(extract_prediction("<think>maybe religion</think>ANSWER: gender", task)) ==
          LabelSet{"gender"});
}

TEST_CASE("choice extraction") {
    const auto task = testing::choice_task();
    CHECK(std::get<std::string>(extract_prediction("Reasoning...\nANSWER: (b).", task)) == "B");
    CHECK(std::get<std::string>(extract_prediction("I think it is\nC", task)) == "C");
    CHECK(std::get<std::string>(extract_prediction("ANSWER:", task)).empty());
    CHECK(score_locally("ANSWER: b", Choice{"B"}, task));
    CHECK_FALSE(score_locally("ANSWER: A", Choice{"B"}, task));
}

TEST_CASE("semantic equivalence through a letter-keyed mock judge") {
    const auto task = testing::choice_task(MetricKind::SemanticEquivalence);
    EvalSettings settings;
    settings.task = task;
    auto gateway = testing::mock_gateway(letter_judge);
    const Sample sample{"q", "What is 6*7?\nA) 41\nB) 42", Choice{"B) 42"}};
    CHECK(score_sample("The answer is B", sample, settings, gateway.get()));
    CHECK_FALSE(score_sample("The answer is A", sample, settings, gateway.get()));
    CHECK(gateway->ledger().snapshot().of(Purpose::Judging).requests == 2);
    CHECK(code_of([&] { (void)score_sample("B", sample, settings, nullptr); }) == ErrorCode::ConfigError);
}

TEST_CASE("judge verdict parsing") {
    CHECK(parse_judge_verdict("VERDICT: YES"));
    CHECK_FALSE(parse_judge_verdict("Thinking.\nVERDICT: no"));
    CHECK(parse_judge_verdict("yes"));
    CHECK(code_of([] { (void)parse_judge_verdict("maybe"); }) == ErrorCode::JudgeUnparseable);
}

TEST_CASE("unparseable judge output counts as incorrect") {
    auto settings = EvalSettings{};
    settings.task = testing::choice_task(MetricKind::SemanticEquivalence);
    const auto samples = testing::choice_samples(6, 2);
    auto gateway = testing::mock_gateway([](const CompletionRequest& r) -> std::string {
        if (r.purpose == Purpose::Judging) return "hmm";
        return "ANSWER: A";
    });
    IdAllocator ids;
    const auto result = evaluate_prompt(testing::seed_candidate("Q: {input}", ids), samples, settings, *gateway);
    CHECK(result.score == Score{0, 6});
    CHECK(result.llm_calls == 12);
    for (const auto& s : result.per_sample) CHECK(s.judge_unparseable);
}

TEST_CASE("evaluate_prompt issues one prediction per sample") {
    const auto samples = testing::synthetic_samples(50, 3);
    auto gateway = testing::mock_gateway(testing::all_correct_oracle(samples));
    IdAllocator ids;
    const auto candidate = testing::seed_candidate(testing::kEthosSeedPrompt, ids);
    const auto result = evaluate_prompt(candidate, samples, multilabel_settings(), *gateway);
    CHECK(result.llm_calls == 50);
    CHECK(result.score == Score{50, 50});
    CHECK(result.score.value() == 1.0);
    REQUIRE(result.per_sample.size() == 50);
    for (std::size_t i = 0; i < samples.size(); ++i) CHECK(result.per_sample[i].sample_id == samples[i].id);
    CHECK(gateway->ledger().snapshot().of(Purpose::Prediction).requests == 50);
}

TEST_CASE("prediction requests carry the answer format and the substituted input") {
    const auto samples = testing::synthetic_samples(1, 3);
    const auto request = prediction_request("Classify: {input}", samples[0], multilabel_settings());
    REQUIRE(request.messages.size() == 2);
    CHECK(request.messages[0].role == Role::System);
    CHECK(request.messages[0].text.find("sexual_orientation") != std::string::npos);
    CHECK(request.messages[1].text == "Classify: " + samples[0].input);
    CHECK(request.purpose == Purpose::Prediction);
    CHECK(request.temperature == 0.0);
}

TEST_CASE("a keyword-free prompt scores near the oracle base rate") {
    const auto samples = testing::synthetic_samples(50, 6);
    SyntheticOracleConfig config;
    IdAllocator ids;
    const auto candidate = testing::seed_candidate(testing::kEthosSeedPrompt, ids);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        config.seed = seed;
        auto gateway = testing::mock_gateway(testing::keyword_oracle(samples, config));
        const auto result = evaluate_prompt(candidate, samples, multilabel_settings(), *gateway);
        // Binomial(50, 0.3): 0.3 +- 0.15 is more than 2.3 sigma.
        CHECK(std::abs(result.score.value() - config.base_probability) <= 0.15);
    }
}

TEST_CASE("failed predictions count as incorrect and a majority of failures aborts") {
    const auto samples = testing::synthetic_samples(10, 3);
    auto oracle = testing::all_correct_oracle(samples);
    auto failing_for = [&](std::size_t bad) {
        return testing::mock_gateway([=](const CompletionRequest& r) -> std::string {
            for (std::size_t i = 0; i < bad; ++i)
                if (r.user_text().find(samples[i].input) != std::string::npos)
                    throw BackendFailure(ErrorCode::BackendUnavailable, false, "down");
            return oracle(r);
        });
    };
    IdAllocator ids;
    const auto candidate = testing::seed_candidate("Classify: {input}", ids);
    auto half = failing_for(5);
    const auto result = evaluate_prompt(candidate, samples, multilabel_settings(), *half);
    CHECK(result.score == Score{5, 10});
    CHECK(result.failed_calls == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(result.per_sample[i].failed);

    auto most = failing_for(6);
    CHECK(code_of([&] { (void)evaluate_prompt(candidate, samples, multilabel_settings(), *most); }) ==
          ErrorCode::BackendUnavailable);
}

TEST_CASE("repeated evaluations score every repetition") {
    const auto samples = testing::synthetic_samples(8, 3);
    auto gateway = testing::mock_gateway(testing::all_correct_oracle(samples));
    auto settings = multilabel_settings();
    settings.repeats = 2;
    IdAllocator ids;
    const auto result = evaluate_prompt(testing::seed_candidate("C: {input}", ids), samples, settings, *gateway);
    CHECK(result.score == Score{16, 16});
    CHECK(result.llm_calls == 16);
}

TEST_CASE("select_complete budgets and ties") {
    const auto samples = testing::synthetic_samples(50, 4);
    testing::TaggedAccuracyOracle oracle(samples, 1);
    auto gateway = testing::mock_gateway(oracle.as_mock());
    IdAllocator ids;
    std::vector<double> acc(50);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = 0.02 * static_cast<double>(i);
    const auto population = tagged_population(acc, ids);
    const auto before = gateway->ledger().snapshot();
    const auto outcome = select_complete(population, samples, multilabel_settings(), *gateway);
    CHECK(outcome.total_calls == 2500);
    CHECK((gateway->ledger().snapshot() - before).of(Purpose::Prediction).requests == 2500);
    check_permutation(outcome, population);

    const std::vector<Sample> one(samples.begin(), samples.begin() + 1);
    const std::vector<PromptCandidate> single(population.begin(), population.begin() + 1);
    CHECK(select_complete(single, one, multilabel_settings(), *gateway).total_calls == 1);

    // Identical prompts tie; the lower id ranks first.
    const auto twin_a = testing::seed_candidate(testing::tagged_prompt(0.5, 900), ids);
    const auto twin_b = testing::seed_candidate(testing::tagged_prompt(0.5, 900), ids);
    const std::vector<PromptCandidate> twins{twin_b, twin_a};
    const auto tied = select_complete(twins, samples, multilabel_settings(), *gateway);
    CHECK(tied.ranked[0].score == tied.ranked[1].score);
    CHECK(tied.ranked[0].id == twin_a.id());
}

TEST_CASE("complete ranking equals a brute-force sort of evaluate_prompt accuracies") {
    const auto samples = testing::synthetic_samples(40, 9);
    testing::TaggedAccuracyOracle oracle(samples, 77);
    auto gateway = testing::mock_gateway(oracle.as_mock());
    IdAllocator ids;
    const auto population = tagged_population({0.3, 0.7, 0.5, 0.5, 0.9, 0.1, 0.6, 0.65, 0.2, 0.4}, ids);
    const auto outcome = select_complete(population, samples, multilabel_settings(), *gateway);

    std::vector<std::pair<Score, CandidateId>> brute;
    for (const auto& c : population)
        brute.emplace_back(evaluate_prompt(c, samples, multilabel_settings(), *gateway).score, c.id());
    std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
        const double va = static_cast<double>(a.first.correct) / static_cast<double>(a.first.total);
        const double vb = static_cast<double>(b.first.correct) / static_cast<double>(b.first.total);
        if (va != vb) return va > vb;
        return a.second < b.second;
    });
    REQUIRE(outcome.ranked.size() == brute.size());
    for (std::size_t i = 0; i < brute.size(); ++i) {
        CHECK(outcome.ranked[i].id == brute[i].second);
        CHECK(outcome.ranked[i].score == brute[i].first);
    }
}

TEST_CASE("successive halving schedule and budget") {
    HalvingConfig config;
    config.target_survivors = 7;
    CHECK(halving_schedule(50, config) == std::vector<std::size_t>{50, 30, 18, 11, 7});
    CHECK(fraction_of(0.2, 50) == 10);
    CHECK(fraction_of(0.2, 51) == 11);

    const auto samples = testing::synthetic_samples(50, 4);
    testing::TaggedAccuracyOracle oracle(samples, 2);
    auto gateway = testing::mock_gateway(oracle.as_mock());
    IdAllocator ids;
    std::vector<double> acc(50);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = 0.3 + 0.01 * static_cast<double>(i);
    const auto population = tagged_population(acc, ids);
    const auto before = gateway->ledger().snapshot();
    const auto outcome = select_successive_halving(population, samples, config, multilabel_settings(), *gateway, 5);
    CHECK(outcome.total_calls == 500 + 300 + 180 + 110);
    CHECK((gateway->ledger().snapshot() - before).of(Purpose::Prediction).requests == 1090);
    check_permutation(outcome, population);
    // Survivors saw all four batches, the first eliminated only one.
    // Survivors and last-round losers saw all four batches; each earlier
    // elimination round saw one batch less.
    for (std::size_t i = 0; i < 11; ++i) CHECK(outcome.ranked[i].samples_seen == 40);
    for (std::size_t i = 11; i < 18; ++i) CHECK(outcome.ranked[i].samples_seen == 30);
    for (std::size_t i = 18; i < 30; ++i) CHECK(outcome.ranked[i].samples_seen == 20);
    for (std::size_t i = 30; i < 50; ++i) CHECK(outcome.ranked[i].samples_seen == 10);
    for (std::size_t i = 1; i < 7; ++i)
        CHECK(compare_accuracy(outcome.ranked[i - 1].score, outcome.ranked[i].score) >= 0);
}

TEST_CASE("successive halving edge cases") {
    const auto samples = testing::synthetic_samples(20, 4);
    auto gateway = testing::mock_gateway(testing::all_correct_oracle(samples));
    IdAllocator ids;
    const auto population = tagged_population({0.5, 0.6, 0.7, 0.8, 0.9}, ids);
    HalvingConfig config;
    config.target_survivors = 5;
    const auto none = select_successive_halving(population, samples, config, multilabel_settings(), *gateway, 1);
    CHECK(none.total_calls == 0);
    CHECK(gateway->ledger().snapshot().total().requests == 0);
    check_permutation(none, population);

    config.target_survivors = 4;
    CHECK(halving_schedule(5, config) == std::vector<std::size_t>{5, 4});
    config.elimination_fraction = 0.9;
    config.target_survivors = 3;
    CHECK(halving_schedule(10, config) == std::vector<std::size_t>{10, 3});

    config.target_survivors = 6;
    CHECK(code_of([&] {
              (void)select_successive_halving(population, samples, config, multilabel_settings(), *gateway, 1);
          }) == ErrorCode::ConfigError);
    HalvingConfig degenerate;
    degenerate.batch_fraction = 0.0;
    CHECK(code_of([&] { degenerate.validate(); }) == ErrorCode::ConfigError);
    degenerate = {};
    degenerate.elimination_fraction = 1.0;
    CHECK(code_of([&] { degenerate.validate(); }) == ErrorCode::ConfigError);
}

TEST_CASE("bandit budget and single arm") {
    const auto samples = testing::synthetic_samples(50, 4);
    testing::TaggedAccuracyOracle oracle(samples, 3);
    auto gateway = testing::mock_gateway(oracle.as_mock());
    IdAllocator ids;
    std::vector<double> acc(50, 0.5);
    const auto population = tagged_population(acc, ids);
    const auto before = gateway->ledger().snapshot();
    const auto outcome = select_bandit_ucbe(population, samples, {}, multilabel_settings(), *gateway, 8);
    CHECK(outcome.total_calls == 1500);
    CHECK((gateway->ledger().snapshot() - before).of(Purpose::Prediction).requests == 1500);
    check_permutation(outcome, population);

    const std::vector<PromptCandidate> single(population.begin(), population.begin() + 1);
    const auto alone = select_bandit_ucbe(single, samples, {}, multilabel_settings(), *gateway, 8);
    REQUIRE(alone.ranked.size() == 1);
    CHECK(alone.ranked[0].samples_seen == 5 * 15);
    CHECK(alone.total_calls == 75);
}

TEST_CASE("UCB index") {
    CHECK(std::isinf(ucb_index({}, 1.0)));
    CHECK(ucb_index({5, 10}, 1.0) == doctest::Approx(0.5 + std::sqrt(0.1)));
    for (std::uint64_t n = 1; n < 200; ++n)
        CHECK(ucb_index({n, 2 * n}, 1.0) > ucb_index({n + 1, 2 * (n + 1)}, 1.0));
}

namespace {

int bandit_hits(std::size_t arms, std::uint64_t salt_base) {
    const auto samples = testing::synthetic_samples(50, 4);
    int hits = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        testing::TaggedAccuracyOracle oracle(samples, salt_base + trial);
        auto gateway = testing::mock_gateway(oracle.as_mock(), 1);
        IdAllocator ids;
        std::vector<double> acc(arms, 0.5);
        const auto best = static_cast<std::size_t>(mix_seed(trial) % acc.size());
        acc[best] = 0.8;
        const auto population = tagged_population(acc, ids);
        const auto outcome = select_bandit_ucbe(population, samples, {}, multilabel_settings(), *gateway, trial);
        hits += outcome.ranked.front().id == population[best].id() ? 1 : 0;
    }
    return hits;
}

}  // namespace

TEST_CASE("bandit identifies one 0.8 arm among nineteen 0.5 arms") {
    const int hits = bandit_hits(20, 1000);
    MESSAGE("best arm ranked first in ", hits, " of 100 trials");
    CHECK(hits >= 90);
}

TEST_CASE("bandit with 50 arms and defaults") {
    // Only 20 of 50 arms are scored per round, so the first round may skip the
    // best arm entirely; the hit rate is lower than with 20 arms.
    const int hits = bandit_hits(50, 2000);
    MESSAGE("best arm ranked first in ", hits, " of 100 trials");
    CHECK(hits >= 80);
}

TEST_CASE("selection method names") {
    CHECK(parse_selection_method("all") == SelectionMethod::Complete);
    CHECK(parse_selection_method("sh") == SelectionMethod::SuccessiveHalving);
    CHECK(parse_selection_method("bandit") == SelectionMethod::Bandit);
    CHECK(code_of([] { (void)parse_selection_method("greedy"); }) == ErrorCode::ConfigError);
}
