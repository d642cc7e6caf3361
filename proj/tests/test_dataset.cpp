#include <doctest.h>

#include <algorithm>
#include <set>

#include "gaapo/dataset.hpp"
#include "gaapo/error.hpp"
#include "gaapo/rng.hpp"
#include "support.hpp"

using namespace gaapo;
using testing::TempDir;

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

std::string error_text(const auto& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

ColumnMapping columns(std::string input, std::string gold, std::string id = "id") {
    ColumnMapping m;
    m.id_column = std::move(id);
    m.input_column = std::move(input);
    m.gold_column = std::move(gold);
    return m;
}

std::set<std::string> ids_of(const std::vector<Sample>& samples) {
    std::set<std::string> out;
    for (const auto& s : samples) out.insert(s.id);
    return out;
}

}  // namespace

TEST_CASE("parse_label_set") {
    const auto& vocab = testing::ethos_vocabulary();
    CHECK(parse_label_set("Race, gender, race", vocab) == LabelSet{"race", "gender"});
    CHECK(parse_label_set("", vocab).empty());
    CHECK(parse_label_set("  ", vocab).empty());
    CHECK(parse_label_set("none", vocab).empty());
    // Hand-parsed list for the semicolon form.
    CHECK(parse_label_set("violence; religion", vocab) == LabelSet{"violence", "religion"});
    CHECK(parse_label_set(" SEXUAL_ORIENTATION ;national_origin,", vocab) ==
          LabelSet{"sexual_orientation", "national_origin"});
    CHECK(code_of([&] { (void)parse_label_set("race, color", vocab); }) == ErrorCode::VocabularyViolation);
    CHECK(error_text([&] { (void)parse_label_set("race, color, size", vocab); }).find("'color' 'size'") !=
          std::string::npos);
}

TEST_CASE("property: parse_label_set is idempotent on canonical renderings") {
    const auto& vocab = testing::ethos_vocabulary();
    for (unsigned mask = 0; mask < (1u << vocab.size()); ++mask) {
        LabelSet set;
        for (std::size_t i = 0; i < vocab.size(); ++i)
            if (mask & (1u << i)) set.insert(vocab[i]);
        const auto once = parse_label_set(render_gold(set), vocab);
        CHECK(once == set);
        CHECK(parse_label_set(render_gold(once), vocab) == once);
    }
}

TEST_CASE("load_dataset reads ETHOS-style CSV") {
    TempDir dir;
    testing::write_file(dir / "d.csv",
                        "id,comment,labels\n"
                        "a1,\"You people, all of you\",\"gender,race\"\n"
                        "a2,\"multi\nline\",\n"
                        "a3,plain text,violence\n");
    const auto samples = load_dataset(dir / "d.csv", testing::multilabel_task(), columns("comment", "labels"));
    REQUIRE(samples.size() == 3);
    CHECK(samples[0].id == "a1");
    CHECK(samples[0].input == "You people, all of you");
    CHECK(std::get<LabelSet>(samples[0].gold) == LabelSet{"gender", "race"});
    CHECK(samples[1].input == "multi\nline");
    CHECK(std::get<LabelSet>(samples[1].gold).empty());
    CHECK(std::get<LabelSet>(samples[2].gold) == LabelSet{"violence"});
}

TEST_CASE("load_dataset rejects out-of-vocabulary labels with the row number") {
    TempDir dir;
    testing::write_file(dir / "d.csv", "id,text,labels\nx,ok,race\ny,bad,color\n");
    const auto fn = [&] { (void)load_dataset(dir / "d.csv", testing::multilabel_task(), columns("text", "labels")); };
    CHECK(code_of(fn) == ErrorCode::VocabularyViolation);
    CHECK(error_text(fn).find("row 2") != std::string::npos);
}

TEST_CASE("load_dataset aborts on malformed rows") {
    TempDir dir;
    testing::write_file(dir / "d.csv", "id,text,labels\nx,ok\n");
    CHECK(code_of([&] {
              (void)load_dataset(dir / "d.csv", testing::multilabel_task(), columns("text", "labels"));
          }) == ErrorCode::ParseError);
    testing::write_file(dir / "e.csv", "id,text,labels\nx,,race\n");
    CHECK(code_of([&] {
              (void)load_dataset(dir / "e.csv", testing::multilabel_task(), columns("text", "labels"));
          }) == ErrorCode::ParseError);
}

TEST_CASE("load_dataset reads MCQ JSON lines") {
    TempDir dir;
    testing::write_file(dir / "q.jsonl",
                        "{\"qid\": 1, \"question\": \"2+2?\\nA) 3\\nB) 4\", \"answer\": \"B\"}\n\n"
                        "{\"qid\": 2, \"question\": \"Capital?\", \"answer\": \"C\"}\n");
    const auto samples = load_dataset(dir / "q.jsonl", testing::choice_task(), columns("question", "answer", "qid"));
    REQUIRE(samples.size() == 2);
    CHECK(std::get<Choice>(samples[0].gold).value == "B");
    CHECK(samples[0].id == "1");
    CHECK(samples[1].input == "Capital?");
}

TEST_CASE("load_dataset supports one indicator column per label") {
    TempDir dir;
    testing::write_file(dir / "d.csv", "comment,violence,race,gender\nhello,0,1,1\nworld,0.0,0,0\n");
    auto task = testing::multilabel_task();
    ColumnMapping m;
    m.input_column = "comment";
    m.gold_columns = {"violence", "race", "gender"};
    const auto samples = load_dataset(dir / "d.csv", task, m);
    REQUIRE(samples.size() == 2);
    CHECK(std::get<LabelSet>(samples[0].gold) == LabelSet{"race", "gender"});
    CHECK(std::get<LabelSet>(samples[1].gold).empty());
    CHECK(samples[0].id == "row-1");
}

TEST_CASE("split_dataset") {
    const auto samples = testing::synthetic_samples(300, 1);
    const auto splits = split_dataset(samples, {50, 50, 200}, 7);
    CHECK(splits.train.size() == 50);
    CHECK(splits.validation.size() == 50);
    CHECK(splits.test.size() == 200);
    std::set<std::string> all;
    for (const auto* part : {&splits.train, &splits.validation, &splits.test})
        for (const auto& s : *part) CHECK(all.insert(s.id).second);
    CHECK(all.size() == 300);

    const auto empty = split_dataset(samples, {0, 0, 0}, 7);
    CHECK(empty.train.empty());
    CHECK(empty.validation.empty());
    CHECK(empty.test.empty());

    const auto gpqa = testing::synthetic_samples(198, 2);
    CHECK(code_of([&] { (void)split_dataset(gpqa, {50, 50, 200}, 7); }) == ErrorCode::InsufficientSamples);
    const auto fitted = fit_split_sizes(gpqa.size(), {50, 50, 200});
    CHECK(fitted == SplitSizes{50, 50, 98});
    CHECK(split_dataset(gpqa, fitted, 7).test.size() == 98);
}

TEST_CASE("split slices come from one seeded shuffle") {
    // Independent oracle: replay the documented procedure with the same Rng.
    const auto samples = testing::synthetic_samples(40, 3);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(21);
    rng.shuffle(order);
    const auto splits = split_dataset(samples, {5, 10, 15}, 21);
    for (std::size_t i = 0; i < 5; ++i) CHECK(splits.train[i] == samples[order[i]]);
    for (std::size_t i = 0; i < 10; ++i) CHECK(splits.validation[i] == samples[order[5 + i]]);
    for (std::size_t i = 0; i < 15; ++i) CHECK(splits.test[i] == samples[order[15 + i]]);
}

TEST_CASE("property: splits are pure, disjoint and drawn from the source") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = 1 + rng.uniform_index(120);
        const auto samples = testing::synthetic_samples(n, trial);
        const auto a = rng.uniform_index(n + 1);
        const auto b = rng.uniform_index(n - a + 1);
        const auto c = rng.uniform_index(n - a - b + 1);
        const SplitSizes sizes{a, b, c};
        const auto seed = rng.next_u64();
        const auto first = split_dataset(samples, sizes, seed);
        const auto second = split_dataset(samples, sizes, seed);
        CHECK(first.train == second.train);
        CHECK(first.validation == second.validation);
        CHECK(first.test == second.test);

        const auto source = ids_of(samples);
        std::set<std::string> seen;
        for (const auto* part : {&first.train, &first.validation, &first.test})
            for (const auto& s : *part) {
                CHECK(source.count(s.id) == 1);
                CHECK(seen.insert(s.id).second);
            }
        CHECK(seen.size() == a + b + c);
    }
}

TEST_CASE("task validation") {
    auto task = testing::multilabel_task();
    CHECK_NOTHROW(task.validate());
    task.label_vocabulary.reset();
    CHECK(code_of([&] { task.validate(); }) == ErrorCode::ConfigError);
    auto mcq = testing::choice_task(MetricKind::StrictSetAccuracy);
    CHECK(code_of([&] { mcq.validate(); }) == ErrorCode::MetricMismatch);
    auto judged = testing::choice_task(MetricKind::SemanticEquivalence);
    judged.metric.judge_model.clear();
    CHECK(code_of([&] { judged.validate(); }) == ErrorCode::ConfigError);
}

TEST_CASE("dataset manifest resolves the data path") {
    TempDir dir;
    testing::write_file(dir / "sub/data.csv", "id,text,labels\n1,hi,race\n");
    testing::write_file(dir / "sub/manifest.json", R"({
      "task": {"name": "t", "answer_mode": "multilabel", "label_vocabulary": ["race"], "metric": "strict_set_accuracy"},
      "path": "data.csv",
      "columns": {"id": "id", "input": "text", "gold": "labels"},
      "splits": {"train": 0, "validation": 1, "test": 0},
      "seed": 4
    })");
    const auto m = load_dataset_manifest(dir / "sub/manifest.json");
    CHECK(m.data_path == dir / "sub/data.csv");
    CHECK(m.sizes == SplitSizes{0, 1, 0});
    CHECK(m.seed == 4);
    CHECK(load_dataset(m.data_path, m.task, m.columns).size() == 1);
}
