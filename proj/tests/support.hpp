#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "gaapo/cli.hpp"
#include "gaapo/optimizer.hpp"
#include "gaapo/synthetic_oracle.hpp"

namespace gaapo::testing {

const std::vector<std::string>& ethos_vocabulary();

TaskSpec multilabel_task();
TaskSpec choice_task(MetricKind metric = MetricKind::ExactChoice);

/// Multilabel samples "Message 0007 ..." with seeded random label sets
/// (about half of them empty).
std::vector<Sample> synthetic_samples(std::size_t n, std::uint64_t seed);

/// Four-option multiple-choice samples with gold letters A-D.
std::vector<Sample> choice_samples(std::size_t n, std::uint64_t seed);

DatasetSplits synthetic_splits(std::size_t train, std::size_t validation, std::size_t test, std::uint64_t seed);

std::unique_ptr<LlmGateway> mock_gateway(MockOracle oracle, int max_concurrency = 4);

/// Synthetic oracle over the given samples.
MockOracle keyword_oracle(const std::vector<Sample>& samples, SyntheticOracleConfig config = {},
                          TaskSpec task = multilabel_task());

/// Answers every prediction with the gold answer of the sample it finds.
MockOracle all_correct_oracle(const std::vector<Sample>& samples, TaskSpec task = multilabel_task());

/// Prediction oracle for prompts tagged "[acc=0.75]": each (prompt, sample)
/// pair is answered correctly iff a hash of (salt, prompt, sample id) falls
/// below the tagged accuracy. Generation requests echo the last <prompt>
/// block.
class TaggedAccuracyOracle {
public:
    TaggedAccuracyOracle(std::vector<Sample> samples, std::uint64_t salt, TaskSpec task = multilabel_task());

    std::string operator()(const CompletionRequest& request) const;
    bool outcome(std::string_view prompt_text, const Sample& sample) const;
    /// Fraction of `samples` answered correctly by the prompt.
    double true_accuracy(std::string_view prompt_text, std::span<const Sample> samples) const;

    MockOracle as_mock() const;

private:
    std::vector<Sample> samples_;
    std::uint64_t salt_;
    TaskSpec task_;
};

double accuracy_tag(std::string_view prompt_text);
std::string tagged_prompt(double accuracy, std::size_t index);

PromptCandidate seed_candidate(std::string text, IdAllocator& ids);

/// Removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Writes messages.csv, dataset.json, seed_prompt.txt and run.json for a
/// mock-backend run into `dir` and returns the run manifest path.
struct FixtureOptions {
    std::size_t rows = 150;
    SplitSizes sizes{30, 40, 60};
    std::size_t population = 10;
    int generations = 3;
    std::string selection = "complete";
    std::uint64_t seed = 5;
    bool with_cache = true;
};
std::filesystem::path write_run_fixture(const std::filesystem::path& dir, const FixtureOptions& options = {});

inline const std::string kEthosSeedPrompt =
    "A message from a user, your goal is to determine which categories of hate speech it contains.\n\n"
    "Message: {input}";

}  // namespace gaapo::testing
