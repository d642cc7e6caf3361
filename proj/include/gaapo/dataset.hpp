#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gaapo/domain.hpp"

namespace gaapo {

using LabelSet = std::set<std::string>;

struct Choice {
    std::string value;
    friend bool operator==(const Choice&, const Choice&) = default;
};

/// Gold answer of a sample: a label set (multilabel tasks) or a single choice.
using GoldAnswer = std::variant<LabelSet, Choice>;

struct Sample {
    std::string id;
    std::string input;
    GoldAnswer gold;
    friend bool operator==(const Sample&, const Sample&) = default;
};

enum class AnswerMode { MultiLabel, Choice };

struct TaskSpec {
    std::string name;
    AnswerMode answer_mode = AnswerMode::MultiLabel;
    std::optional<std::vector<std::string>> label_vocabulary;
    MetricSpec metric;

    /// Throws ConfigError on a multilabel task without vocabulary, a strict
    /// metric on a choice task, or a semantic metric without judge model.
    void validate() const;
};

struct ColumnMapping {
    std::string id_column;      // optional; rows are numbered when empty
    std::string input_column = "input";
    std::string gold_column;    // one raw answer column
    std::vector<std::string> gold_columns;  // or one 0/1 indicator column per label
};

struct SplitSizes {
    std::size_t train = 50;
    std::size_t validation = 50;
    std::size_t test = 200;
    friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

struct DatasetSplits {
    std::vector<Sample> train;
    std::vector<Sample> validation;
    std::vector<Sample> test;
    std::uint64_t seed = 0;

    [[nodiscard]] const std::vector<Sample>& get(Split split) const;
};

/// Everything a dataset manifest file declares.
struct DatasetManifest {
    TaskSpec task;
    std::filesystem::path data_path;
    ColumnMapping columns;
    SplitSizes sizes;
    std::uint64_t seed = 0;
    /// Shrink the test split to whatever remains instead of failing.
    bool clamp_test = false;
};

/// Parses comma/semicolon separated labels against the vocabulary
/// (case-insensitive, trimmed, duplicates collapsed). Labels come back in the
/// vocabulary's spelling; "none" reads as no label. Throws VocabularyViolation
/// naming unknown tokens.
LabelSet parse_label_set(std::string_view raw, std::span<const std::string> vocabulary);

/// Canonical text of a gold answer; an empty label set renders as "none".
std::string render_gold(const GoldAnswer& gold);

/// RFC 4180 CSV. Returns rows with their 1-based starting line numbers.
struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> fields;
};
std::vector<CsvRow> parse_csv(std::string_view content);

/// Loads CSV (header row required) or line-delimited JSON (.jsonl/.ndjson).
/// Row order is preserved. Throws ParseError (with row number) or
/// VocabularyViolation.
std::vector<Sample> load_dataset(const std::filesystem::path& path, const TaskSpec& task,
                                 const ColumnMapping& columns);

/// Seeded shuffle, then consecutive train/validation/test slices.
/// Throws InsufficientSamples if the sizes exceed the sample count.
DatasetSplits split_dataset(const std::vector<Sample>& samples, const SplitSizes& sizes,
                            std::uint64_t seed);

/// Sizes with the test split clamped to what the source can still provide.
SplitSizes fit_split_sizes(std::size_t available, const SplitSizes& requested);

DatasetManifest load_dataset_manifest(const std::filesystem::path& path);

void to_json(Json& j, const TaskSpec& t);
void from_json(const Json& j, TaskSpec& t);
void to_json(Json& j, const GoldAnswer& g);
void to_json(Json& j, const Sample& s);
void from_json(const Json& j, Sample& s);
void to_json(Json& j, const SplitSizes& s);
void from_json(const Json& j, SplitSizes& s);

}  // namespace gaapo
