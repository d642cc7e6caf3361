#include "gaapo/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "gaapo/error.hpp"
#include "gaapo/rng.hpp"
#include "gaapo/text.hpp"

namespace gaapo {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string_view to_string(AnswerMode mode) {
    return mode == AnswerMode::MultiLabel ? "multilabel" : "choice";
}

AnswerMode parse_answer_mode(std::string_view s) {
    if (s == "multilabel") return AnswerMode::MultiLabel;
    if (s == "choice") return AnswerMode::Choice;
    throw Error(ErrorCode::ParseError, "unknown answer_mode '" + std::string(s) + "'");
}

bool truthy_indicator(std::string_view raw) {
    const auto v = text::to_lower(text::trim(raw));
    if (v.empty() || v == "0" || v == "false" || v == "no") return false;
    if (v == "1" || v == "true" || v == "yes") return true;
    try {
        return std::stod(v) >= 0.5;
    } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "indicator value '" + std::string(raw) + "' is not boolean");
    }
}

const std::string* vocab_lookup(std::span<const std::string> vocabulary, std::string_view token) {
    for (const auto& label : vocabulary)
        if (text::iequals(label, token)) return &label;
    return nullptr;
}

/// Builds the gold answer from a raw cell (or indicator columns) for one row.
GoldAnswer make_gold(const TaskSpec& task, std::string_view raw) {
    if (task.answer_mode == AnswerMode::MultiLabel) {
        return parse_label_set(raw, *task.label_vocabulary);
    }
    const auto v = text::trim(raw);
    if (v.empty()) throw Error(ErrorCode::ParseError, "empty choice answer");
    return Choice{std::string(v)};
}

[[noreturn]] void rethrow_with_row(const Error& e, std::size_t row) {
    throw Error(e.code(), "row " + std::to_string(row) + ": " + e.what());
}

std::vector<Sample> load_csv(const std::filesystem::path& path, const TaskSpec& task,
                             const ColumnMapping& columns) {
    const auto rows = parse_csv(read_file(path));
    if (rows.empty()) throw Error(ErrorCode::ParseError, path.string() + ": missing header row");
    const auto& header = rows.front().fields;
    auto column_index = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (text::trim(header[i]) == name) return i;
        throw Error(ErrorCode::ParseError, path.string() + ": no column '" + name + "'");
    };

    const std::size_t input_col = column_index(columns.input_column);
    const std::optional<std::size_t> id_col =
        columns.id_column.empty() ? std::nullopt : std::optional(column_index(columns.id_column));
    std::optional<std::size_t> gold_col;
    std::vector<std::pair<std::size_t, std::string>> indicator_cols;
    if (!columns.gold_columns.empty()) {
        if (task.answer_mode != AnswerMode::MultiLabel)
            throw Error(ErrorCode::ConfigError, "indicator columns require a multilabel task");
        for (const auto& name : columns.gold_columns) {
            const auto* label = vocab_lookup(*task.label_vocabulary, name);
            if (!label) throw Error(ErrorCode::VocabularyViolation, "indicator column '" + name + "' not in vocabulary");
            indicator_cols.emplace_back(column_index(name), *label);
        }
    } else {
        gold_col = column_index(columns.gold_column);
    }

    std::vector<Sample> samples;
    samples.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() == 1 && text::trim(row.fields[0]).empty()) continue;  // blank line
        try {
            if (row.fields.size() != header.size())
                throw Error(ErrorCode::ParseError, "expected " + std::to_string(header.size()) +
                                                       " fields, got " + std::to_string(row.fields.size()));
            Sample s;
            s.id = id_col ? std::string(text::trim(row.fields[*id_col])) : "row-" + std::to_string(r);
            s.input = row.fields[input_col];
            if (text::trim(s.input).empty()) throw Error(ErrorCode::ParseError, "empty input");
            if (gold_col) {
                s.gold = make_gold(task, row.fields[*gold_col]);
            } else {
                LabelSet labels;
                for (const auto& [col, label] : indicator_cols)
                    if (truthy_indicator(row.fields[col])) labels.insert(label);
                s.gold = std::move(labels);
            }
            samples.push_back(std::move(s));
        } catch (const Error& e) {
            rethrow_with_row(e, r);
        }
    }
    return samples;
}

std::vector<Sample> load_jsonl(const std::filesystem::path& path, const TaskSpec& task,
                               const ColumnMapping& columns) {
    std::istringstream in(read_file(path));
    std::vector<Sample> samples;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (text::trim(line).empty()) continue;
        try {
            Json j;
            try {
                j = Json::parse(line);
            } catch (const Json::parse_error& e) {
                throw Error(ErrorCode::ParseError, e.what());
            }
            auto field = [&](const std::string& name) -> const Json& {
                const auto it = j.find(name);
                if (it == j.end()) throw Error(ErrorCode::ParseError, "missing field '" + name + "'");
                return *it;
            };
            Sample s;
            if (!columns.id_column.empty()) {
                const auto& idv = field(columns.id_column);
                s.id = idv.is_string() ? idv.get<std::string>() : idv.dump();
            } else {
                s.id = "row-" + std::to_string(row);
            }
            const auto& input = field(columns.input_column);
            if (!input.is_string() || text::trim(input.get<std::string>()).empty())
                throw Error(ErrorCode::ParseError, "input must be a non-empty string");
            s.input = input.get<std::string>();
            if (!columns.gold_columns.empty()) {
                LabelSet labels;
                for (const auto& name : columns.gold_columns) {
                    const auto* label = vocab_lookup(*task.label_vocabulary, name);
                    if (!label) throw Error(ErrorCode::VocabularyViolation, "indicator '" + name + "' not in vocabulary");
                    const auto& v = field(name);
                    const bool on = v.is_boolean() ? v.get<bool>()
                                    : v.is_number() ? v.get<double>() >= 0.5
                                                    : truthy_indicator(v.get<std::string>());
                    if (on) labels.insert(*label);
                }
                s.gold = std::move(labels);
            } else {
                const auto& g = field(columns.gold_column);
                if (g.is_array() && task.answer_mode == AnswerMode::MultiLabel) {
                    std::string joined;
                    for (const auto& item : g) joined += item.get<std::string>() + ",";
                    s.gold = make_gold(task, joined);
                } else if (g.is_string()) {
                    s.gold = make_gold(task, g.get<std::string>());
                } else {
                    s.gold = make_gold(task, g.dump());
                }
            }
            samples.push_back(std::move(s));
        } catch (const Error& e) {
            rethrow_with_row(e, row);
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + ": " + e.what());
        }
    }
    return samples;
}

}  // namespace

void TaskSpec::validate() const {
    if (answer_mode == AnswerMode::MultiLabel) {
        if (!label_vocabulary || label_vocabulary->empty())
            throw Error(ErrorCode::ConfigError, "multilabel task '" + name + "' needs a label vocabulary");
        if (metric.kind != MetricKind::StrictSetAccuracy)
            throw Error(ErrorCode::MetricMismatch, "multilabel task '" + name + "' uses strict_set_accuracy");
    } else if (metric.kind == MetricKind::StrictSetAccuracy) {
        throw Error(ErrorCode::MetricMismatch, "strict_set_accuracy needs a multilabel task");
    }
    if (metric.kind == MetricKind::SemanticEquivalence && metric.judge_model.empty())
        throw Error(ErrorCode::ConfigError, "semantic_equivalence needs a judge_model");
}

const std::vector<Sample>& DatasetSplits::get(Split split) const {
    switch (split) {
        case Split::Train: return train;
        case Split::Validation: return validation;
        case Split::Test: return test;
    }
    return test;
}

LabelSet parse_label_set(std::string_view raw, std::span<const std::string> vocabulary) {
    if (vocabulary.empty()) throw Error(ErrorCode::ConfigError, "empty label vocabulary");
    LabelSet labels;
    std::vector<std::string> unknown;
    for (const auto piece : text::split_any(raw, ",;")) {
        const auto token = text::trim(piece);
        if (token.empty()) continue;
        if (const auto* label = vocab_lookup(vocabulary, token))
            labels.insert(*label);
        else if (!text::iequals(token, "none"))
            unknown.emplace_back(token);
    }
    if (!unknown.empty()) {
        std::string msg = "labels not in vocabulary:";
        for (const auto& u : unknown) msg += " '" + u + "'";
        throw Error(ErrorCode::VocabularyViolation, msg);
    }
    return labels;
}

std::string render_gold(const GoldAnswer& gold) {
    if (const auto* choice = std::get_if<Choice>(&gold)) return choice->value;
    const auto& labels = std::get<LabelSet>(gold);
    if (labels.empty()) return "none";
    std::string out;
    for (const auto& l : labels) {
        if (!out.empty()) out += ", ";
        out += l;
    }
    return out;
}

std::vector<CsvRow> parse_csv(std::string_view content) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    std::size_t line = 1;
    row.line = 1;
    bool in_quotes = false;
    bool row_started = false;
    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        row_started = true;
        if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            row.fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r') {
            // tolerated before \n
        } else if (c == '\n') {
            row.fields.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row = CsvRow{};
            row.line = ++line;
            row_started = false;
        } else {
            field.push_back(c);
        }
    }
    if (in_quotes) throw Error(ErrorCode::ParseError, "line " + std::to_string(row.line) + ": unterminated quote");
    if (row_started || !field.empty()) {
        row.fields.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<Sample> load_dataset(const std::filesystem::path& path, const TaskSpec& task,
                                 const ColumnMapping& columns) {
    task.validate();
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::Io, "dataset not found: " + path.string());
    if (columns.gold_column.empty() && columns.gold_columns.empty())
        throw Error(ErrorCode::ConfigError, "column mapping declares no gold column");
    const auto ext = text::to_lower(path.extension().string());
    if (ext == ".jsonl" || ext == ".ndjson") return load_jsonl(path, task, columns);
    return load_csv(path, task, columns);
}

DatasetSplits split_dataset(const std::vector<Sample>& samples, const SplitSizes& sizes,
                            std::uint64_t seed) {
    const std::size_t needed = sizes.train + sizes.validation + sizes.test;
    if (needed > samples.size())
        throw Error(ErrorCode::InsufficientSamples,
                    "requested " + std::to_string(needed) + " samples, only " +
                        std::to_string(samples.size()) + " available");
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    DatasetSplits out;
    out.seed = seed;
    std::size_t cursor = 0;
    auto take = [&](std::vector<Sample>& dst, std::size_t n) {
        dst.reserve(n);
        for (std::size_t i = 0; i < n; ++i) dst.push_back(samples[order[cursor++]]);
    };
    take(out.train, sizes.train);
    take(out.validation, sizes.validation);
    take(out.test, sizes.test);
    return out;
}

SplitSizes fit_split_sizes(std::size_t available, const SplitSizes& requested) {
    const std::size_t fixed = requested.train + requested.validation;
    if (fixed > available)
        throw Error(ErrorCode::InsufficientSamples,
                    "train+validation need " + std::to_string(fixed) + " samples, only " +
                        std::to_string(available) + " available");
    SplitSizes out = requested;
    out.test = std::min(requested.test, available - fixed);
    return out;
}

DatasetManifest load_dataset_manifest(const std::filesystem::path& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::ManifestInvalid, path.string() + ": " + e.what());
    }
    try {
        DatasetManifest m;
        m.task = j.at("task").get<TaskSpec>();
        m.data_path = j.at("path").get<std::string>();
        if (m.data_path.is_relative()) m.data_path = path.parent_path() / m.data_path;
        const auto& cols = j.at("columns");
        m.columns.id_column = cols.value("id", std::string{});
        m.columns.input_column = cols.value("input", std::string{"input"});
        m.columns.gold_column = cols.value("gold", std::string{});
        m.columns.gold_columns = cols.value("gold_columns", std::vector<std::string>{});
        if (j.contains("splits")) m.sizes = j.at("splits").get<SplitSizes>();
        m.seed = j.value("seed", std::uint64_t{0});
        m.clamp_test = j.value("clamp_test", false);
        return m;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ManifestInvalid, path.string() + ": " + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::ManifestInvalid, path.string() + ": " + e.what());
    }
}

void to_json(Json& j, const TaskSpec& t) {
    j = Json{{"name", t.name}, {"answer_mode", to_string(t.answer_mode)}, {"metric", t.metric}};
    if (t.label_vocabulary) j["label_vocabulary"] = *t.label_vocabulary;
}

void from_json(const Json& j, TaskSpec& t) {
    t.name = j.at("name").get<std::string>();
    t.answer_mode = parse_answer_mode(j.at("answer_mode").get<std::string>());
    t.label_vocabulary.reset();
    if (j.contains("label_vocabulary")) t.label_vocabulary = j.at("label_vocabulary").get<std::vector<std::string>>();
    if (j.contains("metric")) {
        const auto& m = j.at("metric");
        t.metric = m.is_string() ? MetricSpec{parse_metric_kind(m.get<std::string>()), {}} : m.get<MetricSpec>();
    } else {
        t.metric.kind = t.answer_mode == AnswerMode::MultiLabel ? MetricKind::StrictSetAccuracy
                                                                : MetricKind::ExactChoice;
    }
}

void to_json(Json& j, const GoldAnswer& g) {
    if (const auto* c = std::get_if<Choice>(&g))
        j = Json{{"choice", c->value}};
    else
        j = Json{{"labels", std::get<LabelSet>(g)}};
}

void to_json(Json& j, const Sample& s) { j = Json{{"id", s.id}, {"input", s.input}, {"gold", s.gold}}; }

void from_json(const Json& j, Sample& s) {
    s.id = j.at("id").get<std::string>();
    s.input = j.at("input").get<std::string>();
    const auto& g = j.at("gold");
    if (g.contains("choice"))
        s.gold = Choice{g.at("choice").get<std::string>()};
    else
        s.gold = g.at("labels").get<LabelSet>();
}

void to_json(Json& j, const SplitSizes& s) {
    j = Json{{"train", s.train}, {"validation", s.validation}, {"test", s.test}};
}

void from_json(const Json& j, SplitSizes& s) {
    s.train = j.at("train").get<std::size_t>();
    s.validation = j.at("validation").get<std::size_t>();
    s.test = j.at("test").get<std::size_t>();
}

}  // namespace gaapo
