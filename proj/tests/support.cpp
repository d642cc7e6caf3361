#include "support.hpp"

#include <array>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "gaapo/rng.hpp"

namespace gaapo::testing {

namespace {

constexpr std::array<std::string_view, 6> kSubjects{"My neighbour", "A commenter", "The school board",
                                                    "Some tourists", "A local band", "Our manager"};
constexpr std::array<std::string_view, 5> kVerbs{"wrote about", "complained again about", "posted a long rant on",
                                                 "shared a photo of", "asked questions about"};
constexpr std::array<std::string_view, 6> kObjects{"the new bus line", "a music festival", "the price of coffee",
                                                   "last night's match", "the city council", "a cooking show"};

std::string sample_text(std::size_t i, Rng& rng) {
    return fmt::format("Message {:04}: {} {} {}.", i, kSubjects[rng.uniform_index(kSubjects.size())],
                       kVerbs[rng.uniform_index(kVerbs.size())], kObjects[rng.uniform_index(kObjects.size())]);
}

const Sample* find_sample(const std::vector<Sample>& samples, std::string_view text) {
    for (const auto& s : samples)
        if (text.find(s.input) != std::string_view::npos) return &s;
    return nullptr;
}

std::string wrong_for(const GoldAnswer& gold, const TaskSpec& task) {
    if (const auto* labels = std::get_if<LabelSet>(&gold)) {
        LabelSet wrong = *labels;
        for (const auto& l : *task.label_vocabulary)
            if (!labels->count(l)) {
                wrong.insert(l);
                return render_gold(wrong);
            }
        wrong.erase(wrong.begin());
        return render_gold(wrong);
    }
    const auto& v = std::get<Choice>(gold).value;
    return std::string(1, static_cast<char>('A' + (v[0] - 'A' + 1) % 4));
}

std::string echo_prompt(const std::string& text) {
    const auto open = text.rfind("<prompt>");
    const auto close = text.rfind("</prompt>");
    if (open == std::string::npos || close == std::string::npos || close < open) return "<prompt>\n{input}\n</prompt>";
    return text.substr(open, close + 9 - open);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string_view tag_of(std::string_view text) {
    const auto open = text.find("[acc=");
    if (open == std::string_view::npos) return {};
    const auto close = text.find(']', open);
    return text.substr(open, close == std::string_view::npos ? std::string_view::npos : close + 1 - open);
}

}  // namespace

const std::vector<std::string>& ethos_vocabulary() {
    static const std::vector<std::string> vocab{"violence",   "directed_vs_generalized", "gender",   "race",
                                                "national_origin", "disability", "religion", "sexual_orientation"};
    return vocab;
}

TaskSpec multilabel_task() {
    TaskSpec t;
    t.name = "hate-speech-categories";
    t.answer_mode = AnswerMode::MultiLabel;
    t.label_vocabulary = ethos_vocabulary();
    t.metric.kind = MetricKind::StrictSetAccuracy;
    return t;
}

TaskSpec choice_task(MetricKind metric) {
    TaskSpec t;
    t.name = "multiple-choice";
    t.answer_mode = AnswerMode::Choice;
    t.metric.kind = metric;
    if (metric == MetricKind::SemanticEquivalence) t.metric.judge_model = "judge";
    return t;
}

std::vector<Sample> synthetic_samples(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    const auto& vocab = ethos_vocabulary();
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.id = fmt::format("s{:04}", i);
        s.input = sample_text(i, rng);
        LabelSet labels;
        if (rng.bernoulli(0.5)) {
            const auto k = 1 + rng.uniform_index(2);
            for (const auto idx : rng.sample_indices(vocab.size(), k)) labels.insert(vocab[idx]);
        }
        s.gold = labels;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> choice_samples(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto letter = static_cast<char>('A' + rng.uniform_index(4));
        out.push_back({fmt::format("q{:04}", i),
                       fmt::format("Question {:04}: which option is right?\nA) one\nB) two\nC) three\nD) four", i),
                       Choice{std::string(1, letter)}});
    }
    return out;
}

DatasetSplits synthetic_splits(std::size_t train, std::size_t validation, std::size_t test, std::uint64_t seed) {
    return split_dataset(synthetic_samples(train + validation + test, seed), {train, validation, test}, seed);
}

std::unique_ptr<LlmGateway> mock_gateway(MockOracle oracle, int max_concurrency) {
    BackendConfig config;
    config.kind = BackendKind::Mock;
    config.max_concurrency = max_concurrency;
    return make_gateway(config, std::move(oracle));
}

MockOracle keyword_oracle(const std::vector<Sample>& samples, SyntheticOracleConfig config, TaskSpec task) {
    return SyntheticOracle(std::move(config), std::move(task), samples).as_mock();
}

MockOracle all_correct_oracle(const std::vector<Sample>& samples, TaskSpec task) {
    SyntheticOracleConfig config;
    config.base_probability = 1.0;
    return keyword_oracle(samples, config, std::move(task));
}

TaggedAccuracyOracle::TaggedAccuracyOracle(std::vector<Sample> samples, std::uint64_t salt, TaskSpec task)
    : samples_(std::move(samples)), salt_(salt), task_(std::move(task)) {}

bool TaggedAccuracyOracle::outcome(std::string_view prompt_text, const Sample& sample) const {
    const auto h = mix_seed(salt_ ^ mix_seed(fnv1a(tag_of(prompt_text)) ^ mix_seed(fnv1a(sample.id))));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u < accuracy_tag(prompt_text);
}

double TaggedAccuracyOracle::true_accuracy(std::string_view prompt_text, std::span<const Sample> samples) const {
    std::size_t correct = 0;
    for (const auto& s : samples) correct += outcome(prompt_text, s) ? 1 : 0;
    return samples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(samples.size());
}

std::string TaggedAccuracyOracle::operator()(const CompletionRequest& request) const {
    const auto& text = request.user_text();
    if (request.purpose != Purpose::Prediction) return echo_prompt(text);
    const auto* sample = find_sample(samples_, text);
    if (sample == nullptr) return "ANSWER: none";
    return "ANSWER: " + (outcome(text, *sample) ? render_gold(sample->gold) : wrong_for(sample->gold, task_));
}

MockOracle TaggedAccuracyOracle::as_mock() const {
    auto shared = std::make_shared<const TaggedAccuracyOracle>(*this);
    return [shared](const CompletionRequest& r) { return (*shared)(r); };
}

double accuracy_tag(std::string_view prompt_text) {
    const auto tag = tag_of(prompt_text);
    if (tag.empty()) return 0.0;
    return std::stod(std::string(tag.substr(5)));
}

std::string tagged_prompt(double accuracy, std::size_t index) {
    return fmt::format("Candidate prompt {} [acc={:.3f}|{}]\nMessage: {{input}}", index, accuracy, index);
}

PromptCandidate seed_candidate(std::string text, IdAllocator& ids) {
    return new_candidate(std::move(text), Lineage{StrategyKind::Seed, {}, std::nullopt, std::nullopt}, 0, ids);
}

TempDir::TempDir() {
    static std::random_device rd;
    const auto base = std::filesystem::temp_directory_path();
    for (;;) {
        auto candidate = base / fmt::format("gaapo-test-{:016x}", (static_cast<std::uint64_t>(rd()) << 32) ^ rd());
        if (std::filesystem::create_directory(candidate)) {
            path_ = std::move(candidate);
            return;
        }
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::filesystem::path write_run_fixture(const std::filesystem::path& dir, const FixtureOptions& options) {
    std::string csv = "id,text,labels\n";
    for (const auto& s : synthetic_samples(options.rows, 99)) {
        std::string labels;
        for (const auto& l : std::get<LabelSet>(s.gold)) labels += (labels.empty() ? "" : ";") + l;
        csv += s.id + ",\"" + s.input + "\"," + labels + "\n";
    }
    write_file(dir / "messages.csv", csv);

    const Json dataset{{"task", multilabel_task()},
                       {"path", "messages.csv"},
                       {"columns", {{"id", "id"}, {"input", "text"}, {"gold", "labels"}}},
                       {"splits", options.sizes},
                       {"seed", 11}};
    write_file(dir / "dataset.json", dataset.dump(2));
    write_file(dir / "seed_prompt.txt", kEthosSeedPrompt + "\n");

    Json backend{{"kind", "mock"},
                 {"max_concurrency", 4},
                 {"mock", {{"seed", 3}}}};
    if (options.with_cache) backend["cache_path"] = "out/cache.jsonl";
    const Json run{{"dataset_manifest", "dataset.json"},
                   {"seed_prompt", "seed_prompt.txt"},
                   {"output_dir", "out"},
                   {"backend", backend},
                   {"config",
                    {{"population_size", options.population},
                     {"generations", options.generations},
                     {"parent_pool_size", 3},
                     {"selection", {{"method", options.selection}}},
                     {"seed", options.seed},
                     {"test_eval_every", 1}}}};
    write_file(dir / "run.json", run.dump(2));
    return dir / "run.json";
}

}  // namespace gaapo::testing
