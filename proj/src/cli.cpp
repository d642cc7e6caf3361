#include "gaapo/cli.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "gaapo/text.hpp"

namespace gaapo {

namespace {

std::int64_t wall_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_relative() ? base / path : path;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << error_json(error_code_name(e.code()), e.what()) << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << error_json("INTERNAL", e.what()) << '\n';
        return 4;
    }
}

}  // namespace

BackendSection parse_backend_section(const Json& j, const std::filesystem::path& base_dir) {
    BackendSection b;
    j.get_to(b.gateway);
    if (!b.gateway.cache_path.empty() && b.gateway.cache_path.is_relative())
        b.gateway.cache_path = base_dir / b.gateway.cache_path;
    if (const auto it = j.find("mock"); it != j.end()) it->get_to(b.mock);
    return b;
}

RunManifest load_run_manifest(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path))
        throw Error(ErrorCode::ManifestInvalid, "run manifest not found: " + path.string());
    Json j;
    try {
        j = Json::parse(read_text(path));
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ManifestInvalid, path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    RunManifest m;
    try {
        m.dataset_manifest = resolve(base, j.at("dataset_manifest").get<std::string>());
        m.seed_prompt = resolve(base, j.at("seed_prompt").get<std::string>());
        m.output_dir = resolve(base, j.value("output_dir", std::string{"out"}));
        if (j.contains("config")) j.at("config").get_to(m.config);
        m.backend = parse_backend_section(j.value("backend", Json::object()), base);
        if (!m.config.template_dir.empty() && m.config.template_dir.is_relative())
            m.config.template_dir = base / m.config.template_dir;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ManifestInvalid, path.string() + ": " + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::ManifestInvalid, path.string() + ": " + e.what());
    }
    if (!std::filesystem::is_regular_file(m.dataset_manifest))
        throw Error(ErrorCode::ManifestInvalid, "dataset manifest not found: " + m.dataset_manifest.string());
    if (!std::filesystem::is_regular_file(m.seed_prompt))
        throw Error(ErrorCode::ManifestInvalid, "seed prompt not found: " + m.seed_prompt.string());
    return m;
}

LoadedDataset load_and_split(const std::filesystem::path& dataset_manifest, std::optional<MetricKind> metric) {
    if (!std::filesystem::is_regular_file(dataset_manifest))
        throw Error(ErrorCode::ManifestInvalid, "dataset manifest not found: " + dataset_manifest.string());
    LoadedDataset d;
    d.manifest = load_dataset_manifest(dataset_manifest);
    if (metric) d.manifest.task.metric.kind = *metric;
    d.manifest.task.validate();
    if (!std::filesystem::is_regular_file(d.manifest.data_path))
        throw Error(ErrorCode::ManifestInvalid, "dataset file not found: " + d.manifest.data_path.string());
    d.samples = load_dataset(d.manifest.data_path, d.manifest.task, d.manifest.columns);
    auto sizes = d.manifest.sizes;
    if (d.manifest.clamp_test) sizes = fit_split_sizes(d.samples.size(), sizes);
    d.splits = split_dataset(d.samples, sizes, d.manifest.seed);
    return d;
}

std::unique_ptr<LlmGateway> build_gateway(const BackendSection& backend, const TaskSpec& task,
                                          const std::vector<Sample>& samples) {
    backend.gateway.validate();
    MockOracle oracle;
    if (backend.gateway.kind == BackendKind::Mock) oracle = SyntheticOracle(backend.mock, task, samples).as_mock();
    return make_gateway(backend.gateway, std::move(oracle));
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::BackendUnavailable:
        case ErrorCode::ReplayMiss:
        case ErrorCode::AuthError:
        case ErrorCode::GenerationFailed:
        case ErrorCode::StrategyFailure:
        case ErrorCode::JudgeUnparseable: return 3;
        case ErrorCode::InvariantViolation: return 4;
        default: return 2;
    }
}

std::string error_json(std::string_view code, std::string_view message) {
    return Json{{"error", {{"code", code}, {"message", message}}}}.dump();
}

int cmd_optimize(const OptimizeOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto started = wall_ms();
        auto manifest = load_run_manifest(options.manifest);
        if (options.seed) manifest.config.seed = *options.seed;
        if (options.generations) manifest.config.generations = *options.generations;
        if (options.population) manifest.config.population_size = *options.population;
        if (options.selection) manifest.config.selection.method = parse_selection_method(*options.selection);
        if (options.backend) manifest.backend.gateway.kind = parse_backend_kind(*options.backend);
        if (options.out) manifest.output_dir = *options.out;

        const auto data = load_and_split(manifest.dataset_manifest);
        manifest.config.task = data.manifest.task;
        manifest.config.validate();
        const auto seed_prompt = std::string(text::trim(read_text(manifest.seed_prompt)));
        auto gateway = build_gateway(manifest.backend, data.manifest.task, data.samples);

        const auto& dir = manifest.output_dir;
        std::filesystem::create_directories(dir);
        RunOptions run_options;
        run_options.checkpoint_path = dir / "checkpoint.json";
        run_options.history_path = dir / "history.jsonl";
        run_options.resume = options.resume;
        run_options.allow_config_mismatch = options.allow_config_mismatch;

        Optimizer optimizer(manifest.config, data.splits, *gateway, run_options);
        const auto report = optimizer.run(seed_prompt);
        emit_report(report, dir);

        const auto ledger = gateway->ledger().snapshot();
        Json live = Json::object();
        for (const auto p : {Purpose::Generation, Purpose::Prediction, Purpose::Judging})
            live[std::string(to_string(p))] = ledger.of(p).live();
        const Json meta{{"started_at_ms", started},
                        {"finished_at_ms", wall_ms()},
                        {"duration_ms", wall_ms() - started},
                        {"backend", to_string(manifest.backend.gateway.kind)},
                        {"resumed", options.resume},
                        {"ledger", ledger},
                        {"live_calls", live},
                        {"live_calls_total", ledger.total().live()},
                        {"cache_hits_total", ledger.total().cache_hits},
                        {"peak_in_flight", gateway->peak_in_flight()}};
        write_text_file(dir / "run_meta.json", meta.dump(2) + "\n");

        if (report.final_result) {
            const auto& f = *report.final_result;
            out << fmt::format("best candidate {} validation {:.4f}", f.id.value, f.validation.value());
            if (f.test) out << fmt::format(" test {:.4f}", f.test->value());
            out << "\n" << f.text << "\n";
        }
        out << "artifacts written to " << dir.string() << "\n";
        return 0;
    });
}

int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        std::optional<MetricKind> metric;
        if (options.metric) metric = parse_metric_kind(*options.metric);
        const auto split = parse_split(options.split);
        const auto data = load_and_split(options.dataset, metric);
        const auto& samples = data.splits.get(split);
        if (samples.empty()) throw Error(ErrorCode::EmptySplit, std::string(to_string(split)) + " split is empty");

        BackendSection backend;
        if (options.backend_config) {
            Json j;
            try {
                j = Json::parse(read_text(*options.backend_config));
            } catch (const Json::exception& e) {
                throw Error(ErrorCode::ManifestInvalid, options.backend_config->string() + ": " + e.what());
            }
            backend = parse_backend_section(j, options.backend_config->parent_path());
        }
        backend.gateway.kind = parse_backend_kind(options.backend);
        auto gateway = build_gateway(backend, data.manifest.task, data.samples);

        IdAllocator ids;
        const auto candidate = new_candidate(std::string(text::trim(read_text(options.prompt))),
                                             Lineage{StrategyKind::Seed, {}, std::nullopt, std::nullopt}, 0, ids);
        EvalSettings settings;
        settings.task = data.manifest.task;
        settings.target_model = options.target_model;
        const auto result = evaluate_prompt(candidate, samples, settings, *gateway);

        out << fmt::format("accuracy {:.4f} ({}/{}) on {} split, metric {}\n", result.score.value(), result.score.correct,
                           result.score.total, to_string(split), to_string(settings.task.metric.kind));
        Json per_sample = Json::array();
        for (const auto& s : result.per_sample) {
            out << fmt::format("{}\t{}{}\n", s.sample_id, s.correct ? "correct" : "wrong",
                               s.failed ? " (call failed)" : s.judge_unparseable ? " (judge unparseable)" : "");
            per_sample.push_back({{"sample_id", s.sample_id},
                                  {"correct", s.correct},
                                  {"failed", s.failed},
                                  {"judge_unparseable", s.judge_unparseable},
                                  {"raw_output", s.raw_output}});
        }
        if (options.out) {
            const Json doc{{"split", to_string(split)},
                           {"metric", settings.task.metric},
                           {"score", result.score},
                           {"accuracy", result.score.value()},
                           {"llm_calls", result.llm_calls},
                           {"failed_calls", result.failed_calls},
                           {"per_sample", std::move(per_sample)}};
            if (options.out->has_parent_path()) std::filesystem::create_directories(options.out->parent_path());
            write_text_file(*options.out, doc.dump(2) + "\n");
        }
        return 0;
    });
}

}  // namespace gaapo
