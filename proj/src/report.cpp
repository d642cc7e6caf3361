#include "gaapo/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "gaapo/error.hpp"

namespace gaapo {

namespace {

std::optional<Score> optional_score(const Json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<Score>();
}

Json score_json(const Score& s) {
    return Json{{"correct", s.correct}, {"total", s.total}, {"accuracy", s.value()}};
}

std::uint64_t sum_requests(const Json& requests) {
    std::uint64_t total = 0;
    for (const auto& [purpose, n] : requests.items()) total += n.get<std::uint64_t>();
    return total;
}

}  // namespace

void to_json(Json& j, const HallOfFameEntry& e) {
    j = Json{{"id", e.id}, {"text", e.text}, {"score", e.score}, {"generation", e.generation}};
}

void from_json(const Json& j, HallOfFameEntry& e) {
    j.at("id").get_to(e.id);
    j.at("text").get_to(e.text);
    j.at("score").get_to(e.score);
    j.at("generation").get_to(e.generation);
}

OptimizationReport build_report(std::span<const Json> events) {
    OptimizationReport report;
    std::map<CandidateId, std::size_t> archive_index;
    // (generation, strategy) -> improvements of new children
    std::map<std::pair<int, StrategyKind>, std::vector<double>> deltas;
    std::map<int, std::pair<double, std::size_t>> val_sums;
    std::map<int, std::size_t> summary_index;

    auto summary = [&](int generation) -> GenerationSummary& {
        auto [it, inserted] = summary_index.emplace(generation, report.generations.size());
        if (inserted) report.generations.push_back({generation, {}, 0.0, std::nullopt, std::nullopt, 0});
        return report.generations[it->second];
    };
    auto add_requests = [&](const Json& requests) {
        report.generation_calls += requests.value("generation", std::uint64_t{0});
        report.prediction_calls += requests.value("prediction", std::uint64_t{0});
        report.judging_calls += requests.value("judging", std::uint64_t{0});
    };

    for (const auto& e : events) {
        const auto type = e.at("type").get<std::string>();
        if (type == "run_started") {
            report.task = e.at("task").get<std::string>();
            report.seed = e.at("seed").get<std::uint64_t>();
            report.config_hash = e.at("config_hash").get<std::string>();
            report.config = e.at("config");
        } else if (type == "generation_started") {
            summary(e.at("generation").get<int>());
        } else if (type == "candidate_created") {
            const auto& c = e.at("candidate");
            ArchivedCandidate a;
            a.id = c.at("id").get<CandidateId>();
            a.text = c.at("text").get<std::string>();
            a.generation = c.at("generation").get<int>();
            a.lineage = c.at("lineage").get<Lineage>();
            a.parent_score = optional_score(e, "parent_score");
            archive_index[a.id] = report.archive.size();
            report.archive.push_back(std::move(a));
        } else if (type == "candidate_evaluated") {
            const auto generation = e.at("generation").get<int>();
            const auto id = e.at("id").get<CandidateId>();
            const auto split = parse_split(e.at("split").get<std::string>());
            const auto score = e.at("score").get<Score>();
            auto& a = report.archive.at(archive_index.at(id));
            a.evaluations.push_back({generation, split, score});
            if (split != Split::Validation) continue;
            auto& [sum, n] = val_sums[generation];
            sum += score.value();
            ++n;
            summary(generation).mean_val = sum / static_cast<double>(n);
            if (a.generation == generation && a.parent_score)
                deltas[{generation, a.lineage.strategy}].push_back(score.value() - a.parent_score->value());
        } else if (type == "selection_completed") {
            const auto generation = e.at("generation").get<int>();
            report.hall_of_fame = e.at("hall_of_fame").get<std::vector<HallOfFameEntry>>();
            if (!report.hall_of_fame.empty()) summary(generation).best_val = report.hall_of_fame.front().score;
        } else if (type == "test_evaluated") {
            const auto generation = e.at("generation").get<int>();
            const auto id = e.at("id").get<CandidateId>();
            const auto score = e.at("score").get<Score>();
            if (const auto it = archive_index.find(id); it != archive_index.end() && !e.value("reused", false))
                report.archive[it->second].evaluations.push_back({generation, Split::Test, score});
            if (e.value("final", false)) {
                add_requests(e.at("requests"));
                const auto it = std::find_if(report.hall_of_fame.begin(), report.hall_of_fame.end(),
                                             [&](const HallOfFameEntry& h) { return h.id == id; });
                if (it != report.hall_of_fame.end()) report.final_result = FinalResult{id, it->text, it->score, score};
            } else {
                auto& s = summary(generation);
                s.test = score;
                s.test_candidate = id;
            }
        } else if (type == "generation_completed") {
            const auto& requests = e.at("requests");
            summary(e.at("generation").get<int>()).calls = sum_requests(requests);
            add_requests(requests);
        } else {
            throw Error(ErrorCode::InvariantViolation, "unknown history event type '" + type + "'");
        }
    }

    if (!report.final_result && !report.hall_of_fame.empty()) {
        const auto& best = report.hall_of_fame.front();
        report.final_result = FinalResult{best.id, best.text, best.score, std::nullopt};
    }

    for (const auto& [key, values] : deltas) {
        double sum = 0.0;
        for (const auto v : values) sum += v;
        report.improvements.push_back({key.first, key.second, sum / static_cast<double>(values.size()),
                                       *std::max_element(values.begin(), values.end()), values.size()});
    }
    return report;
}

Json report_json(const OptimizationReport& report) {
    Json generations = Json::array();
    for (const auto& g : report.generations)
        generations.push_back({{"generation", g.generation},
                               {"best_val", score_json(g.best_val)},
                               {"mean_val", g.mean_val},
                               {"test", g.test ? score_json(*g.test) : Json(nullptr)},
                               {"test_candidate", g.test_candidate ? Json(*g.test_candidate) : Json(nullptr)},
                               {"calls", g.calls}});
    Json improvements = Json::array();
    for (const auto& r : report.improvements)
        improvements.push_back({{"generation", r.generation},
                                {"strategy", to_string(r.strategy)},
                                {"mean_improvement", r.mean_improvement},
                                {"max_improvement", r.max_improvement},
                                {"child_count", r.child_count}});
    Json hall = Json::array();
    for (const auto& h : report.hall_of_fame)
        hall.push_back({{"id", h.id}, {"text", h.text}, {"score", score_json(h.score)}, {"generation", h.generation}});
    Json archive = Json::array();
    for (const auto& a : report.archive) {
        Json evals = Json::array();
        for (const auto& ev : a.evaluations)
            evals.push_back({{"generation", ev.generation}, {"split", to_string(ev.split)}, {"score", ev.score}});
        archive.push_back({{"id", a.id},
                           {"text", a.text},
                           {"generation", a.generation},
                           {"lineage", a.lineage},
                           {"parent_score", a.parent_score ? Json(*a.parent_score) : Json(nullptr)},
                           {"evaluations", std::move(evals)}});
    }
    Json final_result = nullptr;
    if (report.final_result)
        final_result = {{"id", report.final_result->id},
                        {"text", report.final_result->text},
                        {"validation", score_json(report.final_result->validation)},
                        {"test", report.final_result->test ? score_json(*report.final_result->test) : Json(nullptr)}};
    return Json{{"task", report.task},
                {"seed", report.seed},
                {"config_hash", report.config_hash},
                {"config", report.config},
                {"generations", std::move(generations)},
                {"strategy_improvements", std::move(improvements)},
                {"hall_of_fame", std::move(hall)},
                {"final", std::move(final_result)},
                {"calls", {{"generation", report.generation_calls},
                           {"prediction", report.prediction_calls},
                           {"judging", report.judging_calls}}},
                {"candidates", std::move(archive)}};
}

std::string scores_csv(const OptimizationReport& report) {
    std::string out = "generation,best_val,mean_val,test\n";
    for (const auto& g : report.generations)
        out += fmt::format("{},{:.6f},{:.6f},{}\n", g.generation, g.best_val.value(), g.mean_val,
                           g.test ? fmt::format("{:.6f}", g.test->value()) : std::string{});
    return out;
}

std::string strategy_improvements_csv(const OptimizationReport& report) {
    std::string out = "generation,strategy,mean_improvement,max_improvement,child_count\n";
    for (const auto& r : report.improvements)
        out += fmt::format("{},{},{:.6f},{:.6f},{}\n", r.generation, to_string(r.strategy), r.mean_improvement,
                           r.max_improvement, r.child_count);
    return out;
}

std::string hall_of_fame_text(const OptimizationReport& report) {
    std::string out;
    for (std::size_t i = 0; i < report.hall_of_fame.size(); ++i) {
        const auto& h = report.hall_of_fame[i];
        out += fmt::format("=== #{} id={} generation={} validation={:.4f} ({}/{}) ===\n{}\n\n", i + 1, h.id.value,
                           h.generation, h.score.value(), h.score.correct, h.score.total, h.text);
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << content;
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

void emit_report(const OptimizationReport& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());
    write_text_file(out_dir / "scores.csv", scores_csv(report));
    write_text_file(out_dir / "strategy_improvements.csv", strategy_improvements_csv(report));
    write_text_file(out_dir / "hall_of_fame.txt", hall_of_fame_text(report));
    write_text_file(out_dir / "report.json", report_json(report).dump(2) + "\n");
}

std::vector<Json> read_history(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    std::vector<Json> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            events.push_back(Json::parse(line));
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::ParseError, fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
        }
    }
    return events;
}

}  // namespace gaapo
