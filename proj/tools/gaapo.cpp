#include <iostream>

#include <CLI11.hpp>

#include "gaapo/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Evolutionary prompt optimization"};
    app.require_subcommand(1);

    gaapo::OptimizeOptions opt;
    auto* optimize = app.add_subcommand("optimize", "Run an optimization from a run manifest");
    optimize->add_option("--manifest", opt.manifest, "Run manifest (JSON)")->required();
    optimize->add_option("--backend", opt.backend, "Override the backend kind")
        ->check(CLI::IsMember({"http", "mock", "replay"}));
    optimize->add_option("--seed", opt.seed, "Override the run seed");
    optimize->add_flag("--resume", opt.resume, "Continue from the checkpoint in the output directory");
    optimize->add_option("--out", opt.out, "Override the output directory");
    optimize->add_option("--generations", opt.generations, "Override the number of generations")
        ->check(CLI::NonNegativeNumber);
    optimize->add_option("--population", opt.population, "Override the population size")
        ->check(CLI::PositiveNumber);
    optimize->add_option("--selection", opt.selection, "Override the selection method")
        ->check(CLI::IsMember({"all", "sh", "bandit"}));
    optimize->add_flag("--allow-config-mismatch", opt.allow_config_mismatch,
                       "Resume even if the checkpoint was written with another configuration");

    gaapo::EvaluateOptions ev;
    auto* evaluate = app.add_subcommand("evaluate", "Score one prompt on a dataset split");
    evaluate->add_option("--dataset", ev.dataset, "Dataset manifest (JSON)")->required();
    evaluate->add_option("--prompt", ev.prompt, "File holding the prompt template")->required();
    evaluate->add_option("--split", ev.split, "train, validation or test")
        ->check(CLI::IsMember({"train", "validation", "test"}));
    evaluate->add_option("--metric", ev.metric, "Override the task metric")
        ->check(CLI::IsMember({"strict_set_accuracy", "exact_choice", "semantic_equivalence"}));
    evaluate->add_option("--backend", ev.backend, "Backend kind")->check(CLI::IsMember({"http", "mock", "replay"}));
    evaluate->add_option("--backend-config", ev.backend_config, "Backend section (JSON)");
    evaluate->add_option("--target-model", ev.target_model, "Model that answers the prompt");
    evaluate->add_option("--out", ev.out, "Write the evaluation result as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    if (*optimize) return gaapo::cmd_optimize(opt, std::cout, std::cerr);
    return gaapo::cmd_evaluate(ev, std::cout, std::cerr);
}
