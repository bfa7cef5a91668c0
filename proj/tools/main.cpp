// contrasim: command-line driver for the pipeline stages.
//
// Exit status: 0 success, 1 runtime failure, 2 usage, configuration or
// missing-predecessor error.

#include <CLI11.hpp>

#include <iostream>

#include "stages.hpp"

namespace {

using namespace contrasim;
using namespace contrasim::cli;

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string provider;
    std::string loss;
    std::optional<std::size_t> k;
};

Context make_context(const GlobalOptions& g) {
    Context ctx;
    if (!g.config.empty()) ctx.cfg = load_config(g.config);
    if (g.seed) ctx.cfg.seed = *g.seed;
    if (!g.provider.empty()) ctx.cfg.providers.kind = parse_provider_kind(g.provider);
    if (!g.loss.empty()) ctx.cfg.projection.loss = parse_loss_kind(g.loss);
    if (g.k) {
        ctx.cfg.metrics.k = *g.k;
        ctx.cfg.retrieval.k = *g.k;
    }
    if (!g.out.empty()) ctx.cfg.output_dir = g.out;
    ctx.cfg.validate();
    ctx.out = ctx.cfg.output_dir;
    for (const auto& n : ctx.cfg.notes) ctx.info("note: " + n);
    return ctx;
}

void add_common(CLI::App* cmd, GlobalOptions& g) {
    cmd->add_option("--config", g.config, "TOML configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", g.seed, "Override the configured seed");
    cmd->add_option("--out", g.out, "Output directory (default from config, else ./out)");
    cmd->add_option("--provider", g.provider, "Provider kind")->check(CLI::IsMember({"mock", "http", "file"}));
    cmd->add_option("--loss", g.loss, "Projection loss")->check(CLI::IsMember({"wscl", "cwcl"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ContraSim: weighted contrastive similarity for daily news sets"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    GlobalOptions g;
    std::optional<std::string> dataset;
    std::string space = "projection", split = "all";
    QueryRequest q;

    auto* ingest = app.add_subcommand("ingest", "Read, filter and split the dataset");
    add_common(ingest, g);
    ingest->add_option("--dataset", dataset, "Dataset JSONL (overrides dataset.path)");

    auto* augment = app.add_subcommand("augment", "Generate weighted augmentations of the training days");
    add_common(augment, g);

    auto* embed = app.add_subcommand("embed", "Embed every day and augmentation into the store");
    add_common(embed, g);

    auto* train_proj = app.add_subcommand("train-proj", "Train the projection network");
    add_common(train_proj, g);

    auto* audit = app.add_subcommand("audit-space", "Information-density metrics with shuffled-label baselines");
    add_common(audit, g);
    audit->add_option("--k", g.k, "Neighbourhood size")->check(CLI::PositiveNumber);
    audit->add_option("--space", space, "Embedding space")->check(CLI::IsMember({"projection", "encoder"}));
    audit->add_option("--split", split, "Days to audit")->check(CLI::IsMember({"train", "valid", "test", "all"}));

    auto* train_heads = app.add_subcommand("train-heads", "Train the proj / enc / both classification heads");
    add_common(train_heads, g);

    auto* eval_heads = app.add_subcommand("eval-heads", "Evaluate trained heads on the test split");
    add_common(eval_heads, g);

    auto* query_cmd = app.add_subcommand("query-similar", "Rank historical days by similarity to a query day");
    add_common(query_cmd, g);
    query_cmd->add_option("--k", g.k, "Number of results")->check(CLI::PositiveNumber);
    query_cmd->add_option("--date", q.date, "Query with an indexed day (YYYY-MM-DD); that day is excluded");
    query_cmd->add_option("--text", q.texts, "Query headline (repeat for several)");
    query_cmd->add_option("--text-file", q.text_file, "File with one query headline per line")->check(CLI::ExistingFile);
    query_cmd->add_option("--space", space, "Search space")->check(CLI::IsMember({"projection", "encoder"}));
    query_cmd->add_flag("--json", q.json_output, "Print results as JSON");

    auto* baseline = app.add_subcommand("baseline", "Shuffled-label and random-classifier baselines");
    add_common(baseline, g);
    baseline->add_option("--k", g.k, "Neighbourhood size")->check(CLI::PositiveNumber);

    auto* shift = app.add_subcommand("shift-analysis", "Per-action embedding shift of generated headlines");
    add_common(shift, g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const Context ctx = make_context(g);
        const IndexSpace sp = space == "encoder" ? IndexSpace::Encoder : IndexSpace::Projection;
        if (ingest->parsed()) return run_ingest(ctx, dataset ? std::optional<fs::path>(*dataset) : std::nullopt);
        if (augment->parsed()) return run_augment(ctx);
        if (embed->parsed()) return run_embed(ctx);
        if (train_proj->parsed()) return run_train_proj(ctx);
        if (audit->parsed()) return run_audit_space(ctx, sp, split);
        if (train_heads->parsed()) return run_train_heads(ctx);
        if (eval_heads->parsed()) return run_eval_heads(ctx);
        if (query_cmd->parsed()) {
            q.space = sp;
            return run_query_similar(ctx, q);
        }
        if (baseline->parsed()) return run_baseline(ctx);
        if (shift->parsed()) return run_shift_analysis(ctx);
    } catch (const DependencyError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
