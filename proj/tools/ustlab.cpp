#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "ustlab/ustlab.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitGate = 2;

int report(const ustlab::ResultRecord& rec, const std::filesystem::path& dir)
{
    ustlab::write_outputs(rec, dir);
    std::cout << rec.experiment << ": " << rec.rows.size() << " replicas in " << rec.wall_clock_seconds << " s -> "
              << dir.string() << "\n";
    std::cout << rec.summary.dump(2) << "\n";
    if (rec.gate_passed) {
        std::cout << "gate: " << (*rec.gate_passed ? "pass" : "FAIL") << "\n";
        if (!*rec.gate_passed) return kExitGate;
    }
    return kExitOk;
}

// Fast built-in battery: exact Wilson law on K4 and the CRT references.
int selfcheck(unsigned threads)
{
    using namespace ustlab;
    bool ok = true;

    const auto k4 = build(complete(4));
    std::vector<std::vector<std::pair<Vertex, Vertex>>> trees;
    std::vector<Edge> edges;
    for (auto e : k4.edges()) edges.push_back(e);
    detail::for_each_spanning_tree(4, {}, edges, 100, [&](const std::vector<Edge>& t) {
        auto s = t;
        std::sort(s.begin(), s.end());
        trees.push_back(s);
    });
    std::vector<std::uint64_t> counts(trees.size(), 0);
    RngStream rng(2024, 0);
    for (int i = 0; i < 16000; ++i) {
        const auto e = tree_edges(sample_ust(k4, 0, rng));
        ++counts[std::find(trees.begin(), trees.end(), e) - trees.begin()];
    }
    const auto chi = chi_square_uniform(counts);
    const bool wilson_ok = trees.size() == 16 && chi.pvalue > 1e-3;
    std::printf("%s  wilson K4 uniformity: chi2 = %.3f, p = %.4f\n", wilson_ok ? "PASS" : "FAIL", chi.stat, chi.pvalue);
    ok = ok && wilson_ok;

    ExperimentConfig cfg;
    cfg.experiment = "crt_selfcheck";
    cfg.replicas = 2000;
    cfg.master_seed = 1;
    cfg.threads = threads;
    const auto rec = run(cfg);
    const bool crt_ok = rec.gate_passed.value_or(false);
    std::printf("%s  crt diameter vs Szekeres: KS = %.4f (gate 0.05), pdf integral = %.9f\n", crt_ok ? "PASS" : "FAIL",
                rec.summary["ks_vs_szekeres"].get<double>(), rec.summary["pdf_integral"].get<double>());
    ok = ok && crt_ok;
    return ok ? kExitOk : kExitGate;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ustlab: uniform spanning tree laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out_dir;
    auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--seed", seed, "Override master_seed");
    run->add_option("--threads", threads, "Override worker count")->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "Override output directory");

    unsigned check_threads = 1;
    auto* check = app.add_subcommand("selfcheck", "Run the built-in consistency checks");
    check->add_option("--threads", check_threads, "Worker count")->check(CLI::PositiveNumber);

    std::string tree_config;
    std::uint64_t replica = 0;
    auto* tree = app.add_subcommand("export-tree", "Print the spanning tree of one replica");
    tree->add_option("config", tree_config, "Experiment config (JSON)")->required();
    tree->add_option("replica", replica, "Replica index")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (*run) {
            auto cfg = ustlab::load_config(config_path);
            if (seed) cfg.master_seed = *seed;
            if (threads) cfg.threads = *threads;
            if (out_dir) cfg.output_dir = *out_dir;
            return report(ustlab::run(cfg), cfg.output_dir);
        }
        if (*check) return selfcheck(check_threads);
        if (*tree) {
            ustlab::write_tree(std::cout, ustlab::export_tree(ustlab::load_config(tree_config), replica));
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
