#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "omnia/bench.hpp"
#include "omnia/pipeline.hpp"
#include "omnia/synthetic.hpp"

namespace {

struct GlobalFlags {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> repeats;
};

omnia::PipelineConfig load_config(const GlobalFlags& flags) {
    omnia::PipelineConfig cfg = omnia::load_config_file(flags.config_path);
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.repeats) cfg.repeats = *flags.repeats;
    cfg.validate();
    return cfg;
}

void add_pipeline_flags(CLI::App* cmd, GlobalFlags& flags) {
    cmd->add_option("--config", flags.config_path, "pipeline config JSON")->required();
    cmd->add_option("--out", flags.out_dir, "override output directory");
    cmd->add_option("--seed", flags.seed, "override base seed");
    cmd->add_option("--repeats", flags.repeats, "override repeat count");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge graph completion pipeline"};
    app.require_subcommand(1);

    GlobalFlags flags;
    using Stage = void (*)(const omnia::PipelineConfig&);
    struct StageCmd {
        const char* name;
        const char* help;
        Stage fn;
    };
    const StageCmd stages[] = {
        {"split", "write observed/removed splits per repeat", omnia::stage_split},
        {"generate", "generate candidate triples from observed splits", omnia::stage_generate},
        {"train", "train the embedding model per repeat", omnia::stage_train},
        {"filter", "select threshold and filter candidates", omnia::stage_filter},
        {"judge", "sample the eval set and collect verdicts", omnia::stage_judge},
        {"eval", "compute metrics and the aggregate", omnia::stage_eval},
        {"report", "emit report.json and report.csv", omnia::stage_report},
    };
    for (const auto& s : stages) add_pipeline_flags(app.add_subcommand(s.name, s.help), flags);
    add_pipeline_flags(app.add_subcommand("run-all", "run every stage in order"), flags);

    auto* synth = app.add_subcommand("synth", "write a synthetic dataset TSV");
    std::string synth_kind = "codexm-like";
    std::string synth_out;
    std::uint64_t synth_seed = 7;
    synth->add_option("--kind", synth_kind, "codexm-like | small-block | dense-random")
        ->check(CLI::IsMember({"codexm-like", "small-block", "dense-random"}));
    synth->add_option("--out", synth_out, "output TSV path")->required();
    synth->add_option("--seed", synth_seed, "seed (small-block and dense-random)");

    auto* bench = app.add_subcommand("bench", "time generation and filtering over subsamples");
    std::string bench_dataset, bench_out;
    std::vector<std::size_t> bench_sizes{10000, 20000, 30000, 40000, 50000};
    std::uint64_t bench_seed = 0;
    std::uint64_t bench_updates = 20000;
    std::size_t bench_score_cap = 200000;
    std::uint32_t bench_dim = 32;
    bench->add_option("--dataset", bench_dataset, "dataset TSV")->required();
    bench->add_option("--out", bench_out, "write rows JSON here (default stdout only)");
    bench->add_option("--sizes", bench_sizes, "sample sizes");
    bench->add_option("--seed", bench_seed, "subsample seed");
    bench->add_option("--updates", bench_updates, "training budget per sample");
    bench->add_option("--score-cap", bench_score_cap, "candidates scored per sample");
    bench->add_option("--dim", bench_dim, "embedding dim for the filter model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        for (const auto& s : stages) {
            if (app.got_subcommand(s.name)) {
                s.fn(load_config(flags));
                std::cout << s.name << ": done\n";
                return 0;
            }
        }
        if (app.got_subcommand("run-all")) {
            const omnia::PipelineConfig cfg = load_config(flags);
            const omnia::RunAggregate agg = omnia::run_all(cfg);
            std::cout << "runs: " << agg.runs.size() << "\n"
                      << "accuracy:  " << agg.accuracy.mean << " +- " << agg.accuracy.stddev
                      << "\n"
                      << "precision: " << agg.precision.mean << " +- " << agg.precision.stddev
                      << "\n"
                      << "recall:    " << agg.recall.mean << " +- " << agg.recall.stddev << "\n"
                      << "f1:        " << agg.f1.mean << " +- " << agg.f1.stddev << "\n"
                      << "report: " << (std::filesystem::path(cfg.out_dir) / "report.json").string()
                      << "\n";
            return 0;
        }
        if (app.got_subcommand("synth")) {
            omnia::KnowledgeGraph g;
            if (synth_kind == "codexm-like") g = omnia::synth::codexm_like();
            else if (synth_kind == "small-block") g = omnia::synth::small_block_graph(synth_seed);
            else g = omnia::synth::dense_random_graph(synth_seed);
            std::ofstream out(synth_out, std::ios::binary);
            if (!out) throw omnia::MissingArtifact(synth_out);
            omnia::write_tsv(g, out);
            const omnia::GraphStats stats = omnia::graph_stats(g);
            std::cout << synth_out << ": " << stats.triple_count << " triples, "
                      << stats.unique_entities << " entities, " << stats.unique_relations
                      << " relations\n";
            return 0;
        }
        if (app.got_subcommand("bench")) {
            const omnia::KnowledgeGraph g = omnia::load_graph_file(bench_dataset);
            omnia::SweepOptions opts;
            opts.seed = bench_seed;
            opts.train_updates = bench_updates;
            opts.score_cap = bench_score_cap;
            opts.hp.dim = bench_dim;
            opts.hp.epochs = 1;
            const auto rows = omnia::generation_filter_sweep(g, bench_sizes, opts);

            nlohmann::json j;
            j["rows"] = nlohmann::json::array();
            std::cout << "triples\tgenerate_s\tfilter_s\tcandidates\n";
            for (const auto& r : rows) {
                j["rows"].push_back({{"triples", r.sample_triples},
                                     {"generate_seconds", r.generate_seconds},
                                     {"filter_seconds", r.filter_seconds},
                                     {"candidates", r.candidate_count}});
                std::cout << r.sample_triples << '\t' << r.generate_seconds << '\t'
                          << r.filter_seconds << '\t' << r.candidate_count << '\n';
            }
            if (!bench_out.empty()) {
                std::ofstream out(bench_out, std::ios::binary);
                if (!out) throw omnia::MissingArtifact(bench_out);
                out << j.dump(2) << '\n';
            }
            return 0;
        }
        return 1;
    } catch (const omnia::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.error_class());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
