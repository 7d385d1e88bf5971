#include <iostream>

#include <CLI11.hpp>

#include "s2wtm/commands.hpp"
#include "s2wtm/errors.hpp"

namespace {

using namespace s2wtm;

struct Common {
  std::string config;
  std::string out;
  std::string seeds;
  int workers = 0;
};

cli::RunConfig load(const Common& c) {
  cli::RunConfig cfg = cli::load_run_config(c.config);
  if (!c.out.empty()) cfg.output = c.out;
  if (!c.seeds.empty()) cfg.seeds = cli::parse_u64_list(c.seeds, "--seeds");
  if (c.workers > 0) cfg.model.workers = c.workers;
  return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory (overrides the config)");
  cmd->add_option("--seeds", c.seeds, "Comma-separated seeds (overrides the config)");
  cmd->add_option("--workers", c.workers, "Threads for projection kernels (overrides the config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spherical sliced-Wasserstein topic model"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, bench_opts, ablate_opts;
  auto* train = app.add_subcommand("train", "Train one model per seed and write its artifacts");
  add_common(train, train_opts);

  auto* evaluate = app.add_subcommand("evaluate", "Score every seed directory of a run and write medians");
  add_common(evaluate, eval_opts);

  std::string align_a, align_b, align_out = "alignment.tsv";
  auto* align = app.add_subcommand("align", "Greedy RBO alignment of two topics.json files");
  align->add_option("topics_a", align_a)->required()->check(CLI::ExistingFile);
  align->add_option("topics_b", align_b)->required()->check(CLI::ExistingFile);
  align->add_option("--out", align_out, "Output TSV path");

  std::string m_list;
  auto* bench = app.add_subcommand("bench", "NPMI and seconds per epoch for several projection counts");
  add_common(bench, bench_opts);
  bench->add_option("--m-list", m_list, "Comma-separated projection counts")->required();

  auto* ablate = app.add_subcommand("ablate", "Spherical model against the Euclidean (SW + Dirichlet) variant");
  add_common(ablate, ablate_opts);

  synthetic::PlantedOptions synth_opts;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a planted-topic corpus");
  synth->add_option("--out", synth_out, "Corpus directory")->required();
  synth->add_option("--topics", synth_opts.topics);
  synth->add_option("--vocab", synth_opts.vocab);
  synth->add_option("--documents", synth_opts.documents);
  synth->add_option("--seed", synth_opts.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      cli::cmd_train(load(train_opts), std::cerr);
    } else if (*evaluate) {
      cli::cmd_evaluate(load(eval_opts), std::cerr);
    } else if (*align) {
      cli::cmd_align(align_a, align_b, align_out);
    } else if (*bench) {
      auto cfg = load(bench_opts);
      cli::cmd_bench(cfg, cli::parse_u64_list(m_list, "--m-list"), std::cerr);
    } else if (*ablate) {
      for (const auto& row : cli::cmd_ablate(load(ablate_opts), std::cerr))
        std::cout << row.metric << '\t' << row.euclidean << '\t' << row.spherical << '\n';
    } else if (*synth) {
      cli::cmd_synth(synth_opts, synth_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
