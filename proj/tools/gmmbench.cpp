// gmmbench: dataset generation, GMM fitting and estimator sweeps.

#include "gmmest/bench.hpp"
#include "gmmest/dataset_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

using namespace gmmest;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON scenario configuration")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output path")->required();
  cmd->add_option("--seed", c.seed, "override the configured master seed");
}

ScenarioConfig load(const Common& c) {
  ScenarioConfig cfg = load_config(c.config);
  if (c.seed) cfg.master_seed = *c.seed;
  return cfg;
}

void report_failures(const ExperimentResult& res) {
  for (const auto& r : res.rows)
    if (r.status == RowStatus::failed)
      std::cerr << "warning: " << r.estimator << " K=" << r.k << " M=" << r.m
                << " snr=" << r.snr_db << " failed: " << r.message << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GMM-based channel estimation benchmark"};
  app.require_subcommand(1);

  Common gen_c;
  Eigen::Index gen_count = 0;
  bool gen_test = false;
  bool gen_csv = false;
  auto* gen = app.add_subcommand("generate", "write channel samples to a dataset file");
  add_common(gen, gen_c);
  gen->add_option("--count", gen_count, "number of samples (default M_train or T_test)");
  gen->add_flag("--test", gen_test, "draw from the test stream instead of the training stream");
  gen->add_flag("--csv", gen_csv, "write CSV instead of the binary format");

  Common fit_c;
  std::string fit_data;
  std::size_t fit_index = 0;
  auto* fit = app.add_subcommand("fit", "fit a GMM and write it to a model file");
  add_common(fit, fit_c);
  fit->add_option("--data", fit_data, "training dataset file (default: generate from config)");
  fit->add_option("--estimator", fit_index, "index into the config's estimator list");

  Common snr_c;
  bool snr_no_timing = false;
  auto* snr = app.add_subcommand("sweep-snr", "nMSE of every estimator over the SNR grid");
  add_common(snr, snr_c);
  snr->add_flag("--no-timing", snr_no_timing, "write 0 for wall times (byte-reproducible output)");

  Common k_c;
  bool k_no_timing = false;
  auto* ksw = app.add_subcommand("sweep-k", "GMM nMSE over the K x M grid");
  add_common(ksw, k_c);
  ksw->add_flag("--no-timing", k_no_timing, "write 0 for wall times (byte-reproducible output)");

  Common conv_c;
  std::string conv_table;
  bool conv_no_timing = false;
  auto* conv = app.add_subcommand("converge", "distance of fitted GMM estimators to the exact CME");
  add_common(conv, conv_c);
  conv->add_option("--table", conv_table, "discrepancy table path (default <out>.discrepancy.csv)");
  conv->add_flag("--no-timing", conv_no_timing, "write 0 for wall times (byte-reproducible output)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const ScenarioConfig cfg = load(gen_c);
      const Eigen::Index count = gen_count > 0 ? gen_count : (gen_test ? cfg.t_test : cfg.m_train);
      const Dataset ds = gen_test ? test_set(cfg, count) : training_set(cfg, count);
      if (gen_csv) {
        std::ofstream out(gen_c.out);
        if (!out) throw std::runtime_error("cannot open '" + gen_c.out + "'");
        export_dataset_csv(out, ds.samples);
      } else {
        save_dataset(gen_c.out, ds.samples);
      }
    } else if (*fit) {
      const ScenarioConfig cfg = load(fit_c);
      if (fit_index >= cfg.estimators.size() || cfg.estimators[fit_index].name != "gmm")
        throw ConfigError("fit: --estimator must select a gmm entry of the config");
      const CMatrix train =
          fit_data.empty() ? training_set(cfg, cfg.m_train).samples : load_dataset(fit_data);
      const auto gmm = fit_gmm(train, cfg.estimators[fit_index], cfg, cfg.master_seed);
      save_gmm(fit_c.out, *gmm);
    } else if (*snr) {
      const ExperimentResult res = run_snr_sweep(load(snr_c));
      report_failures(res);
      emit_csv(res, snr_c.out, !snr_no_timing);
    } else if (*ksw) {
      const ScenarioConfig cfg = load(k_c);
      const ExperimentResult res = run_component_sweep(cfg, cfg.k_list, cfg.m_list);
      report_failures(res);
      emit_csv(res, k_c.out, !k_no_timing);
    } else if (*conv) {
      const ConvergenceResult res = run_convergence_study(load(conv_c));
      report_failures(res.result);
      emit_csv(res.result, conv_c.out, !conv_no_timing);
      const std::string table = conv_table.empty() ? conv_c.out + ".discrepancy.csv" : conv_table;
      std::ofstream out(table, std::ios::binary);
      if (!out) throw std::runtime_error("cannot open '" + table + "'");
      write_convergence_csv(out, res.table);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
