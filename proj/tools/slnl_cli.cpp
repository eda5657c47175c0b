#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "slnl/ablate.hpp"
#include "slnl/checkpoint.hpp"
#include "slnl/verify.hpp"

namespace {

using namespace slnl;

ConfigMap load_optional_config(const std::string& path) {
  if (path.empty()) return {};
  return load_config_file(path);
}

void print_checks(const std::vector<CheckResult>& checks) {
  for (const CheckResult& c : checks)
    std::printf("check %-32s tol=%-12.4g observed=%-14.6g %s\n", c.name.c_str(), c.tolerance,
                c.observed, c.pass ? "PASS" : "FAIL");
}

int cmd_verify(const std::string& suite, const std::string& out, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<CheckResult> checks = verify_suite(suite);
  print_checks(checks);
  RunReport report;
  report.command = "verify " + suite;
  report.seed = seed;
  report.checks = checks;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!out.empty()) save_report(out, report);
  const bool ok = report.all_checks_pass();
  std::printf("verify %s: %s (%zu checks, %.1fs)\n", suite.c_str(), ok ? "PASS" : "FAIL",
              checks.size(), report.wall_seconds);
  return ok ? 0 : 1;
}

int cmd_gendata(const std::string& spec_path, const std::string& out_prefix,
                std::uint64_t seed, bool seed_given) {
  ConfigReader reader(load_optional_config(spec_path));
  SyntheticSpec spec = SyntheticSpec::from_config(reader);
  if (seed_given) spec.seed = seed;

  auto train_set = generate_train(spec);
  auto test_set = generate_test(spec);
  const std::string train_path = out_prefix + "_train.skds";
  const std::string test_path = out_prefix + "_test.skds";
  save_dataset(train_path, train_set);
  save_dataset(test_path, test_set);

  RunReport report;
  report.command = "gendata";
  report.seed = spec.seed;
  report.config = spec.to_config();
  report.final_values["train.samples"] = std::to_string(train_set.size());
  report.final_values["test.samples"] = std::to_string(test_set.size());
  report.final_values["train.path"] = train_path;
  report.final_values["test.path"] = test_path;
  save_report(out_prefix + "_gendata.report.txt", report);
  std::printf("wrote %s (%zu samples) and %s (%zu samples)\n", train_path.c_str(),
              train_set.size(), test_path.c_str(), test_set.size());
  return 0;
}

// Data-derived dimensions fill any model keys the config leaves unset.
ConfigMap with_data_defaults(ConfigMap cfg, const std::vector<SkeletonSequence>& data) {
  check(!data.empty(), "train: empty dataset");
  const Tensor& first = data.front().positions;
  auto set_default = [&](const std::string& key, std::size_t v) {
    if (!cfg.count(key)) cfg[key] = std::to_string(v);
  };
  set_default("model.coord_dim", first.shape[0]);
  set_default("model.joints_in", first.shape[2]);
  set_default("model.num_classes", class_count(data));
  return cfg;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& val_path, const std::string& out_ckpt,
              const std::string& report_path, std::uint64_t seed, bool seed_given) {
  auto data = load_dataset(data_path);
  ConfigReader reader(with_data_defaults(load_optional_config(config_path), data));
  ModelConfig mcfg = ModelConfig::from_config(reader);
  TrainConfig tcfg = TrainConfig::from_config(reader);
  if (seed_given) {
    mcfg.seed = seed;
    tcfg.seed = seed;
  }
  check(mcfg.coord_dim == data.front().positions.shape[0] &&
            mcfg.joints_in == data.front().positions.shape[2],
        "train: model.coord_dim/model.joints_in do not match the dataset");
  check(class_count(data) <= mcfg.num_classes,
        "train: dataset has more classes than model.num_classes");

  std::vector<SkeletonSequence> val;
  if (!val_path.empty()) val = load_dataset(val_path);

  Model model(mcfg);
  std::printf("training: %zu samples, %zu learnable parameters\n", data.size(),
              model.params().learnable_count());
  TrainResult res = train(model, data, val.empty() ? nullptr : &val, tcfg, &std::cout);
  save_checkpoint(out_ckpt, model);

  RunReport report;
  report.command = "train";
  report.seed = tcfg.seed;
  report.config = mcfg.to_config();
  for (const auto& [k, v] : tcfg.to_config()) report.config[k] = v;
  report.metrics = res.history;
  report.wall_seconds = res.wall_seconds;
  report.final_values["checkpoint"] = out_ckpt;
  report.final_values["train.loss"] = std::to_string(res.history.back().train_loss);
  report.final_values["train.accuracy"] = std::to_string(res.history.back().train_acc);
  if (!val.empty()) {
    report.final_values["val.accuracy"] = std::to_string(res.history.back().val_acc);
    report.final_values["val.loss"] = std::to_string(res.history.back().val_loss);
  }
  const std::string rpath = report_path.empty() ? out_ckpt + ".report.txt" : report_path;
  save_report(rpath, report);
  std::printf("checkpoint %s, report %s\n", out_ckpt.c_str(), rpath.c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& report_path) {
  Model model = load_checkpoint(ckpt_path);
  auto data = load_dataset(data_path);
  EvalResult ev = evaluate(model, data);
  std::printf("accuracy %.4f over %zu samples\n", ev.accuracy, data.size());
  std::printf("confusion (rows: true class, cols: predicted):\n");
  for (std::size_t r = 0; r < ev.classes; ++r) {
    for (std::size_t c = 0; c < ev.classes; ++c)
      std::printf("%6zu", ev.confusion[r * ev.classes + c]);
    std::printf("\n");
  }
  RunReport report;
  report.command = "eval";
  report.seed = model.config().seed;
  report.config = model.config().to_config();
  report.final_values["test.accuracy"] = std::to_string(ev.accuracy);
  report.final_values["test.loss"] = std::to_string(ev.mean_loss);
  report.final_values["test.samples"] = std::to_string(data.size());
  if (!report_path.empty()) save_report(report_path, report);
  return 0;
}

int cmd_ablate(const std::string& plan_name, const std::string& data_prefix,
               const std::string& config_path, const std::string& out_path,
               std::uint64_t seed, bool seed_given) {
  auto train_set = load_dataset(data_prefix + "_train.skds");
  auto test_set = load_dataset(data_prefix + "_test.skds");
  ConfigReader reader(with_data_defaults(load_optional_config(config_path), train_set));
  ModelConfig mcfg = ModelConfig::from_config(reader);
  TrainConfig tcfg = TrainConfig::from_config(reader);
  if (seed_given) {
    mcfg.seed = seed;
    tcfg.seed = seed;
  }
  RunReport report = run_ablation(ablation_plan_from_string(plan_name), train_set, test_set,
                                  mcfg, tcfg, &std::cout);
  save_report(out_path, report);
  std::printf("plan %s: %zu rows, report %s\n", plan_name.c_str(), report.table.size(),
              out_path.c_str());
  for (const AblationRow& row : report.table)
    std::printf("  %-24s accuracy %.4f\n", row.label.c_str(), row.accuracy);
  return 0;
}

void write_loss_curves(const std::string& path) {
  std::ofstream out(path);
  check(out.good(), "plot: cannot open " + path);
  out << "p_t\tCE\tFL(2,)\tSMCE(,0.4)\tSMFL(2,0.4)\tSM(,0.4)\n";
  for (int i = 1; i < 200; ++i) {
    const double p = static_cast<double>(i) / 200.0;
    out << p << "\t" << cross_entropy(p) << "\t" << focal_loss(p, 2.0) << "\t" << smce(p, 0.4)
        << "\t" << smfl(p, 2.0, 0.4) << "\t" << sm_term(p, 0.4) << "\n";
  }
}

int cmd_plot(const std::string& report_path, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  RunReport report = load_report(report_path);
  // reference loss curves are cheap and always useful next to a run
  write_loss_curves(out_dir + "/loss_curves.tsv");
  if (!report.metrics.empty()) {
    std::ofstream out(out_dir + "/train_curve.tsv");
    check(out.good(), "plot: cannot open train_curve.tsv");
    out << "epoch\tlr\ttrain_loss\ttrain_acc\tval_loss\tval_acc\n";
    for (const EpochMetrics& m : report.metrics)
      out << m.epoch << "\t" << m.lr << "\t" << m.train_loss << "\t" << m.train_acc << "\t"
          << m.val_loss << "\t" << m.val_acc << "\n";
    std::printf("wrote %s/train_curve.tsv\n", out_dir.c_str());
  }
  if (!report.table.empty()) {
    std::ofstream out(out_dir + "/ablation_bars.tsv");
    check(out.good(), "plot: cannot open ablation_bars.tsv");
    out << "label\taccuracy";
    if (!report.table_extra_name.empty()) out << "\t" << report.table_extra_name;
    out << "\n";
    for (const AblationRow& row : report.table) {
      out << row.label << "\t" << row.accuracy;
      if (!report.table_extra_name.empty()) out << "\t" << row.extra;
      out << "\n";
    }
    std::printf("wrote %s/ablation_bars.tsv\n", out_dir.c_str());
  }
  std::printf("wrote %s/loss_curves.tsv\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skeleton-action model: verification, training and ablation tool"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  bool seed_given = false;
  app.add_flag_callback("--version", [] { std::printf("slnl 1.0\n"); });
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override the config seeds")
        ->each([&](const std::string&) { seed_given = true; });
  };

  auto* verify = app.add_subcommand("verify", "run oracle/property check suites");
  std::string suite = "all";
  std::string verify_out;
  verify->add_option("suite", suite, "dft | nonlocal | losses | gradients | all");
  verify->add_option("--out", verify_out, "write a report file");
  add_seed(verify);

  auto* gendata = app.add_subcommand("gendata", "generate a synthetic dataset pair");
  std::string gendata_spec, gendata_out;
  gendata->add_option("--spec", gendata_spec, "data spec file (flat key=value)");
  gendata->add_option("--out", gendata_out, "output prefix")->required();
  add_seed(gendata);

  auto* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  std::string train_config, train_data, train_val, train_ckpt, train_report;
  train_cmd->add_option("--config", train_config, "model/train config file");
  train_cmd->add_option("--data", train_data, "training dataset (.skds)")->required();
  train_cmd->add_option("--val", train_val, "validation dataset (.skds)");
  train_cmd->add_option("--out", train_ckpt, "output checkpoint")->required();
  train_cmd->add_option("--report", train_report, "report path (default <out>.report.txt)");
  add_seed(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data, eval_report;
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset (.skds)")->required();
  eval_cmd->add_option("--report", eval_report, "write a report file");

  auto* ablate_cmd = app.add_subcommand("ablate", "run an ablation matrix");
  std::string ablate_plan, ablate_data, ablate_config, ablate_out;
  ablate_cmd->add_option("--plan", ablate_plan, "loss | fa | slnl")->required();
  ablate_cmd->add_option("--data", ablate_data, "dataset prefix from gendata")->required();
  ablate_cmd->add_option("--config", ablate_config, "model/train config file");
  ablate_cmd->add_option("--out", ablate_out, "report path")->required();
  add_seed(ablate_cmd);

  auto* plot_cmd = app.add_subcommand("plot", "emit plot data series from a report");
  std::string plot_report, plot_out;
  plot_cmd->add_option("--report", plot_report, "report file")->required();
  plot_cmd->add_option("--out", plot_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (verify->parsed()) return cmd_verify(suite, verify_out, seed);
    if (gendata->parsed()) return cmd_gendata(gendata_spec, gendata_out, seed, seed_given);
    if (train_cmd->parsed())
      return cmd_train(train_config, train_data, train_val, train_ckpt, train_report, seed,
                       seed_given);
    if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_report);
    if (ablate_cmd->parsed())
      return cmd_ablate(ablate_plan, ablate_data, ablate_config, ablate_out, seed, seed_given);
    if (plot_cmd->parsed()) return cmd_plot(plot_report, plot_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
