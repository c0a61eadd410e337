// Command-line front end: dataset generation, training, evaluation, the
// label-level ablation grid, the lambda sweep, and report assembly.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numeric
// divergence during training.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hfusion/hfusion.hpp"

namespace fs = std::filesystem;
using namespace hfusion;

namespace {

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::bad_config:
    case Errc::unknown_variant:
    case Errc::unknown_label:
    case Errc::bad_level:
    case Errc::infeasible_counts:
    case Errc::config_split_mismatch:
      return 2;
    case Errc::non_finite_loss:
    case Errc::non_finite_input:
      return 4;
    default:
      return 3;
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& tok : split(s, ','))
    if (!trim(tok).empty()) out.push_back(parse_u64(tok));
  if (out.empty()) fail(Errc::bad_config, "empty seed list");
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split(s, ','))
    if (!trim(tok).empty()) out.push_back(parse_double(tok));
  return out;
}

KvConfig load_config(const std::string& path) {
  if (path.empty()) {
    std::istringstream in("");
    return KvConfig::parse(in);
  }
  KvConfig kv = KvConfig::parse_file(path);
  kv.reject_unknown(detail::known_config_keys());
  return kv;
}

Dataset load_dataset_checked(const std::string& path) {
  if (!fs::exists(path)) fail(Errc::io_error, "dataset not found: " + path);
  return load_dataset(path);
}

int cmd_gen(const std::string& config_path, const std::string& out_path) {
  const KvConfig kv = load_config(config_path);
  const GenConfig gen_cfg = gen_config_from(kv);
  const SplitConfig split_cfg = split_config_from(kv);

  const std::vector<Sample> samples = generate(gen_cfg);
  size_t n_source = 0, n_target = 0;
  for (const auto& s : samples)
    (s.domain == Domain::source ? n_source : n_target) += 1;

  Dataset ds;
  ds.tree = gen_cfg.tree;
  ds.config = gen_cfg;
  ds.split_seed = split_cfg.seed;
  ds.n_train_target = split_cfg.n_train_target;
  ds.n_val_target = split_cfg.n_val_target;
  ds.splits = split(samples, split_cfg.n_train_target, split_cfg.n_val_target,
                    split_cfg.seed);

  const fs::path out = out_path;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_dataset(ds, out);

  std::cout << "source: " << n_source << ", target: " << n_target << "\n";
  std::cout << "splits: train_source " << ds.splits.train_source().size()
            << ", train_target " << ds.splits.train_target_size()
            << ", val_target " << ds.splits.val_target().size()
            << ", test_target " << ds.splits.test_target().size() << "\n";
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

struct TrainFlags {
  std::string variant;
  int use_da = -1;       // -1: keep config value
  double lambda = -1.0;  // <0: keep config value
};

TrainConfig resolve_train_config(const KvConfig& kv, const TrainFlags& flags,
                                 std::uint64_t seed) {
  TrainConfig cfg = train_config_from(kv);
  if (!flags.variant.empty()) {
    cfg.variant = flags.variant;
    cfg.level_assignment = make_variant(flags.variant);
  }
  if (flags.use_da >= 0) cfg.use_da = flags.use_da != 0;
  if (flags.lambda >= 0) cfg.lambda = flags.lambda;
  cfg.seed = seed;
  validate(cfg);
  return cfg;
}

int cmd_train(const std::string& config_path, const std::string& dataset_path,
              const std::string& out_dir, const std::string& seeds_arg,
              const TrainFlags& flags, int jobs) {
  const KvConfig kv = load_config(config_path);
  const Dataset ds = load_dataset_checked(dataset_path);
  std::vector<std::uint64_t> seeds;
  if (seeds_arg.empty())
    seeds.push_back(train_config_from(kv).seed);
  else
    seeds = parse_seed_list(seeds_arg);

  std::vector<std::function<void()>> tasks;
  std::vector<fs::path> run_dirs;
  for (std::uint64_t seed : seeds) {
    const TrainConfig cfg = resolve_train_config(kv, flags, seed);
    const fs::path dir = fs::path(out_dir) / run_dir_name(cfg);
    run_dirs.push_back(dir);
    tasks.push_back([cfg, &ds, dir] {
      if (ensure_run(cfg, ds, dir))
        std::cout << "skip " << dir.string() << " (already complete)\n";
      else
        std::cout << "done " << dir.string() << "\n";
    });
  }
  run_parallel(jobs, tasks);

  // Final-epoch validation accuracy per seed, from the stored histories.
  std::vector<double> val_accs;
  for (const auto& dir : run_dirs) {
    const std::string hist = read_text_file(dir / "history.csv");
    const auto lines = split(trim(hist), '\n');
    if (lines.size() < 2) continue;
    const auto cells = split(lines.back(), ',');
    val_accs.push_back(parse_double(cells.back()));
  }
  if (!val_accs.empty()) {
    double mean = 0.0;
    for (double v : val_accs) mean += v;
    mean /= val_accs.size();
    if (val_accs.size() > 1) {
      double var = 0.0;
      for (double v : val_accs) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / (val_accs.size() - 1));
      std::cout << "final val accuracy: " << fmt_g6(mean) << " +/- "
                << fmt_g6(sd) << " (" << val_accs.size() << " seeds)\n";
    } else {
      std::cout << "final val accuracy: " << fmt_g6(val_accs[0])
                << " (1 seed)\n";
    }
  }
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& dataset_path,
             std::string out_dir) {
  const Dataset ds = load_dataset_checked(dataset_path);
  if (out_dir.empty()) out_dir = run_dir;
  const fs::path ckpt = fs::path(run_dir) / "checkpoint.final";
  if (!fs::exists(ckpt)) fail(Errc::io_error, "missing " + ckpt.string());

  const TrainedModel model = load_checkpoint(ckpt);
  const EvalReport report = evaluate_model(model, ds, true);
  emit_report({report}, ds.tree, out_dir);

  {
    std::ostringstream out;
    out << "class,accuracy\n";
    for (const auto& [c, acc] : report.per_class_accuracy) {
      const std::string name =
          ds.tree.fine_names.empty() ? std::to_string(c) : ds.tree.fine_names[c];
      out << name << ',' << fmt_g6(acc) << '\n';
    }
    write_text_file(fs::path(out_dir) / "per_class.csv", out.str());
  }

  {
    // Top-5 empirically confused ordered pairs on the test split, scored
    // with the same confusion-tendency metric as the configured pairs.
    const auto& test = ds.splits.test_target();
    const std::vector<int> pred = predict(model, gather_inputs(test));
    std::map<std::pair<int, int>, int> counts;
    for (size_t i = 0; i < test.size(); ++i)
      if (pred[i] != test[i].y3) ++counts[{test[i].y3, pred[i]}];
    std::vector<std::pair<std::pair<int, int>, int>> ranked(counts.begin(),
                                                            counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    const PrototypeSet protos = class_prototypes(
        model, ds.splits.train_source(), ds.tree.n_fine(), "train_source");
    std::ostringstream out;
    out << "c1,c2,count,m_c1_c1,m_c1_c2\n";
    for (size_t i = 0; i < ranked.size() && i < 5; ++i) {
      const auto [c1, c2] = ranked[i].first;
      const std::string n1 =
          ds.tree.fine_names.empty() ? std::to_string(c1) : ds.tree.fine_names[c1];
      const std::string n2 =
          ds.tree.fine_names.empty() ? std::to_string(c2) : ds.tree.fine_names[c2];
      out << n1 << ',' << n2 << ',' << ranked[i].second << ','
          << fmt_g6(m_metric(model, test, protos, c1, c1)) << ','
          << fmt_g6(m_metric(model, test, protos, c1, c2)) << '\n';
    }
    write_text_file(fs::path(out_dir) / "confusions.csv", out.str());
  }

  std::cout << "top1: " << fmt_g6(report.top1) << "\n";
  std::cout << "reports written to " << out_dir << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& dataset_path,
               const std::string& out_dir, const std::string& seeds_arg,
               int jobs) {
  const KvConfig kv = load_config(config_path);
  const Dataset ds = load_dataset_checked(dataset_path);
  const std::vector<std::uint64_t> seeds =
      parse_seed_list(seeds_arg.empty() ? "0,1,2" : seeds_arg);

  const std::vector<std::string> variants{"baseline", "baseline_w_coarse",
                                          "baseline_w_middle", "ours"};
  std::vector<std::function<void()>> tasks;
  const fs::path runs = fs::path(out_dir) / "runs";
  for (const auto& variant : variants) {
    for (std::uint64_t seed : seeds) {
      TrainFlags flags;
      flags.variant = variant;
      flags.use_da = 1;
      const TrainConfig cfg = resolve_train_config(kv, flags, seed);
      const fs::path dir = runs / run_dir_name(cfg);
      tasks.push_back([cfg, &ds, dir] {
        if (ensure_run(cfg, ds, dir))
          std::cout << "skip " << dir.string() << "\n";
        else
          std::cout << "done " << dir.string() << "\n";
      });
    }
  }
  run_parallel(jobs, tasks);

  emit_report(assemble_reports(runs, ds), ds.tree, out_dir);
  std::cout << read_text_file(fs::path(out_dir) / "table_ablation.csv");
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& dataset_path,
              const std::string& out_dir, const std::string& lambdas_arg,
              const std::string& seeds_arg, int jobs) {
  const KvConfig kv = load_config(config_path);
  const Dataset ds = load_dataset_checked(dataset_path);
  const std::vector<double> lambdas =
      parse_double_list(lambdas_arg.empty() ? "0.2,0.5,1,2,4" : lambdas_arg);
  if (lambdas.empty()) fail(Errc::bad_config, "empty lambda list");
  for (double l : lambdas)
    if (!(l > 0))
      fail(Errc::bad_config,
           "lambda must be > 0 in a sweep; disable adaptation via train "
           "--use-da 0 instead");
  const std::vector<std::uint64_t> seeds =
      parse_seed_list(seeds_arg.empty() ? "0,1,2" : seeds_arg);

  std::vector<std::function<void()>> tasks;
  const fs::path runs = fs::path(out_dir) / "runs";
  for (double lambda : lambdas) {
    for (const auto& variant : {std::string("baseline"), std::string("ours")}) {
      for (std::uint64_t seed : seeds) {
        TrainFlags flags;
        flags.variant = variant;
        flags.use_da = 1;
        flags.lambda = lambda;
        const TrainConfig cfg = resolve_train_config(kv, flags, seed);
        const fs::path dir = runs / run_dir_name(cfg);
        tasks.push_back([cfg, &ds, dir] {
          if (ensure_run(cfg, ds, dir))
            std::cout << "skip " << dir.string() << "\n";
          else
            std::cout << "done " << dir.string() << "\n";
        });
      }
    }
  }
  run_parallel(jobs, tasks);

  emit_report(assemble_reports(runs, ds), ds.tree, out_dir);
  std::cout << read_text_file(fs::path(out_dir) / "lambda_sweep.csv");
  return 0;
}

int cmd_report(const std::string& dataset_path, const std::string& root,
               std::string out_dir) {
  const Dataset ds = load_dataset_checked(dataset_path);
  if (out_dir.empty()) out_dir = root;
  emit_report(assemble_reports(root, ds), ds.tree, out_dir);
  std::cout << "reports written to " << out_dir << "\n";
  return 0;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Hierarchical feature fusion benchmark"};
  app.require_subcommand(0, 1);
  bool print_config = false;
  app.add_flag("--print-config", print_config,
               "print the full default configuration and exit");

  std::string config_path, dataset_path, out_path, run_dir, root;
  std::string seeds_arg, lambdas_arg;
  TrainFlags flags;
  int jobs = 1;

  auto* gen = app.add_subcommand("gen", "generate a two-domain dataset");
  gen->add_option("--config", config_path, "configuration file");
  gen->add_option("--out", out_path, "output dataset file")
      ->default_val("dataset.txt");

  auto* train = app.add_subcommand("train", "train one method, one run per seed");
  train->add_option("--config", config_path, "configuration file");
  train->add_option("--dataset", dataset_path, "dataset file")->required();
  train->add_option("--out", out_path, "output directory")->required();
  train->add_option("--seeds", seeds_arg, "comma-separated seed list");
  train->add_option("--variant", flags.variant,
                    "ours|baseline|baseline_w_coarse|baseline_w_middle");
  train->add_option("--use-da", flags.use_da, "0 or 1");
  train->add_option("--lambda", flags.lambda, "trade-off weight");
  train->add_option("--jobs", jobs, "parallel runs");

  auto* eval = app.add_subcommand("eval", "score a finished run");
  eval->add_option("--run", run_dir, "run directory")->required();
  eval->add_option("--dataset", dataset_path, "dataset file")->required();
  eval->add_option("--out", out_path, "report directory (default: run dir)");

  auto* ablate = app.add_subcommand("ablate", "label-level ablation grid");
  ablate->add_option("--config", config_path, "configuration file");
  ablate->add_option("--dataset", dataset_path, "dataset file")->required();
  ablate->add_option("--out", out_path, "output directory")->required();
  ablate->add_option("--seeds", seeds_arg, "comma-separated seed list");
  ablate->add_option("--jobs", jobs, "parallel runs");

  auto* sweep = app.add_subcommand("sweep", "trade-off weight sweep");
  sweep->add_option("--config", config_path, "configuration file");
  sweep->add_option("--dataset", dataset_path, "dataset file")->required();
  sweep->add_option("--out", out_path, "output directory")->required();
  sweep->add_option("--lambdas", lambdas_arg, "comma-separated weights");
  sweep->add_option("--seeds", seeds_arg, "comma-separated seed list");
  sweep->add_option("--jobs", jobs, "parallel runs");

  auto* report = app.add_subcommand("report", "assemble tables from runs");
  report->add_option("--dataset", dataset_path, "dataset file")->required();
  report->add_option("--root", root, "directory tree of runs")->required();
  report->add_option("--out", out_path, "report directory (default: root)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (print_config) {
    std::cout << default_config_text();
    return 0;
  }
  if (gen->parsed()) return cmd_gen(config_path, out_path);
  if (train->parsed())
    return cmd_train(config_path, dataset_path, out_path, seeds_arg, flags,
                     jobs);
  if (eval->parsed()) return cmd_eval(run_dir, dataset_path, out_path);
  if (ablate->parsed())
    return cmd_ablate(config_path, dataset_path, out_path, seeds_arg, jobs);
  if (sweep->parsed())
    return cmd_sweep(config_path, dataset_path, out_path, lambdas_arg,
                     seeds_arg, jobs);
  if (report->parsed()) return cmd_report(dataset_path, root, out_path);

  std::cout << app.help();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
