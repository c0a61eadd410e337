#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hfusion/config.hpp"
#include "hfusion/datagen.hpp"
#include "hfusion/eval.hpp"
#include "hfusion/pipeline.hpp"

namespace hfusion {

// Runs independent jobs on up to `jobs` threads. Each job is internally
// single-threaded; results must not share mutable state. The first thrown
// exception is rethrown on the caller thread after all workers finish.
inline void run_parallel(int jobs, const std::vector<std::function<void()>>& tasks) {
  if (jobs < 1) jobs = 1;
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        tasks[i]();
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (jobs == 1 || tasks.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n = std::min<int>(jobs, static_cast<int>(tasks.size()));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string run_dir_name(const TrainConfig& cfg) {
  std::ostringstream out;
  out << cfg.variant << "_da" << (cfg.use_da ? 1 : 0) << "_lam"
      << fmt_g6(cfg.lambda) << "_seed" << cfg.seed;
  return out.str();
}

// Trains into `dir` unless a finished checkpoint is already there; returns
// true when the run was reused.
inline bool ensure_run(const TrainConfig& cfg, const Dataset& ds,
                       const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / "checkpoint.final")) return true;
  const TrainedModel model = train(cfg, ds.splits, ds.tree);
  write_run_dir(model, dir);
  return false;
}

// Scores one trained model on the dataset's test split: top-1, per-class
// accuracy, and the confusion-tendency entries for the configured pairs.
// Prototypes come from the labeled source training split so no target label
// leaks into the representation audit.
inline EvalReport evaluate_model(const TrainedModel& model, const Dataset& ds,
                                 bool include_features = false) {
  EvalReport r;
  r.variant = model.config.variant;
  r.lambda = model.config.lambda;
  r.use_da = model.config.use_da;
  r.seed = model.config.seed;

  const auto& test = ds.splits.test_target();
  r.top1 = top1(model, test);

  std::map<int, int> total, correct;
  const std::vector<int> pred = predict(model, gather_inputs(test));
  for (size_t i = 0; i < test.size(); ++i) {
    ++total[test[i].y3];
    if (pred[i] == test[i].y3) ++correct[test[i].y3];
  }
  for (const auto& [c, n] : total)
    r.per_class_accuracy[c] = static_cast<double>(correct[c]) / n;

  const PrototypeSet protos = class_prototypes(
      model, ds.splits.train_source(), ds.tree.n_fine(), "train_source");
  for (const auto& p : ds.config.confusable_pairs) {
    EvalReport::MEntry e;
    e.c1 = p.fine_a;
    e.c2 = p.fine_b;
    e.m_c1_c1 = m_metric(model, test, protos, p.fine_a, p.fine_a);
    e.m_c1_c2 = m_metric(model, test, protos, p.fine_a, p.fine_b);
    r.m_table.push_back(e);
  }

  if (include_features) {
    r.fused_test = fuse(model, gather_inputs(test));
    for (const auto& s : test) {
      r.fused_y1.push_back(s.y1);
      r.fused_y2.push_back(s.y2);
      r.fused_y3.push_back(s.y3);
    }
  }
  return r;
}

inline EvalReport evaluate_run(const std::filesystem::path& run_dir,
                               const Dataset& ds,
                               bool include_features = false) {
  const auto ckpt = run_dir / "checkpoint.final";
  if (!std::filesystem::exists(ckpt))
    fail(Errc::io_error, "missing checkpoint " + ckpt.string());
  return evaluate_model(load_checkpoint(ckpt), ds, include_features);
}

// Collects reports for every completed run directory under `root`
// (recursive, sorted for reproducibility). Fused test features are attached
// to the first domain-adapted default-lambda "ours" run for the projection
// export.
inline std::vector<EvalReport> assemble_reports(
    const std::filesystem::path& root, const Dataset& ds) {
  std::vector<std::filesystem::path> run_dirs;
  if (std::filesystem::exists(root)) {
    for (const auto& entry :
         std::filesystem::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() &&
          entry.path().filename() == "checkpoint.final")
        run_dirs.push_back(entry.path().parent_path());
    }
  }
  std::sort(run_dirs.begin(), run_dirs.end());

  std::vector<EvalReport> reports;
  bool features_done = false;
  for (const auto& dir : run_dirs) {
    EvalReport r = evaluate_run(dir, ds);
    if (!features_done && r.variant == "ours" && r.use_da && r.lambda == 1.0) {
      r = evaluate_run(dir, ds, true);
      features_done = true;
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace hfusion
