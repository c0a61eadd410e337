#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hfusion/datagen.hpp"
#include "hfusion/errors.hpp"
#include "hfusion/hierarchy.hpp"
#include "hfusion/losses.hpp"
#include "hfusion/matrix.hpp"
#include "hfusion/mlp.hpp"
#include "hfusion/util.hpp"

namespace hfusion {

// Training settings for one run. level_assignment picks the label level
// (1 coarse, 2 middle, 3 fine) supervising each of the three extractors;
// the named variants map onto it via make_variant.
struct TrainConfig {
  std::string variant = "ours";
  std::array<int, 3> level_assignment{1, 2, 3};
  double lambda = 1.0;  // trade-off between the metric and domain terms
  double alpha = 0.3;   // triplet margin
  bool use_da = true;
  // When set, classification gradients also update the extractors through
  // the fused feature. Off keeps extractors trained purely by their own
  // metric + domain objective.
  bool ce_backprop_to_extractors = false;
  int epochs = 30;
  int pk_classes = 4;  // P distinct fine classes per batch
  int pk_samples = 2;  // K samples per class
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::uint64_t seed = 0;
  int d_feat = 16;
  std::vector<int> hidden{64, 64};

  int batch_size() const { return pk_classes * pk_samples; }
};

inline void validate(const TrainConfig& cfg) {
  for (int l : cfg.level_assignment)
    if (l < 1 || l > 3) fail(Errc::bad_config, "level assignment must be 1..3");
  if (cfg.lambda < 0) fail(Errc::bad_config, "lambda must be >= 0");
  if (cfg.alpha < 0) fail(Errc::bad_config, "alpha must be >= 0");
  if (cfg.epochs < 1) fail(Errc::bad_config, "epochs must be >= 1");
  if (cfg.pk_classes < 2 || cfg.pk_samples < 2)
    fail(Errc::bad_config, "PK sampler needs P >= 2 and K >= 2");
  if (cfg.lr < 0 || cfg.momentum < 0 || cfg.weight_decay < 0)
    fail(Errc::bad_config, "optimizer hyperparameters must be >= 0");
  if (cfg.d_feat < 1) fail(Errc::bad_config, "d_feat must be >= 1");
}

// Named label-level assignments.
inline std::array<int, 3> make_variant(const std::string& name) {
  if (name == "ours") return {1, 2, 3};
  if (name == "baseline") return {3, 3, 3};
  if (name == "baseline_w_coarse") return {1, 3, 3};
  if (name == "baseline_w_middle") return {3, 2, 3};
  fail(Errc::unknown_variant, "'" + name + "'");
}

struct EpochStats {
  std::array<double, 3> triplet{0, 0, 0};
  std::array<double, 3> mmd{0, 0, 0};
  double ce = 0.0;
  double val_acc = 0.0;
};

// Everything a finished run carries: the three extractors, the fused-feature
// classifier, the exact configuration, and per-epoch loss history.
struct TrainedModel {
  std::array<Mlp, 3> extractors;
  Mlp classifier;
  TrainConfig config;
  std::vector<EpochStats> history;

  int d_feat() const { return extractors[0].out_dim(); }
  int in_dim() const { return extractors[0].in_dim(); }
};

inline size_t parameter_count(const TrainedModel& m) {
  return m.extractors[0].param_count() + m.extractors[1].param_count() +
         m.extractors[2].param_count() + m.classifier.param_count();
}

// Concatenated extractor outputs [G1(x) | G2(x) | G3(x)].
inline Mat fuse(const TrainedModel& m, const Mat& x) {
  Mat f = forward(m.extractors[0], x);
  f = hstack(f, forward(m.extractors[1], x));
  f = hstack(f, forward(m.extractors[2], x));
  return f;
}

// Fine-level predictions: argmax over classifier logits on fused features,
// ties resolved toward the lowest class index.
inline std::vector<int> predict(const TrainedModel& m, const Mat& x) {
  const Mat logits = forward(m.classifier, fuse(m, x));
  std::vector<int> out(logits.rows);
  for (int i = 0; i < logits.rows; ++i) {
    int best = 0;
    for (int j = 1; j < logits.cols; ++j)
      if (logits(i, j) > logits(i, best)) best = j;
    out[i] = best;
  }
  return out;
}

namespace detail {

inline Mat gather_x(const std::vector<Sample>& samples,
                    const std::vector<size_t>& idx) {
  Mat x(static_cast<int>(idx.size()),
        static_cast<int>(samples[idx[0]].x.size()));
  for (size_t r = 0; r < idx.size(); ++r)
    for (size_t k = 0; k < samples[idx[0]].x.size(); ++k)
      x(static_cast<int>(r), static_cast<int>(k)) = samples[idx[r]].x[k];
  return x;
}

inline Mat gather_masked_x(const Splits::MaskedTargetView& view,
                           const std::vector<size_t>& idx) {
  Mat x(static_cast<int>(idx.size()), static_cast<int>(view.x(idx[0]).size()));
  for (size_t r = 0; r < idx.size(); ++r) {
    const Vec& v = view.x(idx[r]);
    for (size_t k = 0; k < v.size(); ++k)
      x(static_cast<int>(r), static_cast<int>(k)) = v[k];
  }
  return x;
}

}  // namespace detail

// Trains the full system. Per batch: a PK-sampled labeled source batch and,
// when domain adaptation is on, a same-size unlabeled target batch. Each
// extractor minimizes its level-specific hard-triplet loss plus
// lambda * MMD between its source and target features; the classifier
// minimizes cross entropy on the fused source features against fine labels.
// All four networks hold independent optimizer state and step once per
// batch from the batch-start parameters. Strictly single-threaded and
// deterministic for a fixed config.
inline TrainedModel train(const TrainConfig& cfg, const Splits& splits,
                          const HierarchyTree& tree) {
  validate(cfg);
  validate(tree);

  const auto& source = splits.train_source();
  if (source.empty()) fail(Errc::empty_split, "train_source is empty");
  const int d_in = static_cast<int>(source[0].x.size());
  const int n_fine = tree.n_fine();
  const int batch = cfg.batch_size();

  // Source indices per fine class; PK sampling needs K per drawn class.
  std::vector<std::vector<size_t>> class_idx(n_fine);
  for (size_t i = 0; i < source.size(); ++i) {
    if (source[i].y3 < 0 || source[i].y3 >= n_fine)
      fail(Errc::config_split_mismatch, "source label outside taxonomy");
    class_idx[source[i].y3].push_back(i);
  }
  for (int c = 0; c < n_fine; ++c)
    if (static_cast<int>(class_idx[c].size()) < cfg.pk_samples)
      fail(Errc::config_split_mismatch,
           "class " + std::to_string(c) + " has fewer than K source samples");
  if (cfg.pk_classes > n_fine)
    fail(Errc::config_split_mismatch, "P exceeds the number of fine classes");
  if (cfg.use_da && splits.train_target_size() < static_cast<size_t>(batch))
    fail(Errc::config_split_mismatch, "train_target smaller than one batch");

  Rng rng(cfg.seed);
  TrainedModel model;
  model.config = cfg;
  {
    std::vector<int> dims{d_in};
    for (int h : cfg.hidden) dims.push_back(h);
    dims.push_back(cfg.d_feat);
    for (int i = 0; i < 3; ++i) model.extractors[i] = make_mlp(dims, rng);
    model.classifier = make_mlp({3 * cfg.d_feat, n_fine}, rng);
  }

  std::array<OptimState, 3> opt_g;
  for (int i = 0; i < 3; ++i)
    opt_g[i] = make_optim(model.extractors[i], cfg.lr, cfg.momentum,
                          cfg.weight_decay);
  OptimState opt_c =
      make_optim(model.classifier, cfg.lr, cfg.momentum, cfg.weight_decay);

  const int steps =
      std::max<int>(1, static_cast<int>(source.size()) / batch);
  const auto target_view = splits.train_target();

  std::vector<int> all_classes(n_fine);
  for (int c = 0; c < n_fine; ++c) all_classes[c] = c;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats;
    for (int step = 0; step < steps; ++step) {
      // PK batch: P classes, K source samples each.
      std::vector<size_t> batch_idx;
      std::vector<int> y3;
      {
        std::vector<int> classes = all_classes;
        rng.partial_shuffle(classes, cfg.pk_classes);
        for (int p = 0; p < cfg.pk_classes; ++p) {
          std::vector<size_t> pool = class_idx[classes[p]];
          rng.partial_shuffle(pool, cfg.pk_samples);
          for (int k = 0; k < cfg.pk_samples; ++k) {
            batch_idx.push_back(pool[k]);
            y3.push_back(classes[p]);
          }
        }
      }
      const Mat xs = detail::gather_x(source, batch_idx);

      Mat xt;
      if (cfg.use_da) {
        std::vector<size_t> tpool(target_view.size());
        for (size_t i = 0; i < tpool.size(); ++i) tpool[i] = i;
        rng.partial_shuffle(tpool, static_cast<size_t>(batch));
        tpool.resize(batch);
        xt = detail::gather_masked_x(target_view, tpool);
      }

      std::array<Mat, 3> feats_s;
      std::array<Tape, 3> tapes_s;
      std::array<Grads, 3> grads_g;
      for (int i = 0; i < 3; ++i) {
        feats_s[i] = forward(model.extractors[i], xs, &tapes_s[i]);
        const std::vector<int> lv =
            labels_at_level(tree, y3, cfg.level_assignment[i]);
        const auto triplets = mine_hard_triplets(feats_s[i], lv);
        LossGrad tl = triplet_loss(feats_s[i], triplets, cfg.alpha);
        stats.triplet[i] += tl.value;

        Mat dfs = std::move(tl.dfeatures);
        Grads g_target;
        bool have_target_grads = false;
        if (cfg.use_da) {
          Tape tape_t;
          const Mat feats_t = forward(model.extractors[i], xt, &tape_t);
          const KernelBank bank = median_bandwidth(vstack(feats_s[i], feats_t));
          MmdGrad mmd = mmd_loss(feats_s[i], feats_t, bank);
          stats.mmd[i] += mmd.value;
          scale_inplace(mmd.dsource, cfg.lambda);
          scale_inplace(mmd.dtarget, cfg.lambda);
          add_inplace(dfs, mmd.dsource);
          g_target = backward(model.extractors[i], tape_t, mmd.dtarget);
          have_target_grads = true;
        }
        grads_g[i] = backward(model.extractors[i], tapes_s[i], dfs);
        if (have_target_grads) accumulate(grads_g[i], g_target);

        if (!std::isfinite(stats.triplet[i]) || !std::isfinite(stats.mmd[i]))
          fail(Errc::non_finite_loss, "extractor loss diverged");
      }

      // Classifier on fused source features.
      const Mat fused = hstack(hstack(feats_s[0], feats_s[1]), feats_s[2]);
      Tape tape_c;
      const Mat logits = forward(model.classifier, fused, &tape_c);
      const CeGrad ce = cross_entropy(logits, y3);
      stats.ce += ce.value;
      if (!std::isfinite(ce.value))
        fail(Errc::non_finite_loss, "classifier loss diverged");
      Mat dfused;
      Grads grads_c = backward(model.classifier, tape_c, ce.dlogits,
                               cfg.ce_backprop_to_extractors ? &dfused : nullptr);
      if (cfg.ce_backprop_to_extractors) {
        const int d = cfg.d_feat;
        for (int i = 0; i < 3; ++i) {
          const Mat slice = slice_cols(dfused, i * d, (i + 1) * d);
          accumulate(grads_g[i], backward(model.extractors[i], tapes_s[i], slice));
        }
      }

      for (int i = 0; i < 3; ++i)
        sgd_step(model.extractors[i], grads_g[i], opt_g[i]);
      sgd_step(model.classifier, grads_c, opt_c);
    }

    for (int i = 0; i < 3; ++i) {
      stats.triplet[i] /= steps;
      stats.mmd[i] /= steps;
    }
    stats.ce /= steps;

    if (!splits.val_target().empty()) {
      std::vector<size_t> all(splits.val_target().size());
      for (size_t i = 0; i < all.size(); ++i) all[i] = i;
      const Mat xv = detail::gather_x(splits.val_target(), all);
      const std::vector<int> pred = predict(model, xv);
      int correct = 0;
      for (size_t i = 0; i < all.size(); ++i)
        if (pred[i] == splits.val_target()[i].y3) ++correct;
      stats.val_acc = static_cast<double>(correct) / all.size();
    }
    model.history.push_back(stats);
  }

  for (int i = 0; i < 3; ++i)
    for (const auto& l : model.extractors[i].layers)
      if (!l.w.all_finite()) fail(Errc::non_finite_loss, "parameters diverged");
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoint and run-directory output
// ---------------------------------------------------------------------------

constexpr int kCheckpointFormatVersion = 1;

namespace detail {

inline void write_mlp(std::ostream& out, const std::string& name,
                      const Mlp& net) {
  out << "net " << name << ' ' << net.layers.size() << '\n';
  for (const auto& l : net.layers) {
    out << "layer " << l.w.cols << ' ' << l.w.rows << ' ' << act_name(l.act)
        << '\n';
    for (int i = 0; i < l.w.rows; ++i) {
      out << 'w';
      for (int j = 0; j < l.w.cols; ++j) out << ' ' << fmt_g17(l.w(i, j));
      out << '\n';
    }
    out << 'b';
    for (double v : l.b) out << ' ' << fmt_g17(v);
    out << '\n';
  }
}

inline Mlp read_mlp(std::istream& in, size_t n_layers) {
  Mlp net;
  std::string line;
  for (size_t k = 0; k < n_layers; ++k) {
    if (!std::getline(in, line)) fail(Errc::schema_mismatch, "truncated net");
    const auto head = split(trim(line), ' ');
    if (head.size() != 4 || head[0] != "layer")
      fail(Errc::schema_mismatch, "expected layer header");
    Layer l;
    const int in_dim = static_cast<int>(parse_int(head[1]));
    const int out_dim = static_cast<int>(parse_int(head[2]));
    l.act = act_from_name(head[3]);
    l.w = Mat(out_dim, in_dim);
    for (int i = 0; i < out_dim; ++i) {
      if (!std::getline(in, line)) fail(Errc::schema_mismatch, "truncated row");
      const auto toks = split(trim(line), ' ');
      if (toks.size() != static_cast<size_t>(in_dim) + 1 || toks[0] != "w")
        fail(Errc::schema_mismatch, "bad weight row");
      for (int j = 0; j < in_dim; ++j) l.w(i, j) = parse_double(toks[j + 1]);
    }
    if (!std::getline(in, line)) fail(Errc::schema_mismatch, "truncated bias");
    const auto toks = split(trim(line), ' ');
    if (toks.size() != static_cast<size_t>(out_dim) + 1 || toks[0] != "b")
      fail(Errc::schema_mismatch, "bad bias row");
    l.b.resize(out_dim);
    for (int j = 0; j < out_dim; ++j) l.b[j] = parse_double(toks[j + 1]);
    net.layers.push_back(std::move(l));
  }
  return net;
}

inline std::string config_echo_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "[train]\n";
  out << "variant = " << c.variant << '\n';
  out << "level_assignment = " << c.level_assignment[0] << ','
      << c.level_assignment[1] << ',' << c.level_assignment[2] << '\n';
  out << "lambda = " << fmt_g17(c.lambda) << '\n';
  out << "alpha = " << fmt_g17(c.alpha) << '\n';
  out << "use_da = " << (c.use_da ? 1 : 0) << '\n';
  out << "ce_backprop_to_extractors = " << (c.ce_backprop_to_extractors ? 1 : 0)
      << '\n';
  out << "epochs = " << c.epochs << '\n';
  out << "pk_classes = " << c.pk_classes << '\n';
  out << "pk_samples = " << c.pk_samples << '\n';
  out << "lr = " << fmt_g17(c.lr) << '\n';
  out << "momentum = " << fmt_g17(c.momentum) << '\n';
  out << "weight_decay = " << fmt_g17(c.weight_decay) << '\n';
  out << "seed = " << c.seed << '\n';
  out << "d_feat = " << c.d_feat << '\n';
  out << "hidden = ";
  for (size_t i = 0; i < c.hidden.size(); ++i)
    out << (i ? "," : "") << c.hidden[i];
  out << '\n';
  return out.str();
}

}  // namespace detail

inline void save_checkpoint(const TrainedModel& m,
                            const std::filesystem::path& path) {
  std::ostringstream out;
  out << "hfusion-checkpoint " << kCheckpointFormatVersion << '\n';
  out << "seed " << m.config.seed << '\n';
  out << "epoch " << m.history.size() << '\n';
  const TrainConfig& c = m.config;
  out << "variant " << c.variant << '\n';
  out << "levels " << c.level_assignment[0] << ' ' << c.level_assignment[1]
      << ' ' << c.level_assignment[2] << '\n';
  out << "lambda " << fmt_g17(c.lambda) << '\n';
  out << "alpha " << fmt_g17(c.alpha) << '\n';
  out << "use_da " << (c.use_da ? 1 : 0) << '\n';
  out << "ce_backprop_to_extractors " << (c.ce_backprop_to_extractors ? 1 : 0)
      << '\n';
  out << "epochs " << c.epochs << '\n';
  out << "pk " << c.pk_classes << ' ' << c.pk_samples << '\n';
  out << "optimizer " << fmt_g17(c.lr) << ' ' << fmt_g17(c.momentum) << ' '
      << fmt_g17(c.weight_decay) << '\n';
  out << "d_feat " << c.d_feat << '\n';
  out << "hidden";
  for (int h : c.hidden) out << ' ' << h;
  out << '\n';
  detail::write_mlp(out, "extractor1", m.extractors[0]);
  detail::write_mlp(out, "extractor2", m.extractors[1]);
  detail::write_mlp(out, "extractor3", m.extractors[2]);
  detail::write_mlp(out, "classifier", m.classifier);
  write_text_file(path, out.str());
}

inline TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(Errc::schema_mismatch, "empty checkpoint");
  {
    const auto head = split(trim(line), ' ');
    if (head.size() != 2 || head[0] != "hfusion-checkpoint" ||
        parse_int(head[1]) != kCheckpointFormatVersion)
      fail(Errc::schema_mismatch, "bad checkpoint header");
  }

  TrainedModel m;
  TrainConfig& c = m.config;
  int nets_read = 0;
  while (std::getline(in, line)) {
    const std::string s = trim(line);
    if (s.empty()) continue;
    const auto toks = split(s, ' ');
    const std::string& key = toks[0];
    if (key == "seed") c.seed = parse_u64(toks.at(1));
    else if (key == "epoch") { /* informational; history is not serialized */ }
    else if (key == "variant") c.variant = toks.at(1);
    else if (key == "levels") {
      c.level_assignment = {static_cast<int>(parse_int(toks.at(1))),
                            static_cast<int>(parse_int(toks.at(2))),
                            static_cast<int>(parse_int(toks.at(3)))};
    } else if (key == "lambda") c.lambda = parse_double(toks.at(1));
    else if (key == "alpha") c.alpha = parse_double(toks.at(1));
    else if (key == "use_da") c.use_da = parse_int(toks.at(1)) != 0;
    else if (key == "ce_backprop_to_extractors")
      c.ce_backprop_to_extractors = parse_int(toks.at(1)) != 0;
    else if (key == "epochs") c.epochs = static_cast<int>(parse_int(toks.at(1)));
    else if (key == "pk") {
      c.pk_classes = static_cast<int>(parse_int(toks.at(1)));
      c.pk_samples = static_cast<int>(parse_int(toks.at(2)));
    } else if (key == "optimizer") {
      c.lr = parse_double(toks.at(1));
      c.momentum = parse_double(toks.at(2));
      c.weight_decay = parse_double(toks.at(3));
    } else if (key == "d_feat") c.d_feat = static_cast<int>(parse_int(toks.at(1)));
    else if (key == "hidden") {
      c.hidden.clear();
      for (size_t i = 1; i < toks.size(); ++i)
        c.hidden.push_back(static_cast<int>(parse_int(toks[i])));
    } else if (key == "net") {
      const std::string& name = toks.at(1);
      const size_t n_layers = static_cast<size_t>(parse_int(toks.at(2)));
      Mlp net = detail::read_mlp(in, n_layers);
      if (name == "extractor1") m.extractors[0] = std::move(net);
      else if (name == "extractor2") m.extractors[1] = std::move(net);
      else if (name == "extractor3") m.extractors[2] = std::move(net);
      else if (name == "classifier") m.classifier = std::move(net);
      else fail(Errc::schema_mismatch, "unknown net '" + name + "'");
      ++nets_read;
    } else {
      fail(Errc::schema_mismatch, "unknown checkpoint key '" + key + "'");
    }
  }
  if (nets_read != 4) fail(Errc::schema_mismatch, "checkpoint missing nets");
  return m;
}

inline std::string history_csv(const TrainedModel& m) {
  std::ostringstream out;
  out << "epoch,lt1,lt2,lt3,mmd1,mmd2,mmd3,ce,val_acc\n";
  for (size_t e = 0; e < m.history.size(); ++e) {
    const EpochStats& s = m.history[e];
    out << (e + 1);
    for (int i = 0; i < 3; ++i) out << ',' << fmt_g17(s.triplet[i]);
    for (int i = 0; i < 3; ++i) out << ',' << fmt_g17(s.mmd[i]);
    out << ',' << fmt_g17(s.ce) << ',' << fmt_g17(s.val_acc) << '\n';
  }
  return out.str();
}

// Run directory layout: config.echo, history.csv, checkpoint.final.
// checkpoint.final is written last so its presence marks a completed run.
inline void write_run_dir(const TrainedModel& m,
                          const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(Errc::io_error, "cannot create " + dir.string());
  write_text_file(dir / "config.echo", detail::config_echo_text(m.config));
  write_text_file(dir / "history.csv", history_csv(m));
  save_checkpoint(m, dir / "checkpoint.final");
}

}  // namespace hfusion
