#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hfusion/datagen.hpp"
#include "hfusion/errors.hpp"
#include "hfusion/hierarchy.hpp"
#include "hfusion/pipeline.hpp"
#include "hfusion/util.hpp"

namespace hfusion {

// Flat key = value configuration with [section] headers. Keys are addressed
// as "section.key". Unknown keys are rejected at consumption time so typos
// fail loudly.
class KvConfig {
 public:
  static KvConfig parse(std::istream& in) {
    KvConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = trim(line);
      const size_t hash = s.find('#');
      if (hash != std::string::npos) s = trim(s.substr(0, hash));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          fail(Errc::bad_config,
               "line " + std::to_string(lineno) + ": unterminated section");
        section = trim(s.substr(1, s.size() - 2));
        continue;
      }
      const size_t eq = s.find('=');
      if (eq == std::string::npos)
        fail(Errc::bad_config,
             "line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(s.substr(0, eq));
      if (key.empty())
        fail(Errc::bad_config, "line " + std::to_string(lineno) + ": empty key");
      cfg.kv_[section.empty() ? key : section + "." + key] =
          trim(s.substr(eq + 1));
    }
    return cfg;
  }

  static KvConfig parse_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) fail(Errc::io_error, "cannot open config " + p.string());
    return parse(in);
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
  }
  double get_double(const std::string& key, double def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : parse_double(it->second);
  }
  int get_int(const std::string& key, int def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : static_cast<int>(parse_int(it->second));
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : parse_u64(it->second);
  }
  bool get_bool(const std::string& key, bool def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    fail(Errc::bad_config, key + ": expected boolean, got '" + v + "'");
  }

  // Every key must be consumed by one of the loaders below.
  void reject_unknown(const std::set<std::string>& known) const {
    for (const auto& [k, v] : kv_)
      if (!known.count(k)) fail(Errc::bad_config, "unknown config key '" + k + "'");
  }

 private:
  std::map<std::string, std::string> kv_;
};

struct SplitConfig {
  int n_train_target = 150;
  int n_val_target = 30;
  std::uint64_t seed = 7;
};

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "data.hierarchy_file", "data.d_in", "data.per_class_source",
      "data.per_class_target", "data.target_class_counts",
      "data.coarse_spread", "data.middle_spread", "data.fine_spread",
      "data.noise_sigma", "data.shift_rotation_angle",
      "data.shift_translation_norm", "data.confusable_pairs", "data.seed",
      "split.train_target", "split.val_target", "split.seed",
      "train.variant", "train.lambda", "train.alpha", "train.use_da",
      "train.ce_backprop_to_extractors", "train.epochs", "train.pk_classes",
      "train.pk_samples", "train.lr", "train.momentum", "train.weight_decay",
      "train.seed", "train.d_feat", "train.hidden"};
  return keys;
}

}  // namespace detail

// Confusable-pair syntax: comma-separated entries of fineA:fineB:proximity,
// class names resolved through the taxonomy alias table.
inline std::vector<ConfusablePair> parse_confusable_pairs(
    const std::string& text, const HierarchyTree& tree) {
  std::vector<ConfusablePair> out;
  for (const auto& entry : split(text, ',')) {
    const std::string e = trim(entry);
    if (e.empty()) continue;
    const auto parts = split(e, ':');
    if (parts.size() != 3)
      fail(Errc::bad_config, "confusable pair entry '" + e + "'");
    ConfusablePair p;
    p.fine_a = tree.fine_index(trim(parts[0]));
    p.fine_b = tree.fine_index(trim(parts[1]));
    p.proximity = parse_double(parts[2]);
    out.push_back(p);
  }
  return out;
}

inline std::string default_confusable_pairs() {
  return "3068b:6564:0.06,44728:3298:0.06,6564:3020:0.06,"
         "85080:6141:0.06,87087:85080:0.06";
}

inline GenConfig gen_config_from(const KvConfig& kv) {
  GenConfig c;
  const std::string hier = kv.get_str("data.hierarchy_file", "");
  if (hier.empty()) {
    c.tree = lego15_default();
  } else {
    std::ifstream in(hier);
    if (!in) fail(Errc::io_error, "cannot open hierarchy file " + hier);
    c.tree = load_hierarchy(in);
  }
  c.d_in = kv.get_int("data.d_in", c.d_in);
  c.per_class_source = kv.get_int("data.per_class_source", c.per_class_source);
  c.per_class_target = kv.get_int("data.per_class_target", c.per_class_target);
  if (kv.has("data.target_class_counts")) {
    for (const auto& tok :
         split(kv.get_str("data.target_class_counts", ""), ','))
      if (!trim(tok).empty())
        c.target_class_counts.push_back(static_cast<int>(parse_int(tok)));
  }
  c.coarse_spread = kv.get_double("data.coarse_spread", c.coarse_spread);
  c.middle_spread = kv.get_double("data.middle_spread", c.middle_spread);
  c.fine_spread = kv.get_double("data.fine_spread", c.fine_spread);
  c.noise_sigma = kv.get_double("data.noise_sigma", c.noise_sigma);
  c.shift_rotation_angle =
      kv.get_double("data.shift_rotation_angle", c.shift_rotation_angle);
  c.shift_translation_norm =
      kv.get_double("data.shift_translation_norm", c.shift_translation_norm);
  c.confusable_pairs = parse_confusable_pairs(
      kv.get_str("data.confusable_pairs", default_confusable_pairs()), c.tree);
  c.seed = kv.get_u64("data.seed", c.seed);
  validate(c);
  return c;
}

inline SplitConfig split_config_from(const KvConfig& kv) {
  SplitConfig s;
  s.n_train_target = kv.get_int("split.train_target", s.n_train_target);
  s.n_val_target = kv.get_int("split.val_target", s.n_val_target);
  s.seed = kv.get_u64("split.seed", s.seed);
  return s;
}

inline TrainConfig train_config_from(const KvConfig& kv) {
  TrainConfig c;
  c.variant = kv.get_str("train.variant", c.variant);
  c.level_assignment = make_variant(c.variant);
  c.lambda = kv.get_double("train.lambda", c.lambda);
  c.alpha = kv.get_double("train.alpha", c.alpha);
  c.use_da = kv.get_bool("train.use_da", c.use_da);
  c.ce_backprop_to_extractors = kv.get_bool(
      "train.ce_backprop_to_extractors", c.ce_backprop_to_extractors);
  c.epochs = kv.get_int("train.epochs", c.epochs);
  c.pk_classes = kv.get_int("train.pk_classes", c.pk_classes);
  c.pk_samples = kv.get_int("train.pk_samples", c.pk_samples);
  c.lr = kv.get_double("train.lr", c.lr);
  c.momentum = kv.get_double("train.momentum", c.momentum);
  c.weight_decay = kv.get_double("train.weight_decay", c.weight_decay);
  c.seed = kv.get_u64("train.seed", c.seed);
  c.d_feat = kv.get_int("train.d_feat", c.d_feat);
  if (kv.has("train.hidden")) {
    c.hidden.clear();
    for (const auto& tok : split(kv.get_str("train.hidden", ""), ','))
      if (!trim(tok).empty())
        c.hidden.push_back(static_cast<int>(parse_int(tok)));
  }
  validate(c);
  return c;
}

// Full default configuration in file syntax (what --print-config shows).
inline std::string default_config_text() {
  GenConfig g;
  TrainConfig t;
  SplitConfig s;
  std::ostringstream out;
  out << "[data]\n";
  out << "hierarchy_file =\n";  // empty: built-in 15-class Lego taxonomy
  out << "d_in = " << g.d_in << "\n";
  out << "per_class_source = " << g.per_class_source << "\n";
  out << "per_class_target = " << g.per_class_target << "\n";
  out << "coarse_spread = " << fmt_g6(g.coarse_spread) << "\n";
  out << "middle_spread = " << fmt_g6(g.middle_spread) << "\n";
  out << "fine_spread = " << fmt_g6(g.fine_spread) << "\n";
  out << "noise_sigma = " << fmt_g6(g.noise_sigma) << "\n";
  out << "shift_rotation_angle = " << fmt_g6(g.shift_rotation_angle) << "\n";
  out << "shift_translation_norm = " << fmt_g6(g.shift_translation_norm)
      << "\n";
  out << "confusable_pairs = " << default_confusable_pairs() << "\n";
  out << "seed = " << g.seed << "\n";
  out << "\n[split]\n";
  out << "train_target = " << s.n_train_target << "\n";
  out << "val_target = " << s.n_val_target << "\n";
  out << "seed = " << s.seed << "\n";
  out << "\n[train]\n";
  out << "variant = " << t.variant << "\n";
  out << "lambda = " << fmt_g6(t.lambda) << "\n";
  out << "alpha = " << fmt_g6(t.alpha) << "\n";
  out << "use_da = " << (t.use_da ? 1 : 0) << "\n";
  out << "ce_backprop_to_extractors = " << (t.ce_backprop_to_extractors ? 1 : 0)
      << "\n";
  out << "epochs = " << t.epochs << "\n";
  out << "pk_classes = " << t.pk_classes << "\n";
  out << "pk_samples = " << t.pk_samples << "\n";
  out << "lr = " << fmt_g6(t.lr) << "\n";
  out << "momentum = " << fmt_g6(t.momentum) << "\n";
  out << "weight_decay = " << fmt_g6(t.weight_decay) << "\n";
  out << "d_feat = " << t.d_feat << "\n";
  out << "hidden = ";
  for (size_t i = 0; i < t.hidden.size(); ++i)
    out << (i ? "," : "") << t.hidden[i];
  out << "\n";
  out << "seed = " << t.seed << "\n";
  return out.str();
}

}  // namespace hfusion
