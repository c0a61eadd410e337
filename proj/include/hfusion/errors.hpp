#pragma once

#include <stdexcept>
#include <string>

namespace hfusion {

// Failure categories surfaced by the library. Each value corresponds to a
// documented error condition of one or more operations.
enum class Errc {
  conflicting_parent,
  empty_level,
  non_dense_labels,
  unknown_label,
  bad_level,
  bad_config,
  infeasible_counts,
  io_error,
  schema_mismatch,
  shape_mismatch,
  non_finite_input,
  tape_mismatch,
  non_finite_loss,
  index_out_of_range,
  batch_too_small,
  label_out_of_range,
  missing_class,
  degenerate_prototype,
  zero_vector,
  empty_split,
  no_samples_of_class,
  masked_label_access,
  config_split_mismatch,
  unknown_variant,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::conflicting_parent: return "ConflictingParent";
    case Errc::empty_level: return "EmptyLevel";
    case Errc::non_dense_labels: return "NonDenseLabels";
    case Errc::unknown_label: return "UnknownLabel";
    case Errc::bad_level: return "BadLevel";
    case Errc::bad_config: return "BadConfig";
    case Errc::infeasible_counts: return "InfeasibleCounts";
    case Errc::io_error: return "IoError";
    case Errc::schema_mismatch: return "SchemaMismatch";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::non_finite_input: return "NonFiniteInput";
    case Errc::tape_mismatch: return "TapeMismatch";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::index_out_of_range: return "IndexOutOfRange";
    case Errc::batch_too_small: return "BatchTooSmall";
    case Errc::label_out_of_range: return "LabelOutOfRange";
    case Errc::missing_class: return "MissingClass";
    case Errc::degenerate_prototype: return "DegeneratePrototype";
    case Errc::zero_vector: return "ZeroVector";
    case Errc::empty_split: return "EmptySplit";
    case Errc::no_samples_of_class: return "NoSamplesOfClass";
    case Errc::masked_label_access: return "MaskedLabelAccess";
    case Errc::config_split_mismatch: return "ConfigSplitMismatch";
    case Errc::unknown_variant: return "UnknownVariant";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace hfusion
