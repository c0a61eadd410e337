#pragma once

// Hierarchical feature fusion for unsupervised domain adaptation:
// level-supervised feature extractors with hard-triplet and multi-kernel
// MMD objectives, concatenated into a fine-level classifier, plus the
// synthetic two-domain benchmark and experiment tooling around them.

#include "hfusion/config.hpp"
#include "hfusion/datagen.hpp"
#include "hfusion/errors.hpp"
#include "hfusion/eval.hpp"
#include "hfusion/hierarchy.hpp"
#include "hfusion/losses.hpp"
#include "hfusion/matrix.hpp"
#include "hfusion/mlp.hpp"
#include "hfusion/pipeline.hpp"
#include "hfusion/rng.hpp"
#include "hfusion/runner.hpp"
#include "hfusion/util.hpp"
