// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// NCHW->NHWC conversion folded into the first and last kernels, and
// input-channel padding to multiples of 8 with pre-allocated buffers.

#ifndef BOLT_LAYOUT_PAD_H_
#define BOLT_LAYOUT_PAD_H_

#include <string>
#include <vector>

#include "bolt/graph.h"

namespace bolt {

inline constexpr int64_t kPadMultiple = 8;

struct PadPlan {
  std::string node_id;        // padded Conv2d
  int axis = 3;               // channel axis of the activation
  int64_t original = 0;
  int64_t padded = 0;
  std::string weight_param;   // zero-padded filter, [OC, R, S, padded]
  std::string buffer_param;   // pre-allocated padded activation
  std::string pad_node;       // Pad node writing buffer_param

  bool operator==(const PadPlan&) const = default;
};

struct PaddingResult {
  Graph graph;
  std::vector<PadPlan> plans;
};

/// Smallest multiple of 8 that is >= extent.
int64_t PaddedExtent(int64_t extent);

/// Pads the input channels of every Conv2d whose IC is not a multiple of 8.
/// Idempotent; the returned graph is typed.
PaddingResult PlanPadding(const Graph& typed);

/// Marks NCHW graph-input reads and NCHW model outputs on the kernels that
/// touch them; all internal activations become NHWC. Identity for graphs
/// without 4-D NCHW inputs. The returned graph is typed.
Graph InsertLayoutTransforms(const Graph& typed);

}  // namespace bolt

#endif  // BOLT_LAYOUT_PAD_H_
