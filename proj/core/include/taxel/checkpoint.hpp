// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0
//
// Model checkpoints: a little-endian uint32 header length, a JSON header
// naming every tensor with its shape and element offset, then one float64
// blob. Saving the same parameters twice produces identical bytes.

#pragma once

#include <string>

#include "taxel/nn.hpp"

namespace taxel::nn {

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const std::string& description);

/// Copies tensor values into an already-built store. Every registered
/// parameter must appear in the file with a matching shape, and the file
/// must not carry tensors the store does not know.
void load_checkpoint(const std::string& path, ParamStore& store);

std::string checkpoint_description(const std::string& path);

}  // namespace taxel::nn
