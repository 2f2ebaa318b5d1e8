// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace halfv {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace halfv
