// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace halfv {

enum class ErrorKind {
    Shape,
    Domain,
    Validation,
    Format,
    CorruptFile,
    Io,
    Config,
    DetectionFailure,
    DegenerateSpectrum,
    Refused,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), m_kind(kind) {}

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

/// Raised by the stage detector when the curve has no qualifying onset. The
/// curve is carried along so callers can report it or fall back to explicit
/// layer indices.
class DetectionFailure : public Error {
public:
    DetectionFailure(const std::string& message, std::vector<double> curve)
        : Error(ErrorKind::DetectionFailure, message), m_curve(std::move(curve)) {}

    const std::vector<double>& curve() const noexcept { return m_curve; }

private:
    std::vector<double> m_curve;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace halfv
