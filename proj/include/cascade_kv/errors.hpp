// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cascade_kv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Key/value dimension mismatch or otherwise malformed cache entry.
class InvalidEntryError : public Error {
public:
    using Error::Error;
};

class EmptyStoreError : public Error {
public:
    using Error::Error;
};

/// Score vector does not line up one-to-one with the resident tokens.
class ScoreAlignmentError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tokens or queries presented out of stream order.
class OrderingError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class UnsupportedDimensionError : public Error {
public:
    using Error::Error;
};

class UndefinedSparsityError : public Error {
public:
    using Error::Error;
};

class IncompleteTraceError : public Error {
public:
    using Error::Error;
};

namespace detail {

template <class E>
inline void require(bool cond, const std::string& message) {
    if (!cond) {
        throw E(message);
    }
}

}  // namespace detail
}  // namespace cascade_kv
