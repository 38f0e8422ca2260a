#pragma once

#include <stdexcept>
#include <string>

namespace uqac {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Prompt (plus at least one generated token) does not fit the model context.
class TruncationError : public Error {
public:
    using Error::Error;
};

// Generation produced no tokens before end-of-sequence.
class DegenerateTraceError : public Error {
public:
    using Error::Error;
};

// Trace lacks data an operation needs (attention rows, answer span, hidden states).
class IncompleteTraceError : public Error {
public:
    using Error::Error;
};

class PositionError : public Error {
public:
    using Error::Error;
};

// Attention row with no mass left after BOS masking and re-weighting.
class DegenerateAttentionError : public Error {
public:
    using Error::Error;
};

// AUROC/ECE undefined for the given inputs (single class, empty input).
class DegenerateEvaluationError : public Error {
public:
    using Error::Error;
};

// Re-weighting factors cannot be fitted (zero anchor, zero denominator).
class DerivationError : public Error {
public:
    using Error::Error;
};

class LoadError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace uqac
