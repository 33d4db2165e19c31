#pragma once

#include <stdexcept>
#include <string>

namespace itmod {

// Invariant or precondition violation on a domain value.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Input file does not match the declared column mapping.
struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// Corpus-level failure (no usable rows, degenerate statistics).
struct CorpusError : std::runtime_error {
    explicit CorpusError(const std::string& what) : std::runtime_error(what) {}
};

// Requested operation cannot be applied to the given itinerary/pool.
struct FeasibilityError : std::runtime_error {
    explicit FeasibilityError(const std::string& what) : std::runtime_error(what) {}
};

// Bad caller-supplied parameter (k, ratios, ranges).
struct ParameterError : std::runtime_error {
    explicit ParameterError(const std::string& what) : std::runtime_error(what) {}
};

// Result table has holes or inconsistent settings.
struct AggregationError : std::runtime_error {
    explicit AggregationError(const std::string& what) : std::runtime_error(what) {}
};

// Model endpoint configuration problems.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Network/transport failure talking to a model endpoint.
struct TransportError : std::runtime_error {
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace itmod
