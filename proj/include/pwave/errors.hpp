#ifndef PWAVE_ERRORS_HPP
#define PWAVE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pwave {

// Shape or index mismatch between tensors, metrics, or points.
struct DimError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed expression or schema text; offset is the byte position of the
// first character that could not be consumed.
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t at)
      : std::runtime_error(msg + " at byte " + std::to_string(at)), offset(at) {}
  std::size_t offset;
};

// Domain violation while evaluating an expression (log of a non-positive
// value, division by zero); names the offending node.
struct EvalError : std::runtime_error {
  explicit EvalError(const std::string& node)
      : std::runtime_error("cannot evaluate '" + node + "' here"), where(node) {}
  std::string where;
};

// Ill-formed contraction schema (unbalanced labels, bad arity, bad order).
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad manifold configuration (unknown family, wrong parameter counts).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metric not invertible at the evaluation point.
struct SingularMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invariant evaluated where its defining denominator vanishes.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Vectors fail to span the kind of plane an operator needs.
struct PlaneError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Curve handed to a holonomy routine is not closed.
struct LoopError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Curvature data does not have the shape a model-recovery routine assumes.
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Family hypothesis violated hard enough that a construction cannot proceed.
struct HypothesisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pwave

#endif
