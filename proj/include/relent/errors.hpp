#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace relent {

enum class ErrorCode {
  // shift_core
  EmptyAfterPruning,
  DuplicateEdge,
  UnknownSymbol,
  NotIrreducible,
  NoConvergence,
  TrivialComponent,
  BlockExplosion,
  // markov_measures
  UnsupportedEdgeWeight,
  ReducibleAmbiguity,
  CodeMismatch,
  NotErgodic,
  NotALift,
  // factor_codes
  EdgeNotPreserved,
  NotFiniteToOne,
  Inconclusive,
  EmptyProduct,
  BadLevel,
  // joining_lab
  InadmissibleWindow,
  NoPreimage,
  WindowMismatch,
  EmptyS,
  BadWindow,
  // mmre_solver
  InfeasibleSupport,
  Infeasible,
  MaxIterations,
  SweepNotMonotone,
  // skew_standard
  NoStrip,
  BadTarget,
  BranchSelectionAmbiguous,
  MonotonicityViolated,
  EmptyIntersection,
  DegenerateOrbit,
  // io / cli
  Schema,
  Io,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::EmptyAfterPruning: return "EmptyAfterPruning";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::UnknownSymbol: return "UnknownSymbol";
    case ErrorCode::NotIrreducible: return "NotIrreducible";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::TrivialComponent: return "TrivialComponent";
    case ErrorCode::BlockExplosion: return "BlockExplosion";
    case ErrorCode::UnsupportedEdgeWeight: return "UnsupportedEdgeWeight";
    case ErrorCode::ReducibleAmbiguity: return "ReducibleAmbiguity";
    case ErrorCode::CodeMismatch: return "CodeMismatch";
    case ErrorCode::NotErgodic: return "NotErgodic";
    case ErrorCode::NotALift: return "NotALift";
    case ErrorCode::EdgeNotPreserved: return "EdgeNotPreserved";
    case ErrorCode::NotFiniteToOne: return "NotFiniteToOne";
    case ErrorCode::Inconclusive: return "Inconclusive";
    case ErrorCode::EmptyProduct: return "EmptyProduct";
    case ErrorCode::BadLevel: return "BadLevel";
    case ErrorCode::InadmissibleWindow: return "InadmissibleWindow";
    case ErrorCode::NoPreimage: return "NoPreimage";
    case ErrorCode::WindowMismatch: return "WindowMismatch";
    case ErrorCode::EmptyS: return "EmptyS";
    case ErrorCode::BadWindow: return "BadWindow";
    case ErrorCode::InfeasibleSupport: return "InfeasibleSupport";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::SweepNotMonotone: return "SweepNotMonotone";
    case ErrorCode::NoStrip: return "NoStrip";
    case ErrorCode::BadTarget: return "BadTarget";
    case ErrorCode::BranchSelectionAmbiguous: return "BranchSelectionAmbiguous";
    case ErrorCode::MonotonicityViolated: return "MonotonicityViolated";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::DegenerateOrbit: return "DegenerateOrbit";
    case ErrorCode::Schema: return "Schema";
    case ErrorCode::Io: return "Io";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure in the library is reported through this type; `code()` is the
/// machine-readable reason and `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace relent
