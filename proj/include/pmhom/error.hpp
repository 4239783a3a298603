#pragma once

#include <stdexcept>
#include <string>

namespace pmhom {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PMHOM_ERROR(Name)                 \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

PMHOM_ERROR(ParseError)
PMHOM_ERROR(ValidationError)
PMHOM_ERROR(OutOfDomain)
PMHOM_ERROR(StaleInterpolant)
PMHOM_ERROR(IllConditionedExtraction)
PMHOM_ERROR(FitResidualTooLarge)
PMHOM_ERROR(NearBoundary)
PMHOM_ERROR(DegreeOverflow)
PMHOM_ERROR(EmptyDomainSample)
PMHOM_ERROR(BudgetUndefined)
PMHOM_ERROR(LeftDomain)
PMHOM_ERROR(StepUnderflow)
PMHOM_ERROR(NotRadial)
PMHOM_ERROR(SingularPencil)
PMHOM_ERROR(SingularAt)
PMHOM_ERROR(HypothesisFailure)
PMHOM_ERROR(UnknownExample)

#undef PMHOM_ERROR

// Raised when the improper integral defining a homogeneous solution does not
// converge.  Carries the degree and block once the induction annotates it.
class DivergentCohomologicalIntegral : public Error {
 public:
  enum class Reason { non_integrable_tail, blow_up, stagnating_tail, not_converged };

  DivergentCohomologicalIntegral(Reason reason, std::string detail)
      : Error(detail), reason_(reason), detail_(std::move(detail)) {}

  Reason reason() const { return reason_; }
  const std::string& detail() const { return detail_; }
  int degree() const { return degree_; }
  const std::string& block() const { return block_; }

  DivergentCohomologicalIntegral annotated(int degree, std::string block) const {
    DivergentCohomologicalIntegral e(reason_, "degree " + std::to_string(degree) + ", block " +
                                                  block + ": " + detail_);
    e.detail_ = detail_;
    e.degree_ = degree;
    e.block_ = std::move(block);
    return e;
  }

 private:
  Reason reason_;
  std::string detail_;
  int degree_ = -1;
  std::string block_;
};

inline const char* to_string(DivergentCohomologicalIntegral::Reason r) {
  switch (r) {
    case DivergentCohomologicalIntegral::Reason::non_integrable_tail: return "non-integrable tail";
    case DivergentCohomologicalIntegral::Reason::blow_up: return "partial integral blow-up";
    case DivergentCohomologicalIntegral::Reason::stagnating_tail: return "stagnating tail increments";
    case DivergentCohomologicalIntegral::Reason::not_converged: return "not converged within horizon";
  }
  return "?";
}

}  // namespace pmhom
