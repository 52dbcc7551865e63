#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bilevel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexSet = std::vector<std::size_t>;

/// Base class for every failure raised by the toolkit. Statuses such as an
/// infeasible LP are reported through result structs, not exceptions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BILEVEL_DEFINE_ERROR(Name)          \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

BILEVEL_DEFINE_ERROR(DimensionError);
BILEVEL_DEFINE_ERROR(NumericDegeneracy);
BILEVEL_DEFINE_ERROR(NotSPD);
BILEVEL_DEFINE_ERROR(InfeasibleProblem);
BILEVEL_DEFINE_ERROR(DomainError);
BILEVEL_DEFINE_ERROR(InfeasiblePoint);
BILEVEL_DEFINE_ERROR(LowerLevelUnbounded);
BILEVEL_DEFINE_ERROR(DualInfeasible);
BILEVEL_DEFINE_ERROR(InfeasibleStart);
BILEVEL_DEFINE_ERROR(InfeasibleInstance);
BILEVEL_DEFINE_ERROR(InfeasibleComplementarity);
BILEVEL_DEFINE_ERROR(EmptyTable);

#undef BILEVEL_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(const std::string& field, const std::string& what)
      : Error("parse error in '" + field + "': " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace bilevel
