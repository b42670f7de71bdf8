#pragma once

#include <stdexcept>
#include <string>

namespace vacstrat {

// Base of every domain error raised by the library. The category string is
// surfaced by the CLI ("schema", "fit", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define VACSTRAT_DEFINE_ERROR(Name, tag)                                  \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(tag, what) {}          \
  };

VACSTRAT_DEFINE_ERROR(SchemaError, "schema")
VACSTRAT_DEFINE_ERROR(ParseError, "parse")
VACSTRAT_DEFINE_ERROR(ImputationError, "imputation")
VACSTRAT_DEFINE_ERROR(MetadataError, "metadata")
VACSTRAT_DEFINE_ERROR(AssemblyError, "assembly")
VACSTRAT_DEFINE_ERROR(DomainError, "domain")
VACSTRAT_DEFINE_ERROR(ComparisonError, "comparison")
VACSTRAT_DEFINE_ERROR(InsufficientDataError, "insufficient-data")
VACSTRAT_DEFINE_ERROR(DesignError, "design")
VACSTRAT_DEFINE_ERROR(FitError, "fit")
VACSTRAT_DEFINE_ERROR(SelectionError, "selection")
VACSTRAT_DEFINE_ERROR(BuildError, "build")
VACSTRAT_DEFINE_ERROR(RankError, "rank")
VACSTRAT_DEFINE_ERROR(LookupError, "lookup")
VACSTRAT_DEFINE_ERROR(InputError, "input")
VACSTRAT_DEFINE_ERROR(SimulationError, "simulation")
VACSTRAT_DEFINE_ERROR(SummaryError, "summary")
VACSTRAT_DEFINE_ERROR(ReproducibilityError, "reproducibility")

#undef VACSTRAT_DEFINE_ERROR

}  // namespace vacstrat
