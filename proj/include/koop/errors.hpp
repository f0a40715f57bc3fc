#pragma once

#include <stdexcept>
#include <string>

namespace koop {

// Exit-code categories used by the command line front end.
enum class ErrorKind { Config = 2, Numeric = 3, Oracle = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& name, const std::string& what)
        : std::runtime_error(name + ": " + what), kind_(kind), name_(name) {}
    ErrorKind kind() const { return kind_; }
    const std::string& name() const { return name_; }

private:
    ErrorKind kind_;
    std::string name_;
};

#define KOOP_ERROR(Name, Kind)                                              \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& what) : Error(Kind, #Name, what) {} \
    };

KOOP_ERROR(ConfigError, ErrorKind::Config)
KOOP_ERROR(NonDyadicAtomCount, ErrorKind::Config)
KOOP_ERROR(DepthOverflow, ErrorKind::Config)
KOOP_ERROR(LevelOutOfRange, ErrorKind::Config)
KOOP_ERROR(UnknownAtom, ErrorKind::Config)
KOOP_ERROR(UnknownDensity, ErrorKind::Config)
KOOP_ERROR(IndexOutOfRange, ErrorKind::Config)
KOOP_ERROR(CountExceedsTree, ErrorKind::Config)
KOOP_ERROR(UnsupportedSpace, ErrorKind::Config)
KOOP_ERROR(UnresolvableInput, ErrorKind::Config)
KOOP_ERROR(DualsMissing, ErrorKind::Config)
KOOP_ERROR(NonSquare, ErrorKind::Config)
KOOP_ERROR(ShapeMismatch, ErrorKind::Config)
KOOP_ERROR(ModulusMissing, ErrorKind::Config)
KOOP_ERROR(IrrationalMassModel, ErrorKind::Config)
KOOP_ERROR(InfiniteRefinement, ErrorKind::Config)
KOOP_ERROR(EmptyCandidate, ErrorKind::Config)
KOOP_ERROR(NotPrime, ErrorKind::Config)
KOOP_ERROR(EmptyInput, ErrorKind::Config)
KOOP_ERROR(NumericError, ErrorKind::Numeric)
KOOP_ERROR(SingularGram, ErrorKind::Numeric)
KOOP_ERROR(EmptyNet, ErrorKind::Numeric)
KOOP_ERROR(OracleError, ErrorKind::Oracle)
KOOP_ERROR(PointOutsideSpace, ErrorKind::Oracle)

#undef KOOP_ERROR

}  // namespace koop
