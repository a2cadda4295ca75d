#pragma once

#include <stdexcept>
#include <string>

namespace ustlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define USTLAB_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                    \
    public:                                                        \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

USTLAB_DEFINE_ERROR(InvalidFamilyParams);
USTLAB_DEFINE_ERROR(SunAlreadyPresent);
USTLAB_DEFINE_ERROR(InvalidZeta);
USTLAB_DEFINE_ERROR(GraphTooLarge);
USTLAB_DEFINE_ERROR(NoConvergence);
USTLAB_DEFINE_ERROR(SampleBudgetZero);
USTLAB_DEFINE_ERROR(InfeasibleTarget);
USTLAB_DEFINE_ERROR(TooManyTrees);
USTLAB_DEFINE_ERROR(GammaNotAcyclic);
USTLAB_DEFINE_ERROR(EmptySample);
USTLAB_DEFINE_ERROR(NonConvergence);
USTLAB_DEFINE_ERROR(ConfigError);
USTLAB_DEFINE_ERROR(PreconditionViolated);

#undef USTLAB_DEFINE_ERROR

inline void require(bool cond, const char* what)
{
    if (!cond) throw PreconditionViolated(what);
}

} // namespace ustlab
