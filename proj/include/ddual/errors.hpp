#pragma once

#include <stdexcept>
#include <string>

namespace ddual {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteState : Error { using Error::Error; };
struct SingularTransport : Error { using Error::Error; };
struct HorizonTooShort : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct UnreachableGoal : Error { using Error::Error; };
struct InvalidPolicy : Error { using Error::Error; };
struct SingularSystem : Error { using Error::Error; };
struct NoAvailableAction : Error { using Error::Error; };
struct Infeasible : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace ddual
