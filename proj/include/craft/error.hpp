#pragma once

#include <stdexcept>
#include <string>

namespace craft {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CRAFT_DEFINE_ERROR(Name)             \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  };

CRAFT_DEFINE_ERROR(InvalidArgument)
CRAFT_DEFINE_ERROR(DegenerateInput)
CRAFT_DEFINE_ERROR(DegeneratePolygon)
CRAFT_DEFINE_ERROR(SingularSystem)
CRAFT_DEFINE_ERROR(IllConditioned)
CRAFT_DEFINE_ERROR(FormatError)
CRAFT_DEFINE_ERROR(EmptySelection)
CRAFT_DEFINE_ERROR(DomainError)
CRAFT_DEFINE_ERROR(OrientationUndefined)
CRAFT_DEFINE_ERROR(SkeletonFailure)
CRAFT_DEFINE_ERROR(EmptyRegion)
CRAFT_DEFINE_ERROR(PlacementFailure)

#undef CRAFT_DEFINE_ERROR

}  // namespace craft
