#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace knitply {

/// Base of every data/invariant failure raised by the library. The CLI maps
/// these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define KNITPLY_DEFINE_ERROR(Name)        \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

KNITPLY_DEFINE_ERROR(ParseError)
KNITPLY_DEFINE_ERROR(InvariantError)
KNITPLY_DEFINE_ERROR(NoPartnerError)
KNITPLY_DEFINE_ERROR(AmbiguityError)
KNITPLY_DEFINE_ERROR(TopologyError)
KNITPLY_DEFINE_ERROR(DegenerateError)
KNITPLY_DEFINE_ERROR(EmptyMeshError)
KNITPLY_DEFINE_ERROR(DegenerateNormalError)
KNITPLY_DEFINE_ERROR(OverlappingChartError)
KNITPLY_DEFINE_ERROR(IoError)

#undef KNITPLY_DEFINE_ERROR

class UnmappedUVError : public Error {
 public:
  UnmappedUVError(const std::string& what, std::size_t vertex_index)
      : Error(what), vertex_index_(vertex_index) {}
  std::size_t vertex_index() const { return vertex_index_; }

 private:
  std::size_t vertex_index_;
};

}  // namespace knitply
