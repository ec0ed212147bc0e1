#pragma once

#include <stdexcept>
#include <string>

namespace dlb {

// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kConfig,     // usage / configuration problem
  kData,       // malformed input files, bad keys
  kNumerical,  // non-finite values during training or inference
  kCapacity,   // balancer could not place a key
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define DLB_DEFINE_ERROR(Name, Kind)                               \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(Kind, what) {}  \
  }

DLB_DEFINE_ERROR(NoServers, ErrorKind::kConfig);
DLB_DEFINE_ERROR(DuplicateServer, ErrorKind::kConfig);
DLB_DEFINE_ERROR(UnknownServer, ErrorKind::kConfig);
DLB_DEFINE_ERROR(CannotRemoveLast, ErrorKind::kConfig);
DLB_DEFINE_ERROR(UnknownHash, ErrorKind::kConfig);
DLB_DEFINE_ERROR(BadSpec, ErrorKind::kConfig);
DLB_DEFINE_ERROR(ValidationError, ErrorKind::kConfig);
DLB_DEFINE_ERROR(TooFewKeys, ErrorKind::kConfig);
DLB_DEFINE_ERROR(CapacityExhausted, ErrorKind::kCapacity);
DLB_DEFINE_ERROR(ShapeError, ErrorKind::kConfig);
DLB_DEFINE_ERROR(NumericalError, ErrorKind::kNumerical);
DLB_DEFINE_ERROR(UnsupportedKey, ErrorKind::kData);
DLB_DEFINE_ERROR(DuplicateKey, ErrorKind::kData);
DLB_DEFINE_ERROR(UnsupportedVersion, ErrorKind::kData);
DLB_DEFINE_ERROR(ParseError, ErrorKind::kData);
DLB_DEFINE_ERROR(FormatError, ErrorKind::kData);

#undef DLB_DEFINE_ERROR

}  // namespace dlb
