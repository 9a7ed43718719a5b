#pragma once

#include <stdexcept>
#include <string>

namespace fodwb {

// Exit-code categories used by the CLI: 1 usage/config, 2 data format,
// 3 numerical failure.
enum class ErrorKind { usage = 1, data_format = 2, numerical = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

#define FODWB_DEFINE_ERROR(Name, Kind)                          \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& msg)                       \
        : Error(ErrorKind::Kind, std::string(#Name ": ") + msg) {} \
  }

FODWB_DEFINE_ERROR(InvalidIndex, usage);
FODWB_DEFINE_ERROR(InvalidOrder, usage);
FODWB_DEFINE_ERROR(InvalidDirection, usage);
FODWB_DEFINE_ERROR(InvalidInput, usage);
FODWB_DEFINE_ERROR(TooFewDirections, usage);
FODWB_DEFINE_ERROR(TooFewGroups, usage);
FODWB_DEFINE_ERROR(EmptyInput, usage);
FODWB_DEFINE_ERROR(EmptyScene, usage);

FODWB_DEFINE_ERROR(FormatError, data_format);
FODWB_DEFINE_ERROR(AlignmentError, data_format);

FODWB_DEFINE_ERROR(SingularFit, numerical);
FODWB_DEFINE_ERROR(NotZonal, numerical);
FODWB_DEFINE_ERROR(SingularResponse, numerical);
FODWB_DEFINE_ERROR(IsotropicInput, numerical);
FODWB_DEFINE_ERROR(DegenerateInput, numerical);

#undef FODWB_DEFINE_ERROR

class DivergedTraining : public Error {
 public:
  DivergedTraining(int epoch, const std::string& msg)
      : Error(ErrorKind::numerical,
              "DivergedTraining: " + msg + " (epoch " + std::to_string(epoch) + ")"),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace fodwb
