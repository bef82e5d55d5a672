#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace softgrasp {

enum class ErrorKind {
  MalformedXml,
  UnsupportedJointKind,
  KinematicCycle,
  MultipleParents,
  DisconnectedTree,
  DuplicateName,
  MissingLink,
  NonUnitAxis,
  InvalidLimits,
  InvalidPatch,
  UnknownJoint,
  UnknownOwner,
  UnknownLink,
  UnknownPatch,
  MissingAngle,
  DimensionMismatch,
  InsufficientData,
  DegenerateData,
  InvalidCoupling,
  RankDeficientConstraints,
  NumericalFailure,
  InvalidSchedule,
  InvalidProblem,
  MeshNotFound,
  MeshFormat,
  NonMetricUnits,
  SchemaViolation,
  FileNotFound,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedXml: return "MalformedXml";
    case ErrorKind::UnsupportedJointKind: return "UnsupportedJointKind";
    case ErrorKind::KinematicCycle: return "KinematicCycle";
    case ErrorKind::MultipleParents: return "MultipleParents";
    case ErrorKind::DisconnectedTree: return "DisconnectedTree";
    case ErrorKind::DuplicateName: return "DuplicateName";
    case ErrorKind::MissingLink: return "MissingLink";
    case ErrorKind::NonUnitAxis: return "NonUnitAxis";
    case ErrorKind::InvalidLimits: return "InvalidLimits";
    case ErrorKind::InvalidPatch: return "InvalidPatch";
    case ErrorKind::UnknownJoint: return "UnknownJoint";
    case ErrorKind::UnknownOwner: return "UnknownOwner";
    case ErrorKind::UnknownLink: return "UnknownLink";
    case ErrorKind::UnknownPatch: return "UnknownPatch";
    case ErrorKind::MissingAngle: return "MissingAngle";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::InvalidCoupling: return "InvalidCoupling";
    case ErrorKind::RankDeficientConstraints: return "RankDeficientConstraints";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::InvalidSchedule: return "InvalidSchedule";
    case ErrorKind::InvalidProblem: return "InvalidProblem";
    case ErrorKind::MeshNotFound: return "MeshNotFound";
    case ErrorKind::MeshFormat: return "MeshFormat";
    case ErrorKind::NonMetricUnits: return "NonMetricUnits";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::FileNotFound: return "FileNotFound";
  }
  return "Unknown";
}

// Every failure in the library surfaces as this exception. `subject` names the
// offending entity (joint, link, finger, file path, cycle path, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string subject, const std::string& message = {})
      : std::runtime_error(std::string(to_string(kind)) + "(" + subject + ")" +
                           (message.empty() ? "" : ": " + message)),
        kind_(kind),
        subject_(std::move(subject)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& subject() const { return subject_; }

 private:
  ErrorKind kind_;
  std::string subject_;
};

}  // namespace softgrasp
