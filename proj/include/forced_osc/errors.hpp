#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace forced_osc {

enum class ErrorKind {
    InvalidArgument,
    StepUnderflow,
    NonFiniteState,
    UnboundedForce,
    ChartSingularity,
    ChartExit,
    SingularMetric,
    Discontinuity,
    SpeedBoundTooSmall,
    UnresolvedTangency,
    UnclassifiedFaces,
    NonProductSegment,
    NoConvergence,
    SingularJacobian,
    ZeroOnContour,
    RefinementLimit,
    NoEscape,
    ScheduleExhausted,
    ParseError,
    ValidationError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-readable kind so the
/// CLI can emit structured failure records.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace forced_osc
