#include "forced_osc/errors.hpp"

namespace forced_osc {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::StepUnderflow: return "StepUnderflow";
        case ErrorKind::NonFiniteState: return "NonFiniteState";
        case ErrorKind::UnboundedForce: return "UnboundedForce";
        case ErrorKind::ChartSingularity: return "ChartSingularity";
        case ErrorKind::ChartExit: return "ChartExit";
        case ErrorKind::SingularMetric: return "SingularMetric";
        case ErrorKind::Discontinuity: return "Discontinuity";
        case ErrorKind::SpeedBoundTooSmall: return "SpeedBoundTooSmall";
        case ErrorKind::UnresolvedTangency: return "UnresolvedTangency";
        case ErrorKind::UnclassifiedFaces: return "UnclassifiedFaces";
        case ErrorKind::NonProductSegment: return "NonProductSegment";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::SingularJacobian: return "SingularJacobian";
        case ErrorKind::ZeroOnContour: return "ZeroOnContour";
        case ErrorKind::RefinementLimit: return "RefinementLimit";
        case ErrorKind::NoEscape: return "NoEscape";
        case ErrorKind::ScheduleExhausted: return "ScheduleExhausted";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::ValidationError: return "ValidationError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace forced_osc
