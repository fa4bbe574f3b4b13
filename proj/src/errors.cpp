#include "climpanel/errors.hpp"

namespace climpanel {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::missing_data: return "MissingData";
        case ErrorKind::invalid_weights: return "InvalidWeights";
        case ErrorKind::invalid_bins: return "InvalidBins";
        case ErrorKind::invalid_data: return "InvalidData";
        case ErrorKind::invalid_argument: return "InvalidArgument";
        case ErrorKind::too_few_observations: return "TooFewObservations";
        case ErrorKind::too_few_groups: return "TooFewGroups";
        case ErrorKind::convergence_failure: return "ConvergenceFailure";
        case ErrorKind::collinear_design: return "CollinearDesign";
        case ErrorKind::degenerate_clustering: return "DegenerateClustering";
        case ErrorKind::numerical_error: return "NumericalError";
        case ErrorKind::missing_baseline: return "MissingBaseline";
        case ErrorKind::out_of_range: return "OutOfRange";
        case ErrorKind::incomplete_region: return "IncompleteRegion";
        case ErrorKind::uniqueness_violation: return "UniquenessViolation";
        case ErrorKind::schema_violation: return "SchemaViolation";
        case ErrorKind::config_error: return "ConfigError";
        case ErrorKind::io_error: return "IOError";
    }
    return "Error";
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::convergence_failure:
        case ErrorKind::collinear_design:
        case ErrorKind::degenerate_clustering:
        case ErrorKind::numerical_error:
        case ErrorKind::too_few_observations:
        case ErrorKind::too_few_groups:
            return 3;
        case ErrorKind::config_error:
        case ErrorKind::io_error:
        case ErrorKind::invalid_argument:
            return 4;
        default:
            return 2;
    }
}

}  // namespace climpanel
