#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elmeta/classic.hpp"
#include "elmeta/error.hpp"
#include "elmeta/types.hpp"

namespace elmeta {

struct AnalysisOptions {
    /// tau2 estimator behind CD-RE; DerSimonian-Laird matches the usual CD pairing.
    Tau2Estimator cd_random_effects = Tau2Estimator::DerSimonianLaird;
};

/// Result of one method: either a result or the error that stopped it.
struct MethodOutcome {
    Method method = Method::ConventionalFE;
    std::optional<AnalysisResult> result;
    std::optional<ErrorCode> error;
    std::string message;

    bool ok() const { return result.has_value(); }
};

/// Runs one method; throws elmeta::Error on failure.
AnalysisResult run_method(const MetaDataset& data, Method method, double beta,
                          const AnalysisOptions& options = {});

/// Runs every requested method, capturing per-method failures instead of aborting.
std::vector<MethodOutcome> analyze(const MetaDataset& data, std::span<const Method> methods,
                                   double beta, const AnalysisOptions& options = {});

/// exp() of estimate and interval endpoints; tau2 and diagnostics stay on the log scale.
AnalysisResult to_ratio_scale(const AnalysisResult& r);

}  // namespace elmeta
