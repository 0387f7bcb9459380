#include "elmeta/analysis.hpp"

#include <cmath>

#include "elmeta/el_engine.hpp"

namespace elmeta {

AnalysisResult run_method(const MetaDataset& data, Method method, double beta,
                          const AnalysisOptions& options) {
    if (is_el_method(method)) {
        const ElModel model(data, variant_of(method));
        return model.confidence_interval(beta);
    }

    const auto base = WeightedSummaries::from_dataset(data);
    AnalysisResult r;
    switch (method) {
        case Method::ConventionalFE:
            r = conventional_ci(base, beta);
            break;
        case Method::ConventionalREDL:
            r = conventional_ci(base.with_tau2(dl_tau2(base)), beta);
            break;
        case Method::ConventionalREREML:
            r = conventional_ci(base.with_tau2(reml_tau2(base)), beta);
            break;
        case Method::CDFE:
            r = cd_ci(base, beta);
            break;
        case Method::CDRE:
            r = cd_ci(base.with_tau2(estimate_tau2(base, options.cd_random_effects)), beta);
            r.diagnostics["tau2_estimator_reml"] =
                options.cd_random_effects == Tau2Estimator::REML ? 1.0 : 0.0;
            break;
        default:
            break;
    }
    r.method = method;
    return r;
}

std::vector<MethodOutcome> analyze(const MetaDataset& data, std::span<const Method> methods,
                                   double beta, const AnalysisOptions& options) {
    std::vector<MethodOutcome> out;
    out.reserve(methods.size());
    for (Method m : methods) {
        MethodOutcome o;
        o.method = m;
        try {
            o.result = run_method(data, m, beta, options);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::BadArgument) throw;
            o.error = e.code();
            o.message = e.what();
        }
        out.push_back(std::move(o));
    }
    return out;
}

AnalysisResult to_ratio_scale(const AnalysisResult& r) {
    AnalysisResult out = r;
    out.estimate = std::exp(r.estimate);
    out.ci_lower = std::exp(r.ci_lower);
    out.ci_upper = std::exp(r.ci_upper);
    for (auto& piece : out.level_set) {
        piece.lower = std::exp(piece.lower);
        piece.upper = std::exp(piece.upper);
    }
    return out;
}

}  // namespace elmeta
