#include "elmeta/elmeta.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "elmeta/analysis.hpp"
#include "elmeta/el_engine.hpp"
#include "elmeta/error.hpp"
#include "elmeta/io.hpp"
#include "elmeta/simulation.hpp"

struct elmeta_dataset {
    elmeta::MetaDataset data;
};

struct elmeta_report {
    elmeta::io::AnalysisReport report;
};

struct elmeta_el_model {
    elmeta::ElModel model;
};

namespace {

thread_local std::string last_error;

elmeta_status status_of(elmeta::ErrorCode code) {
    using elmeta::ErrorCode;
    switch (code) {
        case ErrorCode::EmptyDataset: return ELMETA_ERR_EMPTY_DATASET;
        case ErrorCode::TooFewStudies: return ELMETA_ERR_TOO_FEW_STUDIES;
        case ErrorCode::DegenerateInterval: return ELMETA_ERR_DEGENERATE_INTERVAL;
        case ErrorCode::MixedLevels: return ELMETA_ERR_MIXED_LEVELS;
        case ErrorCode::BadLevel: return ELMETA_ERR_BAD_LEVEL;
        case ErrorCode::BadSampleSize: return ELMETA_ERR_BAD_SAMPLE_SIZE;
        case ErrorCode::BadArgument: return ELMETA_ERR_BAD_ARGUMENT;
        case ErrorCode::InfeasibleHull: return ELMETA_ERR_INFEASIBLE_HULL;
        case ErrorCode::NoConvergence: return ELMETA_ERR_NO_CONVERGENCE;
        case ErrorCode::NoFeasibleTheta: return ELMETA_ERR_NO_FEASIBLE_THETA;
        case ErrorCode::ParseError: return ELMETA_ERR_PARSE;
        case ErrorCode::IoError: return ELMETA_ERR_IO;
        case ErrorCode::BadConfig: return ELMETA_ERR_BAD_CONFIG;
    }
    return ELMETA_ERR_INTERNAL;
}

elmeta_status fail(elmeta_status status, const std::string& message) {
    last_error = message;
    return status;
}

// Runs fn, translating exceptions into status codes.
template <class Fn>
elmeta_status guarded(Fn&& fn) noexcept {
    try {
        last_error.clear();
        fn();
        return ELMETA_OK;
    } catch (const elmeta::Error& e) {
        return fail(status_of(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(ELMETA_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(ELMETA_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(ELMETA_ERR_INTERNAL, "unknown error");
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw elmeta::Error(elmeta::ErrorCode::BadArgument, what);
}

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

elmeta::Scale to_scale(elmeta_scale s) {
    if (s == ELMETA_SCALE_LINEAR) return elmeta::Scale::Linear;
    if (s == ELMETA_SCALE_LOG) return elmeta::Scale::Log;
    throw elmeta::Error(elmeta::ErrorCode::BadArgument, "unknown scale");
}

elmeta::io::DataFormat to_format(elmeta_format f, const char* path) {
    switch (f) {
        case ELMETA_FORMAT_AUTO: return elmeta::io::format_from_path(path);
        case ELMETA_FORMAT_CSV: return elmeta::io::DataFormat::Csv;
        case ELMETA_FORMAT_JSON: return elmeta::io::DataFormat::Json;
    }
    throw elmeta::Error(elmeta::ErrorCode::BadArgument, "unknown format");
}

std::vector<elmeta::ElVariant> parse_variants(const char* list) {
    require(list != nullptr, "variants must not be null");
    std::vector<elmeta::ElVariant> out;
    for (auto m : elmeta::parse_method_list(list)) out.push_back(elmeta::variant_of(m));
    return out;
}

const elmeta::AnalysisResult& result_at(const elmeta_report* r, size_t index) {
    require(r != nullptr, "report must not be null");
    require(index < r->report.outcomes.size(), "result index out of range");
    const auto& o = r->report.outcomes[index];
    if (!o.result) throw elmeta::Error(*o.error, o.message);
    return *o.result;
}

}  // namespace

extern "C" {

const char* elmeta_last_error(void) { return last_error.c_str(); }

const char* elmeta_status_name(elmeta_status status) {
    if (status == ELMETA_OK) return "Ok";
    if (status == ELMETA_ERR_INTERNAL) return "Internal";
    if (status >= ELMETA_ERR_EMPTY_DATASET && status <= ELMETA_ERR_BAD_CONFIG) {
        return elmeta::to_string(static_cast<elmeta::ErrorCode>(status - 1));
    }
    return "Unknown";
}

int elmeta_status_is_input_error(elmeta_status status) {
    if (status == ELMETA_OK || status == ELMETA_ERR_INTERNAL) return 0;
    if (status < ELMETA_ERR_EMPTY_DATASET || status > ELMETA_ERR_BAD_CONFIG) return 0;
    return elmeta::is_input_error(static_cast<elmeta::ErrorCode>(status - 1)) ? 1 : 0;
}

void elmeta_string_free(char* s) { std::free(s); }

elmeta_status elmeta_dataset_create(const double* lower, const double* upper, const double* level,
                                    const int64_t* sample_size, const char* const* labels,
                                    size_t count, elmeta_scale scale, elmeta_dataset** out) {
    return guarded([&] {
        require(out != nullptr, "out must not be null");
        require(count == 0 || (lower != nullptr && upper != nullptr), "bounds must not be null");
        std::vector<elmeta::StudyInterval> studies(count);
        for (size_t i = 0; i < count; ++i) {
            auto& s = studies[i];
            s.lower = lower[i];
            s.upper = upper[i];
            if (level) s.level = level[i];
            if (sample_size && sample_size[i] > 0) s.sample_size = sample_size[i];
            s.label = labels && labels[i] ? labels[i] : "study" + std::to_string(i + 1);
        }
        *out = new elmeta_dataset{elmeta::MetaDataset(std::move(studies), to_scale(scale))};
    });
}

elmeta_status elmeta_dataset_read(const char* path, elmeta_format format, elmeta_scale scale,
                                  int input_ratio, elmeta_dataset** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "path and out must not be null");
        elmeta::io::ReadOptions options;
        options.scale = to_scale(scale);
        options.input_ratio = input_ratio != 0;
        *out = new elmeta_dataset{elmeta::io::read_dataset(path, to_format(format, path), options)};
    });
}

elmeta_status elmeta_dataset_write(const elmeta_dataset* data, const char* path,
                                   elmeta_format format) {
    return guarded([&] {
        require(data != nullptr && path != nullptr, "dataset and path must not be null");
        elmeta::io::write_dataset(data->data, path, to_format(format, path));
    });
}

size_t elmeta_dataset_size(const elmeta_dataset* data) { return data ? data->data.size() : 0; }

elmeta_status elmeta_dataset_interval(const elmeta_dataset* data, size_t index, double* lower,
                                      double* upper) {
    return guarded([&] {
        require(data != nullptr, "dataset must not be null");
        require(index < data->data.size(), "study index out of range");
        if (lower) *lower = data->data[index].lower;
        if (upper) *upper = data->data[index].upper;
    });
}

void elmeta_dataset_free(elmeta_dataset* data) { delete data; }

elmeta_status elmeta_analyze(const elmeta_dataset* data, const char* methods, double beta,
                             int report_ratio, int cd_reml, elmeta_report** out) {
    return guarded([&] {
        require(data != nullptr && methods != nullptr && out != nullptr,
                "dataset, methods and out must not be null");
        require(beta > 0.0 && beta < 1.0, "beta must lie in (0, 1)");
        const auto list = elmeta::parse_method_list(methods);
        elmeta::AnalysisOptions options;
        if (cd_reml) options.cd_random_effects = elmeta::Tau2Estimator::REML;
        auto report = elmeta::io::make_report(
            data->data, list, beta,
            report_ratio ? elmeta::io::ReportScale::Ratio : elmeta::io::ReportScale::Native, options);
        *out = new elmeta_report{std::move(report)};
    });
}

size_t elmeta_report_count(const elmeta_report* report) {
    return report ? report->report.outcomes.size() : 0;
}

const char* elmeta_report_method(const elmeta_report* report, size_t index) {
    if (!report || index >= report->report.outcomes.size()) return nullptr;
    return elmeta::to_string(report->report.outcomes[index].method);
}

elmeta_status elmeta_report_status(const elmeta_report* report, size_t index) {
    if (!report || index >= report->report.outcomes.size()) {
        return fail(ELMETA_ERR_BAD_ARGUMENT, "result index out of range");
    }
    const auto& o = report->report.outcomes[index];
    return o.ok() ? ELMETA_OK : status_of(*o.error);
}

elmeta_status elmeta_report_values(const elmeta_report* report, size_t index, double* estimate,
                                   double* ci_lower, double* ci_upper) {
    return guarded([&] {
        const auto& r = result_at(report, index);
        if (estimate) *estimate = r.estimate;
        if (ci_lower) *ci_lower = r.ci_lower;
        if (ci_upper) *ci_upper = r.ci_upper;
    });
}

int elmeta_report_tau2(const elmeta_report* report, size_t index, double* tau2) {
    if (!report || index >= report->report.outcomes.size()) return 0;
    const auto& o = report->report.outcomes[index];
    if (!o.result || !o.result->tau2) return 0;
    if (tau2) *tau2 = *o.result->tau2;
    return 1;
}

size_t elmeta_report_level_set_size(const elmeta_report* report, size_t index) {
    if (!report || index >= report->report.outcomes.size()) return 0;
    const auto& o = report->report.outcomes[index];
    return o.result ? o.result->level_set.size() : 0;
}

elmeta_status elmeta_report_level_set_piece(const elmeta_report* report, size_t index, size_t piece,
                                            double* lower, double* upper) {
    return guarded([&] {
        const auto& r = result_at(report, index);
        require(piece < r.level_set.size(), "piece index out of range");
        if (lower) *lower = r.level_set[piece].lower;
        if (upper) *upper = r.level_set[piece].upper;
    });
}

int elmeta_report_all_failed(const elmeta_report* report) {
    return report && report->report.all_failed() ? 1 : 0;
}

elmeta_status elmeta_report_json(const elmeta_report* report, char** out) {
    return guarded([&] {
        require(report != nullptr && out != nullptr, "report and out must not be null");
        *out = copy_string(elmeta::io::report_to_json(report->report));
    });
}

elmeta_status elmeta_report_table(const elmeta_report* report, char** out) {
    return guarded([&] {
        require(report != nullptr && out != nullptr, "report and out must not be null");
        *out = copy_string(elmeta::io::report_to_table(report->report));
    });
}

void elmeta_report_free(elmeta_report* report) { delete report; }

elmeta_status elmeta_el_model_create(const elmeta_dataset* data, const char* variant,
                                     elmeta_el_model** out) {
    return guarded([&] {
        require(data != nullptr && variant != nullptr && out != nullptr,
                "dataset, variant and out must not be null");
        const auto v = elmeta::variant_of(elmeta::parse_method(variant));
        *out = new elmeta_el_model{elmeta::ElModel(data->data, v)};
    });
}

elmeta_status elmeta_el_model_estimate(const elmeta_el_model* model, double* theta) {
    return guarded([&] {
        require(model != nullptr && theta != nullptr, "model and theta must not be null");
        *theta = model->model.estimate();
    });
}

elmeta_status elmeta_el_model_neg2logr(const elmeta_el_model* model, double theta, double* value) {
    return guarded([&] {
        require(model != nullptr && value != nullptr, "model and value must not be null");
        *value = model->model.neg2logr(theta);
    });
}

elmeta_status elmeta_el_model_ci(const elmeta_el_model* model, double beta, double* lower,
                                 double* upper) {
    return guarded([&] {
        require(model != nullptr, "model must not be null");
        require(beta > 0.0 && beta < 1.0, "beta must lie in (0, 1)");
        const auto r = model->model.confidence_interval(beta);
        if (lower) *lower = r.ci_lower;
        if (upper) *upper = r.ci_upper;
    });
}

void elmeta_el_model_free(elmeta_el_model* model) { delete model; }

elmeta_status elmeta_simulate(const char* config_path, const char* out_dir, char** manifest) {
    return guarded([&] {
        require(config_path != nullptr, "config path must not be null");
        const auto grid = elmeta::io::read_simulate_config(config_path);
        std::filesystem::path dir = elmeta::io::default_output_dir();
        if (out_dir) {
            dir = out_dir;
        } else if (grid.out_dir) {
            dir = *grid.out_dir;
        }
        const auto text = elmeta::io::run_simulate(grid, dir);
        if (manifest) *manifest = copy_string(text);
    });
}

namespace {

std::vector<elmeta::QqResult> qq_study(int64_t n, int64_t studies, int64_t replicates,
                                       uint64_t seed, const char* variants) {
    require(n >= 2, "n must be at least 2");
    const auto list = parse_variants(variants);
    return elmeta::run_qq(elmeta::fixed_chisq_config(n, studies, replicates, seed), list);
}

}  // namespace

elmeta_status elmeta_qq(int64_t n, int64_t studies, int64_t replicates, uint64_t seed,
                        const char* variants, char** csv) {
    return guarded([&] {
        require(csv != nullptr, "csv must not be null");
        *csv = copy_string(elmeta::io::qq_to_csv(qq_study(n, studies, replicates, seed, variants)));
    });
}

elmeta_status elmeta_qq_ks(int64_t n, int64_t studies, int64_t replicates, uint64_t seed,
                           const char* variants, double* ks, size_t ks_capacity) {
    return guarded([&] {
        const auto results = qq_study(n, studies, replicates, seed, variants);
        require(ks != nullptr && ks_capacity >= results.size(), "ks buffer too small");
        for (size_t i = 0; i < results.size(); ++i) ks[i] = results[i].ks_distance;
    });
}

elmeta_status elmeta_diverge(const int64_t* studies, size_t studies_count, const int64_t* sizes,
                             size_t sizes_count, int64_t replicates, uint64_t seed, int gaussian,
                             char** csv) {
    return guarded([&] {
        require(csv != nullptr, "csv must not be null");
        require(studies != nullptr && sizes != nullptr, "grid lists must not be null");
        const auto rows = elmeta::run_divergence(
            std::span(studies, studies_count), std::span(sizes, sizes_count), replicates, seed,
            gaussian ? elmeta::DivergenceModel::Gaussian : elmeta::DivergenceModel::ChiSquare);
        *csv = copy_string(elmeta::io::divergence_to_csv(rows));
    });
}

}  // extern "C"
