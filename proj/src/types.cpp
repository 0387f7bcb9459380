#include "elmeta/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "elmeta/distributions.hpp"
#include "elmeta/error.hpp"

namespace elmeta {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::TooFewStudies: return "TooFewStudies";
        case ErrorCode::DegenerateInterval: return "DegenerateInterval";
        case ErrorCode::MixedLevels: return "MixedLevels";
        case ErrorCode::BadLevel: return "BadLevel";
        case ErrorCode::BadSampleSize: return "BadSampleSize";
        case ErrorCode::BadArgument: return "BadArgument";
        case ErrorCode::InfeasibleHull: return "InfeasibleHull";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::NoFeasibleTheta: return "NoFeasibleTheta";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::BadConfig: return "BadConfig";
    }
    return "Unknown";
}

bool is_input_error(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InfeasibleHull:
        case ErrorCode::NoConvergence:
        case ErrorCode::NoFeasibleTheta:
            return false;
        default:
            return true;
    }
}

const char* to_string(Scale scale) noexcept {
    return scale == Scale::Log ? "log" : "linear";
}

Scale parse_scale(std::string_view text) {
    if (text == "linear") return Scale::Linear;
    if (text == "log") return Scale::Log;
    throw Error(ErrorCode::BadArgument, "unknown scale '" + std::string(text) + "'");
}

void validate_interval(const StudyInterval& s) {
    const std::string who = s.label.empty() ? std::string("study") : "study '" + s.label + "'";
    if (!std::isfinite(s.lower) || !std::isfinite(s.upper)) {
        throw Error(ErrorCode::DegenerateInterval, who + ": interval bounds must be finite");
    }
    if (!(s.lower < s.upper)) {
        throw Error(ErrorCode::DegenerateInterval, who + ": lower bound must be below upper bound");
    }
    if (!(s.level > 0.0 && s.level < 1.0)) {
        throw Error(ErrorCode::BadLevel, who + ": level must lie in (0, 1)");
    }
    if (s.sample_size && *s.sample_size < 2) {
        throw Error(ErrorCode::BadSampleSize, who + ": sample size must be at least 2");
    }
}

MetaDataset::MetaDataset(std::vector<StudyInterval> studies, Scale scale)
    : studies_(std::move(studies)), scale_(scale), level_(0.0) {
    if (studies_.empty()) throw Error(ErrorCode::EmptyDataset, "dataset contains no studies");
    for (const auto& s : studies_) validate_interval(s);
    level_ = studies_.front().level;
    for (const auto& s : studies_) {
        if (s.level != level_) {
            throw Error(ErrorCode::MixedLevels, "all studies must report the same confidence level");
        }
    }
    if (studies_.size() < 2) {
        throw Error(ErrorCode::TooFewStudies, "at least two studies are required");
    }
}

MetaDataset validate_dataset(std::vector<StudyInterval> raw, Scale scale) {
    return MetaDataset(std::move(raw), scale);
}

double interval_critical_value(double level, std::optional<std::int64_t> sample_size) {
    const double upper_prob = 0.5 + 0.5 * level;
    if (sample_size && *sample_size < 30) {
        return dist::student_t_quantile(upper_prob, static_cast<double>(*sample_size - 1));
    }
    return dist::normal_quantile(upper_prob);
}

RecoveredSummary recover_summary(const StudyInterval& s) {
    validate_interval(s);
    const double crit = interval_critical_value(s.level, s.sample_size);
    return {s.midpoint(), (s.upper - s.lower) / (2.0 * crit)};
}

StudyInterval build_interval(double center, double sd, double level,
                             std::optional<std::int64_t> sample_size, std::string label) {
    const double crit = interval_critical_value(level, sample_size);
    StudyInterval s;
    s.lower = center - crit * sd;
    s.upper = center + crit * sd;
    s.level = level;
    s.sample_size = sample_size;
    s.label = std::move(label);
    return s;
}

const char* to_string(Method method) noexcept {
    switch (method) {
        case Method::ConventionalFE: return "Conventional-FE";
        case Method::ConventionalREDL: return "Conventional-RE-DL";
        case Method::ConventionalREREML: return "Conventional-RE-REML";
        case Method::CDFE: return "CD-FE";
        case Method::CDRE: return "CD-RE";
        case Method::ELRE: return "EL-RE";
        case Method::EL1: return "EL1";
        case Method::EL2: return "EL2";
        case Method::EL3: return "EL3";
    }
    return "Unknown";
}

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

Method parse_method(std::string_view name) {
    const std::string wanted = lowercase(trim(name));
    for (Method m : kAllMethods) {
        if (lowercase(to_string(m)) == wanted) return m;
    }
    throw Error(ErrorCode::BadArgument, "unknown method '" + std::string(name) + "'");
}

std::vector<Method> parse_method_list(std::string_view list) {
    std::vector<Method> out;
    if (lowercase(trim(list)) == "all") {
        out.assign(std::begin(kAllMethods), std::end(kAllMethods));
        return out;
    }
    std::size_t start = 0;
    while (start <= list.size()) {
        const std::size_t comma = list.find(',', start);
        const std::string_view item =
            trim(list.substr(start, comma == std::string_view::npos ? list.npos : comma - start));
        if (!item.empty()) {
            const Method m = parse_method(item);
            if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
        }
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw Error(ErrorCode::BadArgument, "method list is empty");
    return out;
}

}  // namespace elmeta
