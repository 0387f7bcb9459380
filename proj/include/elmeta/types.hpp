#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace elmeta {

enum class Scale { Linear, Log };

const char* to_string(Scale scale) noexcept;
Scale parse_scale(std::string_view text);

/// One study's reported two-sided interval [lower, upper] at confidence `level`.
struct StudyInterval {
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    std::optional<std::int64_t> sample_size;
    std::string label;

    double midpoint() const { return 0.5 * (lower + upper); }
    double width() const { return upper - lower; }
};

/// Validated, immutable collection of at least two intervals sharing one level.
class MetaDataset {
public:
    MetaDataset(std::vector<StudyInterval> studies, Scale scale);

    std::span<const StudyInterval> studies() const { return studies_; }
    const StudyInterval& operator[](std::size_t i) const { return studies_[i]; }
    std::size_t size() const { return studies_.size(); }
    Scale scale() const { return scale_; }
    double common_level() const { return level_; }
    /// 1 - common_level.
    double alpha() const { return 1.0 - level_; }

private:
    std::vector<StudyInterval> studies_;
    Scale scale_;
    double level_;
};

/// Throws elmeta::Error on any violated invariant; preserves ordering.
MetaDataset validate_dataset(std::vector<StudyInterval> raw, Scale scale);

/// Checks a single interval (bounds, level, sample size).
void validate_interval(const StudyInterval& s);

struct RecoveredSummary {
    double center = 0.0;
    double sd = 0.0;
};

/// Critical value used to build a symmetric interval at `level`: the t quantile
/// with n-1 degrees of freedom when n < 30 is known, the Gaussian quantile otherwise.
double interval_critical_value(double level, std::optional<std::int64_t> sample_size);

/// Inverts the symmetric z/t interval construction.
RecoveredSummary recover_summary(const StudyInterval& s);

/// Forward construction: center +- critical * sd.
StudyInterval build_interval(double center, double sd, double level,
                             std::optional<std::int64_t> sample_size,
                             std::string label = {});

enum class Method {
    ConventionalFE,
    ConventionalREDL,
    ConventionalREREML,
    CDFE,
    CDRE,
    ELRE,
    EL1,
    EL2,
    EL3,
};

inline constexpr Method kAllMethods[] = {
    Method::ConventionalFE, Method::ConventionalREDL, Method::ConventionalREREML,
    Method::CDFE,           Method::CDRE,             Method::ELRE,
    Method::EL1,            Method::EL2,              Method::EL3,
};

const char* to_string(Method method) noexcept;
Method parse_method(std::string_view name);
/// Comma-separated list; "all" expands to every method in canonical order.
std::vector<Method> parse_method_list(std::string_view list);

struct ClosedInterval {
    double lower = 0.0;
    double upper = 0.0;
};

struct AnalysisResult {
    Method method = Method::ConventionalFE;
    double estimate = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double ci_level = 0.95;
    std::optional<double> tau2;
    std::map<std::string, double> diagnostics;
    /// Full confidence set when it is a union of several pieces (EL1/EL3).
    std::vector<ClosedInterval> level_set;
};

}  // namespace elmeta
