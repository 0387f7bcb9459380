#include "elmeta/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "elmeta/error.hpp"

namespace elmeta::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lower_case(std::string_view s) {
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

[[noreturn]] void parse_error(std::size_t row, const std::string& why) {
    throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + ": " + why);
}

[[noreturn]] void bad_config(const std::string& key, const std::string& why) {
    throw Error(ErrorCode::BadConfig, key + ": " + why);
}

bool parse_real(std::string_view text, double& out) {
    text = trim(text);
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

bool parse_integer(std::string_view text, std::int64_t& out) {
    text = trim(text);
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

// RFC 4180 records: quoted fields may hold commas, doubled quotes and newlines.
// Each record carries the 1-based line on which it starts.
struct CsvRecord {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

std::vector<CsvRecord> split_csv(std::string_view text) {
    std::vector<CsvRecord> records;
    CsvRecord current;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;
    current.line = 1;

    auto end_record = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
        const bool blank = current.fields.size() == 1 && trim(current.fields[0]).empty();
        if (!blank) records.push_back(std::move(current));
        current = CsvRecord{};
        current.line = line;
        field_started = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            current.fields.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\n') {
            ++line;
            end_record();
        } else if (c == '\r') {
            // CRLF line endings.
        } else {
            field.push_back(c);
            if (!std::isspace(static_cast<unsigned char>(c))) field_started = true;
        }
    }
    if (quoted) parse_error(current.line, "unterminated quoted field");
    if (!field.empty() || !current.fields.empty()) end_record();
    // Strip a UTF-8 byte order mark from the first header cell.
    if (!records.empty() && !records[0].fields.empty() &&
        records[0].fields[0].rfind("\xEF\xBB\xBF", 0) == 0) {
        records[0].fields[0].erase(0, 3);
    }
    return records;
}

std::string csv_quote(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// Applies the ratio transform and row-level validation.
StudyInterval finish_row(StudyInterval s, std::size_t row, const ReadOptions& options) {
    if (!std::isfinite(s.lower) || !std::isfinite(s.upper)) parse_error(row, "bounds must be finite");
    if (options.input_ratio) {
        if (!(s.lower > 0.0) || !(s.upper > 0.0)) {
            parse_error(row, "ratio-scale bounds must be positive");
        }
        s.lower = std::log(s.lower);
        s.upper = std::log(s.upper);
    }
    try {
        validate_interval(s);
    } catch (const Error& e) {
        parse_error(row, e.what());
    }
    return s;
}

void check_options(const ReadOptions& options) {
    if (options.input_ratio && options.scale != Scale::Log) {
        throw Error(ErrorCode::BadArgument, "ratio input requires the log scale");
    }
}

std::string default_label(std::size_t index) { return "study" + std::to_string(index + 1); }

}  // namespace

DataFormat format_from_path(const fs::path& path) {
    return lower_case(path.extension().string()) == ".json" ? DataFormat::Json : DataFormat::Csv;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    const auto [ptr, ec] =
        std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    return std::string(buf.data(), ptr);
}

MetaDataset parse_csv_dataset(std::string_view text, const ReadOptions& options) {
    check_options(options);
    const auto records = split_csv(text);
    if (records.empty()) throw Error(ErrorCode::EmptyDataset, "input has no header row");

    std::map<std::string, std::size_t> column;
    const auto& header = records.front();
    for (std::size_t j = 0; j < header.fields.size(); ++j) {
        const std::string name = lower_case(trim(header.fields[j]));
        if (name.empty()) continue;
        if (!column.emplace(name, j).second) parse_error(header.line, "duplicate column '" + name + "'");
    }
    for (const char* required : {"lower", "upper"}) {
        if (!column.count(required)) {
            parse_error(header.line, std::string("missing required column '") + required + "'");
        }
    }
    auto find = [&](const char* name) -> std::optional<std::size_t> {
        const auto it = column.find(name);
        return it == column.end() ? std::nullopt : std::optional(it->second);
    };
    const auto c_label = find("label");
    const auto c_lower = *find("lower");
    const auto c_upper = *find("upper");
    const auto c_level = find("level");
    const auto c_n = find("n");

    std::vector<StudyInterval> studies;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.fields.size() != header.fields.size()) {
            parse_error(rec.line, "expected " + std::to_string(header.fields.size()) + " fields, found " +
                                      std::to_string(rec.fields.size()));
        }
        StudyInterval s;
        s.label = c_label ? std::string(trim(rec.fields[*c_label])) : default_label(studies.size());
        if (!parse_real(rec.fields[c_lower], s.lower)) parse_error(rec.line, "lower is not a number");
        if (!parse_real(rec.fields[c_upper], s.upper)) parse_error(rec.line, "upper is not a number");
        if (c_level && !trim(rec.fields[*c_level]).empty() &&
            !parse_real(rec.fields[*c_level], s.level)) {
            parse_error(rec.line, "level is not a number");
        }
        if (c_n && !trim(rec.fields[*c_n]).empty()) {
            std::int64_t n = 0;
            if (!parse_integer(rec.fields[*c_n], n)) parse_error(rec.line, "n is not an integer");
            s.sample_size = n;
        }
        studies.push_back(finish_row(std::move(s), rec.line, options));
    }
    return MetaDataset(std::move(studies), options.scale);
}

MetaDataset parse_json_dataset(std::string_view text, const ReadOptions& options) {
    check_options(options);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, std::string("invalid JSON: ") + e.what());
    }
    const json* rows = &doc;
    if (doc.is_object()) {
        if (doc.contains("scale")) {
            if (!doc["scale"].is_string() || parse_scale(doc["scale"].get<std::string>()) != options.scale) {
                throw Error(ErrorCode::ParseError, "document scale does not match the requested scale");
            }
        }
        if (!doc.contains("studies")) throw Error(ErrorCode::ParseError, "missing 'studies' array");
        rows = &doc["studies"];
    }
    if (!rows->is_array()) throw Error(ErrorCode::ParseError, "studies must be an array");

    std::vector<StudyInterval> studies;
    std::size_t row = 0;
    for (const auto& item : *rows) {
        ++row;
        if (!item.is_object()) parse_error(row, "record must be an object");
        auto number = [&](const char* key) {
            if (!item.contains(key) || !item[key].is_number()) {
                parse_error(row, std::string("'") + key + "' must be a number");
            }
            return item[key].get<double>();
        };
        StudyInterval s;
        s.lower = number("lower");
        s.upper = number("upper");
        if (item.contains("level") && !item["level"].is_null()) s.level = number("level");
        if (item.contains("n") && !item["n"].is_null()) {
            if (!item["n"].is_number_integer()) parse_error(row, "'n' must be an integer");
            s.sample_size = item["n"].get<std::int64_t>();
        }
        if (item.contains("label")) {
            if (!item["label"].is_string()) parse_error(row, "'label' must be a string");
            s.label = item["label"].get<std::string>();
        } else {
            s.label = default_label(studies.size());
        }
        studies.push_back(finish_row(std::move(s), row, options));
    }
    return MetaDataset(std::move(studies), options.scale);
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

MetaDataset read_dataset(const fs::path& path, DataFormat format, const ReadOptions& options) {
    const std::string text = read_text_file(path);
    return format == DataFormat::Json ? parse_json_dataset(text, options)
                                      : parse_csv_dataset(text, options);
}

std::string dataset_to_csv(const MetaDataset& data) {
    std::string out = "label,lower,upper,level,n\n";
    for (const auto& s : data.studies()) {
        out += csv_quote(s.label) + ',' + format_double(s.lower) + ',' + format_double(s.upper) + ',' +
               format_double(s.level) + ',' + (s.sample_size ? std::to_string(*s.sample_size) : "") +
               '\n';
    }
    return out;
}

std::string dataset_to_json(const MetaDataset& data) {
    json rows = json::array();
    for (const auto& s : data.studies()) {
        json r = {{"label", s.label}, {"lower", s.lower}, {"upper", s.upper}, {"level", s.level}};
        r["n"] = s.sample_size ? json(*s.sample_size) : json(nullptr);
        rows.push_back(std::move(r));
    }
    return json{{"scale", to_string(data.scale())}, {"studies", std::move(rows)}}.dump(2) + "\n";
}

void write_dataset(const MetaDataset& data, const fs::path& path, DataFormat format) {
    write_text_file(path, format == DataFormat::Json ? dataset_to_json(data) : dataset_to_csv(data));
}

ReportScale parse_report_scale(std::string_view text) {
    const std::string t = lower_case(trim(text));
    if (t == "native") return ReportScale::Native;
    if (t == "ratio") return ReportScale::Ratio;
    throw Error(ErrorCode::BadArgument, "report scale must be 'native' or 'ratio'");
}

bool AnalysisReport::all_failed() const {
    return !outcomes.empty() &&
           std::all_of(outcomes.begin(), outcomes.end(), [](const MethodOutcome& o) { return !o.ok(); });
}

AnalysisReport make_report(const MetaDataset& data, std::span<const Method> methods, double beta,
                           ReportScale report_scale, const AnalysisOptions& options) {
    if (report_scale == ReportScale::Ratio && data.scale() != Scale::Log) {
        throw Error(ErrorCode::BadArgument, "ratio reporting requires a log-scale dataset");
    }
    AnalysisReport report;
    report.data_scale = data.scale();
    report.report_scale = report_scale;
    report.beta = beta;
    report.studies = data.size();
    report.outcomes = analyze(data, methods, beta, options);
    if (report_scale == ReportScale::Ratio) {
        for (auto& o : report.outcomes) {
            if (o.result) o.result = to_ratio_scale(*o.result);
        }
    }
    return report;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

const char* to_string(ReportScale s) { return s == ReportScale::Ratio ? "ratio" : "native"; }

}  // namespace

std::string report_to_json(const AnalysisReport& report) {
    json results = json::array();
    for (const auto& o : report.outcomes) {
        json r = {{"method", elmeta::to_string(o.method)}};
        if (o.result) {
            const auto& a = *o.result;
            r["status"] = "ok";
            r["estimate"] = number_or_null(a.estimate);
            r["ci_lower"] = number_or_null(a.ci_lower);
            r["ci_upper"] = number_or_null(a.ci_upper);
            r["ci_level"] = a.ci_level;
            r["tau2"] = a.tau2 ? number_or_null(*a.tau2) : json(nullptr);
            json pieces = json::array();
            for (const auto& p : a.level_set) pieces.push_back({number_or_null(p.lower), number_or_null(p.upper)});
            r["level_set"] = std::move(pieces);
            json diag = json::object();
            for (const auto& [k, v] : a.diagnostics) diag[k] = number_or_null(v);
            r["diagnostics"] = std::move(diag);
        } else {
            r["status"] = "failed";
            r["error"] = {{"code", o.error ? elmeta::to_string(*o.error) : "Unknown"},
                          {"message", o.message}};
        }
        results.push_back(std::move(r));
    }
    const json doc = {{"data_scale", elmeta::to_string(report.data_scale)},
                      {"report_scale", to_string(report.report_scale)},
                      {"beta", report.beta},
                      {"studies", report.studies},
                      {"results", std::move(results)}};
    return doc.dump(2) + "\n";
}

std::string report_to_table(const AnalysisReport& report) {
    const std::vector<std::string> head = {"method", "estimate", "ci_lower", "ci_upper", "tau2", "status"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& o : report.outcomes) {
        if (o.result) {
            const auto& a = *o.result;
            std::string status = "ok";
            if (a.level_set.size() > 1) status = "ok (" + std::to_string(a.level_set.size()) + " pieces)";
            rows.push_back({elmeta::to_string(o.method), format_double(a.estimate), format_double(a.ci_lower),
                            format_double(a.ci_upper), a.tau2 ? format_double(*a.tau2) : "-", status});
        } else {
            rows.push_back({elmeta::to_string(o.method), "-", "-", "-", "-",
                            std::string("failed: ") + (o.error ? elmeta::to_string(*o.error) : "Unknown")});
        }
    }
    std::vector<std::size_t> width(head.size());
    for (std::size_t j = 0; j < head.size(); ++j) {
        width[j] = head[j].size();
        for (const auto& r : rows) width[j] = std::max(width[j], r[j].size());
    }
    std::string out;
    auto emit = [&](const std::vector<std::string>& r) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            out += r[j];
            if (j + 1 < r.size()) out.append(width[j] - r[j].size() + 2, ' ');
        }
        out += '\n';
    };
    emit(head);
    for (const auto& r : rows) emit(r);
    return out;
}

SimulationConfig SimulateGrid::cell(Scenario scenario, std::int64_t k, double tau2) const {
    SimulationConfig c;
    c.scenario = scenario;
    c.theta = theta;
    c.sigma2 = sigma2;
    c.tau2 = tau2;
    c.studies = k;
    c.n_rule = n_rule;
    c.replicates = replicates;
    c.seed = seed;
    c.beta = beta;
    return c;
}

namespace {

std::vector<std::string_view> split_list(std::string_view value) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = value.find(',');
        out.push_back(trim(value.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        value.remove_prefix(comma + 1);
    }
    return out;
}

double config_real(const std::string& key, std::string_view value) {
    double v = 0.0;
    if (!parse_real(value, v) || !std::isfinite(v)) bad_config(key, "'" + std::string(value) + "' is not a number");
    return v;
}

std::int64_t config_integer(const std::string& key, std::string_view value) {
    std::int64_t v = 0;
    if (!parse_integer(value, v)) bad_config(key, "'" + std::string(value) + "' is not an integer");
    return v;
}

}  // namespace

SimulateGrid parse_simulate_config(std::string_view text) {
    static const std::set<std::string> known = {"scenario", "theta",      "sigma2", "tau2_list",
                                                "K_list",   "n_rule",     "replicates", "seed",
                                                "beta",     "methods",    "out_dir"};
    std::map<std::string, std::string> entries;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            bad_config("line " + std::to_string(line_no), "expected key = value");
        }
        const std::string key(trim(body.substr(0, eq)));
        const std::string value(trim(body.substr(eq + 1)));
        if (!known.count(key)) bad_config(key, "unknown key");
        if (value.empty()) bad_config(key, "empty value");
        if (!entries.emplace(key, value).second) bad_config(key, "given more than once");
    }
    for (const char* required : {"scenario", "tau2_list", "K_list"}) {
        if (!entries.count(required)) bad_config(required, "required key is missing");
    }

    SimulateGrid g;
    for (auto item : split_list(entries["scenario"])) {
        try {
            g.scenarios.push_back(parse_scenario(item));
        } catch (const Error&) {
            bad_config("scenario", "unknown scenario '" + std::string(item) + "'");
        }
    }
    for (auto item : split_list(entries["tau2_list"])) {
        const double v = config_real("tau2_list", item);
        if (v < 0.0) bad_config("tau2_list", "values must be non-negative");
        g.tau2_list.push_back(v);
    }
    for (auto item : split_list(entries["K_list"])) {
        const auto v = config_integer("K_list", item);
        if (v < 2) bad_config("K_list", "values must be at least 2");
        g.k_list.push_back(v);
    }
    if (entries.count("theta")) g.theta = config_real("theta", entries["theta"]);
    if (entries.count("sigma2")) g.sigma2 = config_real("sigma2", entries["sigma2"]);
    if (entries.count("n_rule")) {
        try {
            g.n_rule = SampleSizeRule::parse(entries["n_rule"]);
        } catch (const Error& e) {
            bad_config("n_rule", e.what());
        }
    }
    if (entries.count("replicates")) g.replicates = config_integer("replicates", entries["replicates"]);
    if (entries.count("seed")) {
        const auto s = config_integer("seed", entries["seed"]);
        if (s < 0) bad_config("seed", "must be non-negative");
        g.seed = static_cast<std::uint64_t>(s);
    }
    if (entries.count("beta")) g.beta = config_real("beta", entries["beta"]);
    try {
        g.methods = parse_method_list(entries.count("methods") ? entries["methods"] : "all");
    } catch (const Error& e) {
        bad_config("methods", e.what());
    }
    if (entries.count("out_dir")) g.out_dir = entries["out_dir"];

    // Validate every cell up front so a bad grid fails before any work starts.
    for (auto sc : g.scenarios) {
        for (auto k : g.k_list) {
            for (auto t : g.tau2_list) g.cell(sc, k, t).validate();
        }
    }
    return g;
}

SimulateGrid read_simulate_config(const fs::path& path) {
    return parse_simulate_config(read_text_file(path));
}

std::string coverage_to_csv(const ExperimentResult& result) {
    std::string out = "method,coverage,mean_width,replicates,failures\n";
    for (const auto& m : result.methods) {
        out += std::string(elmeta::to_string(m.method)) + ',' + format_double(m.coverage) + ',' +
               format_double(m.mean_width) + ',' + std::to_string(m.replicates) + ',' +
               std::to_string(m.failures) + '\n';
    }
    return out;
}

std::string cell_file_name(Scenario scenario, std::int64_t k, double tau2) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), tau2);
    return std::string("coverage_") + to_string(scenario) + "_K" + std::to_string(k) + "_tau2_" +
           std::string(buf.data(), ptr) + ".csv";
}

std::string run_simulate(const SimulateGrid& grid, const fs::path& out_dir) {
    json n_rule = {{"text", grid.n_rule.to_string()}};
    switch (grid.n_rule.kind) {
        case SampleSizeRule::Kind::UniformScaled:
            n_rule["kind"] = "uniform_scaled";
            n_rule["lo"] = grid.n_rule.lo;
            n_rule["hi"] = grid.n_rule.hi;
            n_rule["factor"] = grid.n_rule.factor;
            break;
        case SampleSizeRule::Kind::UniformK:
            n_rule["kind"] = "uniform_k";
            n_rule["lo"] = grid.n_rule.lo;
            n_rule["hi"] = grid.n_rule.hi;
            break;
        case SampleSizeRule::Kind::Fixed:
            n_rule["kind"] = "fixed";
            n_rule["n"] = grid.n_rule.fixed;
            break;
    }
    json scenarios = json::array();
    for (auto s : grid.scenarios) scenarios.push_back(to_string(s));
    json methods = json::array();
    for (auto m : grid.methods) methods.push_back(elmeta::to_string(m));

    json cells = json::array();
    for (auto sc : grid.scenarios) {
        for (auto k : grid.k_list) {
            for (auto t : grid.tau2_list) {
                const auto result = run_coverage(grid.cell(sc, k, t), grid.methods);
                const std::string name = cell_file_name(sc, k, t);
                write_text_file(out_dir / name, coverage_to_csv(result));
                cells.push_back({{"scenario", to_string(sc)}, {"K", k}, {"tau2", t}, {"file", name}});
            }
        }
    }
    const json manifest = {{"scenario", std::move(scenarios)},
                           {"theta", grid.theta},
                           {"sigma2", grid.sigma2},
                           {"tau2_list", grid.tau2_list},
                           {"K_list", grid.k_list},
                           {"n_rule", std::move(n_rule)},
                           {"replicates", grid.replicates},
                           {"seed", grid.seed},
                           {"beta", grid.beta},
                           {"study_level", SimulationConfig{}.study_level},
                           {"methods", std::move(methods)},
                           {"cells", std::move(cells)}};
    const std::string text = manifest.dump(2) + "\n";
    write_text_file(out_dir / "manifest.json", text);
    return text;
}

std::string qq_to_csv(std::span<const QqResult> results) {
    std::string out = "sample_quantile,theoretical_quantile,variant\n";
    for (const auto& q : results) {
        const char* name = to_string(q.variant);
        for (std::size_t i = 0; i < q.sample_quantiles.size(); ++i) {
            out += format_double(q.sample_quantiles[i]) + ',' + format_double(q.theoretical_quantiles[i]) +
                   ',' + name + '\n';
        }
    }
    return out;
}

std::string divergence_to_csv(std::span<const DivergenceRow> rows) {
    std::string out = "K,n,mean_Z,se_Z,mean_Z_fixed,se_Z_fixed\n";
    for (const auto& r : rows) {
        out += std::to_string(r.studies) + ',' + std::to_string(r.n) + ',' + format_double(r.mean_z) + ',' +
               format_double(r.se_z) + ',' + format_double(r.mean_z_fixed) + ',' +
               format_double(r.se_z_fixed) + '\n';
    }
    return out;
}

fs::path default_output_dir() {
    if (const char* env = std::getenv("ELMETA_OUTPUT_DIR"); env && *env) return fs::path(env);
    return fs::path(".");
}

}  // namespace elmeta::io
