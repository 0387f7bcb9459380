#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "elmeta/elmeta.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const auto dir = fs::temp_directory_path() / ("elmeta_capi_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
    const auto path = scratch_dir() / name;
    std::ofstream(path) << text;
    return path;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Dataset {
    elmeta_dataset* handle = nullptr;
    ~Dataset() { elmeta_dataset_free(handle); }
};

struct Report {
    elmeta_report* handle = nullptr;
    ~Report() { elmeta_report_free(handle); }
};

Dataset five_studies() {
    const double lo[] = {-1.0, 0.0, -0.5, 0.2, -0.3};
    const double hi[] = {1.0, 2.0, 1.5, 0.9, 0.4};
    Dataset d;
    EXPECT_EQ(elmeta_dataset_create(lo, hi, nullptr, nullptr, nullptr, 5, ELMETA_SCALE_LINEAR, &d.handle),
              ELMETA_OK);
    return d;
}

// ctest provides the CLI location; run directly, the CLI tests skip.
#define REQUIRE_CLI() \
    if (!std::getenv("ELMETA_CLI")) GTEST_SKIP() << "ELMETA_CLI not set"

int run_cli(const std::string& args, std::string* out = nullptr, std::string* err = nullptr) {
    const char* cli = std::getenv("ELMETA_CLI");
    const auto dir = scratch_dir();
    const std::string cmd = std::string("\"") + cli + "\" " + args + " >\"" + (dir / "stdout").string() +
                            "\" 2>\"" + (dir / "stderr").string() + "\"";
    const int raw = std::system(cmd.c_str());
    if (out) *out = slurp(dir / "stdout");
    if (err) *err = slurp(dir / "stderr");
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

TEST(CApi, DatasetValidationReportsCodes) {
    const double lo[] = {0.0, 1.0};
    const double hi[] = {1.0, 1.0};
    elmeta_dataset* d = nullptr;
    EXPECT_EQ(elmeta_dataset_create(lo, hi, nullptr, nullptr, nullptr, 2, ELMETA_SCALE_LINEAR, &d),
              ELMETA_ERR_DEGENERATE_INTERVAL);
    EXPECT_EQ(d, nullptr);
    EXPECT_STRNE(elmeta_last_error(), "");
    EXPECT_EQ(elmeta_dataset_create(lo, hi, nullptr, nullptr, nullptr, 1, ELMETA_SCALE_LINEAR, &d),
              ELMETA_ERR_TOO_FEW_STUDIES);
    EXPECT_EQ(elmeta_dataset_create(nullptr, nullptr, nullptr, nullptr, nullptr, 0, ELMETA_SCALE_LINEAR, &d),
              ELMETA_ERR_EMPTY_DATASET);
    EXPECT_STREQ(elmeta_status_name(ELMETA_ERR_PARSE), "ParseError");
    EXPECT_TRUE(elmeta_status_is_input_error(ELMETA_ERR_PARSE));
    EXPECT_FALSE(elmeta_status_is_input_error(ELMETA_ERR_NO_CONVERGENCE));
    EXPECT_FALSE(elmeta_status_is_input_error(ELMETA_OK));
}

TEST(CApi, NullArgumentsAreRejected) {
    EXPECT_EQ(elmeta_dataset_create(nullptr, nullptr, nullptr, nullptr, nullptr, 2, ELMETA_SCALE_LINEAR, nullptr),
              ELMETA_ERR_BAD_ARGUMENT);
    EXPECT_EQ(elmeta_analyze(nullptr, "all", 0.05, 0, 0, nullptr), ELMETA_ERR_BAD_ARGUMENT);
    elmeta_dataset_free(nullptr);
    elmeta_report_free(nullptr);
    elmeta_string_free(nullptr);
}

TEST(CApi, AnalyzeAllMethods) {
    const auto d = five_studies();
    Report r;
    ASSERT_EQ(elmeta_analyze(d.handle, "all", 0.05, 0, 0, &r.handle), ELMETA_OK);
    ASSERT_EQ(elmeta_report_count(r.handle), 9u);
    EXPECT_FALSE(elmeta_report_all_failed(r.handle));
    for (size_t i = 0; i < 9; ++i) {
        ASSERT_EQ(elmeta_report_status(r.handle, i), ELMETA_OK) << elmeta_report_method(r.handle, i);
        double est, lo, hi;
        ASSERT_EQ(elmeta_report_values(r.handle, i, &est, &lo, &hi), ELMETA_OK);
        EXPECT_LE(lo, est);
        EXPECT_LE(est, hi);
    }
    EXPECT_STREQ(elmeta_report_method(r.handle, 0), "Conventional-FE");
    double tau2 = -1.0;
    // Fixed-effect pooling reports the zero it assumes; EL methods estimate no tau2.
    EXPECT_EQ(elmeta_report_tau2(r.handle, 0, &tau2), 1);
    EXPECT_EQ(tau2, 0.0);
    EXPECT_EQ(elmeta_report_tau2(r.handle, 1, &tau2), 1);
    EXPECT_GE(tau2, 0.0);
    EXPECT_EQ(elmeta_report_tau2(r.handle, 5, &tau2), 0);
    EXPECT_EQ(elmeta_report_values(r.handle, 42, nullptr, nullptr, nullptr), ELMETA_ERR_BAD_ARGUMENT);

    char* json = nullptr;
    ASSERT_EQ(elmeta_report_json(r.handle, &json), ELMETA_OK);
    const auto doc = nlohmann::json::parse(json);
    elmeta_string_free(json);
    EXPECT_EQ(doc["results"].size(), 9u);
    char* table = nullptr;
    ASSERT_EQ(elmeta_report_table(r.handle, &table), ELMETA_OK);
    EXPECT_NE(std::string(table).find("EL-RE"), std::string::npos);
    elmeta_string_free(table);
}

TEST(CApi, LevelSetOfIndicatorVariantContainsInterval) {
    const auto d = five_studies();
    Report r;
    ASSERT_EQ(elmeta_analyze(d.handle, "EL3", 0.05, 0, 0, &r.handle), ELMETA_OK);
    double est, lo, hi;
    ASSERT_EQ(elmeta_report_values(r.handle, 0, &est, &lo, &hi), ELMETA_OK);
    const size_t n = elmeta_report_level_set_size(r.handle, 0);
    ASSERT_GE(n, 1u);
    bool found = false;
    for (size_t p = 0; p < n; ++p) {
        double a, b;
        ASSERT_EQ(elmeta_report_level_set_piece(r.handle, 0, p, &a, &b), ELMETA_OK);
        found = found || (a == lo && b == hi);
    }
    EXPECT_TRUE(found);
}

TEST(CApi, UnknownMethodIsAnArgumentError) {
    const auto d = five_studies();
    Report r;
    EXPECT_EQ(elmeta_analyze(d.handle, "EL9", 0.05, 0, 0, &r.handle), ELMETA_ERR_BAD_ARGUMENT);
    EXPECT_EQ(elmeta_analyze(d.handle, "all", 1.5, 0, 0, &r.handle), ELMETA_ERR_BAD_ARGUMENT);
}

TEST(CApi, RatioReportNeedsLogScale) {
    const auto d = five_studies();
    Report r;
    EXPECT_EQ(elmeta_analyze(d.handle, "all", 0.05, 1, 0, &r.handle), ELMETA_ERR_BAD_ARGUMENT);
}

TEST(CApi, ElModelMatchesReport) {
    const auto d = five_studies();
    elmeta_el_model* m = nullptr;
    ASSERT_EQ(elmeta_el_model_create(d.handle, "EL2", &m), ELMETA_OK);
    double theta, value, lo, hi;
    ASSERT_EQ(elmeta_el_model_estimate(m, &theta), ELMETA_OK);
    ASSERT_EQ(elmeta_el_model_neg2logr(m, theta, &value), ELMETA_OK);
    EXPECT_LE(std::fabs(value), 1e-8);
    ASSERT_EQ(elmeta_el_model_neg2logr(m, 100.0, &value), ELMETA_OK);
    EXPECT_TRUE(std::isinf(value));
    ASSERT_EQ(elmeta_el_model_ci(m, 0.05, &lo, &hi), ELMETA_OK);
    Report r;
    ASSERT_EQ(elmeta_analyze(d.handle, "EL2", 0.05, 0, 0, &r.handle), ELMETA_OK);
    double est, rlo, rhi;
    ASSERT_EQ(elmeta_report_values(r.handle, 0, &est, &rlo, &rhi), ELMETA_OK);
    EXPECT_EQ(est, theta);
    EXPECT_EQ(lo, rlo);
    EXPECT_EQ(hi, rhi);
    elmeta_el_model_free(m);
    EXPECT_EQ(elmeta_el_model_create(d.handle, "Conventional-FE", &m), ELMETA_ERR_BAD_ARGUMENT);
}

TEST(CApi, NumericFailureIsPerMethod) {
    const double lo[] = {0.0, 0.0, 0.0};
    const double hi[] = {1.0, 1.0, 1.0};
    Dataset d;
    ASSERT_EQ(elmeta_dataset_create(lo, hi, nullptr, nullptr, nullptr, 3, ELMETA_SCALE_LINEAR, &d.handle), ELMETA_OK);
    Report r;
    ASSERT_EQ(elmeta_analyze(d.handle, "EL1", 0.05, 0, 0, &r.handle), ELMETA_OK);
    EXPECT_EQ(elmeta_report_status(r.handle, 0), ELMETA_ERR_NO_FEASIBLE_THETA);
    EXPECT_TRUE(elmeta_report_all_failed(r.handle));
}

TEST(CApi, ReadWriteRoundTrip) {
    const auto src = write_file("in.csv", "label,lower,upper\na,0.5,2\nb,0.8,1.25\n");
    Dataset d;
    ASSERT_EQ(elmeta_dataset_read(src.c_str(), ELMETA_FORMAT_AUTO, ELMETA_SCALE_LOG, 1, &d.handle), ELMETA_OK);
    ASSERT_EQ(elmeta_dataset_size(d.handle), 2u);
    double lo, hi;
    ASSERT_EQ(elmeta_dataset_interval(d.handle, 0, &lo, &hi), ELMETA_OK);
    EXPECT_NEAR(lo, std::log(0.5), 1e-15);
    const auto out = scratch_dir() / "out.json";
    ASSERT_EQ(elmeta_dataset_write(d.handle, out.c_str(), ELMETA_FORMAT_AUTO), ELMETA_OK);
    Dataset back;
    ASSERT_EQ(elmeta_dataset_read(out.c_str(), ELMETA_FORMAT_AUTO, ELMETA_SCALE_LOG, 0, &back.handle), ELMETA_OK);
    double lo2, hi2;
    ASSERT_EQ(elmeta_dataset_interval(back.handle, 0, &lo2, &hi2), ELMETA_OK);
    EXPECT_EQ(lo, lo2);
    EXPECT_EQ(hi, hi2);

    Dataset missing;
    EXPECT_EQ(elmeta_dataset_read("/nonexistent/x.csv", ELMETA_FORMAT_AUTO, ELMETA_SCALE_LINEAR, 0, &missing.handle),
              ELMETA_ERR_IO);
    const auto bad = write_file("bad.csv", "label,lower,upper\na,1,0\nb,0,1\n");
    EXPECT_EQ(elmeta_dataset_read(bad.c_str(), ELMETA_FORMAT_AUTO, ELMETA_SCALE_LINEAR, 0, &missing.handle),
              ELMETA_ERR_PARSE);
}

TEST(CApi, ExperimentsProduceCsv) {
    char* csv = nullptr;
    ASSERT_EQ(elmeta_qq(20, 10, 30, 1, "EL2", &csv), ELMETA_OK);
    const std::string qq(csv);
    elmeta_string_free(csv);
    EXPECT_EQ(std::count(qq.begin(), qq.end(), '\n'), 31);
    double ks[2] = {-1, -1};
    ASSERT_EQ(elmeta_qq_ks(20, 10, 30, 1, "EL2,EL3", ks, 2), ELMETA_OK);
    EXPECT_GE(ks[0], 0.0);
    EXPECT_LE(ks[1], 1.0);
    EXPECT_EQ(elmeta_qq_ks(20, 10, 30, 1, "EL2,EL3", ks, 1), ELMETA_ERR_BAD_ARGUMENT);

    const int64_t k[] = {50};
    const int64_t n[] = {20, 40};
    ASSERT_EQ(elmeta_diverge(k, 1, n, 2, 5, 2, 0, &csv), ELMETA_OK);
    const std::string div(csv);
    elmeta_string_free(csv);
    EXPECT_EQ(div.rfind("K,n,mean_Z,se_Z,mean_Z_fixed,se_Z_fixed\n", 0), 0u);
    EXPECT_EQ(std::count(div.begin(), div.end(), '\n'), 3);

    const auto cfg = write_file("grid.cfg", "scenario = S2\ntau2_list = 0.1\nK_list = 8\nreplicates = 3\n");
    const auto dir = scratch_dir() / "sim";
    ASSERT_EQ(elmeta_simulate(cfg.c_str(), dir.c_str(), &csv), ELMETA_OK);
    const auto manifest = nlohmann::json::parse(csv);
    elmeta_string_free(csv);
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / manifest["cells"][0]["file"].get<std::string>()));
    const auto bad = write_file("bad.cfg", "scenario = S2\nK_list = 8\n");
    EXPECT_EQ(elmeta_simulate(bad.c_str(), dir.c_str(), &csv), ELMETA_ERR_BAD_CONFIG);
}

TEST(Cli, AnalyzeSucceedsWithJson) {
    REQUIRE_CLI();
    const auto in = write_file("cli.csv", "label,lower,upper\na,-1,1\nb,0,2\nc,-0.5,1.5\nd,0.2,0.9\n");
    std::string out;
    ASSERT_EQ(run_cli("analyze --input " + in.string() + " --format json", &out), 0);
    const auto doc = nlohmann::json::parse(out);
    EXPECT_EQ(doc["results"].size(), 9u);
    ASSERT_EQ(run_cli("analyze --input " + in.string() + " --methods EL-RE,CD-RE", &out), 0);
    EXPECT_NE(out.find("CD-RE"), std::string::npos);
}

TEST(Cli, InputErrorsExitTwo) {
    REQUIRE_CLI();
    std::string err;
    const auto bad = write_file("cli_bad.csv", "label,lower,upper\na,1,1\nb,0,2\n");
    EXPECT_EQ(run_cli("analyze --input " + bad.string(), nullptr, &err), 2);
    const auto doc = nlohmann::json::parse(err);
    EXPECT_EQ(doc["error"]["code"], "ParseError");
    EXPECT_EQ(run_cli("analyze --input /nonexistent.csv", nullptr, &err), 2);
    EXPECT_EQ(run_cli("analyze --bogus", nullptr, &err), 2);
    const auto good = write_file("cli_ok.csv", "lower,upper\n-1,1\n0,2\n");
    EXPECT_EQ(run_cli("analyze --input " + good.string() + " --beta 2", nullptr, &err), 2);
    EXPECT_EQ(run_cli("analyze --input " + good.string() + " --report-scale ratio", nullptr, &err), 2);
}

TEST(Cli, AllMethodsFailingExitsThree) {
    REQUIRE_CLI();
    const auto in = write_file("cli_same.csv", "lower,upper\n0,1\n0,1\n0,1\n");
    std::string err;
    EXPECT_EQ(run_cli("analyze --input " + in.string() + " --methods EL1", nullptr, &err), 3);
}

TEST(Cli, ExperimentsWriteFiles) {
    REQUIRE_CLI();
    const auto dir = scratch_dir();
    const auto qq = dir / "qq.csv";
    ASSERT_EQ(run_cli("qq --n 20 --K 10 --replicates 20 --variants EL2 --out " + qq.string()), 0);
    EXPECT_EQ(slurp(qq).rfind("sample_quantile,theoretical_quantile,variant\n", 0), 0u);
    const auto dv = dir / "div.csv";
    ASSERT_EQ(run_cli("diverge --K-list 50 --n-list 20 --replicates 3 --out " + dv.string()), 0);
    EXPECT_TRUE(fs::exists(dv));
    const auto cfg = write_file("cli_grid.cfg", "scenario = S1\ntau2_list = 0\nK_list = 6\nreplicates = 2\n");
    ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --out-dir " + (dir / "cli_sim").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "cli_sim" / "manifest.json"));
    const auto bad = write_file("cli_bad.cfg", "scenario = S1\n");
    EXPECT_EQ(run_cli("simulate --config " + bad.string()), 2);
}
