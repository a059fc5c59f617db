#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <cylasym/harness.hpp>

using namespace cylasym;
namespace fs = std::filesystem;

namespace {

const char* kZeroForcing = R"([problem]
m = 1
n = 2
p = 1
omega = 0, 1

[coef]
a_1_0_1_0 = 1
a_0_1_0_1 = 1

[forcing]
f = 0
)";

const char* kAxialCoefficient = R"([problem]
m = 1
n = 2
p = 1
omega = 0, 1

[coef]
a_1_0_1_0 = 1
a_0_1_0_1 = 1 + x1^2

[forcing]
f = 1
)";

const char* kIndefinite = R"([problem]
m = 1
n = 2
p = 1
omega = 0, 1

[coef]
a_1_0_1_0 = 1
a_0_1_0_1 = 1
a_0_0_0_0 = -100

[forcing]
f = 1
)";

fs::path scratch_dir() {
    fs::path d = fs::temp_directory_path() / ("cylasym_harness_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
}

fs::path write_config(const std::string& name, const char* text) {
    fs::path p = scratch_dir() / name;
    std::ofstream(p) << text;
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(CYLASYM_CLI) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

SweepPlan small_plan() {
    SweepPlan plan;
    plan.ells = {2, 4, 8};
    plan.cells_per_unit = 8;
    plan.localized = false;
    return plan;
}

std::string csv_of(const ConvergenceReport& r) {
    std::ostringstream os;
    write_csv(os, r);
    return os.str();
}

}  // namespace

TEST(Plan, Validation) {
    ProblemSpec spec = builtin_problem("poisson_strip");
    SweepPlan ok = small_plan();
    EXPECT_NO_THROW(validate_plan(ok, spec));
    auto expect_bad = [&](auto mutate) {
        SweepPlan p = small_plan();
        mutate(p);
        EXPECT_THROW(validate_plan(p, spec), ConfigError);
    };
    expect_bad([](SweepPlan& p) { p.l0 = 2; });
    expect_bad([](SweepPlan& p) { p.ells = {}; });
    expect_bad([](SweepPlan& p) { p.ells = {4, 2, 8}; });
    expect_bad([](SweepPlan& p) { p.cells_per_unit = 2; });
    expect_bad([](SweepPlan& p) { p.degree = -1; });
    expect_bad([](SweepPlan& p) { p.interior_margin = 0.5; });
    expect_bad([](SweepPlan& p) { p.workers = 0; });
    expect_bad([](SweepPlan& p) { p.solver_tol = 0; });
    expect_bad([](SweepPlan& p) { p.ells = {2.1, 4}; });
    EXPECT_THROW(resolve_problem("no_such_problem_or_file"), ConfigError);
}

TEST(Sweep, PoissonSmall) {
    auto r = run_sweep(small_plan());
    ASSERT_EQ(r.records.size(), 3u);
    EXPECT_GT(r.records[0].err_Hm, r.records[1].err_Hm);
    EXPECT_GT(r.records[1].err_Hm, r.records[2].err_Hm);
    EXPECT_TRUE(r.lemma19.pass);
    ASSERT_TRUE(r.fitted_rate_Hm.has_value());
    EXPECT_GE(*r.fitted_rate_Hm, 3.0);
    EXPECT_EQ(r.records[0].interior.size(), 3u);
    EXPECT_EQ(r.records[0].axial.size(), 2u);
    EXPECT_EQ(r.problem_hash.size(), 16u);
}

TEST(Sweep, DeterministicAcrossWorkers) {
    SweepPlan plan = small_plan();
    plan.localized = true;
    auto a = run_sweep(plan);
    plan.workers = 3;
    auto b = run_sweep(plan);
    EXPECT_EQ(csv_of(a), csv_of(b));
    EXPECT_EQ(a.localized, b.localized);
    auto ja = to_json(a)["records"], jb = to_json(b)["records"];
    for (auto* j : {&ja, &jb})
        for (auto& rec : *j) rec.erase("wall_time_s");
    EXPECT_EQ(ja, jb);
}

TEST(Sweep, ZeroForcingHitsTheFloor) {
    SweepPlan plan = small_plan();
    plan.problem = write_config("zero.cfg", kZeroForcing).string();
    auto r = run_sweep(plan);
    for (const auto& rec : r.records) {
        EXPECT_LE(rec.err_Hm, plan.solver_tol);
        EXPECT_LE(rec.err_H2m_interior, plan.solver_tol);
    }
    EXPECT_TRUE(r.floor_detected);
    EXPECT_FALSE(r.fitted_rate_Hm.has_value());
    EXPECT_EQ(r.included_Hm, (std::vector<bool>{false, false, false}));
}

TEST(Sweep, HypothesisFailureThrows) {
    SweepPlan plan = small_plan();
    plan.problem = write_config("axial.cfg", kAxialCoefficient).string();
    try {
        run_sweep(plan);
        FAIL();
    } catch (const HypothesisFailure& e) {
        EXPECT_FALSE(e.report().passed());
        EXPECT_FALSE(e.report().coefficients_x1_independent);
    }
}

TEST(Refinement, Orders) {
    ProblemSpec bih = builtin_problem("biharmonic_strip");
    auto t = run_refinement(bih, 2, {8, 16, 32, 64}, 3);
    EXPECT_NEAR(t.observed_order_Hm, 2.0, 0.3);
    for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_LT(t.rows[i].err_Hm, t.rows[i - 1].err_Hm);

    ProblemSpec poi = builtin_problem("poisson_strip");
    auto exact = run_refinement(poi, 2, {8, 16, 32}, 2);
    for (const auto& row : exact.rows) EXPECT_LT(row.err_Hm, 1e-11);
    auto linear = run_refinement(poi, 2, {8, 16, 32, 64}, 1);
    EXPECT_NEAR(linear.observed_order_Hm, 1.0, 0.3);

    EXPECT_THROW(run_refinement(poi, 2, {8, 16}), ConfigError);
    EXPECT_THROW(run_refinement(poi, 2, {16, 8, 32}), ConfigError);
    EXPECT_THROW(run_refinement(builtin_problem("varcoef_strip"), 2, {8, 16, 32}), ConfigError);

    std::ostringstream os;
    write_refinement_csv(os, t);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "cells_per_unit,dofs,err_L2,err_Hm,order_L2,order_Hm");
}

TEST(Validate, CoercivityProbe) {
    auto ok = validate_problem(builtin_problem("poisson_strip"));
    EXPECT_TRUE(ok.hypotheses.passed());
    ASSERT_TRUE(ok.discrete_coercivity.has_value());
    EXPECT_GT(*ok.discrete_coercivity, 0.0);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("--version"), 0);
    EXPECT_EQ(run_cli(""), exit_config);
    EXPECT_EQ(run_cli("sweep"), exit_config);
    EXPECT_EQ(run_cli("sweep --problem poisson_strip --l 1,2"), exit_config);
    EXPECT_EQ(run_cli("sweep --problem poisson_strip --l 2,x"), exit_config);
    EXPECT_EQ(run_cli("sweep --problem nowhere.cfg"), exit_config);
    EXPECT_EQ(run_cli("validate --problem poisson_strip"), exit_ok);
    fs::path axial = write_config("axial_cli.cfg", kAxialCoefficient);
    EXPECT_EQ(run_cli("validate --problem " + axial.string()), exit_hypothesis);
    EXPECT_EQ(run_cli("sweep --problem " + axial.string()), exit_hypothesis);
    fs::path indef = write_config("indefinite.cfg", kIndefinite);
    EXPECT_EQ(run_cli("sweep --problem " + indef.string() + " --l 2,4,8 --cells-per-unit 8"), exit_solver);
    EXPECT_EQ(run_cli("refine --problem poisson_strip --cells 8,16"), exit_config);
}

TEST(Cli, SweepCsvMatchesLibrary) {
    fs::path out = scratch_dir() / "cli.csv";
    ASSERT_EQ(run_cli("sweep --problem poisson_strip --l 2,4,8 --cells-per-unit 8 --workers 2 --out-csv " + out.string()),
              exit_ok);
    EXPECT_EQ(read_file(out), csv_of(run_sweep(small_plan())));
}
