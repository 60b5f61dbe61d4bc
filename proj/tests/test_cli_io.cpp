#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "structsens/pipeline.hpp"

using namespace structsens;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string write_temp(const std::string& name, const std::string& text) {
    const auto path = fs::temp_directory_path() / name;
    std::ofstream out(path);
    out << text;
    return path.string();
}

const char* kMinimalFit = R"(
[run]
experiment = fit
[model]
model = rm
r = 1
m = 0.1
[response]
family = ivlev
a = 1
b = 2
)";

const char* kIntersectRm = R"(
[run]
experiment = intersect
[model]
model = rm
r = 1
m = 0.1
[response.holling]
family = holling
a = 3.05
b = 2.68
[response.ivlev]
family = ivlev
a = 1
b = 2
[response.trig]
family = trig
a = 0.99
b = 1.48
)";

}  // namespace

TEST_CASE("a minimal fit config picks up the documented defaults") {
    const RunConfig cfg = parse_config_text(kMinimalFit);
    CHECK(cfg.dt == 1e-3);
    CHECK(cfg.t_end == 2000.0);
    CHECK(cfg.fit_n_grid == 1000);
    CHECK(cfg.fit_restarts == 8);
    CHECK(cfg.transient_fraction == 0.5);
    CHECK(cfg.fit_x_lo == 0.0);
    CHECK(cfg.fit_x_hi == 4.0);
}

TEST_CASE("lgm defaults differ and missing q is named in the error") {
    const char* text = R"(
[run]
experiment = simulate
[model]
model = lgm
r = 1.75
s = 0.85
K = 9
[response]
family = ivlev
a = 451.447
b = 2.313
)";
    CHECK_THROWS_WITH_AS(parse_config_text(text), doctest::Contains("q"), config_error);
    const std::string with_q = std::string(text) + "\n[model]\nq = 212\n";
    const RunConfig cfg = parse_config_text(with_q);
    CHECK(cfg.dt == 1e-4);
    CHECK(cfg.t_end == 100.0);
}

TEST_CASE("a stochastic lgm experiment with sigma 50 is accepted") {
    const char* text = R"(
[run]
experiment = simulate
[model]
model = lgm
r = 1.75
s = 0.85
q = 212
K = 11
[response]
family = ivlev
a = 451.447
b = 2.313
[sim]
sigma = 50
)";
    const RunConfig cfg = parse_config_text(text);
    CHECK(cfg.sigma == 50.0);
}

TEST_CASE("unknown keys and sections carry line numbers") {
    CHECK_THROWS_WITH_AS(parse_config_text("[run]\nexperiment = fit\nbogus = 1\n"),
                         doctest::Contains("line 3"), config_error);
    CHECK_THROWS_WITH_AS(parse_config_text("[nope]\nx = 1\n"), doctest::Contains("line 2"),
                         config_error);
    CHECK_THROWS_WITH_AS(parse_config_text("[model]\nr == 1\n"), doctest::Contains("invalid"),
                         config_error);
    CHECK_THROWS_AS(parse_config_text("[model]\nr = 1\n"), config_error);  // no experiment
}

TEST_CASE("serialize and parse round-trip exactly") {
    RunConfig cfg = parse_config_text(kIntersectRm);
    const RunConfig again = parse_config_text(serialize(cfg));
    CHECK(again == cfg);

    // piecewise response block
    const char* pw = R"(
[run]
experiment = bifurcate
[model]
model = rm
r = 1
m = 0.1
K_lo = 2
K_hi = 3
K_step = 0.5
[response]
code = TTH
T_a = 0.99
T_b = 1.48
H_a = 3.05
H_b = 2.68
)";
    const RunConfig c2 = parse_config_text(pw);
    CHECK(parse_config_text(serialize(c2)) == c2);
    CHECK(config_hash(c2) != config_hash(cfg));
    CHECK(config_hash(c2) == config_hash(parse_config_text(serialize(c2))));
}

TEST_CASE("piecewise response blocks build switching responses") {
    ResponseBlock blk;
    blk.code = "HII";
    blk.params['H'] = {3.05, 2.68};
    blk.params['I'] = {1.0, 2.0};
    const Response r = build_response(blk);
    const auto& pw = std::get<PiecewiseResponse>(r);
    CHECK(pw.code == "HII");
    CHECK(pw.x1 == doctest::Approx(0.6191).epsilon(5e-4));
    CHECK(response_label(r) == "HII");
}

TEST_CASE("run(intersect) reproduces the reference crossing table") {
    RunConfig cfg = parse_config_text(kIntersectRm);
    cfg.out_dir = (fs::temp_directory_path() / "ss_intersect").string();
    const ReportBundle bundle = run(cfg);
    const std::string csv = slurp(cfg.out_dir + "/intersections.csv");
    CHECK(csv.find("# structsens") == 0);
    CHECK(csv.find(bundle.config_hash) != std::string::npos);
    CHECK(csv.find("holling/ivlev,0,0.61905") != std::string::npos);
    CHECK(csv.find("holling/ivlev,1,2.579857") != std::string::npos);
    CHECK(csv.find("trig/holling,1,2.469547") != std::string::npos);
}

TEST_CASE("identical config and seed produce byte-identical outputs") {
    RunConfig cfg = parse_config_text(kIntersectRm);
    cfg.seed = 9;
    cfg.out_dir = (fs::temp_directory_path() / "ss_rerun_a").string();
    run(cfg);
    const std::string a = slurp(cfg.out_dir + "/intersections.csv");
    cfg.out_dir = (fs::temp_directory_path() / "ss_rerun_b").string();
    run(cfg);
    const std::string b = slurp(cfg.out_dir + "/intersections.csv");
    // provenance hashes the config including out_dir; compare payloads
    CHECK(a.substr(a.find('\n')) == b.substr(b.find('\n')));

    cfg.out_dir = (fs::temp_directory_path() / "ss_rerun_a").string();
    run(cfg);
    CHECK(slurp(cfg.out_dir + "/intersections.csv") == a);
}

TEST_CASE("every output file opens with the provenance line") {
    const char* sim = R"(
[run]
experiment = simulate
seed = 4
[model]
model = rm
r = 1
m = 0.1
K = 0.6
[response]
family = holling
a = 3.05
b = 2.68
[sim]
t_end = 50
sigma = 0.01
)";
    RunConfig cfg = parse_config_text(sim);
    cfg.out_dir = (fs::temp_directory_path() / "ss_prov").string();
    const ReportBundle bundle = run(cfg);
    REQUIRE(bundle.files.size() >= 3);
    for (const auto& f : bundle.files) {
        const std::string text = slurp(f);
        const std::string needle = "structsens 0.1.0 config=" + bundle.config_hash + " seed=4";
        const auto pos = text.find(needle);
        CHECK(pos != std::string::npos);
        // leading comment line (svg: first comment after the xml declaration)
        CHECK(pos < 100);
    }
    const std::string traj = slurp(cfg.out_dir + "/trajectory.csv");
    CHECK(traj.find("t,x,y,xi") != std::string::npos);
    const std::string svg = slurp(cfg.out_dir + "/trajectory.svg");
    CHECK(svg.find("noise xi") != std::string::npos);
}

TEST_CASE("report runs exactly grid x starts x responses integrations") {
    const char* rep = R"(
[run]
experiment = report
[model]
model = rm
r = 1
m = 0.1
K_lo = 0.40
K_hi = 0.50
K_step = 0.05
[response.holling]
family = holling
a = 3.05
b = 2.68
[response.ivlev]
family = ivlev
a = 1
b = 2
[response.trig]
family = trig
a = 0.99
b = 1.48
[sim]
t_end = 200
[report]
plots = false
)";
    RunConfig cfg = parse_config_text(rep);
    cfg.out_dir = (fs::temp_directory_path() / "ss_report_count").string();
    const long before = integration_counter().load();
    run(cfg);
    const long after = integration_counter().load();
    CHECK(after - before == 3 * 2 * 3);  // 3 grid points, 2 starts, 3 responses
    const std::string summary = slurp(cfg.out_dir + "/sensitivity.csv");
    CHECK(summary.find("response,hopf_K,lc_saddle_K,bistable_lo,bistable_hi") != std::string::npos);
    CHECK(summary.find("holling,0.44502") != std::string::npos);
}

TEST_CASE("run(bifurcate) writes the diagram, summary and plot set") {
    const char* text = R"(
[run]
experiment = bifurcate
[model]
model = rm
r = 1
m = 0.1
K_lo = 0.40
K_hi = 0.50
K_step = 0.05
[response]
family = holling
a = 3.05
b = 2.68
[sim]
t_end = 400
)";
    RunConfig cfg = parse_config_text(text);
    cfg.out_dir = (fs::temp_directory_path() / "ss_bif").string();
    run(cfg);
    const std::string diagram = slurp(cfg.out_dir + "/diagram.csv");
    CHECK(diagram.find("K,ic_label,var,min,max,class") != std::string::npos);
    CHECK(diagram.find("0.4,near_eq,x,") != std::string::npos);
    CHECK(diagram.find(",cycle") != std::string::npos);  // K = 0.5 cells
    CHECK(diagram.find(",point") != std::string::npos);  // K = 0.4 cells
    const std::string summary = slurp(cfg.out_dir + "/summary.csv");
    CHECK(summary.find("holling,0.44502") != std::string::npos);
    CHECK(fs::exists(cfg.out_dir + "/diagram.svg"));
}

TEST_CASE("run(hopf) resolves an automatic bracket") {
    const char* text = R"(
[run]
experiment = hopf
[model]
model = rm
r = 1
m = 0.1
[response]
family = ivlev
a = 1
b = 2
)";
    RunConfig cfg = parse_config_text(text);
    cfg.out_dir = (fs::temp_directory_path() / "ss_hopf").string();
    run(cfg);
    const std::string csv = slurp(cfg.out_dir + "/hopf.csv");
    CHECK(csv.find("ivlev,1.07055") != std::string::npos);
}

TEST_CASE("report builds fitted and piecewise sub-model sets on request") {
    const char* rep = R"(
[run]
experiment = report
[model]
model = rm
r = 1
m = 0.1
K_lo = 0.44
K_hi = 0.46
K_step = 0.02
[response.holling]
family = holling
a = 3.05
b = 2.68
[response.ivlev]
family = ivlev
a = 1
b = 2
[response.trig]
family = trig
a = 0.99
b = 1.48
[sim]
t_end = 400
[fit]
x_lo = 0
x_hi = 0.1
[report]
fixed = holling
piecewise = HII,TTH
plots = false
)";
    RunConfig cfg = parse_config_text(rep);
    cfg.out_dir = (fs::temp_directory_path() / "ss_report_sets").string();
    run(cfg);
    const std::string summary = slurp(cfg.out_dir + "/sensitivity.csv");
    auto hopf_in_row = [&](const std::string& label) {
        const auto pos = summary.find("\n" + label + ",");
        REQUIRE(pos != std::string::npos);
        return std::stod(summary.substr(pos + label.size() + 2));
    };
    // fixed-Holling fitted set: the other two sub-models' Hopf points shift
    // toward the Holling location (published row: 0.4452, 0.4632, 0.7729)
    CHECK(hopf_in_row("holling_fixed") == doctest::Approx(0.4452).epsilon(0.01));
    CHECK(hopf_in_row("ivlev_fit_to_holling") == doctest::Approx(0.4632).epsilon(0.01));
    CHECK(hopf_in_row("trig_fit_to_holling") == doctest::Approx(0.7729).epsilon(0.01));
    // piecewise sets take the low-region family's Hopf point
    CHECK(hopf_in_row("HII") == doctest::Approx(0.4452).epsilon(0.01));
    CHECK(hopf_in_row("TTH") == doctest::Approx(10.12).epsilon(0.01));
    CHECK(fs::exists(cfg.out_dir + "/diagram_HII.csv"));
}

TEST_CASE("thread count fallback comes from the environment") {
    setenv("STRUCTSENS_THREADS", "3", 1);
    CHECK(default_thread_count() == 3);
    setenv("STRUCTSENS_THREADS", "junk", 1);
    CHECK(default_thread_count() == 1);
    unsetenv("STRUCTSENS_THREADS");
    CHECK(default_thread_count() == 1);
}

TEST_CASE("sampled curves load from csv with optional weights") {
    const std::string path = write_temp("ss_curve.csv", "x,f,w\n0,0,1\n0.5,0.3,2\n1.0,0.5,1\n");
    const SampledCurve c = read_sampled_curve(path);
    REQUIRE(c.x.size() == 3);
    CHECK(c.w[1] == 2.0);
    const std::string bad = write_temp("ss_curve_bad.csv", "x,f\n0.5,0.3\n0.4,0.2\n");
    CHECK_THROWS_AS(read_sampled_curve(bad), config_error);
    CHECK_THROWS_AS(read_sampled_curve("/nonexistent/nope.csv"), io_error);
}

TEST_CASE("fitting to sampled data through the pipeline") {
    const FunctionalResponse target{Family::ivlev, 1.0, 2.0};
    std::ostringstream data;
    data << "x,f\n";
    for (int i = 0; i <= 200; ++i) {
        const double x = 4.0 * i / 200.0;
        data << x << "," << target(x) << "\n";
    }
    const std::string path = write_temp("ss_fit_data.csv", data.str());
    RunConfig cfg = parse_config_text(kMinimalFit);
    cfg.fit_data = path;
    cfg.fit_candidate = "holling";
    cfg.out_dir = (fs::temp_directory_path() / "ss_fit_data_out").string();
    run(cfg);
    const std::string csv = slurp(cfg.out_dir + "/fit.csv");
    CHECK(csv.find("family,a,b,objective,converged") != std::string::npos);
    CHECK(csv.find("holling,3.0") != std::string::npos);
}

TEST_CASE("emit_plot rejects empty inputs and drops branch markers in the svg") {
    BifurcationDiagram empty;
    CHECK_THROWS_AS(emit_plot(empty, "/tmp/ss_no.svg", "x", "prov"), config_error);

    const FunctionalResponse holling{Family::holling, 3.05, 2.68};
    ModelSpec spec{ModelKind::rosenzweig_macarthur, 1.0, 1.0, 0.1, 0.0, 0.0, holling};
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 400.0;
    auto diag = scan_diagram(spec, {0.40, 0.45, 0.50, 0.55, 0.60}, ICProtocol{}, cfg);
    diag.hopf_K = hopf_locate(spec, 0.05, 50.0);
    const std::string path = (fs::temp_directory_path() / "ss_diag.svg").string();
    emit_plot(diag, path, "holling", "prov-test");
    const std::string svg = slurp(path);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("prov-test") != std::string::npos);
    CHECK(svg.find("0.44502") != std::string::npos);  // hopf marker label
    CHECK(std::count(svg.begin(), svg.end(), '\n') > 10);
    std::size_t polylines = 0;
    for (std::size_t p = svg.find("<polyline"); p != std::string::npos;
         p = svg.find("<polyline", p + 1))
        ++polylines;
    CHECK(polylines >= 4);
}

TEST_CASE("the cli binary dispatches subcommands and exit codes") {
#ifdef STRUCTSENS_CLI_PATH
    const std::string cli = STRUCTSENS_CLI_PATH;
    const std::string dir = (fs::temp_directory_path() / "ss_cli").string();
    const std::string conf = write_temp("ss_cli.conf", kIntersectRm);
    const std::string ok = cli + " intersect --config " + conf + " --out " + dir + " >/dev/null 2>&1";
    CHECK(std::system(ok.c_str()) == 0);
    CHECK(fs::exists(dir + "/intersections.csv"));

    const std::string bad_conf = write_temp("ss_cli_bad.conf", "[run]\nexperiment = fit\n");
    const std::string bad =
        cli + " fit --config " + bad_conf + " --out " + dir + " >/dev/null 2>&1";
    const int rc = std::system(bad.c_str());
    CHECK(WIFEXITED(rc));
    CHECK(WEXITSTATUS(rc) == 2);

    const std::string missing =
        cli + " fit --config /nonexistent.conf --out " + dir + " >/dev/null 2>&1";
    const int rc2 = std::system(missing.c_str());
    CHECK(WEXITSTATUS(rc2) == 4);
#endif
}
