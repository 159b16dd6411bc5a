#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "test_util.hpp"

using testutil::cli_path;
using testutil::fresh_dir;
using testutil::read_lines;
using testutil::run_command;
using testutil::slurp;
using testutil::split;

namespace {

// Small-but-real settings so the whole suite stays fast.
const std::string kTinyTrain =
    " --synthetic table8 --p 12 --n-train 30 --hidden 6 --batch-size 10";
const std::string kTinyDetect =
    " --synthetic table8 --p 12 --n-train 30 --n-test-in 10 --n-test-ood 10"
    " --s 2 --n2 12";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("train smoke: checkpoint and a one-row loss trace") {
    REQUIRE_FALSE(cli_path().empty());
    const std::string dir = fresh_dir("cli_train");
    const int rc = run_command(cli_path() + " train" + kTinyTrain +
                               " --epochs 1 --seed 3 --out-dir " + dir);
    CHECK(rc == 0);
    CHECK_FALSE(slurp(dir + "/checkpoint.bin").empty());
    auto lines = read_lines(dir + "/loss_trace.csv");
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "epoch,loss,task_term,kl_term");
}

TEST_CASE("usage errors exit with code 2") {
    REQUIRE_FALSE(cli_path().empty());
    const std::string dir = fresh_dir("cli_usage");
    CHECK(run_command(cli_path() + " train --out-dir " + dir) == 2);
    CHECK(run_command(cli_path() + " detect --synthetic table8") == 2);
    CHECK(run_command(cli_path() + " densities --pair 10,10 --out-dir " + dir) ==
          2);
    CHECK(run_command(cli_path() + " no-such-command") == 2);
}

TEST_CASE("missing checkpoint file is a runtime failure") {
    REQUIRE_FALSE(cli_path().empty());
    const std::string dir = fresh_dir("cli_missing");
    CHECK(run_command(cli_path() + " detect --checkpoint " + dir +
                      "/nope.bin" + kTinyDetect + " --out-dir " + dir) == 1);
}

TEST_CASE("identical seeds give byte-identical artifacts") {
    REQUIRE_FALSE(cli_path().empty());
    const std::string dir1 = fresh_dir("cli_det1");
    const std::string dir2 = fresh_dir("cli_det2");
    for (const std::string& dir : {dir1, dir2}) {
        REQUIRE(run_command(cli_path() + " train" + kTinyTrain +
                            " --epochs 2 --seed 11 --out-dir " + dir) == 0);
        REQUIRE(run_command(cli_path() + " detect --checkpoint " + dir +
                            "/checkpoint.bin" + kTinyDetect +
                            " --threads 1 --out-dir " + dir) == 0);
    }
    CHECK(slurp(dir1 + "/loss_trace.csv") == slurp(dir2 + "/loss_trace.csv"));
    CHECK(slurp(dir1 + "/checkpoint.bin") == slurp(dir2 + "/checkpoint.bin"));
    CHECK(slurp(dir1 + "/report.csv") == slurp(dir2 + "/report.csv"));
    CHECK(slurp(dir1 + "/summary.json") == slurp(dir2 + "/summary.json"));
}

TEST_CASE("detect emits the fixed schema plus ranking metrics") {
    REQUIRE_FALSE(cli_path().empty());
    const std::string dir = fresh_dir("cli_schema");
    REQUIRE(run_command(cli_path() + " train" + kTinyTrain +
                        " --epochs 2 --seed 21 --out-dir " + dir) == 0);
    REQUIRE(run_command(cli_path() + " detect --checkpoint " + dir +
                        "/checkpoint.bin" + kTinyDetect + " --out-dir " + dir) ==
            0);

    auto lines = read_lines(dir + "/report.csv");
    REQUIRE(lines.size() == 21);
    CHECK(lines[0] == "point_id,label,lambda,rht,arht,p_value,rejected");
    auto row = split(lines[1]);
    REQUIRE(row.size() == 7);
    CHECK(row[0] == "0");
    CHECK(row[1] == "0");
    CHECK((row[6] == "0" || row[6] == "1"));

    auto j = nlohmann::json::parse(slurp(dir + "/summary.json"));
    CHECK(j.contains("alpha"));
    CHECK(j.contains("m"));
    CHECK(j.contains("k_hat"));
    CHECK(j.contains("threshold"));
    CHECK(j.contains("rejections"));
    CHECK(j.contains("auroc"));
    CHECK(j.contains("aupr"));
    CHECK(j["m"].get<long>() == 20);

    // Tightening alpha cannot reject more.
    const std::string strict = fresh_dir("cli_strict");
    REQUIRE(run_command(cli_path() + " detect --checkpoint " + dir +
                        "/checkpoint.bin" + kTinyDetect +
                        " --alpha 0.01 --out-dir " + strict) == 0);
    auto js = nlohmann::json::parse(slurp(strict + "/summary.json"));
    CHECK(js["rejections"].get<long>() <= j["rejections"].get<long>());

    // Histogramming the report splits counts by the label column.
    REQUIRE(run_command(cli_path() + " densities --report " + dir +
                        "/report.csv --bins 8 --out-dir " + dir) == 0);
    auto hist = read_lines(dir + "/arht_hist.csv");
    REQUIRE(hist.size() == 9);
    CHECK(hist[0] == "bin_lo,bin_hi,count_in,count_ood");
    long total = 0;
    for (std::size_t i = 1; i < hist.size(); ++i) {
        auto cells = split(hist[i]);
        total += std::stol(cells[2]) + std::stol(cells[3]);
    }
    CHECK(total == 20);
}

TEST_CASE("config file applies under command-line flags") {
    REQUIRE_FALSE(cli_path().empty());
    const std::string dir = fresh_dir("cli_conf");
    const std::string conf = dir + "/run.conf";
    {
        std::ofstream out(conf);
        out << "# null-simulation settings\np = 10\nn1 = 25\nn2 = 25\n"
               "replicates = 3\nseed = 5\n";
    }
    REQUIRE(run_command(cli_path() + " simulate-null --config " + conf +
                        " --out-dir " + dir) == 0);
    CHECK(read_lines(dir + "/null_arht.csv").size() == 4);

    // Explicit flags beat the file.
    REQUIRE(run_command(cli_path() + " simulate-null --config " + conf +
                        " --replicates 6 --out-dir " + dir) == 0);
    CHECK(read_lines(dir + "/null_arht.csv").size() == 7);

    // Malformed or missing files are usage errors.
    const std::string bad = dir + "/bad.conf";
    {
        std::ofstream out(bad);
        out << "not a key value line\n";
    }
    CHECK(run_command(cli_path() + " simulate-null --config " + bad) == 2);
    CHECK(run_command(cli_path() + " simulate-null --config " + dir +
                      "/none.conf") == 2);
}

TEST_CASE("simulate-null with one replicate emits one row") {
    REQUIRE_FALSE(cli_path().empty());
    const std::string dir = fresh_dir("cli_null");
    REQUIRE(run_command(cli_path() +
                        " simulate-null --p 10 --n1 20 --n2 20 --replicates 1"
                        " --seed 9 --out-dir " +
                        dir) == 0);
    auto lines = read_lines(dir + "/null_arht.csv");
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "replicate,lambda,arht");
    auto j = nlohmann::json::parse(slurp(dir + "/null_summary.json"));
    CHECK(j["replicates"].get<long>() == 1);
}

TEST_CASE("densities emit a symmetric grid with a valid F column") {
    REQUIRE_FALSE(cli_path().empty());
    const std::string dir = fresh_dir("cli_den");
    REQUIRE(run_command(cli_path() +
                        " densities --pair 10,20 --grid-max 30 --grid-step 0.005"
                        " --out-dir " +
                        dir) == 0);
    auto lines = read_lines(dir + "/densities.csv");
    REQUIRE(lines.size() >= 3);
    CHECK(lines[0] == "x,normal,f_p10_n20");

    double integral = 0.0;
    double prev_x = 0.0, prev_f = 0.0;
    bool first = true;
    bool found_zero = false;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto cells = split(lines[i]);
        REQUIRE(cells.size() == 3);
        const double x = std::stod(cells[0]);
        const double normal = std::stod(cells[1]);
        const double f = std::stod(cells[2]);
        if (x == 0.0) {
            found_zero = true;
            CHECK(normal == doctest::Approx(0.39894228).epsilon(1e-7));
        }
        if (x <= 0.0) {
            CHECK(f == 0.0);
        } else {
            CHECK(f > 0.0);
        }
        if (!first) {
            integral += 0.5 * (f + prev_f) * (x - prev_x);
        }
        first = false;
        prev_x = x;
        prev_f = f;
    }
    CHECK(found_zero);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

}  // TEST_SUITE
