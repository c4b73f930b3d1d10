#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

#include "fuzzformer/report.hpp"
#include "support/temp_dir.hpp"

namespace fs = std::filesystem;
using fuzzformer::testing::TempDir;

namespace {

/// Runs the CLI with output captured to a log file; returns the exit status.
int cli(const std::string& args, const fs::path& log) {
    const std::string command = std::string(FUZZFORMER_CLI) + " " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("command line end to end") {
    TempDir dir;
    const auto d = dir.path();
    const auto log = d / "log.txt";

    REQUIRE(cli("synth --rows 700 --seed 5 -o " + q(d / "raw"), log) == 0);
    REQUIRE(fs::exists(d / "raw" / "manifest.json"));
    REQUIRE(cli("prepare --manifest " + q(d / "raw" / "manifest.json") + " --window 48 --horizon 4 -o " +
                    q(d / "prep"),
                log) == 0);
    for (const char* f : {"dataset.txt", "aligned.csv", "manifest.json", "config.json"}) CHECK(fs::exists(d / "prep" / f));

    const std::string train_args = "train --quiet --dataset " + q(d / "prep" / "dataset.txt") +
                                   " --hidden 8 --heads 2 --lstm_layers 1 --attention_layers 1 --rules 2 --ar_order 3"
                                   " --epochs 3 --batch_size 32 --seed 11 -o ";
    REQUIRE(cli(train_args + q(d / "run1"), log) == 0);
    REQUIRE(cli(train_args + q(d / "run2"), log) == 0);
    for (const char* f : {"checkpoint.ffc", "loss.csv", "loss.svg", "config.json", "summary.json"}) {
        CHECK(fs::exists(d / "run1" / f));
    }
    CHECK(slurp(d / "run1" / "checkpoint.ffc") == slurp(d / "run2" / "checkpoint.ffc"));
    const auto resolved = nlohmann::json::parse(slurp(d / "run1" / "config.json"));
    CHECK(resolved["window"] == 48);
    CHECK(resolved["input_dim"] == 2);
    CHECK(resolved["rules"] == 2);
    // header plus one line per epoch
    const auto loss = slurp(d / "run1" / "loss.csv");
    CHECK(std::count(loss.begin(), loss.end(), '\n') == 4);

    // a config file with a flag override
    std::ofstream(d / "run.json") << "{\"hidden\": 8, \"heads\": 2, \"lstm_layers\": 1, \"attention_layers\": 1, "
                                     "\"rules\": 2, \"ar_order\": 3, \"epochs\": 0}";
    REQUIRE(cli("train -q -c " + q(d / "run.json") + " --epochs 1 --dataset " + q(d / "prep" / "dataset.txt") +
                    " -o " + q(d / "run3"),
                log) == 0);
    CHECK(nlohmann::json::parse(slurp(d / "run3" / "config.json"))["epochs"] == 1);

    REQUIRE(cli("evaluate --checkpoint " + q(d / "run1" / "checkpoint.ffc") + " --dataset " +
                    q(d / "prep" / "dataset.txt") + " -o " + q(d / "eval1"),
                log) == 0);
    REQUIRE(cli("evaluate --checkpoint " + q(d / "run1" / "checkpoint.ffc") + " --dataset " +
                    q(d / "prep" / "dataset.txt") + " -o " + q(d / "eval2"),
                log) == 0);
    CHECK(slurp(d / "eval1" / "results.csv") == slurp(d / "eval2" / "results.csv"));
    const auto rows = fuzzformer::report::read_results(d / "eval1" / "results.csv");
    CHECK(rows.size() == 3);
    CHECK(fs::exists(d / "eval1" / "forecasts_test.csv"));
    CHECK(fs::exists(d / "eval1" / "config.json"));

    REQUIRE(cli("forecast --checkpoint " + q(d / "run1" / "checkpoint.ffc") + " --window " +
                    q(d / "prep" / "aligned.csv") + " -o " + q(d / "fc"),
                log) == 0);
    for (const char* f : {"forecast.csv", "rules.csv", "clusters.csv", "attention.csv", "bhattacharyya.csv",
                          "forecast.svg", "clusters.svg", "attention.svg", "config.json"}) {
        CHECK(fs::exists(d / "fc" / f));
    }

    REQUIRE(cli("baseline --method persistence --dataset " + q(d / "prep" / "dataset.txt") + " -o " + q(d / "pers"),
                log) == 0);
    REQUIRE(cli("baseline --method arima --order 2,1,1 --threads 2 --dataset " + q(d / "prep" / "dataset.txt") +
                    " -o " + q(d / "arima"),
                log) == 0);
    REQUIRE(cli("baseline --method lstm --hidden 4 --layers 1 --epochs 2 -q --dataset " +
                    q(d / "prep" / "dataset.txt") + " -o " + q(d / "lstm"),
                log) == 0);

    REQUIRE(cli("report " + q(d / "eval1" / "results.csv") + " " + q(d / "pers" / "results.csv") + " " +
                    q(d / "arima" / "results.csv") + " " + q(d / "lstm" / "results.csv") + " -o " +
                    q(d / "table.csv"),
                log) == 0);
    const auto table = slurp(d / "table.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 5);
    CHECK(slurp(log).find("48/4") != std::string::npos);
}

TEST_CASE("command line exit codes") {
    TempDir dir;
    const auto d = dir.path();
    const auto log = d / "log.txt";
    CHECK(cli("", log) == 1);
    CHECK(cli("train --no_such_flag 3", log) == 1);
    CHECK(cli("train --dataset " + q(d / "missing.txt") + " -o " + q(d / "out"), log) == 2);
    CHECK(cli("report " + q(d / "missing.csv"), log) == 2);
    CHECK(cli("baseline --method magic --dataset x -o " + q(d / "b"), log) == 2);  // dataset is read first

    REQUIRE(cli("synth --rows 200 -o " + q(d / "raw"), log) == 0);
    REQUIRE(cli("prepare --manifest " + q(d / "raw" / "manifest.json") + " --window 16 --horizon 4 -o " +
                    q(d / "prep"),
                log) == 0);
    CHECK(cli("train --dataset " + q(d / "prep" / "dataset.txt") + " --hidden 10 --heads 4 -o " + q(d / "bad"), log) ==
          1);
    CHECK(cli("train --dataset " + q(d / "prep" / "dataset.txt") + " --hidden abc -o " + q(d / "bad"), log) == 1);
    CHECK(cli("baseline --method magic --dataset " + q(d / "prep" / "dataset.txt") + " -o " + q(d / "b"), log) == 1);
    // a learning rate this large overflows the parameters within a few steps
    CHECK(cli("train -q --dataset " + q(d / "prep" / "dataset.txt") +
                  " --hidden 4 --heads 1 --lstm_layers 1 --attention_layers 1 --rules 2 --ar_order 2"
                  " --epochs 50 --learning_rate 1e300 -o " + q(d / "nan"),
              log) == 3);
    CHECK(slurp(log).find("epoch") != std::string::npos);

    // windows too short for the long-AR stage are reported and left out
    CHECK(cli("baseline --method arima --order 2,1,1 --dataset " + q(d / "prep" / "dataset.txt") + " -o " +
                  q(d / "short"),
              log) == 0);
    CHECK(slurp(log).find("could not be fitted") != std::string::npos);
    CHECK(fuzzformer::report::read_results(d / "short" / "results.csv").empty());

    std::ofstream(d / "bad.csv") << "method,config,setting,split,rmse\nA,,16/4,holdout,0.1\n";
    CHECK(cli("report " + q(d / "bad.csv"), log) == 2);
}
