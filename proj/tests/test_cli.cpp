#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aidp/evaluation.hpp"

using namespace aidp;
namespace fs = std::filesystem;

namespace {

const std::string kCli = AIDP_CLI_PATH;

int run_cli(const std::string& args) {
    std::string cmd = kCli + " " + args + " >> cli_tmp/stdout.txt 2>> cli_tmp/stderr.txt";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small, fast shared setup for every CLI test.
const std::string kTinyFlags =
    " dataset.train_n=96 dataset.test_n=48 dataset.size=12 model.widths=4,8 "
    "model.tap_low=0 model.tap_high=1 train.epochs=1 train.batch=32 "
    "attack.iters=2 train_attack.iters=2 purify.iters=2 eval.batch=32";

struct CliFixture {
    CliFixture() {
        fs::create_directories("cli_tmp");
    }
};

}  // namespace

TEST_CASE("cli rejects unknown keys and bad values with exit code 2") {
    CliFixture fix;
    CHECK(run_cli("evaluate --no.such.key=1") == 2);
    CHECK(run_cli("train-classifier --attack.epsilon=1/0") == 2);
    CHECK(run_cli("bogus-subcommand") == 2);
    CHECK(run_cli("evaluate" + kTinyFlags) == 2);  // missing in.classifier
}

TEST_CASE("cli reports io failures with exit code 3") {
    CliFixture fix;
    CHECK(run_cli("evaluate --in.classifier=cli_tmp/absent.aidp" + kTinyFlags) == 3);
    CHECK(run_cli("report --in.report=cli_tmp/absent.json") == 3);
}

TEST_CASE("cli pipeline: train, purify, evaluate") {
    CliFixture fix;
    REQUIRE(run_cli("train-classifier --out.model=cli_tmp/clf.aidp --seed=3" + kTinyFlags) == 0);
    REQUIRE(fs::exists("cli_tmp/clf.aidp"));

    // training the purifier must not rewrite the classifier file
    std::string clf_before = slurp("cli_tmp/clf.aidp");
    REQUIRE(run_cli("train-purifier --in.classifier=cli_tmp/clf.aidp "
                    "--out.model=cli_tmp/disc.aidp --seed=4" +
                    kTinyFlags) == 0);
    CHECK(slurp("cli_tmp/clf.aidp") == clf_before);

    REQUIRE(run_cli("evaluate --in.classifier=cli_tmp/clf.aidp --in.disc=cli_tmp/disc.aidp "
                    "--out.report=cli_tmp/report.json --out.csv=cli_tmp/report.csv "
                    "--eval.attacks=pgd,fgsm --seed=5" +
                    kTinyFlags) == 0);
    EvalReport report = read_report("cli_tmp/report.json");
    REQUIRE(report.attacks.size() == 2);
    CHECK(report.worst_accuracy ==
          std::min(report.attacks[0].accuracy, report.attacks[1].accuracy));
    CHECK(!report.timing.has_value());
    CHECK(!report.config_echo.empty());

    // the report subcommand reads what evaluate wrote
    CHECK(run_cli("report --in.report=cli_tmp/report.json") == 0);
}

TEST_CASE("cli attack subcommand writes a loadable batch") {
    CliFixture fix;
    REQUIRE(run_cli("train-classifier --out.model=cli_tmp/clf2.aidp --seed=8" + kTinyFlags) == 0);
    REQUIRE(run_cli("attack --in.classifier=cli_tmp/clf2.aidp --attack.kind=fgsm "
                    "--out.batch=cli_tmp/batch.aidb --eval.n=16" +
                    kTinyFlags) == 0);
    AdversarialBatch batch = load_adversarial_batch("cli_tmp/batch.aidb");
    CHECK(batch.labels.size() == 16);
    CHECK(batch.x_adv.extent(0) == 16);
}

TEST_CASE("cli sweep emits one report per value and a combined csv") {
    CliFixture fix;
    REQUIRE(run_cli("train-classifier --out.model=cli_tmp/clf3.aidp --seed=9" + kTinyFlags) == 0);
    REQUIRE(run_cli("train-purifier --in.classifier=cli_tmp/clf3.aidp "
                    "--out.model=cli_tmp/disc3.aidp --seed=10" +
                    kTinyFlags) == 0);
    REQUIRE(run_cli("sweep --axis purify.epsilon --values 4/255,8/255 "
                    "--in.classifier=cli_tmp/clf3.aidp --in.disc=cli_tmp/disc3.aidp "
                    "--out.report=cli_tmp/sw.json --out.csv=cli_tmp/sw.csv "
                    "--eval.attacks=pgd,fgsm --eval.n=24 --seed=11" +
                    kTinyFlags) == 0);
    CHECK(fs::exists("cli_tmp/sw-0.json"));
    CHECK(fs::exists("cli_tmp/sw-1.json"));
    std::ifstream csv("cli_tmp/sw.csv");
    std::string line;
    int rows = 0;
    while (std::getline(csv, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 1 + 2 * 2);  // header + |values| * |attacks|
}

TEST_CASE("cli keys lists the config surface") {
    CliFixture fix;
    fs::remove("cli_tmp/stdout.txt");
    CHECK(run_cli("keys") == 0);
    std::string out = slurp("cli_tmp/stdout.txt");
    CHECK(out.find("attack.epsilon") != std::string::npos);
    CHECK(out.find("purify.iters") != std::string::npos);
}
