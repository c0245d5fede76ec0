// Integration tests driving the installed CLI binary end to end.
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;

const char* cli_path() { return ADATRACK_CLI_PATH; }

int run(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

std::string dataset_fingerprint(const fs::path& root) {
    std::string all;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
        all += f.lexically_relative(root).string();
        all += "\0";
        all += slurp(f);
    }
    return all;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() / "adatrack_cli_test";
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    std::string path(const std::string& rel) { return (root_ / rel).string(); }
    fs::path root_;
};

TEST_F(CliTest, GenDataWritesCountsAndManifest) {
    ASSERT_EQ(run("gen-data --out " + path("ds") +
                  " --domain drone-like --train 3 --val 1 --test 2 --frames 16 --seed 7"),
              0);
    EXPECT_TRUE(fs::exists(root_ / "ds" / "manifest.json"));
    int train = 0, val = 0, test = 0;
    for (const auto& e : fs::directory_iterator(root_ / "ds" / "train")) train += e.is_directory();
    for (const auto& e : fs::directory_iterator(root_ / "ds" / "val")) val += e.is_directory();
    for (const auto& e : fs::directory_iterator(root_ / "ds" / "test")) test += e.is_directory();
    EXPECT_EQ(train, 3);
    EXPECT_EQ(val, 1);
    EXPECT_EQ(test, 2);
    EXPECT_TRUE(fs::exists(root_ / "ds" / "train" / "train-000" / "000001.pgm"));
    EXPECT_TRUE(fs::exists(root_ / "ds" / "train" / "train-000" / "groundtruth.txt"));
    EXPECT_TRUE(fs::exists(root_ / "ds" / "train" / "train-000" / "weaklabels.txt"));
}

TEST_F(CliTest, GenDataRefusesOverwriteWithoutForceAndIsDeterministic) {
    const std::string flags =
        " --domain source --train 2 --val 1 --test 1 --frames 12 --seed 3";
    ASSERT_EQ(run("gen-data --out " + path("ds") + flags), 0);
    const std::string first = dataset_fingerprint(root_ / "ds");
    EXPECT_NE(run("gen-data --out " + path("ds") + flags), 0);  // refuses without --force
    ASSERT_EQ(run("gen-data --out " + path("ds") + flags + " --force"), 0);
    EXPECT_EQ(dataset_fingerprint(root_ / "ds"), first);  // identical bytes
}

TEST_F(CliTest, AdaptEvalPlotPipeline) {
    ASSERT_EQ(run("gen-data --out " + path("ds") +
                  " --domain source --train 2 --val 1 --test 1 --frames 40 --seed 5"),
              0);
    std::ofstream cfg(root_ / "exp.cfg");
    cfg << "domain = source\nlr_main = 1e-3\nlr_value_head = 2e-3\ngamma = 0.9\n"
           "max_iterations = 24\neval_every = 8\nchunk_len = 16\nseed = 9\nworkers = 4\n";
    cfg.close();

    ASSERT_EQ(run("adapt --config " + path("exp.cfg") + " --data " + path("ds") + " --out " +
                  path("run") + " --from-scratch"),
              0);
    EXPECT_TRUE(fs::exists(root_ / "run" / "best.ckpt"));
    EXPECT_TRUE(fs::exists(root_ / "run" / "final.ckpt"));
    EXPECT_TRUE(fs::exists(root_ / "run" / "train_log.csv"));

    ASSERT_EQ(run("eval --data " + path("ds") + " --split test --checkpoint " +
                  path("run/best.ckpt") + " --out " + path("eval")),
              0);
    EXPECT_TRUE(fs::exists(root_ / "eval" / "results.csv"));
    EXPECT_TRUE(fs::exists(root_ / "eval" / "success_curve.csv"));
    EXPECT_TRUE(fs::exists(root_ / "eval" / "precision_curve.csv"));
    const std::string results = slurp(root_ / "eval" / "results.csv");
    EXPECT_NE(results.find("# config_hash="), std::string::npos);
    EXPECT_NE(results.find("aggregate,"), std::string::npos);

    ASSERT_EQ(run("plot --log " + path("run/train_log.csv") + " --out " + path("ss.svg")), 0);
    const std::string svg = slurp(root_ / "ss.svg");
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("config_hash="), std::string::npos);

    ASSERT_EQ(run("plot --curve " + path("eval/success_curve.csv") + " --out " +
                  path("curve.svg")),
              0);
    EXPECT_TRUE(fs::exists(root_ / "curve.svg"));
}

TEST_F(CliTest, OracleTrackerScoresPerfectly) {
    ASSERT_EQ(run("gen-data --out " + path("ds") +
                  " --domain underwater-like --train 1 --val 1 --test 2 --frames 24 --seed 2"),
              0);
    ASSERT_EQ(run("eval --data " + path("ds") +
                  " --split test --tracker oracle --out " + path("eval")),
              0);
    const std::string results = slurp(root_ / "eval" / "results.csv");
    EXPECT_NE(results.find("aggregate,1,1,"), std::string::npos);
}

TEST_F(CliTest, ErrorPathsReturnNonZero) {
    // config validation failures are fatal before any work starts
    std::ofstream bad(root_ / "bad.cfg");
    bad << "sgima = 0.05\n";
    bad.close();
    EXPECT_NE(run("adapt --config " + path("bad.cfg") + " --data " + path("nowhere") +
                  " --out " + path("out")),
              0);
    // missing checkpoint is fatal
    ASSERT_EQ(run("gen-data --out " + path("ds") +
                  " --domain source --train 1 --val 1 --test 1 --frames 12 --seed 2"),
              0);
    EXPECT_NE(run("eval --data " + path("ds") + " --split test --checkpoint " +
                  path("missing.ckpt") + " --out " + path("eval")),
              0);
    // plot with an empty CSV fails and writes nothing
    std::ofstream empty(root_ / "empty.csv");
    empty << "# config_hash=0 seed=0\nthreshold,fraction\n";
    empty.close();
    EXPECT_NE(run("plot --curve " + path("empty.csv") + " --out " + path("never.svg")), 0);
    EXPECT_FALSE(fs::exists(root_ / "never.svg"));
    // unknown domain preset
    EXPECT_NE(run("gen-data --out " + path("ds2") + " --domain marslike"), 0);
}

TEST_F(CliTest, SparseGtOneMatchesDense) {
    ASSERT_EQ(run("gen-data --out " + path("ds") +
                  " --domain source --train 1 --val 1 --test 2 --frames 24 --seed 4"),
              0);
    ASSERT_EQ(run("eval --data " + path("ds") + " --split test --tracker oracle --out " +
                  path("dense") + " --sparse-gt 1"),
              0);
    ASSERT_EQ(run("eval --data " + path("ds") + " --split test --tracker oracle --out " +
                  path("sparse8") + " --sparse-gt 8"),
              0);
    // identical metric columns apart from fps timing
    auto strip_fps = [](const fs::path& p) {
        std::ifstream is(p);
        std::string line, out;
        while (std::getline(is, line)) {
            const auto last = line.rfind(',');
            out += line.substr(0, last) + "\n";
        }
        return out;
    };
    EXPECT_EQ(strip_fps(root_ / "dense" / "results.csv").find("aggregate,1,1"),
              strip_fps(root_ / "sparse8" / "results.csv").find("aggregate,1,1"));
}

}  // namespace
