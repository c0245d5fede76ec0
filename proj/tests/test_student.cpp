#include "adatrack/student.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "adatrack/rng.hpp"
#include "oracles.hpp"

namespace adatrack {
namespace {

Architecture tiny_arch(bool recurrent) {
    Architecture arch;
    arch.patch = 8;
    arch.convs = {{1, 2, 2, 2}, {2, 2, 2, 2}};
    arch.dense = {8, 6};
    arch.recurrent = recurrent;
    return arch;
}

State random_state(int res, Rng& rng) {
    State s;
    s.resolution = res;
    s.patch_prev.resize(static_cast<std::size_t>(res) * res);
    s.patch_cur.resize(static_cast<std::size_t>(res) * res);
    for (double& v : s.patch_prev) v = rng.uniform();
    for (double& v : s.patch_cur) v = rng.uniform();
    return s;
}

// Random trajectory constants for a gradcheck; the teacher targets keep a
// margin from the initial action means so the L1 term stays off its kink.
TrajectoryLossSpec random_spec(const Architecture& arch, int steps, double w_pi, double w_v,
                               double w_kd, Rng& rng) {
    TrajectoryLossSpec spec;
    spec.sigma = 0.05;
    spec.weight_policy = w_pi;
    spec.weight_value = w_v;
    spec.weight_distill = w_kd;
    for (int i = 0; i < steps; ++i) {
        spec.states.push_back(random_state(arch.patch, rng));
        std::array<double, 4> raw{};
        std::array<double, 4> teacher{};
        for (int d = 0; d < 4; ++d) {
            raw[static_cast<std::size_t>(d)] = rng.uniform(-0.15, 0.15);
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            teacher[static_cast<std::size_t>(d)] = sign * rng.uniform(0.3, 1.0);
        }
        spec.action_raw.push_back(raw);
        spec.teacher_actions.push_back(teacher);
        spec.advantages.push_back(rng.uniform(-1.0, 1.0));
        spec.returns.push_back(rng.uniform(-1.0, 1.0));
        spec.masks.push_back(rng.uniform() < 0.7 ? 1.0 : 0.0);
    }
    return spec;
}

StudentParams perturbed_params(const Architecture& arch, std::uint64_t seed) {
    StudentParams p = init_params(arch, seed);
    Rng rng(derive_seed(seed, "perturb"));
    for (double& v : p.theta) v += rng.uniform(-0.05, 0.05);
    return p;
}

void expect_gradient_matches_fd(const StudentParams& params, const TrajectoryLossSpec& spec,
                                double tol) {
    const TrajectoryGradient g = gradient(params, spec);
    auto loss_fn = [&](const std::vector<double>& theta) {
        StudentParams p = params;
        p.theta = theta;
        return trajectory_loss(p, spec);
    };
    const std::vector<double> fd =
        testing::finite_difference_gradient(loss_fn, params.theta, 1e-5);
    double worst = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
        worst = std::max(worst, testing::relative_error(g.grad[i], fd[i]));
    }
    EXPECT_LT(worst, tol);
}

TEST(ForwardTest, ZeroInitializedActionHeadHoldsStill) {
    const Architecture arch = tiny_arch(false);
    const StudentParams p = init_params(arch, 1);
    Rng rng(2);
    for (int i = 0; i < 5; ++i) {
        const State s = random_state(arch.patch, rng);
        const StudentOutput out = forward(p, s, Memory{});
        for (double m : out.mu) EXPECT_DOUBLE_EQ(m, 0.0);
        EXPECT_TRUE(std::isfinite(out.value));
    }
}

TEST(ForwardTest, DeterministicAndBounded) {
    const Architecture arch = tiny_arch(true);
    const StudentParams p = perturbed_params(arch, 3);
    Rng rng(4);
    const State s = random_state(arch.patch, rng);
    const Memory m0 = initial_memory(arch);
    const StudentOutput a = forward(p, s, m0);
    const StudentOutput b = forward(p, s, m0);
    EXPECT_EQ(a.mu, b.mu);
    EXPECT_DOUBLE_EQ(a.value, b.value);
    EXPECT_EQ(a.memory.h, b.memory.h);
    for (double m : a.mu) {
        EXPECT_GE(m, -1.0);
        EXPECT_LE(m, 1.0);
    }
}

TEST(ForwardTest, MemoryIgnoredWhenRecurrenceOff) {
    const Architecture arch = tiny_arch(false);
    const StudentParams p = perturbed_params(arch, 5);
    Rng rng(6);
    const State s = random_state(arch.patch, rng);
    Memory junk;
    junk.h = {3.0, -2.0, 1.0};
    const StudentOutput a = forward(p, s, Memory{});
    const StudentOutput b = forward(p, s, junk);
    EXPECT_EQ(a.mu, b.mu);
    EXPECT_DOUBLE_EQ(a.value, b.value);
    EXPECT_TRUE(b.memory.h.empty());
}

TEST(ForwardTest, RejectsResolutionMismatch) {
    const Architecture arch = tiny_arch(false);
    const StudentParams p = init_params(arch, 7);
    Rng rng(8);
    const State s = random_state(16, rng);
    EXPECT_THROW(forward(p, s, Memory{}), std::invalid_argument);
}

TEST(ForwardTest, GoldenFixture) {
    // Frozen regression values, computed once from this implementation.
    const Architecture arch = tiny_arch(false);
    const StudentParams p = perturbed_params(arch, 2024);
    State s;
    s.resolution = 8;
    s.patch_prev.resize(64);
    s.patch_cur.resize(64);
    for (int i = 0; i < 64; ++i) {
        s.patch_prev[static_cast<std::size_t>(i)] = (i * 37 % 64) / 64.0;
        s.patch_cur[static_cast<std::size_t>(i)] = (i * 11 % 64) / 64.0;
    }
    const StudentOutput out = forward(p, s, Memory{});
    EXPECT_NEAR(out.mu[0], -0.01804956167587592, 1e-15);
    EXPECT_NEAR(out.mu[1], -0.035395984487050343, 1e-15);
    EXPECT_NEAR(out.mu[2], 0.0065742452375863215, 1e-15);
    EXPECT_NEAR(out.mu[3], 0.042752440257509579, 1e-15);
    EXPECT_NEAR(out.value, -0.0037234882693666718, 1e-15);
}

TEST(SampleActionTest, DegenerateSigmaReturnsMean) {
    Rng rng(9);
    const std::array<double, 4> mu = {0.2, -0.3, 0.05, 0.7};
    const Action a = sample_action(mu, 1e-12, rng);
    EXPECT_NEAR(a.dx, 0.2, 1e-9);
    EXPECT_NEAR(a.dy, -0.3, 1e-9);
    EXPECT_NEAR(a.dw, 0.05, 1e-9);
    EXPECT_NEAR(a.dh, 0.7, 1e-9);
}

TEST(SampleActionTest, AlwaysClamped) {
    Rng rng(10);
    const std::array<double, 4> mu = {1.0, 1.0, 1.0, 1.0};
    for (int i = 0; i < 1000; ++i) {
        const Action a = sample_action(mu, 0.5, rng);
        for (double v : a.to_array()) {
            EXPECT_GE(v, -1.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(SampleActionTest, EmpiricalStdMatchesSigma) {
    Rng rng(11);
    const std::array<double, 4> mu = {0, 0, 0, 0};
    const double sigma = 0.05;
    std::array<double, 4> sum{}, sumsq{};
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const std::array<double, 4> raw = sample_action_raw(mu, sigma, rng);
        for (int d = 0; d < 4; ++d) {
            sum[static_cast<std::size_t>(d)] += raw[static_cast<std::size_t>(d)];
            sumsq[static_cast<std::size_t>(d)] +=
                raw[static_cast<std::size_t>(d)] * raw[static_cast<std::size_t>(d)];
        }
    }
    for (int d = 0; d < 4; ++d) {
        const double mean = sum[static_cast<std::size_t>(d)] / n;
        const double var = sumsq[static_cast<std::size_t>(d)] / n - mean * mean;
        EXPECT_NEAR(std::sqrt(var), sigma, 0.05 * sigma);
    }
}

TEST(GradientTest, EmptyTrajectoryGivesZeroGradient) {
    const Architecture arch = tiny_arch(false);
    const StudentParams p = perturbed_params(arch, 12);
    TrajectoryLossSpec spec;
    spec.weight_policy = 1.0;
    spec.weight_value = 1.0;
    spec.weight_distill = 1.0;
    const TrajectoryGradient g = gradient(p, spec);
    EXPECT_DOUBLE_EQ(g.loss, 0.0);
    for (double v : g.grad) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(GradientTest, PolicyTermMatchesFiniteDifferences) {
    const Architecture arch = tiny_arch(false);
    const StudentParams p = perturbed_params(arch, 13);
    Rng rng(14);
    const TrajectoryLossSpec spec = random_spec(arch, 4, 1.0, 0.0, 0.0, rng);
    expect_gradient_matches_fd(p, spec, 1e-4);
}

TEST(GradientTest, ValueTermMatchesFiniteDifferences) {
    const Architecture arch = tiny_arch(false);
    const StudentParams p = perturbed_params(arch, 15);
    Rng rng(16);
    const TrajectoryLossSpec spec = random_spec(arch, 4, 0.0, 1.0, 0.0, rng);
    expect_gradient_matches_fd(p, spec, 1e-4);
}

TEST(GradientTest, DistillTermMatchesFiniteDifferences) {
    const Architecture arch = tiny_arch(false);
    const StudentParams p = perturbed_params(arch, 17);
    Rng rng(18);
    const TrajectoryLossSpec spec = random_spec(arch, 4, 0.0, 0.0, 1.0, rng);
    expect_gradient_matches_fd(p, spec, 1e-4);
}

TEST(GradientTest, CombinedLossMatchesFiniteDifferences) {
    const Architecture arch = tiny_arch(false);
    const StudentParams p = perturbed_params(arch, 19);
    Rng rng(20);
    const TrajectoryLossSpec spec = random_spec(arch, 6, 1.0, 1.0, 1.0, rng);
    expect_gradient_matches_fd(p, spec, 1e-4);
}

TEST(GradientTest, RecurrentBackpropThroughTime) {
    const Architecture arch = tiny_arch(true);
    const StudentParams p = perturbed_params(arch, 21);
    Rng rng(22);
    const TrajectoryLossSpec spec = random_spec(arch, 5, 1.0, 1.0, 1.0, rng);
    expect_gradient_matches_fd(p, spec, 1e-4);
}

TEST(GradientTest, DoublingWeightsDoublesGradient) {
    const Architecture arch = tiny_arch(false);
    const StudentParams p = perturbed_params(arch, 23);
    Rng rng(24);
    TrajectoryLossSpec spec = random_spec(arch, 3, 1.0, 1.0, 1.0, rng);
    const TrajectoryGradient g1 = gradient(p, spec);
    spec.weight_policy *= 2.0;
    spec.weight_value *= 2.0;
    spec.weight_distill *= 2.0;
    const TrajectoryGradient g2 = gradient(p, spec);
    EXPECT_NEAR(g2.loss, 2.0 * g1.loss, 1e-9);
    for (std::size_t i = 0; i < g1.grad.size(); ++i) {
        EXPECT_NEAR(g2.grad[i], 2.0 * g1.grad[i], 1e-9);
    }
}

TEST(AdamTest, ZeroGradientLeavesFreshParamsUnchanged) {
    const Architecture arch = tiny_arch(false);
    StudentParams p = perturbed_params(arch, 25);
    const std::vector<double> before = p.theta;
    AdamState adam = init_adam(p);
    adam_step(p, std::vector<double>(p.theta.size(), 0.0), adam, 1e-3, 1e-3);
    EXPECT_EQ(p.theta, before);
    EXPECT_EQ(adam.step, 1u);
}

TEST(AdamTest, UnitGradientStepDisplacesByLearningRate) {
    const Architecture arch = tiny_arch(false);
    StudentParams p = perturbed_params(arch, 26);
    const std::vector<double> before = p.theta;
    AdamState adam = init_adam(p);
    const double lr_main = 7.5e-7, lr_vh = 1e-5;
    adam_step(p, std::vector<double>(p.theta.size(), 1.0), adam, lr_main, lr_vh);
    const auto [vh_begin, vh_end] = value_head_range(arch);
    for (int i = 0; i < static_cast<int>(p.theta.size()); ++i) {
        const double lr = (i >= vh_begin && i < vh_end) ? lr_vh : lr_main;
        EXPECT_NEAR(before[static_cast<std::size_t>(i)] - p.theta[static_cast<std::size_t>(i)],
                    lr, lr * 1e-6);
    }
}

TEST(AdamTest, RejectsNonFiniteGradient) {
    const Architecture arch = tiny_arch(false);
    StudentParams p = init_params(arch, 27);
    AdamState adam = init_adam(p);
    std::vector<double> grad(p.theta.size(), 0.0);
    grad[3] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(adam_step(p, grad, adam, 1e-3, 1e-3), std::invalid_argument);
}

TEST(CheckpointTest, RoundTripIsLossless) {
    const Architecture arch = tiny_arch(true);
    StudentParams p = perturbed_params(arch, 28);
    AdamState adam = init_adam(p);
    Rng rng(29);
    std::vector<double> grad(p.theta.size());
    for (double& g : grad) g = rng.gaussian();
    adam_step(p, grad, adam, 1e-3, 2e-3);

    Checkpoint ckpt{p, adam, 0xdeadbeefcafef00dULL, 42};
    const std::string path =
        (std::filesystem::temp_directory_path() / "adatrack_ckpt_test.bin").string();
    save_checkpoint(path, ckpt);
    const Checkpoint loaded = load_checkpoint(path);

    EXPECT_EQ(loaded.params.arch, p.arch);
    EXPECT_EQ(loaded.params.theta, p.theta);
    EXPECT_EQ(loaded.adam.step, adam.step);
    EXPECT_EQ(loaded.adam.m, adam.m);
    EXPECT_EQ(loaded.adam.v, adam.v);
    EXPECT_EQ(loaded.config_hash, ckpt.config_hash);
    EXPECT_EQ(loaded.master_seed, ckpt.master_seed);

    // Save-load-save reproduces the same bytes.
    const std::string path2 =
        (std::filesystem::temp_directory_path() / "adatrack_ckpt_test2.bin").string();
    save_checkpoint(path2, loaded);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)),
                              std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(b)),
                              std::istreambuf_iterator<char>());
    EXPECT_EQ(bytes_a, bytes_b);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST(CheckpointTest, RejectsGarbage) {
    const std::string path =
        (std::filesystem::temp_directory_path() / "adatrack_ckpt_garbage.bin").string();
    std::ofstream os(path, std::ios::binary);
    os << "not a checkpoint";
    os.close();
    EXPECT_THROW(load_checkpoint(path), std::runtime_error);
    std::filesystem::remove(path);
}

TEST(ParamCountTest, MatchesHandArithmetic) {
    // convs: 2*(1*2*2)+2 = 10, 2*(2*2*2)+2 = 18; feature = 2*2*2*2 = 16;
    // dense: 8*16+8 = 136, 6*8+6 = 54; heads: 4*6+4 = 28, 6+1 = 7.
    EXPECT_EQ(param_count(tiny_arch(false)), 10 + 18 + 136 + 54 + 28 + 7);
    // the gated cell adds 2*(6*6 + 6*6 + 6) = 156
    EXPECT_EQ(param_count(tiny_arch(true)), 10 + 18 + 136 + 54 + 156 + 28 + 7);
}

}  // namespace
}  // namespace adatrack
