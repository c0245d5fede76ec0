#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adatrack/geometry.hpp"
#include "adatrack/rlcore.hpp"
#include "adatrack/rng.hpp"

namespace adatrack {

struct ConvLayerSpec {
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 2;
    int stride = 2;

    bool operator==(const ConvLayerSpec&) const = default;
};

/// Network shape. Two context patches pass through a shared strided conv
/// stack (ReLU), the flattened features are concatenated and fed to a ReLU
/// dense stack, optionally a gated recurrent cell, then a tanh-squashed
/// action head and a linear value head.
struct Architecture {
    int patch = 32;
    std::vector<ConvLayerSpec> convs = {{1, 4, 4, 4}, {4, 8, 2, 2}};
    std::vector<int> dense = {48, 32};
    bool recurrent = false;

    void validate() const;
    std::vector<int> conv_dims() const;  // spatial side per conv output
    int conv_feature_dim() const;        // flattened per-patch feature size
    int feature_dim() const { return 2 * conv_feature_dim(); }
    int hidden_dim() const { return dense.back(); }

    bool operator==(const Architecture&) const = default;
};

/// Flat parameter vector plus its immutable shape descriptor.
struct StudentParams {
    Architecture arch;
    std::vector<double> theta;

    int size() const { return static_cast<int>(theta.size()); }
};

/// Recurrent hidden state; empty when recurrence is disabled.
struct Memory {
    std::vector<double> h;
};

struct StudentOutput {
    std::array<double, 4> mu{};  // action mean, each component in [-1,1]
    double value = 0.0;
    Memory memory;
};

int param_count(const Architecture& arch);

/// [begin, end) range of the value-head block inside the flat vector.
std::pair<int, int> value_head_range(const Architecture& arch);

/// Orthogonal weights, zero biases; the action head's final layer is fully
/// zeroed so the initial policy is the identity ("stay") action.
StudentParams init_params(const Architecture& arch, std::uint64_t seed);

Memory initial_memory(const Architecture& arch);

StudentOutput forward(const StudentParams& params, const State& state, const Memory& memory);

std::array<double, 4> sample_action_raw(const std::array<double, 4>& mu, double sigma, Rng& rng);

/// Gaussian exploration sample, clamped to the action space.
Action sample_action(const std::array<double, 4>& mu, double sigma, Rng& rng);

struct TrajectoryGradient {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Loss of `spec` under `params`: replays the trajectory, recomputing
/// mu_i(theta) and v_i(theta) against the spec's frozen constants.
double trajectory_loss(const StudentParams& params, const TrajectoryLossSpec& spec);

/// Exact dLoss/dtheta for trajectory_loss, backpropagated through time when
/// the architecture is recurrent. Throws if the loss or any gradient entry
/// is non-finite.
TrajectoryGradient gradient(const StudentParams& params, const TrajectoryLossSpec& spec);

struct AdamState {
    std::uint64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState init_adam(const StudentParams& params);

/// Standard Adam update. Parameters inside the value-head block use
/// lr_value_head, all others lr_main. Rejects non-finite gradients.
void adam_step(StudentParams& params, const std::vector<double>& grad, AdamState& state,
               double lr_main, double lr_value_head);

struct Checkpoint {
    StudentParams params;
    AdamState adam;
    std::uint64_t config_hash = 0;
    std::uint64_t master_seed = 0;
};

/// Binary little-endian layout, documented in the README; load(save(x))
/// reproduces every byte of state.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace adatrack
