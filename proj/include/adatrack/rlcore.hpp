#pragma once

#include <array>
#include <optional>
#include <set>
#include <vector>

#include "adatrack/geometry.hpp"

namespace adatrack {

enum class WeakSupKind { kIoU, kNormDist };

/// Scalar 0-1 evaluation of a predicted box against stored references,
/// available only at scheduled steps. The schedule is either "every k-th
/// step" or an explicit step set (e.g. read from weaklabels.txt).
class WeakSupFn {
public:
    static WeakSupFn every_k(WeakSupKind kind, int k, std::vector<BBox> reference);
    static WeakSupFn at_steps(WeakSupKind kind, std::set<int> steps, std::vector<BBox> reference);

    /// Score of `b` at step `t`, or nullopt when the schedule leaves t
    /// unlabeled. t must index into the reference sequence.
    std::optional<double> score(int t, const BBox& b) const;

    bool defined_at(int t) const;
    bool defined_anywhere(int num_steps) const;

    WeakSupKind kind() const { return kind_; }
    int num_reference() const { return static_cast<int>(reference_.size()); }

private:
    WeakSupFn() = default;
    WeakSupKind kind_ = WeakSupKind::kIoU;
    int every_k_ = 1;
    bool explicit_steps_ = false;
    std::set<int> steps_;
    std::vector<BBox> reference_;
};

/// Per-step trajectory data collected during one interaction.
/// All sequences share the same length.
struct InteractionRecord {
    std::vector<State> states;
    std::vector<std::array<double, 4>> action_raw;   // pre-clamp sample (the density argument)
    std::vector<Action> action_env;                  // clamped action applied to the box
    std::vector<std::array<double, 4>> action_mean;  // mu_i
    std::vector<double> values;                      // v_i
    std::vector<double> rewards;                     // r_i
    std::vector<BBox> boxes;                         // b_i after applying action_env
    std::vector<BBox> teacher_boxes;
    std::vector<Action> teacher_actions;
    std::vector<char> masks;  // m_i in {0,1}
    std::vector<std::optional<double>> weak_scores;

    int size() const { return static_cast<int>(states.size()); }
    bool consistent() const;
};

/// Floors z in [0,1] to the 0.05 grid and maps it affinely onto [-1,1].
/// Grid arithmetic is done in integers so values like 0.7 stored as
/// 0.69999999999999996 still land on their intended grid cell.
double nu(double z);

/// Reward from an optional weak score: 0 when undefined, nu(score) when
/// score >= 0.5, -1 otherwise.
double reward(std::optional<double> weak_score);

enum class ReturnDirection {
    kFuture,  // R_i = sum_{k=i}^{end} gamma^{k-i} r_k
    kPast,    // R_i = sum_{k=1}^{i}   gamma^{k-1} r_k (ablation switch)
};

std::vector<double> returns(const std::vector<double>& rewards, double gamma,
                            ReturnDirection dir = ReturnDirection::kFuture);

/// A_i = r_i + gamma * v(s_{i+1}) - v(s_i), with v = 0 past the episode end.
std::vector<double> advantages(const InteractionRecord& rec, double gamma);

/// Log-density of a diagonal Gaussian N(mu, sigma^2 I) at `x`.
double gaussian_log_density(const std::array<double, 4>& x, const std::array<double, 4>& mu,
                            double sigma);

/// -sum_i logpi(a_i | mu_i, sigma) * A_i with A_i = r_i + gamma*values_next[i] - v_i.
/// The advantage is a constant here; no gradient is taken through it.
double policy_loss(const InteractionRecord& rec, const std::vector<double>& values_next,
                   double sigma, double gamma);

/// sum_i 0.5 * (R_i - v_i)^2 with R_i from returns().
double value_loss(const InteractionRecord& rec, double gamma,
                  ReturnDirection dir = ReturnDirection::kFuture);

/// 1 iff the teacher's reward is at least the student's. Ties favor the
/// teacher, which also covers the both-undefined (0, 0) case.
int distill_mask(double r_teacher, double r_student);

/// sum_i |a^T_i - mu_i|_1 * m_i.
double distill_loss(const InteractionRecord& rec);

/// Frozen view of one trajectory for differentiation: gradients flow only
/// through mu_i(theta) and v_i(theta); advantages, returns, sampled actions,
/// teacher actions and masks are constants captured from the record.
struct TrajectoryLossSpec {
    std::vector<State> states;
    std::vector<std::array<double, 4>> action_raw;
    std::vector<double> advantages;
    std::vector<double> returns;
    std::vector<std::array<double, 4>> teacher_actions;
    std::vector<double> masks;
    double sigma = 0.05;
    double weight_policy = 0.0;
    double weight_value = 0.0;
    double weight_distill = 0.0;

    int size() const { return static_cast<int>(states.size()); }
};

TrajectoryLossSpec make_loss_spec(const InteractionRecord& rec, double gamma, double sigma,
                                  double weight_policy, double weight_value, double weight_distill,
                                  ReturnDirection dir = ReturnDirection::kFuture);

/// Loss value for the spec given externally computed per-step outputs.
/// This is the single definition shared by the analytic gradient and any
/// numeric re-evaluation of the loss.
double loss_from_outputs(const TrajectoryLossSpec& spec,
                         const std::vector<std::array<double, 4>>& mu,
                         const std::vector<double>& values);

}  // namespace adatrack
