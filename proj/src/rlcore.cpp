#include "adatrack/rlcore.hpp"

#include <cmath>
#include <stdexcept>

namespace adatrack {

namespace {
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
}

WeakSupFn WeakSupFn::every_k(WeakSupKind kind, int k, std::vector<BBox> reference) {
    if (k < 1) throw std::invalid_argument("WeakSupFn: delay must be >= 1");
    WeakSupFn w;
    w.kind_ = kind;
    w.every_k_ = k;
    w.reference_ = std::move(reference);
    return w;
}

WeakSupFn WeakSupFn::at_steps(WeakSupKind kind, std::set<int> steps, std::vector<BBox> reference) {
    WeakSupFn w;
    w.kind_ = kind;
    w.explicit_steps_ = true;
    w.steps_ = std::move(steps);
    w.reference_ = std::move(reference);
    return w;
}

bool WeakSupFn::defined_at(int t) const {
    if (t < 0 || t >= static_cast<int>(reference_.size())) return false;
    if (explicit_steps_) return steps_.count(t) > 0;
    return t % every_k_ == 0;
}

bool WeakSupFn::defined_anywhere(int num_steps) const {
    for (int t = 0; t < num_steps; ++t) {
        if (defined_at(t)) return true;
    }
    return false;
}

std::optional<double> WeakSupFn::score(int t, const BBox& b) const {
    if (!defined_at(t)) return std::nullopt;
    const BBox& g = reference_[static_cast<std::size_t>(t)];
    switch (kind_) {
        case WeakSupKind::kIoU:
            return iou(b, g);
        case WeakSupKind::kNormDist:
            return norm_dist_score(b, g);
    }
    return std::nullopt;
}

bool InteractionRecord::consistent() const {
    const std::size_t n = states.size();
    return action_raw.size() == n && action_env.size() == n && action_mean.size() == n &&
           values.size() == n && rewards.size() == n && boxes.size() == n &&
           teacher_boxes.size() == n && teacher_actions.size() == n && masks.size() == n &&
           weak_scores.size() == n;
}

double nu(double z) {
    if (!(z >= 0.0 && z <= 1.0)) throw std::invalid_argument("nu: input must lie in [0,1]");
    // Index of the 0.05 cell: floor(z / 0.05) after snapping away binary
    // representation error at the grid boundaries.
    const long long micro = std::llround(z * 1e6);
    long long cell = micro / 50000;
    if (cell > 20) cell = 20;
    return static_cast<double>(cell - 10) / 10.0;
}

double reward(std::optional<double> weak_score) {
    if (!weak_score.has_value()) return 0.0;
    const double s = *weak_score;
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("reward: score must lie in [0,1]");
    if (s >= 0.5) return nu(s);
    return -1.0;
}

std::vector<double> returns(const std::vector<double>& rewards, double gamma,
                            ReturnDirection dir) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("returns: gamma in [0,1]");
    const int n = static_cast<int>(rewards.size());
    std::vector<double> out(rewards.size());
    if (dir == ReturnDirection::kFuture) {
        double acc = 0.0;
        for (int i = n - 1; i >= 0; --i) {
            acc = rewards[static_cast<std::size_t>(i)] + gamma * acc;
            out[static_cast<std::size_t>(i)] = acc;
        }
    } else {
        double acc = 0.0;
        double scale = 1.0;
        for (int i = 0; i < n; ++i) {
            acc += scale * rewards[static_cast<std::size_t>(i)];
            scale *= gamma;
            out[static_cast<std::size_t>(i)] = acc;
        }
    }
    return out;
}

std::vector<double> advantages(const InteractionRecord& rec, double gamma) {
    const int n = rec.size();
    std::vector<double> adv(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double v_next = (i + 1 < n) ? rec.values[static_cast<std::size_t>(i) + 1] : 0.0;
        adv[static_cast<std::size_t>(i)] =
            rec.rewards[static_cast<std::size_t>(i)] + gamma * v_next -
            rec.values[static_cast<std::size_t>(i)];
    }
    return adv;
}

double gaussian_log_density(const std::array<double, 4>& x, const std::array<double, 4>& mu,
                            double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_log_density: sigma must be > 0");
    double lp = 0.0;
    for (int d = 0; d < 4; ++d) {
        const double z = (x[static_cast<std::size_t>(d)] - mu[static_cast<std::size_t>(d)]) / sigma;
        lp += -0.5 * z * z - std::log(sigma) - 0.5 * std::log(kTwoPi);
    }
    if (!std::isfinite(lp)) throw std::runtime_error("gaussian_log_density: non-finite density");
    return lp;
}

double policy_loss(const InteractionRecord& rec, const std::vector<double>& values_next,
                   double sigma, double gamma) {
    const int n = rec.size();
    if (static_cast<int>(values_next.size()) != n) {
        throw std::invalid_argument("policy_loss: values_next size mismatch");
    }
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        const double adv = rec.rewards[k] + gamma * values_next[k] - rec.values[k];
        loss -= gaussian_log_density(rec.action_raw[k], rec.action_mean[k], sigma) * adv;
    }
    if (!std::isfinite(loss)) throw std::runtime_error("policy_loss: non-finite loss");
    return loss;
}

double value_loss(const InteractionRecord& rec, double gamma, ReturnDirection dir) {
    const std::vector<double> ret = returns(rec.rewards, gamma, dir);
    double loss = 0.0;
    for (std::size_t i = 0; i < ret.size(); ++i) {
        const double e = ret[i] - rec.values[i];
        loss += 0.5 * e * e;
    }
    return loss;
}

int distill_mask(double r_teacher, double r_student) { return r_teacher >= r_student ? 1 : 0; }

double distill_loss(const InteractionRecord& rec) {
    double loss = 0.0;
    for (int i = 0; i < rec.size(); ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        if (!rec.masks[k]) continue;
        const auto t = rec.teacher_actions[k].to_array();
        for (int d = 0; d < 4; ++d) {
            loss += std::abs(t[static_cast<std::size_t>(d)] -
                             rec.action_mean[k][static_cast<std::size_t>(d)]);
        }
    }
    return loss;
}

TrajectoryLossSpec make_loss_spec(const InteractionRecord& rec, double gamma, double sigma,
                                  double weight_policy, double weight_value, double weight_distill,
                                  ReturnDirection dir) {
    if (!rec.consistent()) throw std::invalid_argument("make_loss_spec: inconsistent record");
    TrajectoryLossSpec spec;
    spec.states = rec.states;
    spec.action_raw = rec.action_raw;
    spec.advantages = advantages(rec, gamma);
    spec.returns = returns(rec.rewards, gamma, dir);
    spec.teacher_actions.reserve(rec.teacher_actions.size());
    for (const Action& a : rec.teacher_actions) spec.teacher_actions.push_back(a.to_array());
    spec.masks.assign(rec.masks.begin(), rec.masks.end());
    spec.sigma = sigma;
    spec.weight_policy = weight_policy;
    spec.weight_value = weight_value;
    spec.weight_distill = weight_distill;
    return spec;
}

double loss_from_outputs(const TrajectoryLossSpec& spec,
                         const std::vector<std::array<double, 4>>& mu,
                         const std::vector<double>& values) {
    const int n = spec.size();
    if (static_cast<int>(mu.size()) != n || static_cast<int>(values.size()) != n) {
        throw std::invalid_argument("loss_from_outputs: output size mismatch");
    }
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        if (spec.weight_policy != 0.0) {
            loss -= spec.weight_policy * spec.advantages[k] *
                    gaussian_log_density(spec.action_raw[k], mu[k], spec.sigma);
        }
        if (spec.weight_value != 0.0) {
            const double e = spec.returns[k] - values[k];
            loss += spec.weight_value * 0.5 * e * e;
        }
        if (spec.weight_distill != 0.0 && spec.masks[k] != 0.0) {
            for (int d = 0; d < 4; ++d) {
                const std::size_t dd = static_cast<std::size_t>(d);
                loss += spec.weight_distill * spec.masks[k] *
                        std::abs(spec.teacher_actions[k][dd] - mu[k][dd]);
            }
        }
    }
    if (!std::isfinite(loss)) throw std::runtime_error("trajectory loss is non-finite");
    return loss;
}

}  // namespace adatrack
