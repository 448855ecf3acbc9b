#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vitag/error.hpp"
#include "vitag/tensor.hpp"

namespace vitag {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Adam with decoupled weight decay: the decay term is applied directly to
// the parameter, outside the adaptive update, so it is not normalized by
// sqrt(v). Moments are kept per named parameter so training can resume
// bit-for-bit from a checkpoint.
template <class T>
class AdamOptimizer {
  public:
    struct Slot {
        std::string name;
        Tensor<T> param;
        std::vector<T> m;
        std::vector<T> v;
    };
    struct Group {
        AdamConfig cfg;
        std::vector<Slot> slots;
    };

    void add_group(AdamConfig cfg,
                   const std::vector<std::pair<std::string, Tensor<T>>>& params) {
        Group g;
        g.cfg = cfg;
        for (const auto& [name, p] : params) {
            Slot s;
            s.name = name;
            s.param = p;
            s.m.assign(static_cast<size_t>(p.numel()), T(0));
            s.v.assign(static_cast<size_t>(p.numel()), T(0));
            g.slots.push_back(std::move(s));
        }
        groups_.push_back(std::move(g));
    }

    void zero_grad() {
        for (auto& g : groups_) {
            for (auto& s : g.slots) s.param.zero_grad();
        }
    }

    void step() {
        ++step_count_;
        for (auto& g : groups_) {
            const double bc1 = 1.0 - std::pow(g.cfg.beta1, step_count_);
            const double bc2 = 1.0 - std::pow(g.cfg.beta2, step_count_);
            for (auto& s : g.slots) {
                auto grad = s.param.grad();
                auto data = s.param.data();
                for (size_t i = 0; i < grad.size(); ++i) {
                    if (!std::isfinite(grad[i])) {
                        throw OptimizerError(
                            "non-finite gradient in parameter '" + s.name +
                            "' at step " + std::to_string(step_count_));
                    }
                    const double gi = grad[i];
                    const double mi =
                        g.cfg.beta1 * s.m[i] + (1.0 - g.cfg.beta1) * gi;
                    const double vi =
                        g.cfg.beta2 * s.v[i] + (1.0 - g.cfg.beta2) * gi * gi;
                    s.m[i] = static_cast<T>(mi);
                    s.v[i] = static_cast<T>(vi);
                    const double mhat = mi / bc1;
                    const double vhat = vi / bc2;
                    const double pi = data[i];
                    data[i] = static_cast<T>(
                        pi - g.cfg.lr * mhat / (std::sqrt(vhat) + g.cfg.eps) -
                        g.cfg.lr * g.cfg.weight_decay * pi);
                }
            }
        }
    }

    int64_t step_count() const { return step_count_; }
    void set_step_count(int64_t t) { step_count_ = t; }

    std::vector<Group>& groups() { return groups_; }
    const std::vector<Group>& groups() const { return groups_; }

  private:
    std::vector<Group> groups_;
    int64_t step_count_ = 0;
};

}  // namespace vitag
