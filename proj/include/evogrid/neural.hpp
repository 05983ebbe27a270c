#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "evogrid/world.hpp"

namespace evogrid::neural {

using world::Observation;

constexpr int kActionCount = world::kActionCount;

enum class ArchKind : std::uint8_t { LargeMlp = 0, SmallConv = 1 };

/// Network shapes are configurable; the documented defaults are frozen:
///   LargeMlp   154 -> 256 -> 256 -> 256 -> 10          (173,834 parameters)
///   SmallConv  5x5x6 conv3x3(32) + 4 scalars -> 72 -> 10 (23,586 parameters)
struct ArchSpec {
    ArchKind kind = ArchKind::SmallConv;
    std::array<std::int32_t, 3> mlp_hidden = {256, 256, 256};
    std::int32_t conv_filters = 32;
    std::int32_t conv_dense = 72;

    static constexpr int kConvSide = Observation::kGrid - 2;     // 3x3 output, valid padding
    static constexpr int kConvKernel = 3 * 3 * Observation::kChannels;

    int conv_flat() const { return kConvSide * kConvSide * conv_filters; }
    int dense_input() const { return conv_flat() + Observation::kScalarCount; }
    std::int64_t param_count() const;
    std::vector<std::int32_t> shape_list() const;
    void validate() const;

    bool operator==(const ArchSpec&) const = default;
};

/// Reusable per-thread scratch for forward/backward passes.
struct Workspace {
    std::vector<double> a1, a2, a3, d1, d2;
};

struct GradientBatch {
    std::vector<double> g;
    std::int64_t samples = 0;

    explicit GradientBatch(std::size_t params = 0) : g(params, 0.0) {}
    void reset() { std::fill(g.begin(), g.end(), 0.0); samples = 0; }
    void scale(double s) { for (double& x : g) x *= s; }
    void add(const GradientBatch& other);
};

class QNetwork {
public:
    /// Fan-in-scaled uniform weight init, zero biases, from a fixed seed.
    QNetwork(const ArchSpec& spec, std::uint64_t seed);

    const ArchSpec& spec() const { return spec_; }
    std::int64_t param_count() const { return static_cast<std::int64_t>(params_.size()); }
    std::span<const double> parameters() const { return params_; }
    std::span<double> mutable_parameters() { return params_; }
    std::uint64_t init_seed() const { return init_seed_; }
    std::uint64_t train_steps() const { return train_steps_; }
    void set_train_steps(std::uint64_t s) { train_steps_ = s; }

    std::array<double, kActionCount> forward(const Observation& obs, Workspace& ws) const;
    std::array<double, kActionCount> forward(const Observation& obs) const;

    /// Accumulates coeff * dQ[action]/dtheta into grad (same layout as the
    /// parameter vector) and returns the forward values as a byproduct.
    std::array<double, kActionCount> accumulate_gradient(const Observation& obs, int action,
                                                         double coeff, std::span<double> grad,
                                                         Workspace& ws) const;

private:
    ArchSpec spec_;
    std::vector<double> params_;
    std::uint64_t init_seed_ = 0;
    std::uint64_t train_steps_ = 0;
};

/// Gradient of the squared residual (y - Q[action])^2 with respect to the
/// parameters, i.e. -2*residual * dQ[action]/dtheta.
GradientBatch backward(const QNetwork& net, const Observation& obs, int action,
                       double residual);

/// Argmax over the 10 heads; ties break toward the lowest action index.
int greedy_action(const std::array<double, kActionCount>& q);

enum class OptimizerKind : std::uint8_t { Sgd = 0, Adam = 1 };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct OptimizerState {
    std::vector<double> m, v;
    std::int64_t t = 0;

    explicit OptimizerState(std::size_t params = 0) : m(params, 0.0), v(params, 0.0) {}
};

/// One first-order update with the gradient exactly as given (callers decide
/// batch normalization). Throws NumericError on non-finite gradients.
void apply_update(QNetwork& net, const GradientBatch& grads, OptimizerState& state,
                  const OptimizerConfig& cfg);

} // namespace evogrid::neural
