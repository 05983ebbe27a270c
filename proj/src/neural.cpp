#include "evogrid/neural.hpp"

#include <algorithm>
#include <cmath>

#include "evogrid/common.hpp"
#include "evogrid/rng.hpp"

namespace evogrid::neural {

namespace {

constexpr int kIn = Observation::kSize;        // 154
constexpr int kGridIn = Observation::kGridSize; // 150

void dense_forward(const double* w, const double* b, const double* x, double* out,
                   int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        double z = b[i];
        const double* wr = w + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) z += wr[j] * x[j];
        out[i] = z;
    }
}

void relu(double* x, int n) {
    for (int i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

} // namespace

void ArchSpec::validate() const {
    if (kind == ArchKind::LargeMlp) {
        for (int h : mlp_hidden)
            if (h < 1) throw ConfigError("arch: mlp hidden widths must be positive");
    } else {
        if (conv_filters < 1 || conv_dense < 1)
            throw ConfigError("arch: conv widths must be positive");
    }
}

std::int64_t ArchSpec::param_count() const {
    if (kind == ArchKind::LargeMlp) {
        const std::int64_t h0 = mlp_hidden[0], h1 = mlp_hidden[1], h2 = mlp_hidden[2];
        return (kIn * h0 + h0) + (h0 * h1 + h1) + (h1 * h2 + h2) +
               (h2 * kActionCount + kActionCount);
    }
    const std::int64_t f = conv_filters, d = conv_dense;
    return f * kConvKernel + f + d * dense_input() + d + kActionCount * d + kActionCount;
}

std::vector<std::int32_t> ArchSpec::shape_list() const {
    if (kind == ArchKind::LargeMlp)
        return {kIn, mlp_hidden[0], mlp_hidden[1], mlp_hidden[2], kActionCount};
    return {Observation::kGrid, Observation::kGrid, Observation::kChannels,
            conv_filters, conv_dense, kActionCount};
}

void GradientBatch::add(const GradientBatch& other) {
    if (g.size() != other.g.size())
        throw std::domain_error("gradient batch: shape mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += other.g[i];
    samples += other.samples;
}

QNetwork::QNetwork(const ArchSpec& spec, std::uint64_t seed)
    : spec_(spec), init_seed_(seed) {
    spec_.validate();
    params_.assign(static_cast<std::size_t>(spec_.param_count()), 0.0);
    Rng rng(seed);
    // Per-layer fan-in uniform weights, biases left at zero.
    auto init_dense = [&](std::size_t off, int rows, int cols) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        for (int i = 0; i < rows * cols; ++i)
            params_[off + i] = (2.0 * rng.uniform_real() - 1.0) * bound;
        return off + static_cast<std::size_t>(rows) * cols + rows; // skip biases
    };
    if (spec_.kind == ArchKind::LargeMlp) {
        std::size_t off = init_dense(0, spec_.mlp_hidden[0], kIn);
        off = init_dense(off, spec_.mlp_hidden[1], spec_.mlp_hidden[0]);
        off = init_dense(off, spec_.mlp_hidden[2], spec_.mlp_hidden[1]);
        init_dense(off, kActionCount, spec_.mlp_hidden[2]);
    } else {
        const int f = spec_.conv_filters;
        const double bound = 1.0 / std::sqrt(static_cast<double>(ArchSpec::kConvKernel));
        for (int i = 0; i < f * ArchSpec::kConvKernel; ++i)
            params_[i] = (2.0 * rng.uniform_real() - 1.0) * bound;
        std::size_t off = static_cast<std::size_t>(f) * ArchSpec::kConvKernel + f;
        off = init_dense(off, spec_.conv_dense, spec_.dense_input());
        init_dense(off, kActionCount, spec_.conv_dense);
    }
}

std::array<double, kActionCount> QNetwork::forward(const Observation& obs) const {
    Workspace ws;
    return forward(obs, ws);
}

std::array<double, kActionCount> QNetwork::forward(const Observation& obs,
                                                   Workspace& ws) const {
    std::array<double, kActionCount> q{};
    const double* p = params_.data();
    if (spec_.kind == ArchKind::LargeMlp) {
        const int h0 = spec_.mlp_hidden[0], h1 = spec_.mlp_hidden[1], h2 = spec_.mlp_hidden[2];
        ws.a1.resize(h0);
        ws.a2.resize(h1);
        ws.a3.resize(h2);
        std::size_t off = 0;
        dense_forward(p, p + static_cast<std::size_t>(h0) * kIn, obs.data.data(),
                      ws.a1.data(), h0, kIn);
        relu(ws.a1.data(), h0);
        off = static_cast<std::size_t>(h0) * kIn + h0;
        dense_forward(p + off, p + off + static_cast<std::size_t>(h1) * h0, ws.a1.data(),
                      ws.a2.data(), h1, h0);
        relu(ws.a2.data(), h1);
        off += static_cast<std::size_t>(h1) * h0 + h1;
        dense_forward(p + off, p + off + static_cast<std::size_t>(h2) * h1, ws.a2.data(),
                      ws.a3.data(), h2, h1);
        relu(ws.a3.data(), h2);
        off += static_cast<std::size_t>(h2) * h1 + h2;
        dense_forward(p + off, p + off + static_cast<std::size_t>(kActionCount) * h2,
                      ws.a3.data(), q.data(), kActionCount, h2);
        return q;
    }

    // SmallConv: valid 3x3 convolution over the 5x5x6 crop, HWC layout.
    const int f = spec_.conv_filters;
    const int side = ArchSpec::kConvSide;
    const int ch = Observation::kChannels;
    const int din = spec_.dense_input();
    ws.a1.resize(static_cast<std::size_t>(din));
    const double* kern = p;
    const double* bc = p + static_cast<std::size_t>(f) * ArchSpec::kConvKernel;
    for (int oy = 0; oy < side; ++oy) {
        for (int ox = 0; ox < side; ++ox) {
            for (int fi = 0; fi < f; ++fi) {
                double z = bc[fi];
                const double* kf = kern + static_cast<std::size_t>(fi) * ArchSpec::kConvKernel;
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const double* in =
                            obs.data.data() +
                            (static_cast<std::size_t>(oy + ky) * Observation::kGrid + (ox + kx)) * ch;
                        const double* kk = kf + (static_cast<std::size_t>(ky) * 3 + kx) * ch;
                        for (int c = 0; c < ch; ++c) z += kk[c] * in[c];
                    }
                ws.a1[(static_cast<std::size_t>(oy) * side + ox) * f + fi] = z > 0.0 ? z : 0.0;
            }
        }
    }
    for (int s = 0; s < Observation::kScalarCount; ++s)
        ws.a1[spec_.conv_flat() + s] = obs.data[kGridIn + s];

    const int d = spec_.conv_dense;
    ws.a2.resize(d);
    std::size_t off = static_cast<std::size_t>(f) * ArchSpec::kConvKernel + f;
    dense_forward(p + off, p + off + static_cast<std::size_t>(d) * din, ws.a1.data(),
                  ws.a2.data(), d, din);
    relu(ws.a2.data(), d);
    off += static_cast<std::size_t>(d) * din + d;
    dense_forward(p + off, p + off + static_cast<std::size_t>(kActionCount) * d,
                  ws.a2.data(), q.data(), kActionCount, d);
    return q;
}

std::array<double, kActionCount> QNetwork::accumulate_gradient(
    const Observation& obs, int action, double coeff, std::span<double> grad,
    Workspace& ws) const {
    if (action < 0 || action >= kActionCount)
        throw std::domain_error("accumulate_gradient: invalid action index");
    if (grad.size() != params_.size())
        throw std::domain_error("accumulate_gradient: gradient shape mismatch");

    const auto q = forward(obs, ws); // fills activations
    const double* p = params_.data();
    double* g = grad.data();

    if (spec_.kind == ArchKind::LargeMlp) {
        const int h0 = spec_.mlp_hidden[0], h1 = spec_.mlp_hidden[1], h2 = spec_.mlp_hidden[2];
        const std::size_t w0 = 0;
        const std::size_t b0 = w0 + static_cast<std::size_t>(h0) * kIn;
        const std::size_t w1 = b0 + h0;
        const std::size_t b1 = w1 + static_cast<std::size_t>(h1) * h0;
        const std::size_t w2 = b1 + h1;
        const std::size_t b2 = w2 + static_cast<std::size_t>(h2) * h1;
        const std::size_t w3 = b2 + h2;
        const std::size_t b3 = w3 + static_cast<std::size_t>(kActionCount) * h2;

        // Output head: only the selected action's row carries direct gradient.
        for (int j = 0; j < h2; ++j)
            g[w3 + static_cast<std::size_t>(action) * h2 + j] += coeff * ws.a3[j];
        g[b3 + action] += coeff;

        ws.d1.resize(std::max({h0, h1, h2}));
        ws.d2.resize(std::max({h0, h1, h2}));
        // delta over hidden layer 3
        for (int j = 0; j < h2; ++j)
            ws.d1[j] = ws.a3[j] > 0.0 ? p[w3 + static_cast<std::size_t>(action) * h2 + j] : 0.0;

        auto back_dense = [&](std::size_t w, std::size_t b, const double* prev_act,
                              int rows, int cols, std::vector<double>& delta,
                              std::vector<double>& delta_prev, const double* prev_pre) {
            for (int j = 0; j < cols; ++j) delta_prev[j] = 0.0;
            for (int i = 0; i < rows; ++i) {
                const double di = delta[i];
                if (di == 0.0) continue;
                const double cdi = coeff * di;
                double* gw = g + w + static_cast<std::size_t>(i) * cols;
                const double* wr = p + w + static_cast<std::size_t>(i) * cols;
                for (int j = 0; j < cols; ++j) {
                    gw[j] += cdi * prev_act[j];
                    delta_prev[j] += wr[j] * di;
                }
                g[b + i] += cdi;
            }
            if (prev_pre)
                for (int j = 0; j < cols; ++j)
                    if (prev_pre[j] <= 0.0) delta_prev[j] = 0.0;
        };

        back_dense(w2, b2, ws.a2.data(), h2, h1, ws.d1, ws.d2, ws.a2.data());
        std::swap(ws.d1, ws.d2);
        back_dense(w1, b1, ws.a1.data(), h1, h0, ws.d1, ws.d2, ws.a1.data());
        std::swap(ws.d1, ws.d2);
        // input layer: no further propagation
        for (int i = 0; i < h0; ++i) {
            const double di = ws.d1[i];
            if (di == 0.0) continue;
            const double cdi = coeff * di;
            double* gw = g + w0 + static_cast<std::size_t>(i) * kIn;
            for (int j = 0; j < kIn; ++j) gw[j] += cdi * obs.data[j];
            g[b0 + i] += cdi;
        }
        return q;
    }

    // SmallConv
    const int f = spec_.conv_filters;
    const int side = ArchSpec::kConvSide;
    const int ch = Observation::kChannels;
    const int din = spec_.dense_input();
    const int d = spec_.conv_dense;
    const std::size_t kw = 0;
    const std::size_t kb = kw + static_cast<std::size_t>(f) * ArchSpec::kConvKernel;
    const std::size_t w1 = kb + f;
    const std::size_t b1 = w1 + static_cast<std::size_t>(d) * din;
    const std::size_t w2 = b1 + d;
    const std::size_t b2 = w2 + static_cast<std::size_t>(kActionCount) * d;

    for (int j = 0; j < d; ++j)
        g[w2 + static_cast<std::size_t>(action) * d + j] += coeff * ws.a2[j];
    g[b2 + action] += coeff;

    ws.d1.resize(d);
    for (int j = 0; j < d; ++j)
        ws.d1[j] = ws.a2[j] > 0.0 ? p[w2 + static_cast<std::size_t>(action) * d + j] : 0.0;

    ws.d2.resize(din);
    std::fill(ws.d2.begin(), ws.d2.end(), 0.0);
    for (int i = 0; i < d; ++i) {
        const double di = ws.d1[i];
        if (di == 0.0) continue;
        const double cdi = coeff * di;
        double* gw = g + w1 + static_cast<std::size_t>(i) * din;
        const double* wr = p + w1 + static_cast<std::size_t>(i) * din;
        for (int j = 0; j < din; ++j) {
            gw[j] += cdi * ws.a1[j];
            ws.d2[j] += wr[j] * di;
        }
        g[b1 + i] += cdi;
    }

    // Conv positions of d2 carry the relu mask; scalar positions stop here.
    for (int oy = 0; oy < side; ++oy)
        for (int ox = 0; ox < side; ++ox)
            for (int fi = 0; fi < f; ++fi) {
                const std::size_t flat = (static_cast<std::size_t>(oy) * side + ox) * f + fi;
                if (ws.a1[flat] <= 0.0) continue;
                const double dz = ws.d2[flat];
                if (dz == 0.0) continue;
                const double cdz = coeff * dz;
                double* gk = g + kw + static_cast<std::size_t>(fi) * ArchSpec::kConvKernel;
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const double* in =
                            obs.data.data() +
                            (static_cast<std::size_t>(oy + ky) * Observation::kGrid + (ox + kx)) * ch;
                        double* kk = gk + (static_cast<std::size_t>(ky) * 3 + kx) * ch;
                        for (int c = 0; c < ch; ++c) kk[c] += cdz * in[c];
                    }
                g[kb + fi] += cdz;
            }
    return q;
}

GradientBatch backward(const QNetwork& net, const Observation& obs, int action,
                       double residual) {
    GradientBatch batch(static_cast<std::size_t>(net.param_count()));
    Workspace ws;
    net.accumulate_gradient(obs, action, -2.0 * residual, batch.g, ws);
    batch.samples = 1;
    return batch;
}

int greedy_action(const std::array<double, kActionCount>& q) {
    int best = 0;
    for (int a = 1; a < kActionCount; ++a)
        if (q[a] > q[best]) best = a;
    return best;
}

void apply_update(QNetwork& net, const GradientBatch& grads, OptimizerState& state,
                  const OptimizerConfig& cfg) {
    auto params = net.mutable_parameters();
    if (grads.g.size() != params.size())
        throw std::domain_error("apply_update: gradient shape mismatch");
    for (double x : grads.g)
        if (!std::isfinite(x))
            throw NumericError("apply_update: non-finite gradient");

    if (cfg.kind == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < params.size(); ++i)
            params[i] -= cfg.learning_rate * grads.g[i];
    } else {
        if (state.m.size() != params.size()) {
            state.m.assign(params.size(), 0.0);
            state.v.assign(params.size(), 0.0);
            state.t = 0;
        }
        state.t += 1;
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double gi = grads.g[i];
            state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * gi;
            state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = state.m[i] / c1;
            const double vhat = state.v[i] / c2;
            params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
    net.set_train_steps(net.train_steps() + 1);
}

} // namespace evogrid::neural
