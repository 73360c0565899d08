// Copyright 2026 The qmetro Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace qmetro {

// Small dense networks with elu hidden units, batched forward/backward
// passes and an optional side input concatenated into one layer (the critic
// feeds actions into its second hidden layer).  Rows are samples throughout.

enum class OutputActivation { linear, tanh_scaled };

struct Mlp {
    std::vector<int> layer_sizes;  // e.g. {32, 400, 300, P}
    int concat_layer = -1;         // index of the layer whose input is widened
    int concat_width = 0;
    OutputActivation output = OutputActivation::linear;
    double output_scale = 1.0;

    std::vector<Eigen::MatrixXd> weights;  // per layer, (out x in)
    std::vector<Eigen::VectorXd> biases;

    int num_layers() const { return static_cast<int>(weights.size()); }
    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }

    int layer_input_width(int layer) const {
        return layer_sizes[layer] + (layer == concat_layer ? concat_width : 0);
    }
};

inline Mlp make_mlp(std::vector<int> layer_sizes, OutputActivation output,
                    double output_scale = 1.0, int concat_layer = -1, int concat_width = 0) {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("mlp: need at least input and output layers");
    Mlp net;
    net.layer_sizes = std::move(layer_sizes);
    net.output = output;
    net.output_scale = output_scale;
    net.concat_layer = concat_layer;
    net.concat_width = concat_width;
    const int layers = static_cast<int>(net.layer_sizes.size()) - 1;
    for (int l = 0; l < layers; ++l) {
        net.weights.emplace_back(
            Eigen::MatrixXd::Zero(net.layer_sizes[l + 1], net.layer_input_width(l)));
        net.biases.emplace_back(Eigen::VectorXd::Zero(net.layer_sizes[l + 1]));
    }
    return net;
}

/// Uniform fan-in initialisation for hidden layers; the final layer starts
/// near zero so initial policies act gently and initial values sit near zero.
inline void init_fan_in(Mlp& net, std::mt19937_64& gen, double final_scale = 3e-3) {
    for (int l = 0; l < net.num_layers(); ++l) {
        const double limit = (l + 1 == net.num_layers())
                                 ? final_scale
                                 : 1.0 / std::sqrt(double(net.layer_input_width(l)));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i)
            for (Eigen::Index j = 0; j < net.weights[l].cols(); ++j)
                net.weights[l](i, j) = dist(gen);
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) net.biases[l][i] = dist(gen);
    }
}

namespace detail {

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_prime(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

}  // namespace detail

struct ForwardTrace {
    std::vector<Eigen::MatrixXd> layer_inputs;  // post-concat input of each layer
    std::vector<Eigen::MatrixXd> preacts;
    Eigen::MatrixXd output;
};

inline ForwardTrace mlp_forward_trace(const Mlp& net, const Eigen::MatrixXd& input,
                                      const Eigen::MatrixXd* extra = nullptr) {
    if (input.cols() != net.input_size())
        throw std::invalid_argument("mlp: input width mismatch");
    if ((net.concat_width > 0) != (extra != nullptr))
        throw std::invalid_argument("mlp: side input expected iff the net concatenates one");
    if (extra && (extra->cols() != net.concat_width || extra->rows() != input.rows()))
        throw std::invalid_argument("mlp: side input shape mismatch");

    ForwardTrace trace;
    Eigen::MatrixXd activ = input;
    for (int l = 0; l < net.num_layers(); ++l) {
        if (l == net.concat_layer) {
            Eigen::MatrixXd joined(activ.rows(), activ.cols() + extra->cols());
            joined << activ, *extra;
            activ = std::move(joined);
        }
        trace.layer_inputs.push_back(activ);
        Eigen::MatrixXd z =
            (activ * net.weights[l].transpose()).rowwise() + net.biases[l].transpose();
        trace.preacts.push_back(z);
        if (l + 1 < net.num_layers()) {
            activ = z.unaryExpr([](double x) { return detail::elu(x); });
        } else if (net.output == OutputActivation::tanh_scaled) {
            activ = net.output_scale * z.array().tanh().matrix();
        } else {
            activ = std::move(z);
        }
    }
    trace.output = std::move(activ);
    return trace;
}

inline Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& input,
                                   const Eigen::MatrixXd* extra = nullptr) {
    return mlp_forward_trace(net, input, extra).output;
}

inline Eigen::VectorXd mlp_forward1(const Mlp& net, const Eigen::VectorXd& input) {
    return mlp_forward(net, input.transpose()).row(0);
}

struct MlpGradients {
    std::vector<Eigen::MatrixXd> dweights;
    std::vector<Eigen::VectorXd> dbiases;
    Eigen::MatrixXd dinput;
    Eigen::MatrixXd dextra;  // empty unless the net concatenates a side input
};

/// Backpropagate d(loss)/d(output) through a recorded forward pass.  Pass
/// `need_param_grads = false` to skip the weight/bias gradients when only
/// input gradients are wanted (the policy update's pass through the critic).
inline MlpGradients mlp_backward(const Mlp& net, const ForwardTrace& trace,
                                 const Eigen::MatrixXd& doutput,
                                 bool need_param_grads = true) {
    MlpGradients grads;
    grads.dweights.resize(net.num_layers());
    grads.dbiases.resize(net.num_layers());

    Eigen::MatrixXd delta;
    if (net.output == OutputActivation::tanh_scaled) {
        const Eigen::ArrayXXd t = trace.preacts.back().array().tanh();
        delta = (doutput.array() * net.output_scale * (1.0 - t * t)).matrix();
    } else {
        delta = doutput;
    }
    for (int l = net.num_layers() - 1; l >= 0; --l) {
        if (need_param_grads) {
            grads.dweights[l] = delta.transpose() * trace.layer_inputs[l];
            grads.dbiases[l] = delta.colwise().sum().transpose();
        }
        Eigen::MatrixXd dinput_full = delta * net.weights[l];
        if (l == net.concat_layer) {
            grads.dextra = dinput_full.rightCols(net.concat_width);
            dinput_full = dinput_full.leftCols(net.layer_sizes[l]).eval();
        }
        if (l == 0) {
            grads.dinput = std::move(dinput_full);
        } else {
            delta = (dinput_full.array() *
                     trace.preacts[l - 1].unaryExpr([](double x) {
                         return detail::elu_prime(x);
                     }).array())
                        .matrix();
        }
    }
    return grads;
}

/// target ← τ·online + (1−τ)·target, elementwise.
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
    if (target.layer_sizes != online.layer_sizes ||
        target.concat_layer != online.concat_layer ||
        target.concat_width != online.concat_width)
        throw std::invalid_argument("soft_update: architecture mismatch");
    for (int l = 0; l < target.num_layers(); ++l) {
        target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
        target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
    int step = 0;
};

inline AdamState make_adam_state(const Mlp& net) {
    AdamState state;
    for (int l = 0; l < net.num_layers(); ++l) {
        state.m_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        state.v_w.push_back(state.m_w.back());
        state.m_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        state.v_b.push_back(state.m_b.back());
    }
    return state;
}

/// One Adam update.  `ascend` flips the step direction (policy objectives are
/// maximised, losses minimised).
inline void adam_step(Mlp& net, AdamState& state, const MlpGradients& grads, double lr,
                      bool ascend = false, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
    ++state.step;
    const double c1 = 1.0 - std::pow(beta1, state.step);
    const double c2 = 1.0 - std::pow(beta2, state.step);
    const double sign = ascend ? 1.0 : -1.0;
    for (int l = 0; l < net.num_layers(); ++l) {
        state.m_w[l] = beta1 * state.m_w[l] + (1.0 - beta1) * grads.dweights[l];
        state.v_w[l] = beta2 * state.v_w[l] +
                       (1.0 - beta2) * grads.dweights[l].cwiseProduct(grads.dweights[l]);
        net.weights[l].array() +=
            sign * lr * (state.m_w[l].array() / c1) / ((state.v_w[l].array() / c2).sqrt() + eps);
        state.m_b[l] = beta1 * state.m_b[l] + (1.0 - beta1) * grads.dbiases[l];
        state.v_b[l] =
            beta2 * state.v_b[l] + (1.0 - beta2) * grads.dbiases[l].cwiseProduct(grads.dbiases[l]);
        net.biases[l].array() +=
            sign * lr * (state.m_b[l].array() / c1) / ((state.v_b[l].array() / c2).sqrt() + eps);
    }
}

// ---------------------------------------------------------------------------
// Serialisation
// ---------------------------------------------------------------------------

inline nlohmann::json mlp_to_json(const Mlp& net) {
    nlohmann::json j;
    j["layer_sizes"] = net.layer_sizes;
    j["concat_layer"] = net.concat_layer;
    j["concat_width"] = net.concat_width;
    j["hidden_activation"] = "elu";
    j["output_activation"] =
        net.output == OutputActivation::tanh_scaled ? "tanh_scaled" : "linear";
    j["output_scale"] = net.output_scale;
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (int l = 0; l < net.num_layers(); ++l) {
        nlohmann::json w = nlohmann::json::array();  // row-major
        for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i)
            for (Eigen::Index k = 0; k < net.weights[l].cols(); ++k)
                w.push_back(net.weights[l](i, k));
        weights.push_back(std::move(w));
        nlohmann::json b = nlohmann::json::array();
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) b.push_back(net.biases[l][i]);
        biases.push_back(std::move(b));
    }
    j["weights"] = std::move(weights);
    j["biases"] = std::move(biases);
    return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
    const std::string activation = j.at("output_activation").get<std::string>();
    if (j.at("hidden_activation").get<std::string>() != "elu")
        throw std::invalid_argument("mlp: unsupported hidden activation");
    Mlp net = make_mlp(j.at("layer_sizes").get<std::vector<int>>(),
                       activation == "tanh_scaled" ? OutputActivation::tanh_scaled
                                                   : OutputActivation::linear,
                       j.value("output_scale", 1.0), j.value("concat_layer", -1),
                       j.value("concat_width", 0));
    const auto weights = j.at("weights").get<std::vector<std::vector<double>>>();
    const auto biases = j.at("biases").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(weights.size()) != net.num_layers() || biases.size() != weights.size())
        throw std::invalid_argument("mlp: layer count mismatch in checkpoint");
    for (int l = 0; l < net.num_layers(); ++l) {
        if (static_cast<Eigen::Index>(weights[l].size()) != net.weights[l].size() ||
            static_cast<Eigen::Index>(biases[l].size()) != net.biases[l].size())
            throw std::invalid_argument("mlp: tensor size mismatch in checkpoint");
        for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i)
            for (Eigen::Index k = 0; k < net.weights[l].cols(); ++k)
                net.weights[l](i, k) = weights[l][i * net.weights[l].cols() + k];
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) net.biases[l][i] = biases[l][i];
    }
    return net;
}

}  // namespace qmetro
