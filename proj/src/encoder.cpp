#include "ser/encoder.hpp"

#include <cmath>
#include <string>

#include "ser/error.hpp"

namespace ser {

namespace {

// x^T W as a 1-D tensor: x [k], w [k × n] -> [n].
Tensor vec_matmul(const Tensor& x, const Tensor& w) {
    return reshape(matmul(reshape(x, {1, x.numel()}), w), {w.dim(1)});
}

Tensor project_row(const Tensor& x, const BreLayerParams& layer) {
    if (!layer.proj_w) return x;
    return add(vec_matmul(x, *layer.proj_w), *layer.proj_b);
}

std::size_t valid_length(const std::vector<bool>& mask) {
    std::size_t t_valid = 0;
    bool in_prefix = true;
    for (bool m : mask) {
        if (m) {
            if (!in_prefix) throw ValidationError("encode: mask is not a true-prefix");
            ++t_valid;
        } else {
            in_prefix = false;
        }
    }
    return t_valid;
}

}  // namespace

std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmDirParams& p) {
    const std::size_t d = p.w_x.dim(0);
    if (x.numel() != d || h_prev.numel() != d || c_prev.numel() != d)
        throw ShapeError("lstm_step: inputs " + shape_str(x.shape()) + "/" +
                         shape_str(h_prev.shape()) + "/" + shape_str(c_prev.shape()) +
                         " do not match hidden size " + std::to_string(d));
    Tensor z = add(add(vec_matmul(x, p.w_x), vec_matmul(h_prev, p.w_h)), p.bias);
    Tensor i = sigmoid(slice(z, 0, d));
    Tensor f = sigmoid(slice(z, d, d));
    Tensor g = tanh(slice(z, 2 * d, d));
    Tensor o = sigmoid(slice(z, 3 * d, d));
    Tensor c = add(mul(f, c_prev), mul(i, g));
    Tensor h = mul(o, tanh(c));
    return {h, c};
}

EncodedSequence encode(const Tensor& x, const std::vector<bool>& mask, const BreParams& params,
                       const Tensor* prosody, const EncodeOptions& opts) {
    if (x.shape().size() != 2)
        throw ShapeError("encode: input must be [T x d_in], got " + shape_str(x.shape()));
    const std::size_t t_total = x.dim(0);
    if (mask.size() != t_total)
        throw ShapeError("encode: mask length " + std::to_string(mask.size()) +
                         " != sequence length " + std::to_string(t_total));
    const std::size_t t_valid = valid_length(mask);
    if (t_valid == 0) throw ValidationError("encode: mask has no valid steps");
    if (params.layers.empty()) throw ConfigError("encode: no encoder layers configured");

    const std::size_t d = params.d_h;

    std::vector<Tensor> inputs(t_valid);
    for (std::size_t t = 0; t < t_valid; ++t) inputs[t] = row(x, t);

    std::vector<Tensor> fwd(t_valid), bwd(t_valid);
    for (const BreLayerParams& layer : params.layers) {
        std::vector<Tensor> projected(t_valid);
        for (std::size_t t = 0; t < t_valid; ++t) projected[t] = project_row(inputs[t], layer);

        Tensor h = Tensor::zeros({d});
        Tensor c = Tensor::zeros({d});
        for (std::size_t t = 0; t < t_valid; ++t) {
            auto [h_new, c_new] = lstm_step(projected[t], h, c, layer.forward_dir);
            h = add(h_new, projected[t]);  // residual on the hidden state
            c = c_new;
            fwd[t] = h;
        }

        h = Tensor::zeros({d});
        c = Tensor::zeros({d});
        for (std::size_t ti = t_valid; ti-- > 0;) {
            auto [h_new, c_new] = lstm_step(projected[ti], h, c, layer.backward_dir);
            h = add(h_new, projected[ti]);
            c = c_new;
            bwd[ti] = h;
        }

        for (std::size_t t = 0; t < t_valid; ++t) inputs[t] = concat(fwd[t], bwd[t]);
    }

    std::vector<Tensor> out_rows(t_valid);
    for (std::size_t t = 0; t < t_valid; ++t)
        out_rows[t] = prosody ? concat(inputs[t], *prosody) : inputs[t];

    EncodedSequence enc;
    enc.mask = mask;
    enc.outputs = stack_rows(out_rows, t_total);
    if (opts.training && opts.dropout_rate > 0.0)
        enc.outputs = dropout(enc.outputs, opts.dropout_rate, true, opts.rng);

    const std::size_t d_p = prosody ? prosody->numel() : 0;
    Tensor last_fwd = slice(row(enc.outputs, t_valid - 1), 0, d);
    Tensor first_bwd = slice(row(enc.outputs, 0), d, d);
    if (d_p > 0) {
        Tensor p_part = slice(row(enc.outputs, t_valid - 1), 2 * d, d_p);
        enc.last_state = concat({last_fwd, first_bwd, p_part});
    } else {
        enc.last_state = concat(last_fwd, first_bwd);
    }
    return enc;
}

BreParams init_bre_params(std::size_t d_in, std::size_t d_h, std::size_t num_layers, Rng rng) {
    if (d_in == 0 || d_h == 0 || num_layers == 0)
        throw ConfigError("init_bre_params: dims and layer count must be positive");
    const double k = 1.0 / std::sqrt(static_cast<double>(d_h));

    auto uniform_tensor = [&](Shape shape, Rng r) {
        Tensor t = Tensor::zeros(std::move(shape), true);
        for (double& v : t.values()) v = r.uniform(-k, k);
        return t;
    };
    auto init_dir = [&](Rng r, LstmDirParams& dir) {
        dir.w_x = uniform_tensor({d_h, 4 * d_h}, r.derive("w_x"));
        dir.w_h = uniform_tensor({d_h, 4 * d_h}, r.derive("w_h"));
        dir.bias = uniform_tensor({4 * d_h}, r.derive("bias"));
        for (std::size_t j = d_h; j < 2 * d_h; ++j) dir.bias.values()[j] = 1.0;  // forget gate
    };

    BreParams params;
    params.d_h = d_h;
    params.layers.resize(num_layers);
    std::size_t layer_in = d_in;
    for (std::size_t l = 0; l < num_layers; ++l) {
        BreLayerParams& layer = params.layers[l];
        Rng lr = rng.derive("layer", l);
        if (layer_in != d_h) {
            layer.proj_w = uniform_tensor({layer_in, d_h}, lr.derive("proj_w"));
            layer.proj_b = uniform_tensor({d_h}, lr.derive("proj_b"));
        }
        init_dir(lr.derive("fwd"), layer.forward_dir);
        init_dir(lr.derive("bwd"), layer.backward_dir);
        layer_in = 2 * d_h;
    }
    return params;
}

std::vector<std::pair<std::string, Tensor>> named_parameters(const BreParams& params,
                                                             const std::string& prefix) {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const BreLayerParams& layer = params.layers[l];
        const std::string base = prefix + ".layer" + std::to_string(l);
        if (layer.proj_w) {
            out.emplace_back(base + ".proj_w", *layer.proj_w);
            out.emplace_back(base + ".proj_b", *layer.proj_b);
        }
        out.emplace_back(base + ".fwd.w_x", layer.forward_dir.w_x);
        out.emplace_back(base + ".fwd.w_h", layer.forward_dir.w_h);
        out.emplace_back(base + ".fwd.bias", layer.forward_dir.bias);
        out.emplace_back(base + ".bwd.w_x", layer.backward_dir.w_x);
        out.emplace_back(base + ".bwd.w_h", layer.backward_dir.w_h);
        out.emplace_back(base + ".bwd.bias", layer.backward_dir.bias);
    }
    return out;
}

}  // namespace ser
