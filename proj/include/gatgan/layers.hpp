#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gatgan/rng.hpp"
#include "gatgan/tensor.hpp"

namespace gatgan {

// Named handle onto a layer's tensor; optimizers and checkpoints walk these.
struct NamedParam {
    std::string name;
    Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

// Affine map on the trailing axis: y = x W + b, W: [in,out].
class Dense {
public:
    Dense(std::size_t in, std::size_t out, Rng& rng);

    Tensor forward(const Tensor& x) const;
    void params(ParamList& out, const std::string& prefix);

    std::size_t in_dim() const { return in_; }
    std::size_t out_dim() const { return out_; }

    Tensor weight, bias;

private:
    std::size_t in_, out_;
};

// Temporal convolution whose kernel is rescaled by its largest singular
// value, estimated by a persistent power iteration, followed by LeakyReLU.
// Training forwards advance the iteration by one step; eval forwards are
// pure and bit-stable.
class SpectralConv1d {
public:
    SpectralConv1d(std::size_t width, std::size_t in, std::size_t out, Rng& rng,
                   double slope = 0.2);

    Tensor forward(const Tensor& x, bool training);

    // Extra power-iteration steps to tighten the norm estimate before
    // certification or checkpointing.
    void refine_power_iteration(int iters);
    // Kernel divided by the current norm estimate, detached. Shape [w,in,out].
    Tensor normalized_kernel() const;
    // Current power-iteration estimate of the kernel's largest singular value.
    double estimated_norm() const;

    void params(ParamList& out, const std::string& prefix);
    void buffers(ParamList& out, const std::string& prefix);

    Tensor kernel, bias;  // kernel [w,in,out], bias [out]
    Tensor u;             // persistent left-singular estimate, length w*in

private:
    std::size_t width_, in_, out_;
    double slope_;
    void power_iterate(std::vector<double>& u_vec, std::vector<double>& v_vec) const;
};

enum class GatOrientation { spatial, temporal };

// Dynamic graph attention over a complete self-looped graph. Spatial
// orientation treats features as nodes (each carrying its time profile);
// temporal orientation treats time steps as nodes. For every ordered node
// pair the concatenated features pass through W1, LeakyReLU, then the
// scoring vector W2; a learned bias is added and scores soft-max over
// neighbors. Aggregation applies the leading DxD block of W1 to neighbor
// features, mixes by attention weight, and applies a sigmoid. The optional
// residual adds the layer input back onto the output.
class GraphAttentionLayer {
public:
    GraphAttentionLayer(GatOrientation orientation, std::size_t nodes, std::size_t feat, Rng& rng,
                        bool residual = false, double slope = 0.2);

    // x: [K, tau, F] in either orientation; output has the same shape.
    Tensor forward(const Tensor& x) const;
    // Attention matrix [K, nodes, nodes]; rows sum to 1.
    Tensor scores(const Tensor& x) const;
    std::pair<Tensor, Tensor> forward_with_scores(const Tensor& x) const;

    void params(ParamList& out, const std::string& prefix);

    GatOrientation orientation() const { return orientation_; }
    std::size_t nodes() const { return nodes_; }
    std::size_t feat() const { return feat_; }

    Tensor w1;        // [2D, 2D]
    Tensor w2;        // [2D]
    Tensor bias_mat;  // [nodes, nodes], added pre-softmax

private:
    Tensor to_nodes(const Tensor& x) const;    // orient x as [K, nodes, D]
    Tensor from_nodes(const Tensor& z) const;  // restore [K, tau, F]
    GatOrientation orientation_;
    std::size_t nodes_, feat_;
    bool residual_;
    double slope_;
};

// Per-feature batch normalization over the batch and time axes with
// momentum-tracked running statistics for eval mode.
class BatchNorm {
public:
    explicit BatchNorm(std::size_t features);

    Tensor forward(const Tensor& x, bool training);  // x: [K, tau, F]

    void params(ParamList& out, const std::string& prefix);
    void buffers(ParamList& out, const std::string& prefix);

    Tensor gamma, beta;
    Tensor running_mean, running_var;
    double eps = 1e-5;
    double momentum = 0.9;

private:
    std::size_t features_;
};

// Depth-r stack of affine + LeakyReLU + batch-norm with one skip connection
// from block input to block output. Output shape equals input shape.
class ResidualFFN {
public:
    ResidualFFN(std::size_t features, std::size_t depth, Rng& rng, double slope = 0.2);

    Tensor forward(const Tensor& x, bool training);

    void params(ParamList& out, const std::string& prefix);
    void buffers(ParamList& out, const std::string& prefix);

    std::vector<Dense> layers;
    std::vector<BatchNorm> norms;

private:
    double slope_;
};

// Stacked LSTM with a linear readout, used by the predictive metric.
class LstmStack {
public:
    LstmStack(std::size_t input, std::size_t hidden, std::size_t layers, Rng& rng);

    // Per-step readouts under teacher forcing: y[:,t,:] predicts x[:,t+1,:].
    Tensor forward_seq(const Tensor& x) const;  // [K,T,F] -> [K,T,F]
    // Consumes the context, then rolls p steps feeding predictions back.
    Tensor rollout(const Tensor& context, std::size_t p) const;  // [K,c,F] -> [K,p,F]

    void params(ParamList& out, const std::string& prefix);

    struct Cell {
        Tensor wx, wh, b;  // [in,4H], [H,4H], [4H]; gate order i,f,g,o
    };
    std::vector<Cell> cells;
    Tensor proj_w, proj_b;  // [H,F], [F]

    std::size_t input_dim() const { return input_; }
    std::size_t hidden_dim() const { return hidden_; }

private:
    // One step for every layer; states are updated in place.
    Tensor step(const Tensor& xt, std::vector<Tensor>& h, std::vector<Tensor>& c) const;
    std::size_t input_, hidden_;
};

// Normalization over the trailing axis with learned scale and shift.
class LayerNorm {
public:
    explicit LayerNorm(std::size_t features);
    Tensor forward(const Tensor& x) const;
    void params(ParamList& out, const std::string& prefix);
    Tensor gamma, beta;
    double eps = 1e-5;
};

// Compact transformer encoder: input projection, sinusoidal positions,
// `blocks` rounds of multi-head self-attention and FFN (post-norm residuals),
// mean-over-time pooling. The regression head predicts the next step and is
// used only while fitting the embedder.
class TransformerEmbedder {
public:
    TransformerEmbedder(std::size_t features, std::size_t d_model, std::size_t heads,
                        std::size_t blocks, Rng& rng);

    Tensor embed(const Tensor& x) const;         // [K,T,F] -> [K,d_model]
    Tensor predict_next(const Tensor& x) const;  // [K,T,F] -> [K,F]

    void params(ParamList& out, const std::string& prefix);

    std::size_t d_model() const { return d_; }
    // Per-head attention matrices of the most recent forward, detached;
    // ordered block-major then head-major.
    const std::vector<Tensor>& last_attention() const { return last_attention_; }

    struct Block {
        Dense wq, wk, wv, wo;
        Dense ff1, ff2;
        LayerNorm ln1, ln2;
    };

    Dense input_proj;
    std::vector<Block> blocks_list;
    Dense head;

private:
    Tensor encoder_states(const Tensor& x) const;  // [K,T,d] after all blocks
    std::size_t features_, d_, heads_, blocks_;
    mutable std::vector<Tensor> last_attention_;
};

}  // namespace gatgan
