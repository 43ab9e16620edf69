#pragma once

#include <memory>
#include <string>
#include <vector>

#include "emrdm/rng.hpp"
#include "emrdm/schedule.hpp"
#include "emrdm/tensor.hpp"

namespace emrdm {

// A learnable tensor plus its gradient and the optimizer's second-moment
// accumulator.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor opt_v;

    explicit Param(std::string n, Shape s) : name(std::move(n)), value(s), grad(s), opt_v(s) {}
    void zero_grad() { grad.fill(0.0); }
};

// Raw network F({c_in * x~^l}; c_noise; cond) -> single temporal slice.
// forward() is read-only; forward_train() additionally records the
// activations needed by backward(), which accumulates parameter
// gradients (and is therefore single-writer).
class RawNetwork {
public:
    virtual ~RawNetwork() = default;

    virtual Tensor forward(const Tensor& x_seq, double c_noise, const Tensor& cond) const = 0;
    virtual Tensor forward_train(const Tensor& x_seq, double c_noise, const Tensor& cond) = 0;
    virtual void backward(const Tensor& d_out) = 0;

    virtual std::vector<Param*> params() = 0;
    virtual int sequence_length() const = 0;
    // Topology key/values for the checkpoint header.
    virtual std::vector<std::pair<std::string, std::string>> topology() const = 0;

    void zero_grads() {
        for (Param* p : params()) p->zero_grad();
    }
    size_t param_count() {
        size_t n = 0;
        for (Param* p : params()) n += p->value.size();
        return n;
    }
};

// Denoiser D: estimate of the clean image given the noisy sequence at
// noise step t. mu_seq is the corrupted-observation sequence; cond is the
// conditioning input forwarded to network-backed denoisers.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Tensor denoise(const Tensor& x_tilde_seq, double t, const Tensor& mu_seq,
                           const Tensor& cond) const = 0;
};

// ---------------------------------------------------------------------
// Analytic Gaussian oracle: the optimum of the denoising objective when
// x0 ~ N(m, sigma_data^2) elementwise and mu is fixed. Used as the exact
// reference denoiser in sampler and score tests.
// ---------------------------------------------------------------------

struct GaussianOracleParams {
    double m = 0.0;
    double sigma_data = 1.0;
};

// D* = m + (sigma_data^2 / (sigma_data^2 + sigma(t)^2)) * (x~ - k(t) mu - m),
// applied per temporal slice; slices are averaged when L > 1.
Tensor oracle_denoise(const GaussianOracleParams& p, const Tensor& x_tilde,
                      const Tensor& mu, const Schedule& sched, double t);

class GaussianOracleDenoiser : public Denoiser {
public:
    GaussianOracleDenoiser(GaussianOracleParams p, Schedule sched)
        : p_(p), sched_(sched) {}
    Tensor denoise(const Tensor& x_tilde_seq, double t, const Tensor& mu_seq,
                   const Tensor& /*cond*/) const override {
        return oracle_denoise(p_, x_tilde_seq, mu_seq, sched_, t);
    }

private:
    GaussianOracleParams p_;
    Schedule sched_;
};

// ---------------------------------------------------------------------
// Temporal fusion self-attention.
// ---------------------------------------------------------------------

struct TFSAConfig {
    int heads = 4;    // G
    int key_dim = 8;  // d_k
    int channels = 64;

    void validate() const;
    int head_channels() const { return channels / heads; }
};

// Single-head attention core with the query length fixed at 1:
// masks = softmax(q K^T / sqrt(d_k)) over L rows, fused = masks * V.
// q: d_k values, keys: L x d_k, values: L x C. Exposed so the hand
// examples can drive it with explicit K and V.
void attention_fuse(const std::vector<double>& q, const std::vector<std::vector<double>>& keys,
                    const std::vector<std::vector<double>>& values, std::vector<double>& masks,
                    std::vector<double>& fused);

// Full TFSA over one spatial location: X is L x C (row-major), W per head
// is C_g x d_k, Q per head is d_k. Outputs the fused 1 x C vector and the
// G x L mask table.
struct TFSAParams {
    std::vector<Tensor> w;  // per head: (1,1,C_g,d_k)
    std::vector<Tensor> q;  // per head: (1,1,1,d_k)
};

void tfsa_forward(const TFSAConfig& cfg, const std::vector<double>& x_rows,
                  const TFSAParams& params, std::vector<double>& fused,
                  std::vector<double>& masks);

// ---------------------------------------------------------------------
// Mask-weighted temporal skip fusion: o^i = Concat_g sum_l up(a_l^g) (*) e_l^{i,g}
// with the per-head masks bilinearly upsampled from the bottleneck
// resolution to resolution i. Skip channels are split evenly across heads.
// ---------------------------------------------------------------------

// masks: (G, L, h0, w0) packed as Tensor with shape {G, L, h0, w0} abuse of
// axes (l-axis = head, c-axis = time). skips: (L, C, H, W). Returns (1, C, H, W).
Tensor fuse_skips(const Tensor& masks, const Tensor& skips);

// Bilinear upsampling (half-pixel centers) that preserves affine
// combinations, so partition-of-unity masks stay normalized.
Tensor bilinear_upsample_plane(const Tensor& src, int out_h, int out_w);

// ---------------------------------------------------------------------
// Toy convolutional denoising networks (2-level encoder/decoder, GELU,
// noise-level embedding added to the first encoder features).
// ---------------------------------------------------------------------

struct NetConfig {
    int in_channels = 3;    // channels of one noisy slice
    int cond_channels = 4;  // channels of one conditioning slice
    int out_channels = 3;
    int width1 = 32;
    int width2 = 64;
    int heads = 4;    // multi-net only
    int key_dim = 8;  // multi-net only
    int seq_len = 1;  // L the net was built for
    uint64_t init_seed = 1;
};

class MonoNet;
class MultiNet;

std::unique_ptr<RawNetwork> make_mono_net(const NetConfig& cfg);
std::unique_ptr<RawNetwork> make_multi_net(const NetConfig& cfg);
std::unique_ptr<RawNetwork> make_raw_network(const std::string& kind, const NetConfig& cfg);

// MultiNet exposes the attention masks of its last forward pass
// ((G, L, h0, w0) layout as in fuse_skips) for tests and visualization.
const Tensor& multi_net_last_masks(const RawNetwork& net);

}  // namespace emrdm
