#include "emrdm/nets.hpp"

#include <cmath>
#include <cstring>
#include <memory>
#include <utility>

#include "emrdm/errors.hpp"
#include "emrdm/kernels.hpp"

namespace emrdm {

// ---------------------------------------------------------------------
// Gaussian oracle
// ---------------------------------------------------------------------

Tensor oracle_denoise(const GaussianOracleParams& p, const Tensor& x_tilde,
                      const Tensor& mu, const Schedule& sched, double t) {
    if (!(p.sigma_data > 0.0)) throw ConfigError("oracle: sigma_data must be > 0");
    if (t < 0.0) throw std::domain_error("oracle_denoise: t must be >= 0");
    check_same_shape(x_tilde, mu, "oracle_denoise");

    const double k = sched.k(t);
    const double sig = sched.sigma(t);
    const double sd2 = p.sigma_data * p.sigma_data;
    const double shrink = sd2 / (sd2 + sig * sig);  // posterior slope

    const int L = x_tilde.shape().l;
    const Shape slice{1, x_tilde.shape().c, x_tilde.shape().h, x_tilde.shape().w};
    Tensor d(slice);
    const size_t n = d.size();
    Tensor tmp(slice);
    for (int l = 0; l < L; ++l) {
        // tmp = x~ - k*mu - m, then D_l = m + shrink * tmp
        for (size_t i = 0; i < n; ++i)
            tmp[i] = x_tilde.slice_data(l)[i] - k * mu.slice_data(l)[i] - p.m;
        kern::axpy(shrink / L, tmp.data(), d.data(), n);
    }
    for (size_t i = 0; i < n; ++i) d[i] += p.m;
    return d;
}

// ---------------------------------------------------------------------
// Attention core
// ---------------------------------------------------------------------

void TFSAConfig::validate() const {
    if (heads < 1 || key_dim < 1) throw ConfigError("tfsa: heads and key_dim must be >= 1");
    if (channels % heads != 0)
        throw ConfigError("tfsa: channels (" + std::to_string(channels) +
                          ") must be divisible by heads (" + std::to_string(heads) + ")");
}

namespace {

// softmax over logits, max-subtracted
void softmax_inplace(std::vector<double>& v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double z = 0.0;
    for (double& x : v) {
        x = std::exp(x - m);
        z += x;
    }
    for (double& x : v) x /= z;
}

}  // namespace

void attention_fuse(const std::vector<double>& q, const std::vector<std::vector<double>>& keys,
                    const std::vector<std::vector<double>>& values, std::vector<double>& masks,
                    std::vector<double>& fused) {
    const size_t L = keys.size();
    if (L == 0 || values.size() != L)
        throw ShapeError("attention_fuse: keys/values length mismatch");
    const size_t dk = q.size();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    std::vector<double> logits(L, 0.0);
    for (size_t l = 0; l < L; ++l) {
        if (keys[l].size() != dk) throw ShapeError("attention_fuse: key width mismatch");
        logits[l] = kern::dot(q.data(), keys[l].data(), dk) * inv_sqrt_dk;
    }
    softmax_inplace(logits);
    masks = logits;

    const size_t C = values[0].size();
    fused.assign(C, 0.0);
    for (size_t l = 0; l < L; ++l) {
        if (values[l].size() != C) throw ShapeError("attention_fuse: value width mismatch");
        kern::axpy(masks[l], values[l].data(), fused.data(), C);
    }
}

void tfsa_forward(const TFSAConfig& cfg, const std::vector<double>& x_rows,
                  const TFSAParams& params, std::vector<double>& fused,
                  std::vector<double>& masks) {
    cfg.validate();
    const int C = cfg.channels;
    const int G = cfg.heads;
    const int dk = cfg.key_dim;
    const int cg = cfg.head_channels();
    if (x_rows.size() % C != 0) throw ShapeError("tfsa_forward: X size not a multiple of C");
    const int L = static_cast<int>(x_rows.size()) / C;

    fused.assign(C, 0.0);
    masks.assign(static_cast<size_t>(G) * L, 0.0);
    for (int g = 0; g < G; ++g) {
        std::vector<double> q(params.q[g].data(), params.q[g].data() + dk);
        std::vector<std::vector<double>> keys(L, std::vector<double>(dk, 0.0));
        std::vector<std::vector<double>> vals(L, std::vector<double>(cg, 0.0));
        for (int l = 0; l < L; ++l) {
            const double* xr = &x_rows[static_cast<size_t>(l) * C + g * cg];
            for (int c = 0; c < cg; ++c) vals[l][c] = xr[c];
            for (int d = 0; d < dk; ++d) {
                double acc = 0.0;
                for (int c = 0; c < cg; ++c) acc += xr[c] * params.w[g].at(0, 0, c, d);
                keys[l][d] = acc;
            }
        }
        std::vector<double> m, f;
        attention_fuse(q, keys, vals, m, f);
        for (int l = 0; l < L; ++l) masks[static_cast<size_t>(g) * L + l] = m[l];
        for (int c = 0; c < cg; ++c) fused[static_cast<size_t>(g) * cg + c] = f[c];
    }
}

// ---------------------------------------------------------------------
// Bilinear mask upsampling and skip fusion
// ---------------------------------------------------------------------

Tensor bilinear_upsample_plane(const Tensor& src, int out_h, int out_w) {
    const Shape s = src.shape();
    if (s.h == out_h && s.w == out_w) return src;
    Tensor out(Shape{s.l, s.c, out_h, out_w});
    const double sy = static_cast<double>(s.h) / out_h;
    const double sx = static_cast<double>(s.w) / out_w;
    for (int l = 0; l < s.l; ++l)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < out_h; ++y) {
                double fy = (y + 0.5) * sy - 0.5;
                fy = std::min(std::max(fy, 0.0), static_cast<double>(s.h - 1));
                const int y0 = static_cast<int>(fy);
                const int y1 = std::min(y0 + 1, s.h - 1);
                const double wy = fy - y0;
                for (int x = 0; x < out_w; ++x) {
                    double fx = (x + 0.5) * sx - 0.5;
                    fx = std::min(std::max(fx, 0.0), static_cast<double>(s.w - 1));
                    const int x0 = static_cast<int>(fx);
                    const int x1 = std::min(x0 + 1, s.w - 1);
                    const double wx = fx - x0;
                    out.at(l, c, y, x) = (1.0 - wy) * ((1.0 - wx) * src.at(l, c, y0, x0) +
                                                       wx * src.at(l, c, y0, x1)) +
                                         wy * ((1.0 - wx) * src.at(l, c, y1, x0) +
                                               wx * src.at(l, c, y1, x1));
                }
            }
    return out;
}

namespace {

// Transpose of bilinear_upsample_plane: scatter d_up back to the source grid.
void bilinear_upsample_backward(const Tensor& d_up, Tensor& d_src) {
    const Shape s = d_src.shape();
    const Shape u = d_up.shape();
    if (s.h == u.h && s.w == u.w) {
        kern::add(d_up.data(), d_src.data(), d_src.size());
        return;
    }
    const double sy = static_cast<double>(s.h) / u.h;
    const double sx = static_cast<double>(s.w) / u.w;
    for (int l = 0; l < s.l; ++l)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < u.h; ++y) {
                double fy = (y + 0.5) * sy - 0.5;
                fy = std::min(std::max(fy, 0.0), static_cast<double>(s.h - 1));
                const int y0 = static_cast<int>(fy);
                const int y1 = std::min(y0 + 1, s.h - 1);
                const double wy = fy - y0;
                for (int x = 0; x < u.w; ++x) {
                    double fx = (x + 0.5) * sx - 0.5;
                    fx = std::min(std::max(fx, 0.0), static_cast<double>(s.w - 1));
                    const int x0 = static_cast<int>(fx);
                    const int x1 = std::min(x0 + 1, s.w - 1);
                    const double wx = fx - x0;
                    const double g = d_up.at(l, c, y, x);
                    d_src.at(l, c, y0, x0) += (1.0 - wy) * (1.0 - wx) * g;
                    d_src.at(l, c, y0, x1) += (1.0 - wy) * wx * g;
                    d_src.at(l, c, y1, x0) += wy * (1.0 - wx) * g;
                    d_src.at(l, c, y1, x1) += wy * wx * g;
                }
            }
}

}  // namespace

Tensor fuse_skips(const Tensor& masks, const Tensor& skips) {
    const int G = masks.shape().l;
    const int L = masks.shape().c;
    if (skips.shape().l != L)
        throw ShapeError("fuse_skips: mask time axis " + std::to_string(L) +
                         " vs skips " + std::to_string(skips.shape().l));
    const int C = skips.shape().c;
    if (C % G != 0)
        throw ShapeError("fuse_skips: skip channels not divisible by head count");
    const int cg = C / G;
    const int H = skips.shape().h;
    const int W = skips.shape().w;

    const Tensor up = bilinear_upsample_plane(masks, H, W);
    Tensor out(Shape{1, C, H, W});
    const size_t plane = static_cast<size_t>(H) * W;
    for (int ch = 0; ch < C; ++ch) {
        const int g = ch / cg;
        for (int l = 0; l < L; ++l) {
            const double* m = &up.at(g, l, 0, 0);
            const double* e = &skips.at(l, ch, 0, 0);
            double* o = &out.at(0, ch, 0, 0);
            for (size_t i = 0; i < plane; ++i) o[i] += m[i] * e[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------
// Layer primitives
// ---------------------------------------------------------------------

namespace {

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z * 0.70710678118654752440)); }

double gelu_grad(double z) {
    return 0.5 * (1.0 + std::erf(z * 0.70710678118654752440)) +
           z * std::exp(-0.5 * z * z) * 0.39894228040143267794;  // 1/sqrt(2*pi)
}

void gelu_forward(const Tensor& pre, Tensor& out) {
    for (size_t i = 0; i < pre.size(); ++i) out[i] = gelu(pre[i]);
}

void gelu_backward(const Tensor& pre, Tensor& d) {
    for (size_t i = 0; i < d.size(); ++i) d[i] *= gelu_grad(pre[i]);
}

struct Conv {
    Param w;  // shape (out_c, in_c, 3, 3)
    Param b;  // shape (1,1,1,out_c)
    int in_c, out_c, stride;

    Conv(const std::string& name, int in_channels, int out_channels, int s, Rng& rng)
        : w(name + ".w", Shape{out_channels, in_channels, 3, 3}),
          b(name + ".b", Shape{1, 1, 1, out_channels}),
          in_c(in_channels), out_c(out_channels), stride(s) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(in_channels) * 9.0);
        for (size_t i = 0; i < w.value.size(); ++i) w.value[i] = scale * rng.normal();
    }

    Tensor forward(const Tensor& x) const {
        const int H = x.shape().h, W = x.shape().w;
        if (stride == 2 && (H % 2 != 0 || W % 2 != 0))
            throw ShapeError("conv: spatial dims must be divisible by the stride, got " +
                             x.shape().str());
        const int Ho = H / stride, Wo = W / stride;
        Tensor y(Shape{1, out_c, Ho, Wo});
        for (int co = 0; co < out_c; ++co)
            kern::fill(b.value[co], &y.at(0, co, 0, 0), static_cast<size_t>(Ho) * Wo);

        if (stride == 1) {
            for (int co = 0; co < out_c; ++co)
                for (int ci = 0; ci < in_c; ++ci)
                    for (int ky = 0; ky < 3; ++ky) {
                        const int oy0 = std::max(0, 1 - ky);
                        const int oy1 = std::min(H, H + 1 - ky);
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ox0 = std::max(0, 1 - kx);
                            const int ox1 = std::min(W, W + 1 - kx);
                            const int len = ox1 - ox0;
                            if (len <= 0) continue;
                            const double wv = w.value.at(co, ci, ky, kx);
                            for (int oy = oy0; oy < oy1; ++oy)
                                kern::axpy(wv, &x.at(0, ci, oy + ky - 1, ox0 + kx - 1),
                                           &y.at(0, co, oy, ox0), len);
                        }
                    }
        } else {
            for (int co = 0; co < out_c; ++co)
                for (int oy = 0; oy < Ho; ++oy)
                    for (int ox = 0; ox < Wo; ++ox) {
                        double acc = y.at(0, co, oy, ox);
                        for (int ci = 0; ci < in_c; ++ci)
                            for (int ky = 0; ky < 3; ++ky) {
                                const int iy = 2 * oy + ky - 1;
                                if (iy < 0 || iy >= H) continue;
                                for (int kx = 0; kx < 3; ++kx) {
                                    const int ix = 2 * ox + kx - 1;
                                    if (ix < 0 || ix >= W) continue;
                                    acc += w.value.at(co, ci, ky, kx) * x.at(0, ci, iy, ix);
                                }
                            }
                        y.at(0, co, oy, ox) = acc;
                    }
        }
        return y;
    }

    // Accumulates dW/db and optionally the input gradient.
    void backward(const Tensor& x, const Tensor& dout, Tensor* dx) {
        const int H = x.shape().h, W = x.shape().w;
        const int Ho = dout.shape().h, Wo = dout.shape().w;
        for (int co = 0; co < out_c; ++co)
            b.grad[co] += kern::sum(&dout.at(0, co, 0, 0), static_cast<size_t>(Ho) * Wo);

        if (stride == 1) {
            for (int co = 0; co < out_c; ++co)
                for (int ci = 0; ci < in_c; ++ci)
                    for (int ky = 0; ky < 3; ++ky) {
                        const int oy0 = std::max(0, 1 - ky);
                        const int oy1 = std::min(H, H + 1 - ky);
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ox0 = std::max(0, 1 - kx);
                            const int ox1 = std::min(W, W + 1 - kx);
                            const int len = ox1 - ox0;
                            if (len <= 0) continue;
                            double acc = 0.0;
                            const double wv = w.value.at(co, ci, ky, kx);
                            for (int oy = oy0; oy < oy1; ++oy) {
                                const double* drow = &dout.at(0, co, oy, ox0);
                                const double* xrow = &x.at(0, ci, oy + ky - 1, ox0 + kx - 1);
                                acc += kern::dot(drow, xrow, len);
                                if (dx != nullptr)
                                    kern::axpy(wv, drow,
                                               &dx->at(0, ci, oy + ky - 1, ox0 + kx - 1), len);
                            }
                            w.grad.at(co, ci, ky, kx) += acc;
                        }
                    }
        } else {
            for (int co = 0; co < out_c; ++co)
                for (int oy = 0; oy < Ho; ++oy)
                    for (int ox = 0; ox < Wo; ++ox) {
                        const double g = dout.at(0, co, oy, ox);
                        for (int ci = 0; ci < in_c; ++ci)
                            for (int ky = 0; ky < 3; ++ky) {
                                const int iy = 2 * oy + ky - 1;
                                if (iy < 0 || iy >= H) continue;
                                for (int kx = 0; kx < 3; ++kx) {
                                    const int ix = 2 * ox + kx - 1;
                                    if (ix < 0 || ix >= W) continue;
                                    w.grad.at(co, ci, ky, kx) += g * x.at(0, ci, iy, ix);
                                    if (dx != nullptr)
                                        dx->at(0, ci, iy, ix) +=
                                            g * w.value.at(co, ci, ky, kx);
                                }
                            }
                    }
        }
    }
};

Tensor upsample2(const Tensor& x) {
    const Shape s = x.shape();
    Tensor y(Shape{s.l, s.c, s.h * 2, s.w * 2});
    for (int l = 0; l < s.l; ++l)
        for (int c = 0; c < s.c; ++c)
            for (int iy = 0; iy < s.h; ++iy)
                for (int ix = 0; ix < s.w; ++ix) {
                    const double v = x.at(l, c, iy, ix);
                    y.at(l, c, 2 * iy, 2 * ix) = v;
                    y.at(l, c, 2 * iy, 2 * ix + 1) = v;
                    y.at(l, c, 2 * iy + 1, 2 * ix) = v;
                    y.at(l, c, 2 * iy + 1, 2 * ix + 1) = v;
                }
    return y;
}

Tensor upsample2_backward(const Tensor& dy) {
    const Shape s = dy.shape();
    Tensor dx(Shape{s.l, s.c, s.h / 2, s.w / 2});
    for (int l = 0; l < s.l; ++l)
        for (int c = 0; c < s.c; ++c)
            for (int iy = 0; iy < s.h / 2; ++iy)
                for (int ix = 0; ix < s.w / 2; ++ix)
                    dx.at(l, c, iy, ix) = dy.at(l, c, 2 * iy, 2 * ix) +
                                          dy.at(l, c, 2 * iy, 2 * ix + 1) +
                                          dy.at(l, c, 2 * iy + 1, 2 * ix) +
                                          dy.at(l, c, 2 * iy + 1, 2 * ix + 1);
    return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Shape sa = a.shape(), sb = b.shape();
    if (sa.l != 1 || sb.l != 1 || sa.h != sb.h || sa.w != sb.w)
        throw ShapeError("concat_channels: incompatible " + sa.str() + " vs " + sb.str());
    Tensor y(Shape{1, sa.c + sb.c, sa.h, sa.w});
    kern::copy(a.data(), y.data(), a.size());
    kern::copy(b.data(), y.data() + a.size(), b.size());
    return y;
}

void split_channels(const Tensor& dy, Tensor& da, Tensor& db) {
    kern::copy(dy.data(), da.data(), da.size());
    kern::copy(dy.data() + da.size(), db.data(), db.size());
}

// Noise-level embedding: per-channel affine image of the scalar c_noise,
// added to pre-activation encoder features.
struct Embed {
    Param w, b;
    explicit Embed(const std::string& name, int channels, Rng& rng)
        : w(name + ".w", Shape{1, 1, 1, channels}), b(name + ".b", Shape{1, 1, 1, channels}) {
        for (size_t i = 0; i < w.value.size(); ++i) w.value[i] = 0.1 * rng.normal();
    }
    void add_to(Tensor& pre, double c_noise) const {
        const int C = pre.shape().c;
        const size_t plane = static_cast<size_t>(pre.shape().h) * pre.shape().w;
        for (int c = 0; c < C; ++c) {
            const double e = w.value[c] * c_noise + b.value[c];
            double* row = &pre.at(0, c, 0, 0);
            for (size_t i = 0; i < plane; ++i) row[i] += e;
        }
    }
    void backward(const Tensor& dpre, double c_noise) {
        const int C = dpre.shape().c;
        const size_t plane = static_cast<size_t>(dpre.shape().h) * dpre.shape().w;
        for (int c = 0; c < C; ++c) {
            const double g = kern::sum(&dpre.at(0, c, 0, 0), plane);
            w.grad[c] += g * c_noise;
            b.grad[c] += g;
        }
    }
};

Tensor slice_or_broadcast(const Tensor& cond, int l) {
    return cond.shape().l == 1 ? cond : cond.time_slice(l);
}

}  // namespace

// ---------------------------------------------------------------------
// Mono-temporal network
// ---------------------------------------------------------------------

namespace {

struct MonoTape {
    Tensor x_in;                 // concat(x, cond)
    Tensor pre1, e1;             // full res, w1
    Tensor pre_down, d;          // half res, w2
    Tensor pre_mid, bett;        // half res, w2
    Tensor cat2, pre_dec2, u2;   // half res
    Tensor up, cat1, pre_dec1, u1;  // full res
    double c_noise = 0.0;
};

}  // namespace

class MonoNet : public RawNetwork {
public:
    explicit MonoNet(const NetConfig& cfg)
        : cfg_(cfg),
          rng_(Rng::stream(cfg.init_seed, "mono_init")),
          enc1_("enc1", cfg.in_channels + cfg.cond_channels, cfg.width1, 1, rng_),
          emb1_("emb1", cfg.width1, rng_),
          down_("down", cfg.width1, cfg.width2, 2, rng_),
          mid_("mid", cfg.width2, cfg.width2, 1, rng_),
          dec2_("dec2", cfg.width2 * 2, cfg.width2, 1, rng_),
          dec1_("dec1", cfg.width2 + cfg.width1, cfg.width1, 1, rng_),
          out_("out", cfg.width1, cfg.out_channels, 1, rng_) {}

    Tensor forward(const Tensor& x_seq, double c_noise, const Tensor& cond) const override {
        MonoTape tape;
        return run(x_seq, c_noise, cond, tape);
    }

    Tensor forward_train(const Tensor& x_seq, double c_noise, const Tensor& cond) override {
        tape_ = std::make_unique<MonoTape>();
        return run(x_seq, c_noise, cond, *tape_);
    }

    void backward(const Tensor& d_out) override {
        if (!tape_) throw NumericError("MonoNet::backward without forward_train");
        MonoTape& t = *tape_;

        Tensor du1 = Tensor(t.u1.shape());
        out_.backward(t.u1, d_out, &du1);

        gelu_backward(t.pre_dec1, du1);
        Tensor dcat1(t.cat1.shape());
        dec1_.backward(t.cat1, du1, &dcat1);
        Tensor dup(t.up.shape()), de1(t.e1.shape());
        split_channels(dcat1, dup, de1);

        Tensor du2 = upsample2_backward(dup);
        gelu_backward(t.pre_dec2, du2);
        Tensor dcat2(t.cat2.shape());
        dec2_.backward(t.cat2, du2, &dcat2);
        Tensor db(t.bett.shape()), dd(t.d.shape());
        split_channels(dcat2, db, dd);

        gelu_backward(t.pre_mid, db);
        mid_.backward(t.d, db, &dd);  // accumulates into dd

        gelu_backward(t.pre_down, dd);
        Tensor de1_more(t.e1.shape());
        down_.backward(t.e1, dd, &de1_more);
        kern::add(de1_more.data(), de1.data(), de1.size());

        gelu_backward(t.pre1, de1);
        emb1_.backward(de1, t.c_noise);
        enc1_.backward(t.x_in, de1, nullptr);
    }

    std::vector<Param*> params() override {
        return {&enc1_.w, &enc1_.b, &emb1_.w, &emb1_.b, &down_.w, &down_.b,
                &mid_.w,  &mid_.b,  &dec2_.w, &dec2_.b, &dec1_.w, &dec1_.b,
                &out_.w,  &out_.b};
    }

    int sequence_length() const override { return 1; }

    std::vector<std::pair<std::string, std::string>> topology() const override {
        return {{"kind", "mono"},
                {"in_channels", std::to_string(cfg_.in_channels)},
                {"cond_channels", std::to_string(cfg_.cond_channels)},
                {"out_channels", std::to_string(cfg_.out_channels)},
                {"width1", std::to_string(cfg_.width1)},
                {"width2", std::to_string(cfg_.width2)},
                {"seq_len", "1"}};
    }

private:
    Tensor run(const Tensor& x_seq, double c_noise, const Tensor& cond, MonoTape& t) const {
        if (x_seq.shape().l != 1)
            throw ShapeError("MonoNet: expected a single temporal slice, got " +
                             x_seq.shape().str());
        if (x_seq.shape().h % 2 != 0 || x_seq.shape().w % 2 != 0)
            throw ShapeError("MonoNet: spatial dims must be divisible by 2");
        t.c_noise = c_noise;
        t.x_in = concat_channels(x_seq, slice_or_broadcast(cond, 0));

        t.pre1 = enc1_.forward(t.x_in);
        emb1_.add_to(t.pre1, c_noise);
        t.e1 = Tensor(t.pre1.shape());
        gelu_forward(t.pre1, t.e1);

        t.pre_down = down_.forward(t.e1);
        t.d = Tensor(t.pre_down.shape());
        gelu_forward(t.pre_down, t.d);

        t.pre_mid = mid_.forward(t.d);
        t.bett = Tensor(t.pre_mid.shape());
        gelu_forward(t.pre_mid, t.bett);

        t.cat2 = concat_channels(t.bett, t.d);
        t.pre_dec2 = dec2_.forward(t.cat2);
        t.u2 = Tensor(t.pre_dec2.shape());
        gelu_forward(t.pre_dec2, t.u2);

        t.up = upsample2(t.u2);
        t.cat1 = concat_channels(t.up, t.e1);
        t.pre_dec1 = dec1_.forward(t.cat1);
        t.u1 = Tensor(t.pre_dec1.shape());
        gelu_forward(t.pre_dec1, t.u1);

        return out_.forward(t.u1);
    }

    NetConfig cfg_;
    Rng rng_;
    Conv enc1_;
    Embed emb1_;
    Conv down_, mid_, dec2_, dec1_, out_;
    std::unique_ptr<MonoTape> tape_;
};

// ---------------------------------------------------------------------
// Multi-temporal network: weight-sharing encoder per slice, TFSA
// bottleneck, mask-weighted skip fusion, single decoder.
// ---------------------------------------------------------------------

namespace {

struct MultiTape {
    std::vector<Tensor> x_in, pre1, e1, pre_down, d, pre_mid, bott;
    Tensor masks;      // (G, L, h0, w0)
    Tensor k_store;    // (G, L, dk, h0*w0)
    Tensor fused;      // (1, w2, h0, w0)
    Tensor up_masks_full;  // masks upsampled to full res
    Tensor o_half, o_full;
    Tensor cat2, pre_dec2, u2, up, cat1, pre_dec1, u1;
    double c_noise = 0.0;
};

}  // namespace

class MultiNet : public RawNetwork {
public:
    explicit MultiNet(const NetConfig& cfg)
        : cfg_(cfg),
          rng_(Rng::stream(cfg.init_seed, "multi_init")),
          enc1_("enc1", cfg.in_channels + cfg.cond_channels, cfg.width1, 1, rng_),
          emb1_("emb1", cfg.width1, rng_),
          down_("down", cfg.width1, cfg.width2, 2, rng_),
          mid_("mid", cfg.width2, cfg.width2, 1, rng_),
          dec2_("dec2", cfg.width2 * 2, cfg.width2, 1, rng_),
          dec1_("dec1", cfg.width2 + cfg.width1, cfg.width1, 1, rng_),
          out_("out", cfg.width1, cfg.out_channels, 1, rng_) {
        tfsa_cfg_ = TFSAConfig{cfg.heads, cfg.key_dim, cfg.width2};
        tfsa_cfg_.validate();
        if (cfg.width1 % cfg.heads != 0)
            throw ConfigError("MultiNet: width1 must be divisible by heads for skip fusion");
        const int cg = tfsa_cfg_.head_channels();
        const double wscale = 1.0 / std::sqrt(static_cast<double>(cg));
        for (int g = 0; g < cfg.heads; ++g) {
            tfsa_w_.emplace_back("tfsa.w" + std::to_string(g), Shape{1, 1, cg, cfg.key_dim});
            tfsa_q_.emplace_back("tfsa.q" + std::to_string(g), Shape{1, 1, 1, cfg.key_dim});
            for (size_t i = 0; i < tfsa_w_.back().value.size(); ++i)
                tfsa_w_.back().value[i] = wscale * rng_.normal();
            // learnable query, standard-normal init
            for (size_t i = 0; i < tfsa_q_.back().value.size(); ++i)
                tfsa_q_.back().value[i] = rng_.normal();
        }
    }

    Tensor forward(const Tensor& x_seq, double c_noise, const Tensor& cond) const override {
        MultiTape tape;
        Tensor y = run(x_seq, c_noise, cond, tape);
        last_masks_ = tape.masks;
        return y;
    }

    Tensor forward_train(const Tensor& x_seq, double c_noise, const Tensor& cond) override {
        tape_ = std::make_unique<MultiTape>();
        Tensor y = run(x_seq, c_noise, cond, *tape_);
        last_masks_ = tape_->masks;
        return y;
    }

    void backward(const Tensor& d_out) override;

    std::vector<Param*> params() override {
        std::vector<Param*> ps = {&enc1_.w, &enc1_.b, &emb1_.w, &emb1_.b, &down_.w,
                                  &down_.b, &mid_.w,  &mid_.b};
        for (auto& p : tfsa_w_) ps.push_back(&p);
        for (auto& p : tfsa_q_) ps.push_back(&p);
        ps.insert(ps.end(), {&dec2_.w, &dec2_.b, &dec1_.w, &dec1_.b, &out_.w, &out_.b});
        return ps;
    }

    int sequence_length() const override { return cfg_.seq_len; }

    std::vector<std::pair<std::string, std::string>> topology() const override {
        return {{"kind", "multi"},
                {"in_channels", std::to_string(cfg_.in_channels)},
                {"cond_channels", std::to_string(cfg_.cond_channels)},
                {"out_channels", std::to_string(cfg_.out_channels)},
                {"width1", std::to_string(cfg_.width1)},
                {"width2", std::to_string(cfg_.width2)},
                {"heads", std::to_string(cfg_.heads)},
                {"key_dim", std::to_string(cfg_.key_dim)},
                {"seq_len", std::to_string(cfg_.seq_len)}};
    }

    const Tensor& last_masks() const { return last_masks_; }

private:
    Tensor run(const Tensor& x_seq, double c_noise, const Tensor& cond, MultiTape& t) const;

    NetConfig cfg_;
    TFSAConfig tfsa_cfg_;
    Rng rng_;
    Conv enc1_;
    Embed emb1_;
    Conv down_, mid_, dec2_, dec1_, out_;
    std::vector<Param> tfsa_w_, tfsa_q_;
    std::unique_ptr<MultiTape> tape_;
    mutable Tensor last_masks_;
};

Tensor MultiNet::run(const Tensor& x_seq, double c_noise, const Tensor& cond,
                     MultiTape& t) const {
    const int L = x_seq.shape().l;
    if (x_seq.shape().h % 2 != 0 || x_seq.shape().w % 2 != 0)
        throw ShapeError("MultiNet: spatial dims must be divisible by 2");
    if (cond.shape().l != 1 && cond.shape().l != L)
        throw ShapeError("MultiNet: cond must carry 1 or L temporal slices");
    t.c_noise = c_noise;

    t.x_in.resize(L);
    t.pre1.resize(L);
    t.e1.resize(L);
    t.pre_down.resize(L);
    t.d.resize(L);
    t.pre_mid.resize(L);
    t.bott.resize(L);

    // Shared encoder applied to every slice.
    for (int l = 0; l < L; ++l) {
        t.x_in[l] = concat_channels(x_seq.time_slice(l), slice_or_broadcast(cond, l));
        t.pre1[l] = enc1_.forward(t.x_in[l]);
        emb1_.add_to(t.pre1[l], c_noise);
        t.e1[l] = Tensor(t.pre1[l].shape());
        gelu_forward(t.pre1[l], t.e1[l]);

        t.pre_down[l] = down_.forward(t.e1[l]);
        t.d[l] = Tensor(t.pre_down[l].shape());
        gelu_forward(t.pre_down[l], t.d[l]);

        t.pre_mid[l] = mid_.forward(t.d[l]);
        t.bott[l] = Tensor(t.pre_mid[l].shape());
        gelu_forward(t.pre_mid[l], t.bott[l]);
    }

    const int h0 = t.bott[0].shape().h, w0 = t.bott[0].shape().w;
    const int G = tfsa_cfg_.heads, dk = tfsa_cfg_.key_dim, cg = tfsa_cfg_.head_channels();
    const int C2 = cfg_.width2;
    const size_t nloc = static_cast<size_t>(h0) * w0;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    t.masks = Tensor(Shape{G, L, h0, w0});
    t.k_store = Tensor(Shape{G, L, dk, h0 * w0});
    t.fused = Tensor(Shape{1, C2, h0, w0});

    // TFSA per spatial location; the temporal dimension collapses here.
    std::vector<double> logits(L);
    for (size_t loc = 0; loc < nloc; ++loc) {
        const int y = static_cast<int>(loc) / w0;
        const int x = static_cast<int>(loc) % w0;
        for (int g = 0; g < G; ++g) {
            const Tensor& wg = tfsa_w_[g].value;
            const Tensor& qg = tfsa_q_[g].value;
            for (int l = 0; l < L; ++l) {
                double logit = 0.0;
                for (int d = 0; d < dk; ++d) {
                    double kv = 0.0;
                    for (int c = 0; c < cg; ++c)
                        kv += t.bott[l].at(0, g * cg + c, y, x) * wg.at(0, 0, c, d);
                    t.k_store.at(g, l, d, static_cast<int>(loc)) = kv;
                    logit += qg[d] * kv;
                }
                logits[l] = logit * inv_sqrt_dk;
            }
            softmax_inplace(logits);
            for (int l = 0; l < L; ++l) {
                t.masks.at(g, l, y, x) = logits[l];
                for (int c = 0; c < cg; ++c)
                    t.fused.at(0, g * cg + c, y, x) +=
                        logits[l] * t.bott[l].at(0, g * cg + c, y, x);
            }
        }
    }

    // Mask-weighted skip fusion at each resolution.
    Tensor d_stack(Shape{L, C2, h0, w0});
    for (int l = 0; l < L; ++l) d_stack.set_time_slice(l, t.d[l]);
    t.o_half = fuse_skips(t.masks, d_stack);

    Tensor e1_stack(Shape{L, cfg_.width1, h0 * 2, w0 * 2});
    for (int l = 0; l < L; ++l) e1_stack.set_time_slice(l, t.e1[l]);
    t.up_masks_full = bilinear_upsample_plane(t.masks, h0 * 2, w0 * 2);
    t.o_full = fuse_skips(t.masks, e1_stack);

    t.cat2 = concat_channels(t.fused, t.o_half);
    t.pre_dec2 = dec2_.forward(t.cat2);
    t.u2 = Tensor(t.pre_dec2.shape());
    gelu_forward(t.pre_dec2, t.u2);

    t.up = upsample2(t.u2);
    t.cat1 = concat_channels(t.up, t.o_full);
    t.pre_dec1 = dec1_.forward(t.cat1);
    t.u1 = Tensor(t.pre_dec1.shape());
    gelu_forward(t.pre_dec1, t.u1);

    return out_.forward(t.u1);
}

void MultiNet::backward(const Tensor& d_out) {
    if (!tape_) throw NumericError("MultiNet::backward without forward_train");
    MultiTape& t = *tape_;
    const int L = static_cast<int>(t.e1.size());
    const int G = tfsa_cfg_.heads, dk = tfsa_cfg_.key_dim, cg = tfsa_cfg_.head_channels();
    const int h0 = t.fused.shape().h, w0 = t.fused.shape().w;

    Tensor du1(t.u1.shape());
    out_.backward(t.u1, d_out, &du1);

    gelu_backward(t.pre_dec1, du1);
    Tensor dcat1(t.cat1.shape());
    dec1_.backward(t.cat1, du1, &dcat1);
    Tensor dup(t.up.shape()), do_full(t.o_full.shape());
    split_channels(dcat1, dup, do_full);

    Tensor du2 = upsample2_backward(dup);
    gelu_backward(t.pre_dec2, du2);
    Tensor dcat2(t.cat2.shape());
    dec2_.backward(t.cat2, du2, &dcat2);
    Tensor dfused(t.fused.shape()), do_half(t.o_half.shape());
    split_channels(dcat2, dfused, do_half);

    // Fusion backward: gradients for the skip stacks and the masks.
    Tensor dmasks(t.masks.shape());
    std::vector<Tensor> de1(L), dd(L);
    for (int l = 0; l < L; ++l) {
        de1[l] = Tensor(t.e1[l].shape());
        dd[l] = Tensor(t.d[l].shape());
    }

    // Half-resolution fusion (masks at native resolution).
    {
        const int C = t.o_half.shape().c;
        const int cgs = C / G;
        const size_t plane = static_cast<size_t>(h0) * w0;
        for (int ch = 0; ch < C; ++ch) {
            const int g = ch / cgs;
            for (int l = 0; l < L; ++l) {
                const double* m = &t.masks.at(g, l, 0, 0);
                const double* go = &do_half.at(0, ch, 0, 0);
                const double* e = &t.d[l].at(0, ch, 0, 0);
                double* ge = &dd[l].at(0, ch, 0, 0);
                double* gm = &dmasks.at(g, l, 0, 0);
                for (size_t i = 0; i < plane; ++i) {
                    ge[i] += m[i] * go[i];
                    gm[i] += e[i] * go[i];
                }
            }
        }
    }

    // Full-resolution fusion through the upsampled masks.
    {
        const int C = t.o_full.shape().c;
        const int cgs = C / G;
        const int H = t.o_full.shape().h, W = t.o_full.shape().w;
        const size_t plane = static_cast<size_t>(H) * W;
        Tensor dup_masks(t.up_masks_full.shape());
        for (int ch = 0; ch < C; ++ch) {
            const int g = ch / cgs;
            for (int l = 0; l < L; ++l) {
                const double* m = &t.up_masks_full.at(g, l, 0, 0);
                const double* go = &do_full.at(0, ch, 0, 0);
                const double* e = &t.e1[l].at(0, ch, 0, 0);
                double* ge = &de1[l].at(0, ch, 0, 0);
                double* gm = &dup_masks.at(g, l, 0, 0);
                for (size_t i = 0; i < plane; ++i) {
                    ge[i] += m[i] * go[i];
                    gm[i] += e[i] * go[i];
                }
            }
        }
        bilinear_upsample_backward(dup_masks, dmasks);
    }

    // TFSA backward: dFused and dMasks -> bottleneck features + Q/W grads.
    std::vector<Tensor> dbott(L);
    for (int l = 0; l < L; ++l) dbott[l] = Tensor(t.bott[l].shape());
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    std::vector<double> da(L), dlogit(L);

    for (int y = 0; y < h0; ++y)
        for (int x = 0; x < w0; ++x) {
            const int loc = y * w0 + x;
            for (int g = 0; g < G; ++g) {
                const Tensor& wg = tfsa_w_[g].value;
                const Tensor& qg = tfsa_q_[g].value;
                Tensor& dwg = tfsa_w_[g].grad;
                Tensor& dqg = tfsa_q_[g].grad;

                for (int l = 0; l < L; ++l) {
                    double acc = dmasks.at(g, l, y, x);
                    for (int c = 0; c < cg; ++c)
                        acc += dfused.at(0, g * cg + c, y, x) *
                               t.bott[l].at(0, g * cg + c, y, x);
                    da[l] = acc;
                    // value path: dX += a_l * dFused
                    const double a = t.masks.at(g, l, y, x);
                    for (int c = 0; c < cg; ++c)
                        dbott[l].at(0, g * cg + c, y, x) +=
                            a * dfused.at(0, g * cg + c, y, x);
                }
                double sum_da_a = 0.0;
                for (int l = 0; l < L; ++l) sum_da_a += da[l] * t.masks.at(g, l, y, x);
                for (int l = 0; l < L; ++l)
                    dlogit[l] = t.masks.at(g, l, y, x) * (da[l] - sum_da_a);

                for (int l = 0; l < L; ++l) {
                    const double gl = dlogit[l] * inv_sqrt_dk;
                    for (int d = 0; d < dk; ++d) {
                        const double kv = t.k_store.at(g, l, d, loc);
                        dqg[d] += gl * kv;
                        const double dkv = gl * qg[d];
                        for (int c = 0; c < cg; ++c) {
                            dwg.at(0, 0, c, d) += t.bott[l].at(0, g * cg + c, y, x) * dkv;
                            dbott[l].at(0, g * cg + c, y, x) += dkv * wg.at(0, 0, c, d);
                        }
                    }
                }
            }
        }

    // Shared-encoder backward per slice; parameter grads accumulate.
    for (int l = 0; l < L; ++l) {
        gelu_backward(t.pre_mid[l], dbott[l]);
        mid_.backward(t.d[l], dbott[l], &dd[l]);

        gelu_backward(t.pre_down[l], dd[l]);
        down_.backward(t.e1[l], dd[l], &de1[l]);

        gelu_backward(t.pre1[l], de1[l]);
        emb1_.backward(de1[l], t.c_noise);
        enc1_.backward(t.x_in[l], de1[l], nullptr);
    }
}

// ---------------------------------------------------------------------
// Factories
// ---------------------------------------------------------------------

std::unique_ptr<RawNetwork> make_mono_net(const NetConfig& cfg) {
    if (cfg.seq_len != 1) throw ConfigError("mono net requires seq_len = 1");
    return std::make_unique<MonoNet>(cfg);
}

std::unique_ptr<RawNetwork> make_multi_net(const NetConfig& cfg) {
    if (cfg.seq_len < 1) throw ConfigError("multi net requires seq_len >= 1");
    return std::make_unique<MultiNet>(cfg);
}

std::unique_ptr<RawNetwork> make_raw_network(const std::string& kind, const NetConfig& cfg) {
    if (kind == "mono") return make_mono_net(cfg);
    if (kind == "multi") return make_multi_net(cfg);
    throw ConfigError("unknown network kind '" + kind + "' (expected mono|multi)");
}

const Tensor& multi_net_last_masks(const RawNetwork& net) {
    const auto* m = dynamic_cast<const MultiNet*>(&net);
    if (m == nullptr) throw ConfigError("last_masks: network is not a MultiNet");
    return m->last_masks();
}

}  // namespace emrdm
