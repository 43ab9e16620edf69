#include "emrdm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "emrdm/checkpoint.hpp"
#include "emrdm/diffusion.hpp"
#include "emrdm/errors.hpp"
#include "emrdm/kernels.hpp"
#include "emrdm/metrics.hpp"
#include "emrdm/tensor_io.hpp"

namespace fs = std::filesystem;

namespace emrdm {

void TrainConfig::validate() const {
    if (!(p_std > 0.0)) throw ConfigError("trainer: p_std must be > 0");
    if (batch_size < 1) throw ConfigError("trainer: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("trainer: learning_rate must be > 0");
    if (epochs < 0) throw ConfigError("trainer: epochs must be >= 0");
    precond.validate();
}

std::vector<TrainItem> make_train_items(const std::vector<DataItem>& items, bool zero_cond) {
    std::vector<TrainItem> out;
    out.reserve(items.size());
    for (const DataItem& d : items) {
        TrainItem t;
        t.clean = to_model_space(d.clean);
        t.mu = to_model_space(d.mu);
        t.cond = make_condition(d, zero_cond);
        out.push_back(std::move(t));
    }
    return out;
}

double draw_sigma(const TrainConfig& cfg, Rng& rng) {
    return std::exp(cfg.p_mean + cfg.p_std * rng.normal());
}

double weighted_loss(const Denoiser& denoiser, const TrainItem& item, const TrainConfig& cfg,
                     double t, Rng& noise_rng) {
    const Tensor x_tilde = perturb(item.clean, item.mu, cfg.sched, t, noise_rng);
    const Tensor d = denoiser.denoise(x_tilde, t, item.mu, item.cond);
    const double lambda = loss_weight(cfg.precond, cfg.sched, t);
    return lambda * sq_error(d, item.clean) / static_cast<double>(d.size());
}

double train_step(RawNetwork& net, const std::vector<const TrainItem*>& batch,
                  const TrainConfig& cfg, uint64_t step_index, uint64_t opt_step) {
    if (batch.empty()) throw ConfigError("train_step: empty batch");
    net.zero_grads();

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double total_loss = 0.0;

    for (size_t j = 0; j < batch.size(); ++j) {
        const TrainItem& item = *batch[j];
        if (item.mu.shape().l != cfg.precond.seq_len)
            throw ShapeError("train_step: item L does not match precondition seq_len");
        Rng rng = Rng::stream(cfg.seed, "train_item",
                              step_index * static_cast<uint64_t>(cfg.batch_size) + j);
        const double sigma = draw_sigma(cfg, rng);
        const double t = sigma;  // sigma(t) = t identification

        const Tensor x_tilde = perturb(item.clean, item.mu, cfg.sched, t, rng);
        const Coefficients c = coefficients(cfg.precond, cfg.sched, t);

        Tensor scaled = x_tilde;
        kern::scale(c.c_in, scaled.data(), scaled.size());
        const Tensor f_out = net.forward_train(scaled, c.c_noise, item.cond);

        // D = mean_l(c_skip x~^l) + c_out F
        Tensor d(f_out.shape());
        const double mean_coef = c.c_skip / x_tilde.shape().l;
        for (int l = 0; l < x_tilde.shape().l; ++l)
            kern::axpy(mean_coef, x_tilde.slice_data(l), d.data(), d.size());
        kern::axpy(c.c_out, f_out.data(), d.data(), d.size());

        const double n_out = static_cast<double>(d.size());
        const double lambda = 1.0 / (c.c_out * c.c_out);
        const double loss = lambda * sq_error(d, item.clean) / n_out;
        if (!std::isfinite(loss))
            throw NumericError("train_step: non-finite loss (sigma=" + std::to_string(sigma) +
                               ", batch index " + std::to_string(j) + ")");
        total_loss += loss;

        // dL/dF = lambda * 2/n * c_out * (D - x0), averaged over the batch.
        Tensor df(d.shape());
        kern::lincomb(1.0, d.data(), -1.0, item.clean.data(), df.data(), d.size());
        kern::scale(2.0 * inv_batch / (n_out * c.c_out), df.data(), df.size());
        net.backward(df);
    }

    apply_optimizer_step(net.params(), cfg, opt_step);
    return total_loss * inv_batch;
}

void apply_optimizer_step(std::vector<Param*> params, const TrainConfig& cfg,
                          uint64_t opt_step) {
    // Momentum-free adaptive update: second-moment accumulator with bias
    // correction, global gradient-norm clipping, fixed learning rate.
    constexpr double beta2 = 0.99;
    constexpr double eps = 1e-8;

    double norm_sq = 0.0;
    for (Param* p : params) norm_sq += kern::sumsq(p->grad.data(), p->grad.size());
    const double norm = std::sqrt(norm_sq);
    const double scale =
        (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

    const double bias = 1.0 - std::pow(beta2, static_cast<double>(opt_step));
    for (Param* p : params) {
        for (size_t i = 0; i < p->value.size(); ++i) {
            const double g = p->grad[i] * scale;
            const double v = f32_snap(beta2 * p->opt_v[i] + (1.0 - beta2) * g * g);
            p->opt_v[i] = v;
            const double vhat = v / bias;
            p->value[i] =
                f32_snap(p->value[i] - cfg.learning_rate * g / (std::sqrt(vhat) + eps));
        }
    }
}

namespace {

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed, uint64_t epoch) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    Rng rng = Rng::stream(seed, "epoch_perm", epoch);
    for (size_t i = n; i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.next_u64() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

double validation_psnr(const RawNetwork& net, const std::vector<DataItem>& val_items,
                       const TrainConfig& cfg, SamplerConfig scfg, bool zero_cond) {
    if (val_items.empty()) return 0.0;
    scfg.s_churn = 0.0;  // deterministic validation
    scfg.seed = derive_stream(cfg.seed, "val");
    const PreconditionedDenoiser denoiser(net, cfg.precond, cfg.sched);

    double total = 0.0;
    for (const DataItem& d : val_items) {
        const Tensor mu = to_model_space(d.mu);
        const Tensor cond = make_condition(d, zero_cond);
        const Tensor restored = sample(denoiser, mu, cond, cfg.sched, scfg);
        total += psnr_display(psnr(d.clean, to_unit_range(restored), 1.0));
    }
    return total / static_cast<double>(val_items.size());
}

}  // namespace

FitResult fit(RawNetwork& net, const Dataset& ds, const TrainConfig& cfg,
              const SamplerConfig& sampler_cfg, const std::string& net_kind,
              const NetConfig& net_cfg, const std::string& out_dir, bool zero_cond,
              bool resume) {
    cfg.validate();
    if (ds.train.empty()) throw ConfigError("fit: empty training set");
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    // Hold out the tail of the training split for validation.
    const int n_val = std::min<int>(cfg.val_images, static_cast<int>(ds.train.size()) - 1);
    std::vector<DataItem> val_items(ds.train.end() - std::max(n_val, 0), ds.train.end());
    std::vector<DataItem> train_items_raw(ds.train.begin(),
                                          ds.train.end() - std::max(n_val, 0));
    const std::vector<TrainItem> items = make_train_items(train_items_raw, zero_cond);

    CheckpointMeta meta;
    meta.sched = cfg.sched;
    meta.precond = cfg.precond;
    meta.net_kind = net_kind;
    meta.net_cfg = net_cfg;
    meta.zero_cond = zero_cond;
    meta.seed = cfg.seed;

    const std::string last_path = (fs::path(out_dir) / "last.ckpt").string();
    const std::string best_path = (fs::path(out_dir) / "best.ckpt").string();
    const std::string log_path = (fs::path(out_dir) / "metrics.log").string();

    FitState state;
    if (resume && fs::exists(last_path)) {
        CheckpointMeta loaded;
        auto restored = load_checkpoint(last_path, loaded);
        auto dst = net.params();
        auto src = restored->params();
        if (dst.size() != src.size())
            throw IoError("fit resume: checkpoint does not match the network");
        for (size_t i = 0; i < dst.size(); ++i) {
            kern::copy(src[i]->value.data(), dst[i]->value.data(), src[i]->value.size());
            kern::copy(src[i]->opt_v.data(), dst[i]->opt_v.data(), src[i]->opt_v.size());
        }
        state.global_step = loaded.global_step;
        state.epoch = loaded.epoch;
        state.best_val = loaded.best_val;
    }

    std::ofstream log(log_path, state.epoch > 0 ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("fit: cannot open metrics log " + log_path);
    if (state.epoch == 0) log << "epoch,train_loss,val_psnr\n";

    FitResult result;
    result.best_epoch = -1;
    result.best_val_psnr = state.best_val;

    for (int epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
        const std::vector<size_t> order =
            shuffled_indices(items.size(), cfg.seed, static_cast<uint64_t>(epoch));
        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<const TrainItem*> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) batch.push_back(&items[order[i]]);
            const double loss =
                train_step(net, batch, cfg, state.global_step, state.global_step + 1);
            epoch_loss += loss * static_cast<double>(batch.size());
            seen += batch.size();
            ++state.global_step;
        }
        epoch_loss /= static_cast<double>(seen);

        const double val = validation_psnr(net, val_items, cfg, sampler_cfg, zero_cond);
        log << epoch << "," << epoch_loss << "," << val << "\n";
        log.flush();
        result.records.push_back(EpochRecord{epoch, epoch_loss, val});

        meta.global_step = state.global_step;
        meta.epoch = epoch + 1;
        if (val > state.best_val || val_items.empty()) {
            state.best_val = val;
            result.best_epoch = epoch;
            result.best_val_psnr = val;
            meta.best_val = state.best_val;
            save_checkpoint(best_path, net, meta);
        }
        meta.best_val = state.best_val;
        save_checkpoint(last_path, net, meta);
    }
    return result;
}

}  // namespace emrdm
