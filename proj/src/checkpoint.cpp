#include "emrdm/checkpoint.hpp"

#include <sstream>

#include "emrdm/errors.hpp"
#include "emrdm/kernels.hpp"
#include "emrdm/tensor_io.hpp"

namespace emrdm {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string header_get(const TensorFile& tf, const std::string& key) {
    if (!tf.header_has(key)) throw IoError("checkpoint: missing header key '" + key + "'");
    return tf.header_value(key);
}

}  // namespace

void save_checkpoint(const std::string& path, RawNetwork& net, const CheckpointMeta& meta) {
    TensorFile tf;
    tf.header.emplace_back("format", "checkpoint");
    tf.header.emplace_back("schedule.kind", meta.sched.kind == ScheduleKind::MeanReverting
                                                ? "mean_reverting"
                                                : "generative");
    tf.header.emplace_back("schedule.alpha", fmt(meta.sched.alpha));
    tf.header.emplace_back("precond.sigma_data", fmt(meta.precond.sigma_data));
    tf.header.emplace_back("precond.sigma_mu", fmt(meta.precond.sigma_mu));
    tf.header.emplace_back("precond.sigma_cov", fmt(meta.precond.sigma_cov));
    tf.header.emplace_back("precond.seq_len", std::to_string(meta.precond.seq_len));
    for (const auto& [k, v] : net.topology()) tf.header.emplace_back("net." + k, v);
    tf.header.emplace_back("net.init_seed", std::to_string(meta.net_cfg.init_seed));
    tf.header.emplace_back("run.zero_cond", meta.zero_cond ? "true" : "false");
    tf.header.emplace_back("train.seed", std::to_string(meta.seed));
    tf.header.emplace_back("train.global_step", std::to_string(meta.global_step));
    tf.header.emplace_back("train.epoch", std::to_string(meta.epoch));
    tf.header.emplace_back("train.best_val", fmt(meta.best_val));

    for (Param* p : net.params()) {
        tf.tensors.emplace_back("param." + p->name, p->value);
        tf.tensors.emplace_back("opt." + p->name, p->opt_v);
    }
    write_tensor_file(path, tf);
}

namespace {

CheckpointMeta meta_from_file(const TensorFile& tf) {
    if (!tf.header_has("format") || tf.header_value("format") != "checkpoint")
        throw IoError("not a checkpoint file");
    CheckpointMeta m;
    const std::string kind = header_get(tf, "schedule.kind");
    const double alpha = std::stod(header_get(tf, "schedule.alpha"));
    m.sched = (kind == "generative") ? Schedule::generative() : Schedule::mean_reverting(alpha);
    m.precond.sigma_data = std::stod(header_get(tf, "precond.sigma_data"));
    m.precond.sigma_mu = std::stod(header_get(tf, "precond.sigma_mu"));
    m.precond.sigma_cov = std::stod(header_get(tf, "precond.sigma_cov"));
    m.precond.seq_len = std::stoi(header_get(tf, "precond.seq_len"));
    m.net_kind = header_get(tf, "net.kind");
    m.net_cfg.in_channels = std::stoi(header_get(tf, "net.in_channels"));
    m.net_cfg.cond_channels = std::stoi(header_get(tf, "net.cond_channels"));
    m.net_cfg.out_channels = std::stoi(header_get(tf, "net.out_channels"));
    m.net_cfg.width1 = std::stoi(header_get(tf, "net.width1"));
    m.net_cfg.width2 = std::stoi(header_get(tf, "net.width2"));
    if (tf.header_has("net.heads")) m.net_cfg.heads = std::stoi(tf.header_value("net.heads"));
    if (tf.header_has("net.key_dim"))
        m.net_cfg.key_dim = std::stoi(tf.header_value("net.key_dim"));
    m.net_cfg.seq_len = std::stoi(header_get(tf, "net.seq_len"));
    m.net_cfg.init_seed = std::stoull(header_get(tf, "net.init_seed"));
    m.zero_cond = header_get(tf, "run.zero_cond") == "true";
    m.seed = std::stoull(header_get(tf, "train.seed"));
    m.global_step = std::stoull(header_get(tf, "train.global_step"));
    m.epoch = std::stoi(header_get(tf, "train.epoch"));
    m.best_val = std::stod(header_get(tf, "train.best_val"));
    return m;
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const std::string& path) {
    return meta_from_file(read_tensor_file(path));
}

std::unique_ptr<RawNetwork> load_checkpoint(const std::string& path, CheckpointMeta& meta) {
    const TensorFile tf = read_tensor_file(path);
    meta = meta_from_file(tf);
    auto net = make_raw_network(meta.net_kind, meta.net_cfg);
    for (Param* p : net->params()) {
        const Tensor& v = tf.get("param." + p->name);
        if (v.shape() != p->value.shape())
            throw IoError("checkpoint: tensor 'param." + p->name + "' has shape " +
                          v.shape().str() + ", expected " + p->value.shape().str());
        kern::copy(v.data(), p->value.data(), v.size());
        const Tensor& ov = tf.get("opt." + p->name);
        if (ov.shape() != p->opt_v.shape())
            throw IoError("checkpoint: tensor 'opt." + p->name + "' shape mismatch");
        kern::copy(ov.data(), p->opt_v.data(), ov.size());
    }
    return net;
}

}  // namespace emrdm
