#include "emrdm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "emrdm/checkpoint.hpp"
#include "emrdm/errors.hpp"
#include "emrdm/png_io.hpp"
#include "emrdm/precondition.hpp"
#include "emrdm/tensor_io.hpp"

namespace fs = std::filesystem;

namespace emrdm {

DatasetSpec dataset_spec_from(const Config& cfg) {
    DatasetSpec s;
    s.n_images = cfg.get_int("data", "n_images");
    s.n_test = cfg.get_int("data", "n_test");
    s.height = cfg.get_int("data", "height");
    s.width = cfg.get_int("data", "width");
    s.seq_len = cfg.get_int("data", "seq_len");
    s.cloud_density = cfg.get_double("data", "cloud_density");
    s.cloud_value = cfg.get_double("data", "cloud_value");
    s.channels = cfg.get_int("data", "channels");
    s.aux_channels = cfg.get_int("data", "aux_channels");
    s.seed = cfg.get_u64("data", "seed");
    s.validate();
    return s;
}

Schedule schedule_from(const Config& cfg) {
    const std::string kind = cfg.get("schedule", "kind");
    if (kind == "generative") return Schedule::generative();
    if (kind == "mean_reverting")
        return Schedule::mean_reverting(cfg.get_double("schedule", "alpha"));
    throw ConfigError("config key 'schedule.kind': unknown value '" + kind +
                      "' (expected mean_reverting|generative)");
}

SamplerConfig sampler_config_from(const Config& cfg) {
    SamplerConfig s;
    s.n_steps = cfg.get_int("sampler", "n_steps");
    s.s_churn = cfg.get_double("sampler", "s_churn");
    s.s_tmin = cfg.get_double("sampler", "s_tmin");
    s.s_tmax = cfg.get_double("sampler", "s_tmax");
    s.s_noise = cfg.get_double("sampler", "s_noise");
    s.sigma_min = cfg.get_double("sampler", "sigma_min");
    s.sigma_max = cfg.get_double("sampler", "sigma_max");
    s.rho = cfg.get_double("sampler", "rho");
    s.seed = cfg.get_u64("sampler", "seed");
    s.validate();
    return s;
}

TrainConfig train_config_from(const Config& cfg, const Dataset& ds) {
    TrainConfig t;
    t.p_mean = cfg.get_double("trainer", "p_mean");
    t.p_std = cfg.get_double("trainer", "p_std");
    t.batch_size = cfg.get_int("trainer", "batch_size");
    t.epochs = cfg.get_int("trainer", "epochs");
    t.learning_rate = cfg.get_double("trainer", "learning_rate");
    t.clip_norm = cfg.get_double("trainer", "clip_norm");
    t.seed = cfg.get_u64("trainer", "seed");
    t.val_images = cfg.get_int("trainer", "val_images");
    t.sched = schedule_from(cfg);

    const std::string source = cfg.get("precondition", "source");
    if (source == "manifest") {
        t.precond.sigma_data = ds.stats.sigma_data;
        t.precond.sigma_mu = ds.stats.sigma_mu;
        t.precond.sigma_cov = ds.stats.sigma_cov;
    } else if (source == "config") {
        t.precond.sigma_data = cfg.get_double("precondition", "sigma_data");
        t.precond.sigma_mu = cfg.get_double("precondition", "sigma_mu");
        t.precond.sigma_cov = cfg.get_double("precondition", "sigma_cov");
    } else {
        throw ConfigError("config key 'precondition.source': unknown value '" + source +
                          "' (expected manifest|config)");
    }
    t.precond.seq_len = ds.spec.seq_len;
    t.validate();
    // Reject degenerate c_out anywhere on the sampler grid before training.
    validate_on_grid(t.precond, t.sched, sampler_config_from(cfg).time_grid());
    return t;
}

NetConfig net_config_from(const Config& cfg, const DatasetSpec& spec) {
    NetConfig n;
    n.in_channels = spec.channels;
    n.cond_channels = condition_channels(spec);
    n.out_channels = spec.channels;
    n.width1 = cfg.get_int("network", "width1");
    n.width2 = cfg.get_int("network", "width2");
    n.heads = cfg.get_int("network", "heads");
    n.key_dim = cfg.get_int("network", "key_dim");
    n.seq_len = spec.seq_len;
    n.init_seed = cfg.get_u64("network", "init_seed");
    return n;
}

void cmd_gen_data(const Config& cfg) {
    const DatasetSpec spec = dataset_spec_from(cfg);
    const Dataset ds = generate_dataset(spec);
    const std::string dir = cfg.get("run", "dataset");
    write_dataset(ds, dir);
    std::cout << "gen-data: wrote " << ds.train.size() << " train / " << ds.test.size()
              << " test images to " << dir << "\n";
    std::cout << "gen-data: stats sigma_data=" << ds.stats.sigma_data
              << " sigma_mu=" << ds.stats.sigma_mu << " sigma_cov=" << ds.stats.sigma_cov
              << "\n";
}

FitResult cmd_train(const Config& cfg, bool resume) {
    const Dataset ds = load_dataset(cfg.get("run", "dataset"));
    const TrainConfig tcfg = train_config_from(cfg, ds);
    const SamplerConfig scfg = sampler_config_from(cfg);
    const std::string kind = cfg.get("network", "kind");
    const bool zero_cond = cfg.get_bool("network", "zero_cond");
    NetConfig ncfg = net_config_from(cfg, ds.spec);
    if (zero_cond) ncfg.cond_channels = condition_channels(ds.spec);  // zeros, same width
    if (kind == "mono" && ds.spec.seq_len != 1)
        throw ConfigError("network.kind=mono requires data.seq_len=1");

    auto net = make_raw_network(kind, ncfg);
    const std::string out = cfg.get("run", "out");
    const FitResult r = fit(*net, ds, tcfg, scfg, kind, ncfg, out, zero_cond, resume);
    if (!r.records.empty())
        std::cout << "train: " << r.records.size() << " epochs, final loss "
                  << r.records.back().train_loss << ", best val PSNR " << r.best_val_psnr
                  << " dB (epoch " << r.best_epoch << ")\n";
    return r;
}

void cmd_sample(const Config& cfg) {
    const Dataset ds = load_dataset(cfg.get("run", "dataset"));
    std::string ckpt = cfg.get_or("run", "checkpoint", "");
    if (ckpt.empty()) ckpt = (fs::path(cfg.get("run", "out")) / "best.ckpt").string();

    CheckpointMeta meta;
    auto net = load_checkpoint(ckpt, meta);
    const SamplerConfig scfg = sampler_config_from(cfg);
    const bool trace_on = cfg.get_bool("run", "trace");

    const PreconditionedDenoiser denoiser(*net, meta.precond, meta.sched);
    const fs::path pred_dir = fs::path(cfg.get("run", "out")) / "pred";
    std::error_code ec;
    fs::create_directories(pred_dir, ec);
    if (ec) throw IoError("sample: cannot create " + pred_dir.string());

    std::ofstream trace_file;
    if (trace_on) {
        trace_file.open(pred_dir / "trace.csv", std::ios::trunc);
        trace_file << "image,step,t,t_hat,mean_abs\n";
    }

    for (size_t i = 0; i < ds.test.size(); ++i) {
        const DataItem& item = ds.test[i];
        const Tensor mu = to_model_space(item.mu);
        const Tensor cond = make_condition(item, meta.zero_cond);
        SamplerConfig per_image = scfg;
        per_image.seed = derive_stream(scfg.seed, "image", i);
        std::vector<TraceRow> trace;
        const Tensor restored = sample(denoiser, mu, cond, meta.sched, per_image,
                                       trace_on ? &trace : nullptr);
        const Tensor unit = to_unit_range(restored);

        std::ostringstream stem;
        stem.width(4);
        stem.fill('0');
        stem << i;
        TensorFile tf;
        tf.header.emplace_back("format", "prediction");
        tf.header.emplace_back("index", std::to_string(i));
        tf.tensors.emplace_back("pred", unit);
        write_tensor_file((pred_dir / (stem.str() + ".emt")).string(), tf);
        write_png_preview((pred_dir / (stem.str() + ".png")).string(), unit);
        if (trace_on)
            for (const TraceRow& row : trace)
                trace_file << i << "," << row.step << "," << row.t << "," << row.t_hat << ","
                           << row.mean_abs << "\n";
    }
    std::cout << "sample: restored " << ds.test.size() << " images into " << pred_dir.string()
              << "\n";
}

EvalSummary cmd_evaluate(const Config& cfg) {
    const Dataset ds = load_dataset(cfg.get("run", "dataset"));
    const fs::path pred_dir = fs::path(cfg.get("run", "out")) / "pred";

    EvalSummary summary;
    std::ostringstream csv;
    csv << "image,psnr,ssim,mae,sam\n";
    double acc_psnr = 0.0, acc_ssim = 0.0, acc_mae = 0.0, acc_sam = 0.0, acc_base = 0.0;
    for (size_t i = 0; i < ds.test.size(); ++i) {
        std::ostringstream stem;
        stem.width(4);
        stem.fill('0');
        stem << i;
        const fs::path p = pred_dir / (stem.str() + ".emt");
        if (!fs::exists(p)) throw IoError("evaluate: missing prediction " + p.string());
        const Tensor pred = read_tensor_file(p.string()).get("pred");
        const MetricReport r = evaluate_pair(ds.test[i].clean, pred, 1.0);
        summary.per_image.push_back(r);
        const double shown_psnr = psnr_display(r.psnr);
        csv << stem.str() << "," << shown_psnr << "," << r.ssim << "," << r.mae << ","
            << r.sam << "\n";
        acc_psnr += shown_psnr;
        acc_ssim += r.ssim;
        acc_mae += r.mae;
        acc_sam += r.sam;

        const double base =
            psnr_display(psnr(ds.test[i].clean, ds.test[i].mu.time_slice(0), 1.0));
        summary.baseline_psnr.push_back(base);
        acc_base += base;
    }
    const double n = static_cast<double>(std::max<size_t>(ds.test.size(), 1));
    summary.mean.psnr = acc_psnr / n;
    summary.mean.ssim = acc_ssim / n;
    summary.mean.mae = acc_mae / n;
    summary.mean.sam = acc_sam / n;
    summary.mean_baseline_psnr = acc_base / n;
    csv << "mean," << summary.mean.psnr << "," << summary.mean.ssim << "," << summary.mean.mae
        << "," << summary.mean.sam << "\n";

    const fs::path out_csv = fs::path(cfg.get("run", "out")) / "metrics.csv";
    std::ofstream f(out_csv, std::ios::trunc);
    if (!f) throw IoError("evaluate: cannot write " + out_csv.string());
    f << csv.str();

    std::cout << "evaluate: " << ds.test.size() << " images\n"
              << "  psnr " << summary.mean.psnr << " dB (cloudy baseline "
              << summary.mean_baseline_psnr << " dB)\n"
              << "  ssim " << summary.mean.ssim << "\n"
              << "  mae  " << summary.mean.mae << "\n"
              << "  sam  " << summary.mean.sam << " rad\n";
    return summary;
}

namespace {

struct Series {
    std::string name;
    std::vector<double> xs, ys;
};

// Minimal polyline chart; enough to eyeball training/metric curves.
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<Series>& series) {
    const int W = 720, H = 420, ml = 60, mr = 20, mt = 40, mb = 40;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const Series& s : series)
        for (size_t i = 0; i < s.xs.size(); ++i) {
            xmin = std::min(xmin, s.xs[i]);
            xmax = std::max(xmax, s.xs[i]);
            ymin = std::min(ymin, s.ys[i]);
            ymax = std::max(ymax, s.ys[i]);
        }
    if (!(xmax > xmin)) xmax = xmin + 1.0;
    if (!(ymax > ymin)) ymax = ymin + 1.0;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    std::ostringstream os;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
       << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-family='sans-serif' "
          "font-size='16'>" << title << "</text>\n";
    os << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
       << "' stroke='black'/>\n";
    os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
       << "' stroke='black'/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = ymin + (ymax - ymin) * i / 4.0;
        os << "<text x='" << ml - 6 << "' y='" << py(y) + 4
           << "' text-anchor='end' font-family='sans-serif' font-size='11'>";
        os.precision(4);
        os << y << "</text>\n";
        const double x = xmin + (xmax - xmin) * i / 4.0;
        os << "<text x='" << px(x) << "' y='" << H - mb + 16
           << "' text-anchor='middle' font-family='sans-serif' font-size='11'>" << x
           << "</text>\n";
    }
    for (size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        os << "<polyline fill='none' stroke='" << colors[si % 4] << "' stroke-width='1.5' "
              "points='";
        for (size_t i = 0; i < s.xs.size(); ++i)
            os << px(s.xs[i]) << "," << py(s.ys[i]) << " ";
        os << "'/>\n";
        os << "<text x='" << W - mr - 8 << "' y='" << mt + 16 * (si + 1)
           << "' text-anchor='end' font-family='sans-serif' font-size='12' fill='"
           << colors[si % 4] << "'>" << s.name << "</text>\n";
    }
    os << "</svg>\n";

    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("report: cannot write " + path);
    f << os.str();
}

}  // namespace

void cmd_report(const Config& cfg) {
    const fs::path out(cfg.get("run", "out"));
    const fs::path log_path = out / "metrics.log";
    if (!fs::exists(log_path))
        throw IoError("report: no metrics log at " + log_path.string() + " (run train first)");

    Series loss{"train_loss", {}, {}};
    Series val{"val_psnr", {}, {}};
    std::ifstream log(log_path);
    std::string line;
    std::getline(log, line);  // header
    while (std::getline(log, line)) {
        std::istringstream ls(line);
        std::string a, b, c;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c, ','))
            continue;
        const double epoch = std::stod(a);
        loss.xs.push_back(epoch);
        loss.ys.push_back(std::stod(b));
        val.xs.push_back(epoch);
        val.ys.push_back(std::stod(c));
    }
    write_svg_chart((out / "report_loss.svg").string(), "training loss", {loss});
    write_svg_chart((out / "report_val_psnr.svg").string(), "validation PSNR (dB)", {val});

    std::ostringstream csv;
    csv << "epoch,train_loss,val_psnr\n";
    for (size_t i = 0; i < loss.xs.size(); ++i)
        csv << loss.xs[i] << "," << loss.ys[i] << "," << val.ys[i] << "\n";
    std::ofstream f(out / "report.csv", std::ios::trunc);
    f << csv.str();
    std::cout << "report: wrote " << (out / "report_loss.svg").string() << ", "
              << (out / "report_val_psnr.svg").string() << ", " << (out / "report.csv").string()
              << "\n";
}

}  // namespace emrdm
