#include "emrdm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "emrdm/errors.hpp"
#include "emrdm/kernels.hpp"
#include "emrdm/png_io.hpp"
#include "emrdm/rng.hpp"
#include "emrdm/tensor_io.hpp"

namespace fs = std::filesystem;

namespace emrdm {

void DatasetSpec::validate() const {
    if (n_images < 1) throw ConfigError("dataset: n_images must be >= 1");
    if (n_test < 0) throw ConfigError("dataset: n_test must be >= 0");
    if (height % 2 != 0 || width % 2 != 0)
        throw ConfigError("dataset: height and width must be divisible by the network "
                          "downsampling factor (2)");
    if (seq_len < 1) throw ConfigError("dataset: seq_len must be >= 1");
    if (cloud_density < 0.0 || cloud_density > 1.0)
        throw ConfigError("dataset: cloud_density must be in [0,1]");
    if (channels < 1) throw ConfigError("dataset: channels must be >= 1");
    if (aux_channels < 0) throw ConfigError("dataset: aux_channels must be >= 0");
}

namespace {

// Smooth random field: sum of low-frequency sinusoids, min-max normalized
// to [0,1] over the plane.
void fill_smooth_field(double* plane, int h, int w, Rng& rng) {
    const int n_waves = 6;
    std::vector<double> fx(n_waves), fy(n_waves), ph(n_waves), amp(n_waves);
    for (int j = 0; j < n_waves; ++j) {
        fx[j] = 0.5 + 2.5 * rng.uniform();
        fy[j] = 0.5 + 2.5 * rng.uniform();
        ph[j] = 2.0 * M_PI * rng.uniform();
        amp[j] = 0.3 + rng.uniform();
    }
    double lo = 1e300, hi = -1e300;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = 0.0;
            for (int j = 0; j < n_waves; ++j)
                v += amp[j] * std::sin(2.0 * M_PI *
                                           (fx[j] * x / w + fy[j] * y / h) +
                                       ph[j]);
            plane[y * w + x] = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const double span = (hi > lo) ? (hi - lo) : 1.0;
    for (int i = 0; i < h * w; ++i) plane[i] = (plane[i] - lo) / span;
}

// Cloud opacity from a smooth field: alpha = clamp(field + 2d - 1, 0, 1),
// which is identically 0 at density 0 and identically 1 at density 1.
Tensor make_cloud_mask(int h, int w, double density, Rng& rng) {
    Tensor mask(Shape{1, 1, h, w});
    fill_smooth_field(mask.data(), h, w, rng);
    const double shift = 2.0 * density - 1.0;
    for (size_t i = 0; i < mask.size(); ++i)
        mask[i] = std::clamp(mask[i] + shift, 0.0, 1.0);
    return mask;
}

// Gradient-magnitude style edge maps of the channel-mean image,
// normalized to [0,1]. Variant 0: magnitude, 1: |d/dx|, 2: |d/dy|.
Tensor edge_map(const Tensor& clean, int variant) {
    const int h = clean.shape().h, w = clean.shape().w, C = clean.shape().c;
    Tensor mean(Shape{1, 1, h, w});
    for (int c = 0; c < C; ++c)
        kern::axpy(1.0 / C, &clean.at(0, c, 0, 0), mean.data(), mean.size());

    Tensor e(Shape{1, 1, h, w});
    double hi = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = mean.at(0, 0, y, std::min(x + 1, w - 1)) -
                              mean.at(0, 0, y, std::max(x - 1, 0));
            const double gy = mean.at(0, 0, std::min(y + 1, h - 1), x) -
                              mean.at(0, 0, std::max(y - 1, 0), x);
            double v = 0.0;
            if (variant % 3 == 0) v = std::sqrt(gx * gx + gy * gy);
            else if (variant % 3 == 1) v = std::fabs(gx);
            else v = std::fabs(gy);
            e.at(0, 0, y, x) = v;
            hi = std::max(hi, v);
        }
    if (hi > 0.0) kern::scale(1.0 / hi, e.data(), e.size());
    return e;
}

DataItem make_item(const DatasetSpec& spec, Rng& rng) {
    const int h = spec.height, w = spec.width, C = spec.channels;
    DataItem item;
    item.clean = Tensor(Shape{1, C, h, w});
    for (int c = 0; c < C; ++c)
        fill_smooth_field(&item.clean.at(0, c, 0, 0), h, w, rng);

    item.mu = Tensor(Shape{spec.seq_len, C, h, w});
    if (spec.aux_channels > 0)
        item.aux = Tensor(Shape{spec.seq_len, spec.aux_channels, h, w});

    for (int l = 0; l < spec.seq_len; ++l) {
        const Tensor alpha = make_cloud_mask(h, w, spec.cloud_density, rng);
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double a = alpha.at(0, 0, y, x);
                    item.mu.at(l, c, y, x) =
                        a * spec.cloud_value + (1.0 - a) * item.clean.at(0, c, y, x);
                }
        for (int ac = 0; ac < spec.aux_channels; ++ac) {
            const Tensor e = edge_map(item.clean, ac);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    item.aux.at(l, ac, y, x) =
                        (1.0 - alpha.at(0, 0, y, x)) * e.at(0, 0, y, x);
        }
    }
    return item;
}

DatasetStats measure_stats(const std::vector<DataItem>& train) {
    // Scalar moments over all pixels of the training split, in model space.
    double sum_x = 0.0, sum_xx = 0.0;
    double sum_m = 0.0, sum_mm = 0.0, sum_xm = 0.0;
    size_t n_x = 0, n_m = 0;
    for (const DataItem& item : train) {
        const size_t n = item.clean.size();
        for (size_t i = 0; i < n; ++i) {
            const double x = 2.0 * item.clean[i] - 1.0;
            sum_x += x;
            sum_xx += x * x;
        }
        n_x += n;
        for (int l = 0; l < item.mu.shape().l; ++l) {
            const double* mu = item.mu.slice_data(l);
            for (size_t i = 0; i < n; ++i) {
                const double m = 2.0 * mu[i] - 1.0;
                const double x = 2.0 * item.clean[i] - 1.0;
                sum_m += m;
                sum_mm += m * m;
                sum_xm += x * m;
            }
            n_m += n;
        }
    }
    const double mean_x = sum_x / n_x;
    const double var_x = sum_xx / n_x - mean_x * mean_x;
    const double mean_m = sum_m / n_m;
    const double var_m = sum_mm / n_m - mean_m * mean_m;
    const double cov = sum_xm / n_m - mean_x * mean_m;

    DatasetStats st;
    st.sigma_data = std::sqrt(std::max(var_x, 1e-12));
    st.sigma_mu = std::sqrt(std::max(var_m, 0.0));
    st.sigma_cov = cov;
    // Keep Cauchy-Schwarz intact under finite-sample noise.
    const double bound = st.sigma_data * st.sigma_mu;
    st.sigma_cov = std::clamp(st.sigma_cov, -bound, bound);
    return st;
}

std::string item_name(int i) {
    std::ostringstream os;
    os.width(4);
    os.fill('0');
    os << i;
    return os.str();
}

TensorFile item_to_file(const DataItem& item) {
    TensorFile tf;
    tf.header.emplace_back("format", "dataset_item");
    tf.tensors.emplace_back("clean", item.clean);
    tf.tensors.emplace_back("mu", item.mu);
    if (!item.aux.empty()) tf.tensors.emplace_back("aux", item.aux);
    return tf;
}

DataItem item_from_file(const TensorFile& tf) {
    DataItem item;
    item.clean = tf.get("clean");
    item.mu = tf.get("mu");
    if (tf.has("aux")) item.aux = tf.get("aux");
    return item;
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.spec = spec;
    Rng rng_train = Rng::stream(spec.seed, "dataset_train");
    Rng rng_test = Rng::stream(spec.seed, "dataset_test");
    ds.train.reserve(spec.n_images);
    for (int i = 0; i < spec.n_images; ++i) ds.train.push_back(make_item(spec, rng_train));
    ds.test.reserve(spec.n_test);
    for (int i = 0; i < spec.n_test; ++i) ds.test.push_back(make_item(spec, rng_test));
    ds.stats = measure_stats(ds.train);
    return ds;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "train", ec);
    fs::create_directories(fs::path(dir) / "test", ec);
    fs::create_directories(fs::path(dir) / "previews", ec);
    if (ec) throw IoError("cannot create dataset directory: " + dir);

    std::ostringstream manifest;
    manifest << "[data]\n";
    manifest << "n_images = " << ds.spec.n_images << "\n";
    manifest << "n_test = " << ds.spec.n_test << "\n";
    manifest << "height = " << ds.spec.height << "\n";
    manifest << "width = " << ds.spec.width << "\n";
    manifest << "seq_len = " << ds.spec.seq_len << "\n";
    manifest << "cloud_density = " << ds.spec.cloud_density << "\n";
    manifest << "cloud_value = " << ds.spec.cloud_value << "\n";
    manifest << "channels = " << ds.spec.channels << "\n";
    manifest << "aux_channels = " << ds.spec.aux_channels << "\n";
    manifest << "seed = " << ds.spec.seed << "\n";
    manifest << "\n[stats]\n";
    manifest.precision(17);
    manifest << "sigma_data = " << ds.stats.sigma_data << "\n";
    manifest << "sigma_mu = " << ds.stats.sigma_mu << "\n";
    manifest << "sigma_cov = " << ds.stats.sigma_cov << "\n";
    {
        std::ofstream mf(fs::path(dir) / "manifest.cfg", std::ios::binary);
        if (!mf) throw IoError("cannot write dataset manifest in " + dir);
        mf << manifest.str();
    }

    auto write_split = [&](const std::vector<DataItem>& items, const std::string& split) {
        for (size_t i = 0; i < items.size(); ++i) {
            const std::string stem = item_name(static_cast<int>(i));
            write_tensor_file((fs::path(dir) / split / (stem + ".emt")).string(),
                              item_to_file(items[i]));
        }
    };
    write_split(ds.train, "train");
    write_split(ds.test, "test");

    // A few previews from each split for eyeballing.
    const size_t n_prev = std::min<size_t>(4, ds.train.size());
    for (size_t i = 0; i < n_prev; ++i) {
        const std::string stem = item_name(static_cast<int>(i));
        write_png_preview((fs::path(dir) / "previews" / ("train_" + stem + "_clean.png")).string(),
                          ds.train[i].clean);
        write_png_preview((fs::path(dir) / "previews" / ("train_" + stem + "_mu0.png")).string(),
                          ds.train[i].mu, 0);
    }
}

Dataset load_dataset(const std::string& dir) {
    const fs::path root(dir);
    if (!fs::exists(root / "manifest.cfg"))
        throw IoError("dataset manifest not found: " + (root / "manifest.cfg").string());

    std::ifstream mf(root / "manifest.cfg", std::ios::binary);
    std::ostringstream os;
    os << mf.rdbuf();

    Dataset ds;
    // Reuse the config parser for the manifest.
    const std::string text = os.str();
    auto get = [&text](const std::string& key) -> std::string {
        const std::string needle = key + " = ";
        const auto pos = text.find(needle);
        if (pos == std::string::npos) throw IoError("dataset manifest: missing key " + key);
        const auto end = text.find('\n', pos);
        return text.substr(pos + needle.size(), end - pos - needle.size());
    };
    ds.spec.n_images = std::stoi(get("n_images"));
    ds.spec.n_test = std::stoi(get("n_test"));
    ds.spec.height = std::stoi(get("height"));
    ds.spec.width = std::stoi(get("width"));
    ds.spec.seq_len = std::stoi(get("seq_len"));
    ds.spec.cloud_density = std::stod(get("cloud_density"));
    ds.spec.cloud_value = std::stod(get("cloud_value"));
    ds.spec.channels = std::stoi(get("channels"));
    ds.spec.aux_channels = std::stoi(get("aux_channels"));
    ds.spec.seed = std::stoull(get("seed"));
    ds.stats.sigma_data = std::stod(get("sigma_data"));
    ds.stats.sigma_mu = std::stod(get("sigma_mu"));
    ds.stats.sigma_cov = std::stod(get("sigma_cov"));

    auto read_split = [&](const std::string& split, int count) {
        std::vector<DataItem> items;
        items.reserve(count);
        for (int i = 0; i < count; ++i) {
            const fs::path p = root / split / (item_name(i) + ".emt");
            items.push_back(item_from_file(read_tensor_file(p.string())));
        }
        return items;
    };
    ds.train = read_split("train", ds.spec.n_images);
    ds.test = read_split("test", ds.spec.n_test);
    return ds;
}

Tensor to_model_space(const Tensor& unit) {
    Tensor out = unit;
    for (size_t i = 0; i < out.size(); ++i) out[i] = 2.0 * out[i] - 1.0;
    return out;
}

Tensor to_unit_range(const Tensor& model) {
    Tensor out = model;
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp(0.5 * (out[i] + 1.0), 0.0, 1.0);
    return out;
}

int condition_channels(const DatasetSpec& spec) {
    return spec.channels + spec.aux_channels;
}

Tensor make_condition(const DataItem& item, bool zero_cond) {
    const Shape ms = item.mu.shape();
    const int aux_c = item.aux.empty() ? 0 : item.aux.shape().c;
    Tensor cond(Shape{ms.l, ms.c + aux_c, ms.h, ms.w});
    if (zero_cond) return cond;

    for (int l = 0; l < ms.l; ++l)
        for (int c = 0; c < ms.c + aux_c; ++c)
            for (int y = 0; y < ms.h; ++y)
                for (int x = 0; x < ms.w; ++x) {
                    const double v = (c < ms.c) ? item.mu.at(l, c, y, x)
                                                : item.aux.at(l, c - ms.c, y, x);
                    cond.at(l, c, y, x) = 2.0 * v - 1.0;
                }
    return cond;
}

}  // namespace emrdm
