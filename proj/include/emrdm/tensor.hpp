#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "emrdm/kernels.hpp"
#include "emrdm/rng.hpp"

namespace emrdm {

// Axis order (L, C, H, W): temporal slices, channels, rows, columns.
// A scalar is a 1x1x1x1 tensor, so analytic tests run through the same
// code paths as images.
struct Shape {
    int l = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    size_t count() const {
        return static_cast<size_t>(l) * static_cast<size_t>(c) *
               static_cast<size_t>(h) * static_cast<size_t>(w);
    }
    bool operator==(const Shape& o) const {
        return l == o.l && c == o.c && h == o.h && w == o.w;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    bool same_slice(const Shape& o) const { return c == o.c && h == o.h && w == o.w; }
    std::string str() const;
};

class Tensor {
public:
    Tensor() : shape_{0, 0, 0, 0} {}
    explicit Tensor(Shape s) : shape_(s), v_(s.count(), 0.0) {}
    Tensor(Shape s, double value) : shape_(s), v_(s.count(), value) {}

    static Tensor scalar(double value) { return Tensor(Shape{1, 1, 1, 1}, value); }
    static Tensor randn(Shape s, Rng& rng) {
        Tensor t(s);
        rng.fill_normal(t.data(), t.size());
        return t;
    }

    const Shape& shape() const { return shape_; }
    size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    double& operator[](size_t i) { return v_[i]; }
    double operator[](size_t i) const { return v_[i]; }

    double& at(int l, int c, int y, int x) { return v_[index(l, c, y, x)]; }
    const double& at(int l, int c, int y, int x) const { return v_[index(l, c, y, x)]; }

    size_t index(int l, int c, int y, int x) const {
        return ((static_cast<size_t>(l) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    // Pointer to the start of temporal slice l (contiguous C*H*W block).
    double* slice_data(int l) { return v_.data() + static_cast<size_t>(l) * slice_count(); }
    const double* slice_data(int l) const {
        return v_.data() + static_cast<size_t>(l) * slice_count();
    }
    size_t slice_count() const {
        return static_cast<size_t>(shape_.c) * shape_.h * shape_.w;
    }

    Tensor time_slice(int l) const;
    void set_time_slice(int l, const Tensor& src);

    void fill(double v) { kern::fill(v, data(), size()); }
    bool all_finite() const;

    double mean() const { return empty() ? 0.0 : kern::sum(data(), size()) / size(); }

private:
    Shape shape_;
    std::vector<double> v_;
};

// Sum of elementwise squared error, and friends, over whole tensors.
double sq_error(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

void check_same_shape(const Tensor& a, const Tensor& b, const char* what);
void check_slice_compatible(const Tensor& a, const Tensor& b, const char* what);
void check_finite(const Tensor& t, const char* what);

}  // namespace emrdm
