#include "emrdm/tensor.hpp"

#include <cmath>
#include <sstream>

#include "emrdm/errors.hpp"

namespace emrdm {

std::string Shape::str() const {
    std::ostringstream os;
    os << "(" << l << "," << c << "," << h << "," << w << ")";
    return os.str();
}

Tensor Tensor::time_slice(int l) const {
    Tensor out(Shape{1, shape_.c, shape_.h, shape_.w});
    kern::copy(slice_data(l), out.data(), slice_count());
    return out;
}

void Tensor::set_time_slice(int l, const Tensor& src) {
    if (src.slice_count() != slice_count())
        throw ShapeError("set_time_slice: slice size mismatch " + src.shape().str() +
                         " vs " + shape_.str());
    kern::copy(src.data(), slice_data(l), slice_count());
}

bool Tensor::all_finite() const {
    for (double x : v_)
        if (!std::isfinite(x)) return false;
    return true;
}

double sq_error(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sq_error");
    return kern::sqdiff_sum(a.data(), b.data(), a.size());
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() +
                         " vs " + b.shape().str());
}

void check_slice_compatible(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.shape().same_slice(b.shape()))
        throw ShapeError(std::string(what) + ": incompatible slices " + a.shape().str() +
                         " vs " + b.shape().str());
}

void check_finite(const Tensor& t, const char* what) {
    if (!t.all_finite())
        throw NumericError(std::string(what) + ": non-finite values in tensor " +
                           t.shape().str());
}

}  // namespace emrdm
