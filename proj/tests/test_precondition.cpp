#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "edm_reference.hpp"
#include "emrdm/errors.hpp"
#include "emrdm/precondition.hpp"

using namespace emrdm;

namespace {

// F == 0 network: D reduces to the skip path.
class ZeroNet : public RawNetwork {
public:
    explicit ZeroNet(int seq_len) : seq_len_(seq_len) {}
    Tensor forward(const Tensor& x_seq, double, const Tensor&) const override {
        return Tensor(Shape{1, x_seq.shape().c, x_seq.shape().h, x_seq.shape().w});
    }
    Tensor forward_train(const Tensor& x_seq, double c, const Tensor& cond) override {
        return forward(x_seq, c, cond);
    }
    void backward(const Tensor&) override {}
    std::vector<Param*> params() override { return {}; }
    int sequence_length() const override { return seq_len_; }
    std::vector<std::pair<std::string, std::string>> topology() const override { return {}; }

private:
    int seq_len_;
};

}  // namespace

TEST_CASE("coefficient hand values (k=3, sigma=0.5)") {
    const PreconditionParams p{1.0, 1.0, 0.9, 1};
    const Coefficients c = coefficients(p, 3.0, 0.5);

    // Straight-line re-derivation of the same numbers.
    const double denom = 1.0 + 9.0 * 1.0 + 0.25 + 2.0 * 3.0 * 0.9;  // 15.65
    CHECK(c.c_in == doctest::Approx(1.0 / std::sqrt(denom)).epsilon(1e-14));
    CHECK(c.c_skip == doctest::Approx(3.7 / denom).epsilon(1e-14));
    CHECK(c.c_out == doctest::Approx(std::sqrt((9.0 + 0.25 - 9.0 * 0.81) / denom)).epsilon(1e-14));

    CHECK(c.c_in == doctest::Approx(0.25278).epsilon(1e-4));
    CHECK(c.c_skip == doctest::Approx(0.23642).epsilon(1e-4));
    CHECK(c.c_out == doctest::Approx(0.35389).epsilon(1e-4));
}

TEST_CASE("c_noise is ln(sigma)/4") {
    const PreconditionParams p{1.0, 1.0, 0.9, 1};
    CHECK(coefficients(p, 1.0, 1.0).c_noise == 0.0);
    CHECK(coefficients(p, 1.0, std::exp(2.0)).c_noise == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(coefficients(p, 1.0, 0.0), std::domain_error);
}

TEST_CASE("EDM-reduced coefficients match the closed forms") {
    for (double sd : {0.5, 1.0, 1.7}) {
        const PreconditionParams p{sd, 0.0, 0.0, 1};
        for (double sigma : {0.05, 0.5, 2.0, 40.0}) {
            const Coefficients c = coefficients(p, 0.0, sigma);
            const edm_ref::Coeffs e = edm_ref::coefficients(sd, sigma);
            CHECK(std::fabs(c.c_in - e.c_in) < 1e-14);
            CHECK(std::fabs(c.c_skip - e.c_skip) < 1e-14);
            CHECK(std::fabs(c.c_out - e.c_out) < 1e-13);
            CHECK(c.c_noise == e.c_noise);
        }
    }
}

TEST_CASE("loss weight") {
    const PreconditionParams p{1.0, 1.0, 0.9, 1};
    CHECK(loss_weight(p, 3.0, 0.5) == doctest::Approx(7.985).epsilon(1e-3));
    for (double sigma : {0.01, 0.7, 12.0}) {
        const Coefficients c = coefficients(p, 2.0, sigma);
        CHECK(std::fabs(loss_weight(p, 2.0, sigma) * c.c_out * c.c_out - 1.0) < 1e-12);
    }
    // EDM-reduced: lambda = (sigma^2+sd^2)/(sigma*sd)^2.
    const PreconditionParams pe{1.3, 0.0, 0.0, 1};
    const double sd2 = 1.3 * 1.3, s2 = 0.49;
    CHECK(loss_weight(pe, 0.0, 0.7) ==
          doctest::Approx((s2 + sd2) / (s2 * sd2)).epsilon(1e-12));
}

TEST_CASE("parameter validation") {
    PreconditionParams bad{1.0, 1.0, 1.5, 1};  // violates Cauchy-Schwarz
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    PreconditionParams bad2{0.0, 1.0, 0.0, 1};
    CHECK_THROWS_AS(bad2.validate(), ConfigError);
    PreconditionParams bad3{1.0, 1.0, 0.5, 0};
    CHECK_THROWS_AS(bad3.validate(), ConfigError);
    PreconditionParams ok{1.0, 1.0, 0.9, 3};
    CHECK_NOTHROW(ok.validate());
    CHECK_NOTHROW(validate_on_grid(ok, Schedule::mean_reverting(3.0),
                                   make_sigma_grid(0.001, 100.0, 16, 7.0)));
}

TEST_CASE("denoise with F == 0 reduces to the skip mean") {
    const Schedule sched = Schedule::mean_reverting(3.0);
    const PreconditionParams p{1.0, 1.0, 0.9, 1};
    ZeroNet net(1);
    const Tensor x(Shape{1, 1, 1, 1}, 2.0);
    const Tensor cond;
    const Tensor d = precondition_denoise(net, p, sched, x, 1.0, cond);
    // c_skip(k=3, sigma=1) * 2
    const Coefficients c = coefficients(p, 3.0, 1.0);
    CHECK(d[0] == doctest::Approx(c.c_skip * 2.0).epsilon(1e-14));

    // Spec point: c_skip(k=3, sigma=0.5)*2 ~= 0.47284; k=3 at t=0.5 needs alpha=6.
    const Tensor d2 = precondition_denoise(net, p, Schedule::mean_reverting(6.0), x, 0.5, cond);
    CHECK(d2[0] == doctest::Approx(0.47284).epsilon(1e-4));

    // Multi-slice mean: identical slices give the same value.
    const PreconditionParams p3{1.0, 1.0, 0.9, 3};
    ZeroNet net3(3);
    Tensor x3(Shape{3, 1, 1, 1});
    x3[0] = 1.0;
    x3[1] = 2.0;
    x3[2] = 3.0;
    const Tensor d3 = precondition_denoise(net3, p3, sched, x3, 0.5, cond);
    const Coefficients c3 = coefficients(p3, sched, 0.5);
    CHECK(d3[0] == doctest::Approx(c3.c_skip * 2.0).epsilon(1e-14));
}

TEST_CASE("denoise rejects an L mismatch") {
    const Schedule sched = Schedule::mean_reverting(3.0);
    const PreconditionParams p{1.0, 1.0, 0.9, 2};
    ZeroNet net(2);
    const Tensor x(Shape{1, 1, 1, 1}, 2.0);
    CHECK_THROWS_AS(precondition_denoise(net, p, sched, x, 1.0, Tensor()), ShapeError);
}

TEST_CASE("EDM-reduced wrapper matches an independently coded EDM wrapper") {
    // Shared deterministic F so both wrappers see the same network.
    struct TanhNet : RawNetwork {
        Tensor forward(const Tensor& x_seq, double c_noise, const Tensor&) const override {
            Tensor out(Shape{1, x_seq.shape().c, x_seq.shape().h, x_seq.shape().w});
            for (size_t i = 0; i < out.size(); ++i)
                out[i] = std::tanh(1.3 * x_seq[i] + 0.2 * c_noise);
            return out;
        }
        Tensor forward_train(const Tensor& x, double c, const Tensor& cond) override {
            return forward(x, c, cond);
        }
        void backward(const Tensor&) override {}
        std::vector<Param*> params() override { return {}; }
        int sequence_length() const override { return 1; }
        std::vector<std::pair<std::string, std::string>> topology() const override {
            return {};
        }
    };

    const Schedule gen = Schedule::generative();
    const double sd = 0.8;
    const PreconditionParams p{sd, 0.0, 0.0, 1};
    TanhNet net;

    Rng rng(401);
    const Tensor x = Tensor::randn(Shape{1, 2, 3, 3}, rng);
    for (double t : {0.07, 0.9, 11.0}) {
        const Tensor d = precondition_denoise(net, p, gen, x, t, Tensor());
        const edm_ref::Coeffs e = edm_ref::coefficients(sd, t);
        for (size_t i = 0; i < x.size(); ++i) {
            const double f = std::tanh(1.3 * (e.c_in * x[i]) + 0.2 * e.c_noise);
            const double d_edm = e.c_skip * x[i] + e.c_out * f;
            CHECK(std::fabs(d[i] - d_edm) <= 1e-13 * std::max(1.0, std::fabs(d_edm)));
        }
    }
}
