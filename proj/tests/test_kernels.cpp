#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "fedoras/kernels.hpp"

using namespace fedoras;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(shape);
    for (double& v : t.data) v = rng.normal(0.0, scale);
    return t;
}

// central finite differences of a scalar loss (sum of squared outputs / 2)
// against the analytic backward pass
struct FdReport {
    double frac_ok = 1.0;  // coordinates with rel err < 1e-4
    double max_rel = 0.0;
};

FdReport check_op_grads(const OperatorKind& op, const std::vector<int>& in_shape, Rng& rng) {
    ParamSet params = init_params(op, in_shape[1], rng);
    Tensor x = random_tensor(in_shape, rng);

    auto loss_of = [&](const Tensor& input) {
        Tensor y = op_forward(op, params, input);
        double s = 0.0;
        for (double v : y.data) s += 0.5 * v * v;
        return s;
    };

    Tensor y = op_forward(op, params, x);
    Tensor gy = y;  // d(0.5*sum y^2)/dy = y
    for (auto& p : params) p.grad.fill(0.0);
    Tensor gx = op_backward(op, params, x, gy);

    const double h = 1e-5;
    FdReport rep;
    std::int64_t total = 0, ok = 0;
    auto probe = [&](double* slot, double analytic) {
        const double orig = *slot;
        *slot = orig + h;
        const double up = loss_of(x);
        *slot = orig - h;
        const double dn = loss_of(x);
        *slot = orig;
        const double numeric = (up - dn) / (2 * h);
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        const double rel = std::abs(numeric - analytic) / denom;
        rep.max_rel = std::max(rep.max_rel, rel);
        ++total;
        if (rel < 1e-4) ++ok;
    };
    // subsample coordinates to keep the suite fast
    for (std::size_t i = 0; i < x.data.size(); i += 7) probe(&x.data[i], gx.data[i]);
    for (auto& p : params)
        for (std::size_t i = 0; i < p.value.data.size(); i += 3)
            probe(&p.value.data[i], p.grad.data[i]);
    rep.frac_ok = total ? static_cast<double>(ok) / total : 1.0;
    return rep;
}

}  // namespace

TEST_CASE("identity and zero forward") {
    Rng rng(1);
    OperatorKind id{OpType::Identity};
    Tensor x = random_tensor({1, 4, 8, 8}, rng);
    ParamSet none;
    Tensor y = op_forward(id, none, x);
    CHECK(y.data == x.data);

    OperatorKind zero{OpType::Zero};
    Tensor z = op_forward(zero, none, x);
    CHECK(z.shape == x.shape);
    for (double v : z.data) CHECK(v == 0.0);

    // gradients: identity passes through, zero blocks
    Tensor gy = random_tensor({1, 4, 8, 8}, rng);
    CHECK(op_backward(id, none, x, gy).data == gy.data);
    for (double v : op_backward(zero, none, x, gy).data) CHECK(v == 0.0);
}

TEST_CASE("1x1 convolution on ones with +-0.5 kernels") {
    OperatorKind op{OpType::Conv1x1, 2};
    ParamSet params;
    Tensor w({2, 1, 1, 1});
    w.data = {0.5, -0.5};
    params.emplace_back(w);
    params.emplace_back(Tensor({2}));
    Tensor x({1, 1, 2, 2}, 1.0);
    Tensor y = op_forward(op, params, x);
    REQUIRE(y.shape == std::vector<int>{1, 2, 2, 2});
    for (int i = 0; i < 4; ++i) {
        CHECK(y.data[static_cast<std::size_t>(i)] == 0.5);
        CHECK(y.data[static_cast<std::size_t>(4 + i)] == -0.5);
    }
}

TEST_CASE("finite-difference gradients across ops, shapes and seeds") {
    const std::vector<OperatorKind> ops = {
        {OpType::Conv1x1, 0},
        {OpType::Conv3x3, 0},
        {OpType::DWSepConv, 0, 3, 0.5},
        {OpType::DWSepConv, 0, 3, 1.0},
        {OpType::DWSepConv, 0, 3, 2.0},
        {OpType::AffineNorm},
        {OpType::AvgPool, 0, 3, 1.0, 2},
    };
    int cases = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        Rng rng(seed);
        for (const auto& op : ops) {
            const int c = 2 + rng.uniform_int(3);
            const int s = 3 + rng.uniform_int(3);
            auto rep = check_op_grads(op, {2, c, s, s}, rng);
            INFO(op_name(op), " seed ", seed);
            CHECK(rep.frac_ok >= 0.95);
            CHECK(rep.max_rel < 1e-2);
            ++cases;
        }
    }
    // dense on flat features
    for (std::uint64_t seed = 1; seed <= 2; ++seed) {
        Rng rng(seed + 40);
        auto rep = check_op_grads({OpType::Dense, 5}, {3, 7}, rng);
        CHECK(rep.frac_ok >= 0.95);
        CHECK(rep.max_rel < 1e-2);
        ++cases;
    }
    CHECK(cases >= 20);
}

TEST_CASE("softmax cross-entropy value and gradient") {
    Tensor logits({2, 4}, 0.0);  // uniform logits
    LossResult r = softmax_cross_entropy(logits, {0, 3});
    CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    // finite differences on random logits
    Rng rng(9);
    Tensor l = random_tensor({3, 5}, rng);
    std::vector<int> labels = {1, 0, 4};
    LossResult base = softmax_cross_entropy(l, labels);
    const double h = 1e-6;
    for (std::size_t i = 0; i < l.data.size(); ++i) {
        const double orig = l.data[i];
        l.data[i] = orig + h;
        const double up = softmax_cross_entropy(l, labels).loss;
        l.data[i] = orig - h;
        const double dn = softmax_cross_entropy(l, labels).loss;
        l.data[i] = orig;
        CHECK(base.grad.data[i] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-4));
    }
}

TEST_CASE("sgd step: plain, momentum recurrence, clipping") {
    // plain: w=1, g=2, lr=0.1 -> 0.8
    Parameter p(Tensor({1}, 1.0));
    p.grad.data[0] = 2.0;
    sgd_step({&p}, 0.1, 0.0);
    CHECK(p.value.data[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(p.grad.data[0] == 0.0);  // zeroed after the step

    // momentum 0.9, two identical unit gradients from w0=0 -> -0.29
    Parameter m(Tensor({1}, 0.0));
    for (int step = 0; step < 2; ++step) {
        m.grad.data[0] = 1.0;
        sgd_step({&m}, 0.1, 0.9);
    }
    CHECK(m.value.data[0] == doctest::Approx(-0.29).epsilon(1e-12));

    // clip_norm=1 with gradient norm 4 scales the effective gradient by 0.25
    Parameter c(Tensor({2}, 0.0));
    Parameter c2(Tensor({2}, 0.0));
    c.grad.data = {0.0, 4.0};
    c2.grad.data = {0.0, 1.0};
    sgd_step({&c}, 1.0, 0.0, 1.0);
    sgd_step({&c2}, 1.0, 0.0);
    CHECK(c.value.data[1] == doctest::Approx(c2.value.data[1]).epsilon(1e-15));

    // non-finite gradient raises
    Parameter bad(Tensor({1}, 0.0));
    bad.grad.data[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(sgd_step({&bad}, 0.1, 0.0), ContractError);
}

TEST_CASE("operator cost oracle") {
    CHECK(op_cost({OpType::Identity}, {4, 8, 8}).params == 0);
    CHECK(op_cost({OpType::Identity}, {4, 8, 8}).flops == 0);

    OpCost d = op_cost({OpType::Dense, 4}, {8});
    CHECK(d.params == 36);  // 8*4 + 4
    CHECK(d.flops == 64);   // 2*8*4

    OpCost c3 = op_cost({OpType::Conv3x3, 4}, {4, 8, 8});
    CHECK(c3.params == 148);  // 3*3*4*4 + 4
    CHECK(c3.flops == 2LL * 9 * 4 * 4 * 8 * 8);

    // reference MAC loop for a random conv shape
    {
        const int ci = 3, co = 5, s = 6;
        OpCost c = op_cost({OpType::Conv3x3, co}, {ci, s, s});
        CHECK(c.params == 9LL * ci * co + co);
        CHECK(c.flops == 2LL * 9 * ci * co * s * s);
    }
}

TEST_CASE("parameter shapes and init statistics") {
    Rng rng(3);
    ParamSet ps = init_params({OpType::Conv3x3, 8}, 4, rng);
    REQUIRE(ps.size() == 2);
    CHECK(ps[0].value.shape == std::vector<int>{8, 4, 3, 3});
    CHECK(ps[1].value.shape == std::vector<int>{8});
    for (double v : ps[1].value.data) CHECK(v == 0.0);  // zero bias

    // He fan-in: sample std of weights near sqrt(2/fan_in)
    double ss = 0.0;
    for (double v : ps[0].value.data) ss += v * v;
    const double sd = std::sqrt(ss / static_cast<double>(ps[0].value.data.size()));
    CHECK(sd == doctest::Approx(std::sqrt(2.0 / 36.0)).epsilon(0.35));
}
