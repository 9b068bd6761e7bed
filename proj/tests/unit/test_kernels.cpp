#include "semdet/common/rng.hpp"
#include "semdet/net/kernels.hpp"

#include <array>
#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <vector>

using namespace semdet;
using namespace semdet::net;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, std::uint64_t seed)
{
    Rng rng = make_rng(seed, 0, 0);
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(uniform_real(rng, -1, 1));
    return v;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b)
{
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

const ConvShape kShapes[] = {
    {1, 17, 19, 5, 3, 2, 1},   // stride-2 stem, odd sizes
    {6, 12, 12, 9, 3, 1, 1},   // same-size 3x3
    {7, 10, 11, 3, 1, 1, 0},   // pointwise
    {16, 24, 24, 32, 3, 2, 1}, // wider
    {3, 5, 5, 4, 5, 1, 2},     // 5x5
};

// dL/dx for L = sum(r * f(x)) by central differences, one element.
template <typename F>
double fd(std::vector<double>& x, std::size_t k, F&& loss)
{
    const double h = 1e-6, saved = x[k];
    x[k] = saved + h;
    const double up = loss();
    x[k] = saved - h;
    const double down = loss();
    x[k] = saved;
    return (up - down) / (2 * h);
}

} // namespace

TEST_SUITE("kernels") {

TEST_CASE_TEMPLATE("gemm agrees with the reference", T, float, double)
{
    const std::vector<std::array<int, 3>> shapes{{1, 1, 1}, {5, 7, 3}, {33, 65, 300}, {64, 900, 144}, {4, 16, 600}};
    for (auto [M, N, K] : shapes) {
        const auto A = random_vec<T>(static_cast<std::size_t>(M * K), 1);
        const auto B = random_vec<T>(static_cast<std::size_t>(K * N), 2);
        auto C0 = random_vec<T>(static_cast<std::size_t>(M * N), 3);
        auto C1 = C0;
        kernels::gemm(M, N, K, A.data(), B.data(), C0.data(), true);
        reference::gemm(M, N, K, A.data(), B.data(), C1.data(), true);
        CHECK(max_abs_diff(C0, C1) < (sizeof(T) == 4 ? 1e-3 : 1e-10));
        kernels::gemm(M, N, K, A.data(), B.data(), C0.data(), false);
        reference::gemm(M, N, K, A.data(), B.data(), C1.data(), false);
        CHECK(max_abs_diff(C0, C1) < (sizeof(T) == 4 ? 1e-3 : 1e-10));
    }
}

TEST_CASE("transpose")
{
    const auto in = random_vec<float>(6 * 11, 4);
    std::vector<float> out(in.size());
    kernels::transpose(11, 6, in.data(), out.data());
    for (int r = 0; r < 11; ++r)
        for (int c = 0; c < 6; ++c) REQUIRE(out[static_cast<std::size_t>(r * 6 + c)] == in[static_cast<std::size_t>(c * 11 + r)]);
}

TEST_CASE_TEMPLATE("conv forward and backward agree with the direct loops", T, float, double)
{
    const double tol = sizeof(T) == 4 ? 2e-4 : 1e-11;
    for (const ConvShape& s : kShapes) {
        CAPTURE(s.in_c);
        CAPTURE(s.kernel);
        const std::size_t n_in = static_cast<std::size_t>(s.in_c * s.in_h * s.in_w);
        const std::size_t n_out = static_cast<std::size_t>(s.out_c * s.out_h() * s.out_w());
        const std::size_t n_w = static_cast<std::size_t>(s.out_c * s.patch());
        const auto in = random_vec<T>(n_in, 5);
        const auto w = random_vec<T>(n_w, 6);
        const auto b = random_vec<T>(static_cast<std::size_t>(s.out_c), 7);
        const auto dout = random_vec<T>(n_out, 8);
        std::vector<T> scratch, o0(n_out), o1(n_out);
        kernels::conv2d_forward(s, in.data(), w.data(), b.data(), o0.data(), scratch);
        reference::conv2d_forward(s, in.data(), w.data(), b.data(), o1.data());
        CHECK(max_abs_diff(o0, o1) < tol);

        std::vector<T> dw0(n_w), dw1(n_w), db0(static_cast<std::size_t>(s.out_c)), db1(db0.size()), di0(n_in), di1(n_in);
        kernels::conv2d_backward(s, in.data(), w.data(), dout.data(), dw0.data(), db0.data(), di0.data(), scratch);
        reference::conv2d_backward(s, in.data(), w.data(), dout.data(), dw1.data(), db1.data(), di1.data());
        CHECK(max_abs_diff(dw0, dw1) < tol * 10);
        CHECK(max_abs_diff(db0, db1) < tol * 10);
        CHECK(max_abs_diff(di0, di1) < tol * 10);
    }
}

TEST_CASE("conv gradients match finite differences")
{
    for (const ConvShape& s : kShapes) {
        const std::size_t n_in = static_cast<std::size_t>(s.in_c * s.in_h * s.in_w);
        const std::size_t n_out = static_cast<std::size_t>(s.out_c * s.out_h() * s.out_w());
        const std::size_t n_w = static_cast<std::size_t>(s.out_c * s.patch());
        auto in = random_vec<double>(n_in, 9);
        auto w = random_vec<double>(n_w, 10);
        auto b = random_vec<double>(static_cast<std::size_t>(s.out_c), 11);
        const auto r = random_vec<double>(n_out, 12);
        std::vector<double> scratch;
        auto loss = [&]() {
            std::vector<double> out(n_out);
            kernels::conv2d_forward(s, in.data(), w.data(), b.data(), out.data(), scratch);
            double l = 0;
            for (std::size_t i = 0; i < n_out; ++i) l += r[i] * out[i];
            return l;
        };
        std::vector<double> dw(n_w), db(b.size()), di(n_in);
        kernels::conv2d_backward(s, in.data(), w.data(), r.data(), dw.data(), db.data(), di.data(), scratch);
        for (std::size_t k = 0; k < n_w; k += 1 + n_w / 17) CHECK(fd(w, k, loss) == doctest::Approx(dw[k]).epsilon(1e-6));
        for (std::size_t k = 0; k < b.size(); ++k) CHECK(fd(b, k, loss) == doctest::Approx(db[k]).epsilon(1e-6));
        for (std::size_t k = 0; k < n_in; k += 1 + n_in / 17) CHECK(fd(in, k, loss) == doctest::Approx(di[k]).epsilon(1e-6));
    }
}

TEST_CASE("upsample and relu gradients")
{
    const int c = 3, h = 4, w = 5;
    auto x = random_vec<double>(static_cast<std::size_t>(c * h * w), 13);
    const auto r = random_vec<double>(static_cast<std::size_t>(c * 4 * h * w), 14);
    std::vector<double> up(r.size()), up_ref(r.size());
    kernels::upsample2x(x.data(), c, h, w, up.data());
    reference::upsample2x(x.data(), c, h, w, up_ref.data());
    CHECK(up == up_ref);
    CHECK(up[static_cast<std::size_t>(2 * w + 1)] == x[0]);  // (row 1, col 1) of channel 0 copies cell (0, 0)

    std::vector<double> dx(x.size()), dx_ref(x.size());
    kernels::upsample2x_backward(r.data(), c, h, w, dx.data());
    reference::upsample2x_backward(r.data(), c, h, w, dx_ref.data());
    CHECK(max_abs_diff(dx, dx_ref) < 1e-12);
    auto loss = [&]() {
        std::vector<double> u(r.size());
        kernels::upsample2x(x.data(), c, h, w, u.data());
        double l = 0;
        for (std::size_t i = 0; i < u.size(); ++i) l += r[i] * u[i];
        return l;
    };
    for (std::size_t k = 0; k < x.size(); k += 7) CHECK(fd(x, k, loss) == doctest::Approx(dx[k]).epsilon(1e-6));

    std::vector<double> a{-1.0, 0.0, 2.0, -3.0, 4.0};
    kernels::relu(a.data(), a.size());
    CHECK(a == std::vector<double>{0, 0, 2, 0, 4});
    std::vector<double> g{1, 1, 1, 1, 1};
    kernels::relu_backward(a.data(), g.data(), g.size());
    CHECK(g == std::vector<double>{0, 0, 1, 0, 1});
}

TEST_CASE("kernel results do not depend on the thread count")
{
    const ConvShape s{16, 48, 48, 32, 3, 1, 1};
    const std::size_t n_in = static_cast<std::size_t>(s.in_c * s.in_h * s.in_w);
    const std::size_t n_out = static_cast<std::size_t>(s.out_c * s.out_h() * s.out_w());
    const auto in = random_vec<float>(n_in, 15);
    const auto w = random_vec<float>(static_cast<std::size_t>(s.out_c * s.patch()), 16);
    const auto b = random_vec<float>(static_cast<std::size_t>(s.out_c), 17);
    const auto dout = random_vec<float>(n_out, 18);
    auto run = [&](int threads) {
        const int saved = omp_get_max_threads();
        omp_set_num_threads(threads);
        std::vector<float> scratch, out(n_out), dw(w.size()), db(b.size()), di(n_in);
        kernels::conv2d_forward(s, in.data(), w.data(), b.data(), out.data(), scratch);
        kernels::conv2d_backward(s, in.data(), w.data(), dout.data(), dw.data(), db.data(), di.data(), scratch);
        omp_set_num_threads(saved);
        out.insert(out.end(), dw.begin(), dw.end());
        out.insert(out.end(), db.begin(), db.end());
        out.insert(out.end(), di.begin(), di.end());
        return out;
    };
    const auto one = run(1);
    CHECK(run(3) == one);
    CHECK(run(8) == one);
}

}
