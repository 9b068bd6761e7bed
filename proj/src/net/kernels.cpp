#include "semdet/net/kernels.hpp"

#include <algorithm>
#include <cstring>

namespace semdet::net::kernels {

namespace {

// Register tile: MR rows of C by two SIMD vectors' worth of columns.
constexpr int kMR = 4;
constexpr int kKC = 256;

template <typename T>
constexpr int kNR = 64 / static_cast<int>(sizeof(T));

template <typename T>
inline void tile_full(int N, int K, int k0, int k1, const T* A, const T* B, T* C, int i0, int j0, bool accumulate)
{
    constexpr int NR = kNR<T>;
    T acc[kMR][NR];
    for (int r = 0; r < kMR; ++r) {
        for (int t = 0; t < NR; ++t) {
            acc[r][t] = accumulate ? C[static_cast<std::size_t>(i0 + r) * N + j0 + t] : T{0};
        }
    }
    const T* a0 = A + static_cast<std::size_t>(i0) * K;
    const T* a1 = a0 + K;
    const T* a2 = a1 + K;
    const T* a3 = a2 + K;
    for (int k = k0; k < k1; ++k) {
        const T* b = B + static_cast<std::size_t>(k) * N + j0;
        const T w0 = a0[k];
        const T w1 = a1[k];
        const T w2 = a2[k];
        const T w3 = a3[k];
#pragma omp simd
        for (int t = 0; t < NR; ++t) {
            acc[0][t] += w0 * b[t];
            acc[1][t] += w1 * b[t];
            acc[2][t] += w2 * b[t];
            acc[3][t] += w3 * b[t];
        }
    }
    for (int r = 0; r < kMR; ++r) {
        std::memcpy(C + static_cast<std::size_t>(i0 + r) * N + j0, acc[r], sizeof(acc[r]));
    }
}

template <typename T>
inline void tile_edge(int N, int K, int k0, int k1, const T* A, const T* B, T* C, int i0, int j0, int mr, int nr,
                      bool accumulate)
{
    for (int r = 0; r < mr; ++r) {
        T* c = C + static_cast<std::size_t>(i0 + r) * N + j0;
        if (!accumulate) {
            std::fill(c, c + nr, T{0});
        }
        const T* a = A + static_cast<std::size_t>(i0 + r) * K;
        for (int k = k0; k < k1; ++k) {
            const T w = a[k];
            const T* b = B + static_cast<std::size_t>(k) * N + j0;
            for (int t = 0; t < nr; ++t) {
                c[t] += w * b[t];
            }
        }
    }
}

} // namespace

template <typename T>
void gemm(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate)
{
    constexpr int NR = kNR<T>;
    const int mblocks = (M + kMR - 1) / kMR;
    const int nblocks = (N + NR - 1) / NR;
    if (K == 0) {
        if (!accumulate) {
            std::fill(C, C + static_cast<std::size_t>(M) * N, T{0});
        }
        return;
    }
    // K is processed in chunks so a KC x NR panel of B stays in L1 across
    // row blocks; each output still sums over k in ascending order.
#pragma omp parallel
    for (int k0 = 0; k0 < K; k0 += kKC) {
        const int k1 = std::min(K, k0 + kKC);
        const bool acc = accumulate || k0 > 0;
#pragma omp for collapse(2) schedule(static)
        for (int bj = 0; bj < nblocks; ++bj) {
            for (int bi = 0; bi < mblocks; ++bi) {
                const int i0 = bi * kMR;
                const int j0 = bj * NR;
                const int mr = std::min(kMR, M - i0);
                const int nr = std::min(NR, N - j0);
                if (mr == kMR && nr == NR) {
                    tile_full(N, K, k0, k1, A, B, C, i0, j0, acc);
                } else {
                    tile_edge(N, K, k0, k1, A, B, C, i0, j0, mr, nr, acc);
                }
            }
        }
    }
}

template <typename T>
void transpose(int rows, int cols, const T* in, T* out)
{
    // in is cols x rows
    constexpr int kBlock = 32;
#pragma omp parallel for collapse(2) schedule(static)
    for (int r0 = 0; r0 < rows; r0 += kBlock) {
        for (int c0 = 0; c0 < cols; c0 += kBlock) {
            const int r1 = std::min(rows, r0 + kBlock);
            const int c1 = std::min(cols, c0 + kBlock);
            for (int c = c0; c < c1; ++c) {
                for (int r = r0; r < r1; ++r) {
                    out[static_cast<std::size_t>(r) * cols + c] = in[static_cast<std::size_t>(c) * rows + r];
                }
            }
        }
    }
}

template <typename T>
void im2col(const ConvShape& s, const T* in, T* col)
{
    const int oh = s.out_h();
    const int ow = s.out_w();
    const int kk = s.kernel * s.kernel;
    const std::size_t n = static_cast<std::size_t>(oh) * ow;
#pragma omp parallel for schedule(static)
    for (int row = 0; row < s.patch(); ++row) {
        const int c = row / kk;
        const int ky = (row % kk) / s.kernel;
        const int kx = row % s.kernel;
        const T* plane = in + static_cast<std::size_t>(c) * s.in_h * s.in_w;
        T* dst = col + static_cast<std::size_t>(row) * n;
        for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s.stride - s.pad + ky;
            T* d = dst + static_cast<std::size_t>(oy) * ow;
            if (iy < 0 || iy >= s.in_h) {
                std::fill(d, d + ow, T{0});
                continue;
            }
            const T* src = plane + static_cast<std::size_t>(iy) * s.in_w;
            for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * s.stride - s.pad + kx;
                d[ox] = (ix >= 0 && ix < s.in_w) ? src[ix] : T{0};
            }
        }
    }
}

template <typename T>
void col2im(const ConvShape& s, const T* col, T* in_grad)
{
    const int oh = s.out_h();
    const int ow = s.out_w();
    const int kk = s.kernel * s.kernel;
    const std::size_t n = static_cast<std::size_t>(oh) * ow;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < s.in_c; ++c) {
        T* plane = in_grad + static_cast<std::size_t>(c) * s.in_h * s.in_w;
        for (int k = 0; k < kk; ++k) {
            const int ky = k / s.kernel;
            const int kx = k % s.kernel;
            const T* src = col + static_cast<std::size_t>(c * kk + k) * n;
            for (int oy = 0; oy < oh; ++oy) {
                const int iy = oy * s.stride - s.pad + ky;
                if (iy < 0 || iy >= s.in_h) {
                    continue;
                }
                T* dst = plane + static_cast<std::size_t>(iy) * s.in_w;
                const T* sv = src + static_cast<std::size_t>(oy) * ow;
                for (int ox = 0; ox < ow; ++ox) {
                    const int ix = ox * s.stride - s.pad + kx;
                    if (ix >= 0 && ix < s.in_w) {
                        dst[ix] += sv[ox];
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_forward(const ConvShape& s, const T* in, const T* weight, const T* bias, T* out, std::vector<T>& scratch)
{
    const int n = s.out_h() * s.out_w();
    const T* col = in;
    if (!s.is_pointwise()) {
        scratch.resize(static_cast<std::size_t>(s.patch()) * n);
        im2col(s, in, scratch.data());
        col = scratch.data();
    }
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < s.out_c; ++oc) {
        std::fill(out + static_cast<std::size_t>(oc) * n, out + static_cast<std::size_t>(oc + 1) * n, bias[oc]);
    }
    gemm(s.out_c, n, s.patch(), weight, col, out, true);
}

template <typename T>
void conv2d_backward(const ConvShape& s, const T* in, const T* weight, const T* dout, T* dweight, T* dbias, T* din,
                     std::vector<T>& scratch)
{
    const int n = s.out_h() * s.out_w();
    const int K = s.patch();
    const std::size_t col_size = static_cast<std::size_t>(K) * n;

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < s.out_c; ++oc) {
        const T* g = dout + static_cast<std::size_t>(oc) * n;
        T sum{0};
        for (int j = 0; j < n; ++j) {
            sum += g[j];
        }
        dbias[oc] = sum;
    }

    // scratch: [col (K x n) | colT (n x K) or dcol (K x n) | weightT (K x out_c)]
    scratch.resize(2 * col_size + static_cast<std::size_t>(K) * s.out_c);
    T* col = scratch.data();
    T* work = col + col_size;
    T* weight_t = work + col_size;
    const T* col_src = in;
    if (!s.is_pointwise()) {
        im2col(s, in, col);
        col_src = col;
    }
    // dW (out_c x K) = dout (out_c x n) * col^T (n x K)
    transpose(n, K, col_src, work);
    gemm(s.out_c, K, n, dout, work, dweight, false);

    if (din == nullptr) {
        return;
    }
    // dcol (K x n) = W^T (K x out_c) * dout (out_c x n)
    transpose(K, s.out_c, weight, weight_t);
    if (s.is_pointwise()) {
        gemm(K, n, s.out_c, weight_t, dout, din, false);
        return;
    }
    gemm(K, n, s.out_c, weight_t, dout, work, false);
    std::fill(din, din + static_cast<std::size_t>(s.in_c) * s.in_h * s.in_w, T{0});
    col2im(s, work, din);
}

template <typename T>
void upsample2x(const T* in, int c, int h, int w, T* out)
{
    const int ow = 2 * w;
#pragma omp parallel for schedule(static)
    for (int plane = 0; plane < c; ++plane) {
        const T* src = in + static_cast<std::size_t>(plane) * h * w;
        T* dst = out + static_cast<std::size_t>(plane) * 4 * h * w;
        for (int y = 0; y < h; ++y) {
            T* row0 = dst + static_cast<std::size_t>(2 * y) * ow;
            for (int x = 0; x < w; ++x) {
                row0[2 * x] = row0[2 * x + 1] = src[static_cast<std::size_t>(y) * w + x];
            }
            std::memcpy(row0 + ow, row0, sizeof(T) * ow);
        }
    }
}

template <typename T>
void upsample2x_backward(const T* dout, int c, int h, int w, T* din)
{
    const int ow = 2 * w;
#pragma omp parallel for schedule(static)
    for (int plane = 0; plane < c; ++plane) {
        const T* src = dout + static_cast<std::size_t>(plane) * 4 * h * w;
        T* dst = din + static_cast<std::size_t>(plane) * h * w;
        for (int y = 0; y < h; ++y) {
            const T* r0 = src + static_cast<std::size_t>(2 * y) * ow;
            const T* r1 = r0 + ow;
            for (int x = 0; x < w; ++x) {
                dst[static_cast<std::size_t>(y) * w + x] = (r0[2 * x] + r0[2 * x + 1]) + (r1[2 * x] + r1[2 * x + 1]);
            }
        }
    }
}

template <typename T>
void relu(T* x, std::size_t n)
{
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = x[i] > T{0} ? x[i] : T{0};
    }
}

template <typename T>
void relu_backward(const T* out, T* grad, std::size_t n)
{
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        grad[i] = out[i] > T{0} ? grad[i] : T{0};
    }
}

#define SEMDET_INSTANTIATE(T)                                                                              \
    template void gemm<T>(int, int, int, const T*, const T*, T*, bool);                                    \
    template void transpose<T>(int, int, const T*, T*);                                                    \
    template void im2col<T>(const ConvShape&, const T*, T*);                                               \
    template void col2im<T>(const ConvShape&, const T*, T*);                                               \
    template void conv2d_forward<T>(const ConvShape&, const T*, const T*, const T*, T*, std::vector<T>&);  \
    template void conv2d_backward<T>(const ConvShape&, const T*, const T*, const T*, T*, T*, T*,           \
                                     std::vector<T>&);                                                     \
    template void upsample2x<T>(const T*, int, int, int, T*);                                              \
    template void upsample2x_backward<T>(const T*, int, int, int, T*);                                     \
    template void relu<T>(T*, std::size_t);                                                                \
    template void relu_backward<T>(const T*, T*, std::size_t);

SEMDET_INSTANTIATE(float)
SEMDET_INSTANTIATE(double)

#undef SEMDET_INSTANTIATE

} // namespace semdet::net::kernels
