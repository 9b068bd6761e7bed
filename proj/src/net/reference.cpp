#include "semdet/net/kernels.hpp"

#include <algorithm>

namespace semdet::net::reference {

template <typename T>
void conv2d_forward(const ConvShape& s, const T* in, const T* weight, const T* bias, T* out)
{
    const int oh = s.out_h();
    const int ow = s.out_w();
    for (int oc = 0; oc < s.out_c; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                T sum = bias[oc];
                for (int ic = 0; ic < s.in_c; ++ic) {
                    for (int ky = 0; ky < s.kernel; ++ky) {
                        const int iy = oy * s.stride - s.pad + ky;
                        if (iy < 0 || iy >= s.in_h) {
                            continue;
                        }
                        for (int kx = 0; kx < s.kernel; ++kx) {
                            const int ix = ox * s.stride - s.pad + kx;
                            if (ix < 0 || ix >= s.in_w) {
                                continue;
                            }
                            sum += weight[((static_cast<std::size_t>(oc) * s.in_c + ic) * s.kernel + ky) * s.kernel + kx] *
                                   in[(static_cast<std::size_t>(ic) * s.in_h + iy) * s.in_w + ix];
                        }
                    }
                }
                out[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox] = sum;
            }
        }
    }
}

template <typename T>
void conv2d_backward(const ConvShape& s, const T* in, const T* weight, const T* dout, T* dweight, T* dbias, T* din)
{
    const int oh = s.out_h();
    const int ow = s.out_w();
    std::fill(dweight, dweight + static_cast<std::size_t>(s.out_c) * s.patch(), T{0});
    std::fill(dbias, dbias + s.out_c, T{0});
    if (din != nullptr) {
        std::fill(din, din + static_cast<std::size_t>(s.in_c) * s.in_h * s.in_w, T{0});
    }
    for (int oc = 0; oc < s.out_c; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const T g = dout[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox];
                dbias[oc] += g;
                for (int ic = 0; ic < s.in_c; ++ic) {
                    for (int ky = 0; ky < s.kernel; ++ky) {
                        const int iy = oy * s.stride - s.pad + ky;
                        if (iy < 0 || iy >= s.in_h) {
                            continue;
                        }
                        for (int kx = 0; kx < s.kernel; ++kx) {
                            const int ix = ox * s.stride - s.pad + kx;
                            if (ix < 0 || ix >= s.in_w) {
                                continue;
                            }
                            const std::size_t wi =
                                ((static_cast<std::size_t>(oc) * s.in_c + ic) * s.kernel + ky) * s.kernel + kx;
                            const std::size_t ii = (static_cast<std::size_t>(ic) * s.in_h + iy) * s.in_w + ix;
                            dweight[wi] += g * in[ii];
                            if (din != nullptr) {
                                din[ii] += g * weight[wi];
                            }
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void upsample2x(const T* in, int c, int h, int w, T* out)
{
    for (int p = 0; p < c; ++p) {
        for (int y = 0; y < 2 * h; ++y) {
            for (int x = 0; x < 2 * w; ++x) {
                out[(static_cast<std::size_t>(p) * 2 * h + y) * 2 * w + x] =
                    in[(static_cast<std::size_t>(p) * h + y / 2) * w + x / 2];
            }
        }
    }
}

template <typename T>
void upsample2x_backward(const T* dout, int c, int h, int w, T* din)
{
    std::fill(din, din + static_cast<std::size_t>(c) * h * w, T{0});
    for (int p = 0; p < c; ++p) {
        for (int y = 0; y < 2 * h; ++y) {
            for (int x = 0; x < 2 * w; ++x) {
                din[(static_cast<std::size_t>(p) * h + y / 2) * w + x / 2] +=
                    dout[(static_cast<std::size_t>(p) * 2 * h + y) * 2 * w + x];
            }
        }
    }
}

template <typename T>
void gemm(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate)
{
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < N; ++j) {
            T sum = accumulate ? C[static_cast<std::size_t>(i) * N + j] : T{0};
            for (int k = 0; k < K; ++k) {
                sum += A[static_cast<std::size_t>(i) * K + k] * B[static_cast<std::size_t>(k) * N + j];
            }
            C[static_cast<std::size_t>(i) * N + j] = sum;
        }
    }
}

#define SEMDET_INSTANTIATE(T)                                                                        \
    template void conv2d_forward<T>(const ConvShape&, const T*, const T*, const T*, T*);             \
    template void conv2d_backward<T>(const ConvShape&, const T*, const T*, const T*, T*, T*, T*);     \
    template void upsample2x<T>(const T*, int, int, int, T*);                                        \
    template void upsample2x_backward<T>(const T*, int, int, int, T*);                               \
    template void gemm<T>(int, int, int, const T*, const T*, T*, bool);

SEMDET_INSTANTIATE(float)
SEMDET_INSTANTIATE(double)

#undef SEMDET_INSTANTIATE

} // namespace semdet::net::reference
