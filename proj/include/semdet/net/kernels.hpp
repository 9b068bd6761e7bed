#pragma once

#include <vector>

namespace semdet::net {

/// Square-kernel 2-D convolution geometry on a single C x H x W image.
struct ConvShape {
    int in_c = 1;
    int in_h = 1;
    int in_w = 1;
    int out_c = 1;
    int kernel = 3;
    int stride = 1;
    int pad = 1;

    int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
    int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
    int patch() const { return in_c * kernel * kernel; }
    bool is_pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }
};

/// OpenMP kernels. Work is split so that every output element is owned by
/// one thread and summed in a fixed order, so results do not depend on the
/// thread count.
namespace kernels {

/// C = A * B (or C += A * B), all row-major: A is M x K, B is K x N.
template <typename T>
void gemm(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate);

/// out (rows x cols) = transpose of in (cols x rows).
template <typename T>
void transpose(int rows, int cols, const T* in, T* out);

/// Patch matrix of shape patch() x (out_h * out_w).
template <typename T>
void im2col(const ConvShape& s, const T* in, T* col);

/// Scatter-adds a patch-matrix gradient back onto the input gradient.
template <typename T>
void col2im(const ConvShape& s, const T* col, T* in_grad);

template <typename T>
void conv2d_forward(const ConvShape& s, const T* in, const T* weight, const T* bias, T* out,
                    std::vector<T>& scratch);

/// Writes (not accumulates) dweight and dbias; din may be null.
template <typename T>
void conv2d_backward(const ConvShape& s, const T* in, const T* weight, const T* dout, T* dweight, T* dbias,
                     T* din, std::vector<T>& scratch);

/// Nearest-neighbour 2x upsampling of a C x H x W map.
template <typename T>
void upsample2x(const T* in, int c, int h, int w, T* out);

/// Gradient of upsample2x: each input cell sums its four children.
template <typename T>
void upsample2x_backward(const T* dout, int c, int h, int w, T* din);

template <typename T>
void relu(T* x, std::size_t n);

/// grad *= (activated output > 0)
template <typename T>
void relu_backward(const T* out, T* grad, std::size_t n);

} // namespace kernels

/// Direct-loop serial versions of the kernels above; kept as the test oracle
/// and benchmark baseline.
namespace reference {

template <typename T>
void conv2d_forward(const ConvShape& s, const T* in, const T* weight, const T* bias, T* out);

template <typename T>
void conv2d_backward(const ConvShape& s, const T* in, const T* weight, const T* dout, T* dweight, T* dbias,
                     T* din);

template <typename T>
void upsample2x(const T* in, int c, int h, int w, T* out);

template <typename T>
void upsample2x_backward(const T* dout, int c, int h, int w, T* din);

template <typename T>
void gemm(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate);

} // namespace reference

} // namespace semdet::net
