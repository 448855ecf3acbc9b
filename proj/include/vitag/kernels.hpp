#pragma once

#include <cstdint>

namespace vitag::kernels {

// Dense row-major kernels behind the tensor ops. Every kernel has an
// OpenMP-parallel entry point here and a serial twin in kernels::serial.
// Both call the same per-row routines, so their results are bit-identical;
// tests and the kernel benchmark rely on that equivalence.
//
// Parallelism is over independent output rows only. Each output element is
// reduced in a fixed serial order, which keeps results independent of the
// thread count.

// c[m,n] = a[m,k] * b[k,n], accumulating into c when accumulate is set.
template <class T>
void matmul_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
               bool accumulate = false);

// c[m,n] = a[m,k] * b[n,k]^T
template <class T>
void matmul_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
               bool accumulate = false);

// c[m,n] = a[k,m]^T * b[k,n]
template <class T>
void matmul_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
               bool accumulate = false);

// Shift-stable softmax over each length-`cols` row. `mask`, when non-null,
// marks keep positions with nonzero bytes; masked entries come out exactly
// zero. Rows whose mask is all zero are an error reported via return count
// (number of such rows); valid input returns 0.
template <class T>
int64_t softmax_rows(const T* x, T* out, int64_t rows, int64_t cols,
                     const unsigned char* mask = nullptr);

// Per-row layer normalization: y = (x - mean) / sqrt(var + eps) * gain + bias.
// mean/inv_std outputs (length rows) are kept for the backward pass and may
// be null when not needed.
template <class T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T* out,
                     int64_t rows, int64_t cols, T eps, T* mean = nullptr,
                     T* inv_std = nullptr);

namespace serial {

template <class T>
void matmul_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
               bool accumulate = false);
template <class T>
void matmul_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
               bool accumulate = false);
template <class T>
void matmul_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
               bool accumulate = false);
template <class T>
int64_t softmax_rows(const T* x, T* out, int64_t rows, int64_t cols,
                     const unsigned char* mask = nullptr);
template <class T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T* out,
                     int64_t rows, int64_t cols, T eps, T* mean = nullptr,
                     T* inv_std = nullptr);

}  // namespace serial

extern template void matmul_nn<float>(const float*, const float*, float*,
                                      int64_t, int64_t, int64_t, bool);
extern template void matmul_nn<double>(const double*, const double*, double*,
                                       int64_t, int64_t, int64_t, bool);
extern template void matmul_nt<float>(const float*, const float*, float*,
                                      int64_t, int64_t, int64_t, bool);
extern template void matmul_nt<double>(const double*, const double*, double*,
                                       int64_t, int64_t, int64_t, bool);
extern template void matmul_tn<float>(const float*, const float*, float*,
                                      int64_t, int64_t, int64_t, bool);
extern template void matmul_tn<double>(const double*, const double*, double*,
                                       int64_t, int64_t, int64_t, bool);
extern template int64_t softmax_rows<float>(const float*, float*, int64_t,
                                            int64_t, const unsigned char*);
extern template int64_t softmax_rows<double>(const double*, double*, int64_t,
                                             int64_t, const unsigned char*);
extern template void layer_norm_rows<float>(const float*, const float*,
                                            const float*, float*, int64_t,
                                            int64_t, float, float*, float*);
extern template void layer_norm_rows<double>(const double*, const double*,
                                             const double*, double*, int64_t,
                                             int64_t, double, double*, double*);

namespace serial {
extern template void matmul_nn<float>(const float*, const float*, float*,
                                      int64_t, int64_t, int64_t, bool);
extern template void matmul_nn<double>(const double*, const double*, double*,
                                       int64_t, int64_t, int64_t, bool);
extern template void matmul_nt<float>(const float*, const float*, float*,
                                      int64_t, int64_t, int64_t, bool);
extern template void matmul_nt<double>(const double*, const double*, double*,
                                       int64_t, int64_t, int64_t, bool);
extern template void matmul_tn<float>(const float*, const float*, float*,
                                      int64_t, int64_t, int64_t, bool);
extern template void matmul_tn<double>(const double*, const double*, double*,
                                       int64_t, int64_t, int64_t, bool);
extern template int64_t softmax_rows<float>(const float*, float*, int64_t,
                                            int64_t, const unsigned char*);
extern template int64_t softmax_rows<double>(const double*, double*, int64_t,
                                             int64_t, const unsigned char*);
extern template void layer_norm_rows<float>(const float*, const float*,
                                            const float*, float*, int64_t,
                                            int64_t, float, float*, float*);
extern template void layer_norm_rows<double>(const double*, const double*,
                                             const double*, double*, int64_t,
                                             int64_t, double, double*, double*);
}  // namespace serial

}  // namespace vitag::kernels
