#include "vitag/kernels.hpp"

#include <cmath>
#include <limits>

namespace vitag::kernels {

namespace {

// Work below this many multiply-adds is not worth a parallel region.
constexpr int64_t kParallelFlops = 1 << 15;

// One output row of C = A * B. Fixed k-order accumulation.
template <class T>
inline void row_nn(const T* a_row, const T* b, T* c_row, int64_t k, int64_t n,
                   bool accumulate) {
    if (!accumulate) {
        for (int64_t j = 0; j < n; ++j) c_row[j] = T(0);
    }
    for (int64_t p = 0; p < k; ++p) {
        const T av = a_row[p];
        const T* b_row = b + p * n;
        for (int64_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
    }
}

template <class T>
inline void row_nt(const T* a_row, const T* b, T* c_row, int64_t k, int64_t n,
                   bool accumulate) {
    for (int64_t j = 0; j < n; ++j) {
        const T* b_row = b + j * k;
        T acc = T(0);
        for (int64_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
        c_row[j] = accumulate ? c_row[j] + acc : acc;
    }
}

// Row i of C = A^T * B where A is [k,m]: c[i,:] = sum_p a[p,i] * b[p,:].
template <class T>
inline void row_tn(const T* a, const T* b, T* c_row, int64_t i, int64_t m,
                   int64_t k, int64_t n, bool accumulate) {
    if (!accumulate) {
        for (int64_t j = 0; j < n; ++j) c_row[j] = T(0);
    }
    for (int64_t p = 0; p < k; ++p) {
        const T av = a[p * m + i];
        const T* b_row = b + p * n;
        for (int64_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
    }
}

template <class T>
inline int64_t softmax_row(const T* x, T* out, int64_t cols,
                           const unsigned char* mask) {
    T max_v = -std::numeric_limits<T>::infinity();
    for (int64_t j = 0; j < cols; ++j) {
        if (!mask || mask[j]) max_v = std::max(max_v, x[j]);
    }
    if (max_v == -std::numeric_limits<T>::infinity()) {
        for (int64_t j = 0; j < cols; ++j) out[j] = T(0);
        return 1;  // fully masked row
    }
    T sum = T(0);
    for (int64_t j = 0; j < cols; ++j) {
        if (!mask || mask[j]) {
            out[j] = std::exp(x[j] - max_v);
            sum += out[j];
        } else {
            out[j] = T(0);
        }
    }
    const T inv = T(1) / sum;
    for (int64_t j = 0; j < cols; ++j) out[j] *= inv;
    return 0;
}

template <class T>
inline void layer_norm_row(const T* x, const T* gain, const T* bias, T* out,
                           int64_t cols, T eps, T* mean_out, T* inv_std_out) {
    T mean = T(0);
    for (int64_t j = 0; j < cols; ++j) mean += x[j];
    mean /= T(cols);
    T var = T(0);
    for (int64_t j = 0; j < cols; ++j) {
        const T d = x[j] - mean;
        var += d * d;
    }
    var /= T(cols);
    const T inv_std = T(1) / std::sqrt(var + eps);
    for (int64_t j = 0; j < cols; ++j) {
        out[j] = (x[j] - mean) * inv_std * gain[j] + bias[j];
    }
    if (mean_out) *mean_out = mean;
    if (inv_std_out) *inv_std_out = inv_std;
}

}  // namespace

template <class T>
void matmul_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
               bool accumulate) {
#pragma omp parallel for schedule(static) if (m > 1 && m * k * n > kParallelFlops)
    for (int64_t i = 0; i < m; ++i) {
        row_nn(a + i * k, b, c + i * n, k, n, accumulate);
    }
}

template <class T>
void matmul_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
               bool accumulate) {
#pragma omp parallel for schedule(static) if (m > 1 && m * k * n > kParallelFlops)
    for (int64_t i = 0; i < m; ++i) {
        row_nt(a + i * k, b, c + i * n, k, n, accumulate);
    }
}

template <class T>
void matmul_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
               bool accumulate) {
#pragma omp parallel for schedule(static) if (m > 1 && m * k * n > kParallelFlops)
    for (int64_t i = 0; i < m; ++i) {
        row_tn(a, b, c + i * n, i, m, k, n, accumulate);
    }
}

template <class T>
int64_t softmax_rows(const T* x, T* out, int64_t rows, int64_t cols,
                     const unsigned char* mask) {
    int64_t bad = 0;
#pragma omp parallel for schedule(static) reduction(+ : bad) \
    if (rows > 1 && rows * cols > kParallelFlops)
    for (int64_t i = 0; i < rows; ++i) {
        bad += softmax_row(x + i * cols, out + i * cols, cols,
                           mask ? mask + i * cols : nullptr);
    }
    return bad;
}

template <class T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T* out,
                     int64_t rows, int64_t cols, T eps, T* mean,
                     T* inv_std) {
#pragma omp parallel for schedule(static) if (rows > 1 && rows * cols > kParallelFlops)
    for (int64_t i = 0; i < rows; ++i) {
        layer_norm_row(x + i * cols, gain, bias, out + i * cols, cols, eps,
                       mean ? mean + i : nullptr,
                       inv_std ? inv_std + i : nullptr);
    }
}

namespace serial {

template <class T>
void matmul_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
               bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        row_nn(a + i * k, b, c + i * n, k, n, accumulate);
    }
}

template <class T>
void matmul_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
               bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        row_nt(a + i * k, b, c + i * n, k, n, accumulate);
    }
}

template <class T>
void matmul_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
               bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        row_tn(a, b, c + i * n, i, m, k, n, accumulate);
    }
}

template <class T>
int64_t softmax_rows(const T* x, T* out, int64_t rows, int64_t cols,
                     const unsigned char* mask) {
    int64_t bad = 0;
    for (int64_t i = 0; i < rows; ++i) {
        bad += softmax_row(x + i * cols, out + i * cols, cols,
                           mask ? mask + i * cols : nullptr);
    }
    return bad;
}

template <class T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T* out,
                     int64_t rows, int64_t cols, T eps, T* mean,
                     T* inv_std) {
    for (int64_t i = 0; i < rows; ++i) {
        layer_norm_row(x + i * cols, gain, bias, out + i * cols, cols, eps,
                       mean ? mean + i : nullptr,
                       inv_std ? inv_std + i : nullptr);
    }
}

}  // namespace serial

template void matmul_nn<float>(const float*, const float*, float*, int64_t,
                               int64_t, int64_t, bool);
template void matmul_nn<double>(const double*, const double*, double*, int64_t,
                                int64_t, int64_t, bool);
template void matmul_nt<float>(const float*, const float*, float*, int64_t,
                               int64_t, int64_t, bool);
template void matmul_nt<double>(const double*, const double*, double*, int64_t,
                                int64_t, int64_t, bool);
template void matmul_tn<float>(const float*, const float*, float*, int64_t,
                               int64_t, int64_t, bool);
template void matmul_tn<double>(const double*, const double*, double*, int64_t,
                                int64_t, int64_t, bool);
template int64_t softmax_rows<float>(const float*, float*, int64_t, int64_t,
                                     const unsigned char*);
template int64_t softmax_rows<double>(const double*, double*, int64_t, int64_t,
                                      const unsigned char*);
template void layer_norm_rows<float>(const float*, const float*, const float*,
                                     float*, int64_t, int64_t, float, float*,
                                     float*);
template void layer_norm_rows<double>(const double*, const double*,
                                      const double*, double*, int64_t, int64_t,
                                      double, double*, double*);

namespace serial {
template void matmul_nn<float>(const float*, const float*, float*, int64_t,
                               int64_t, int64_t, bool);
template void matmul_nn<double>(const double*, const double*, double*, int64_t,
                                int64_t, int64_t, bool);
template void matmul_nt<float>(const float*, const float*, float*, int64_t,
                               int64_t, int64_t, bool);
template void matmul_nt<double>(const double*, const double*, double*, int64_t,
                                int64_t, int64_t, bool);
template void matmul_tn<float>(const float*, const float*, float*, int64_t,
                               int64_t, int64_t, bool);
template void matmul_tn<double>(const double*, const double*, double*, int64_t,
                                int64_t, int64_t, bool);
template int64_t softmax_rows<float>(const float*, float*, int64_t, int64_t,
                                     const unsigned char*);
template int64_t softmax_rows<double>(const double*, double*, int64_t, int64_t,
                                      const unsigned char*);
template void layer_norm_rows<float>(const float*, const float*, const float*,
                                     float*, int64_t, int64_t, float, float*,
                                     float*);
template void layer_norm_rows<double>(const double*, const double*,
                                      const double*, double*, int64_t, int64_t,
                                      double, double*, double*);
}  // namespace serial

}  // namespace vitag::kernels
