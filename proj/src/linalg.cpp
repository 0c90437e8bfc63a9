#include "gatgan/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gatgan/errors.hpp"

namespace gatgan::linalg {

namespace {

double off_diag_norm(const std::vector<double>& a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) s += a[i * n + j] * a[i * n + j];
    return std::sqrt(s);
}

}  // namespace

SymEig sym_eig(std::vector<double> a, std::size_t n, double sym_tol) {
    if (a.size() != n * n) {
        throw DimensionError("sym_eig: expected " + std::to_string(n * n) + " entries, got " +
                             std::to_string(a.size()));
    }
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            asym = std::max(asym, std::abs(a[i * n + j] - a[j * n + i]));
    if (asym > sym_tol) {
        throw ContractError("sym_eig: matrix asymmetry " + std::to_string(asym) +
                            " exceeds tolerance");
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = a[j * n + i] = m;
        }

    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    double frob = 0.0;
    for (double x : a) frob += x * x;
    frob = std::sqrt(frob);
    const double stop = 1e-12 * std::max(frob, 1e-300);

    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps && off_diag_norm(a, n) > stop; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {  // rows p,q of A
                    const double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {  // cols p,q of A
                    const double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {  // accumulate rotation
                    const double vkp = v[k * n + p], vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    SymEig out;
    out.eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.eigenvalues[i] = a[i * n + i];

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return out.eigenvalues[x] < out.eigenvalues[y];
    });
    SymEig sorted;
    sorted.eigenvalues.resize(n);
    sorted.vectors.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        sorted.eigenvalues[j] = out.eigenvalues[order[j]];
        for (std::size_t i = 0; i < n; ++i) sorted.vectors[i * n + j] = v[i * n + order[j]];
    }
    return sorted;
}

std::vector<double> sqrtm_psd(const std::vector<double>& a, std::size_t n, double sym_tol) {
    SymEig eig = sym_eig(a, n, sym_tol);
    std::vector<double> root(n * n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double lam = std::max(eig.eigenvalues[k], 0.0);
        const double s = std::sqrt(lam);
        if (s == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const double vis = eig.vectors[i * n + k] * s;
            for (std::size_t j = 0; j < n; ++j) {
                root[i * n + j] += vis * eig.vectors[j * n + k];
            }
        }
    }
    return root;
}

double spectral_norm(const std::vector<double>& a, std::size_t rows, std::size_t cols) {
    if (a.size() != rows * cols) {
        throw DimensionError("spectral_norm: expected " + std::to_string(rows * cols) +
                             " entries, got " + std::to_string(a.size()));
    }
    if (rows == 0 || cols == 0) return 0.0;
    // Gram matrix on the smaller side keeps the Jacobi problem small.
    const bool use_ata = cols <= rows;
    const std::size_t n = use_ata ? cols : rows;
    std::vector<double> gram(n * n, 0.0);
    if (use_ata) {
        for (std::size_t k = 0; k < rows; ++k) {
            const double* row = a.data() + k * cols;
            for (std::size_t i = 0; i < n; ++i) {
                const double ri = row[i];
                for (std::size_t j = i; j < n; ++j) gram[i * n + j] += ri * row[j];
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double* ri = a.data() + i * cols;
            for (std::size_t j = i; j < n; ++j) {
                const double* rj = a.data() + j * cols;
                double s = 0.0;
                for (std::size_t k = 0; k < cols; ++k) s += ri[k] * rj[k];
                gram[i * n + j] = s;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) gram[i * n + j] = gram[j * n + i];
    SymEig eig = sym_eig(std::move(gram), n);
    return std::sqrt(std::max(eig.eigenvalues.back(), 0.0));
}

std::vector<double> matmul_square(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t n) {
    if (a.size() != n * n || b.size() != n * n) {
        throw DimensionError("matmul_square: operands must both be " + std::to_string(n) + "x" +
                             std::to_string(n));
    }
    std::vector<double> c(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = a[i * n + k];
            for (std::size_t j = 0; j < n; ++j) c[i * n + j] += aik * b[k * n + j];
        }
    }
    return c;
}

double trace(const std::vector<double>& a, std::size_t n) {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) t += a[i * n + i];
    return t;
}

}  // namespace gatgan::linalg
