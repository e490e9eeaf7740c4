#pragma once

#include <cfenv>
#include <vector>

#include "problem.hpp"

namespace hopfval {

// Complex interval matrix in midpoint-radius form: entry (r,c) is the
// rectangle with centre (mre, mim) and half-side rad in both directions.
class IMatrix {
public:
    IMatrix() = default;
    IMatrix(int rows, int cols) : rows_(rows), cols_(cols), mre_(size_t(rows) * cols, 0.0), mim_(mre_), rad_(mre_) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    void set(int r, int c, const CInterval& v) {
        size_t i = idx(r, c);
        double mr = v.re.mid(), mi = v.im.mid();
        mre_[i] = mr;
        mim_[i] = mi;
        rad_[i] = std::max(v.re.rad(), v.im.rad());
    }
    void set_point(int r, int c, cplx v) {
        size_t i = idx(r, c);
        mre_[i] = v.real();
        mim_[i] = v.imag();
        rad_[i] = 0.0;
    }
    CInterval get(int r, int c) const {
        size_t i = idx(r, c);
        double rr = rad_[i];
        return {Interval(rnd::sub_down(mre_[i], rr), rnd::add_up(mre_[i], rr)),
                Interval(rnd::sub_down(mim_[i], rr), rnd::add_up(mim_[i], rr))};
    }
    // upper bound of the modulus over the entry
    double mag(int r, int c) const { return get(r, c).mag(); }

    const double* mre() const { return mre_.data(); }
    const double* mim() const { return mim_.data(); }
    const double* rad() const { return rad_.data(); }
    double* mre() { return mre_.data(); }
    double* mim() { return mim_.data(); }
    double* rad() { return rad_.data(); }

    static IMatrix from_point(const CMat& A) {
        IMatrix M(A.rows(), A.cols());
        for (int r = 0; r < A.rows(); ++r)
            for (int c = 0; c < A.cols(); ++c) M.set_point(r, c, A(r, c));
        return M;
    }

private:
    size_t idx(int r, int c) const { return size_t(r) * cols_ + c; }
    int rows_ = 0, cols_ = 0;
    std::vector<double> mre_, mim_, rad_;
};

namespace detail {

// C += A * B for row-major real matrices, in whatever rounding mode is
// active.  Each update is a single multiply-add, so with upward (downward)
// rounding every partial sum stays above (below) the exact one.
[[gnu::noinline]] inline void gemm_acc(const double* A, const double* B, double* C, int n, int kd, int p) {
    constexpr int KB = 96;
    for (int k0 = 0; k0 < kd; k0 += KB) {
        int k1 = std::min(kd, k0 + KB);
        for (int i = 0; i < n; ++i) {
            double* __restrict c = C + size_t(i) * p;
            const double* a = A + size_t(i) * kd;
            for (int k = k0; k < k1; ++k) {
                double aik = a[k];
                if (aik == 0.0) continue;
                const double* __restrict b = B + size_t(k) * p;
                for (int j = 0; j < p; ++j) c[j] += aik * b[j];
            }
        }
    }
}

// out = x + y (or x - y) rounded in the active mode, elementwise
[[gnu::noinline]] inline void vec_add(const double* x, const double* y, double* out, size_t len, double sign) {
    for (size_t i = 0; i < len; ++i) out[i] = x[i] + sign * y[i];
}

[[gnu::noinline]] inline void midrad_from_bounds(const double* lo, const double* hi, double* mid, double* rad, size_t len) {
    // called in upward mode: mid is any point, rad bounds both distances
    for (size_t i = 0; i < len; ++i) {
        double m = 0.5 * lo[i] + 0.5 * hi[i];
        mid[i] = m;
        double a = hi[i] - m;
        double b = -(lo[i] - m);  // with upward rounding, -(lo - m) >= m - lo
        rad[i] = a > b ? a : b;
    }
}

}  // namespace detail

// Point complex matrix with the split real arrays used by the product kernel.
class PointMatrix {
public:
    PointMatrix() = default;
    explicit PointMatrix(const CMat& A) : rows_(A.rows()), cols_(A.cols()) {
        size_t len = size_t(rows_) * cols_;
        re_.resize(len);
        im_.resize(len);
        nim_.resize(len);
        absum_.resize(len);
        abs_.resize(len);
        for (int r = 0; r < rows_; ++r)
            for (int c = 0; c < cols_; ++c) {
                size_t i = size_t(r) * cols_ + c;
                re_[i] = A(r, c).real();
                im_[i] = A(r, c).imag();
                nim_[i] = -im_[i];
                absum_[i] = rnd::add_up(std::fabs(re_[i]), std::fabs(im_[i]));
                abs_[i] = CInterval(A(r, c)).mag();
            }
        mat_ = A;
    }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const CMat& matrix() const { return mat_; }
    // upper bound of |A(r,c)|
    double abs(int r, int c) const { return abs_[size_t(r) * cols_ + c]; }

    // rigorous enclosure of A * M
    IMatrix operator*(const IMatrix& M) const {
        if (M.rows() != cols_) throw std::invalid_argument("matrix product dimension mismatch");
        const int n = rows_, kd = cols_, p = M.cols();
        size_t len = size_t(n) * p;
        std::vector<double> ru(len, 0.0), iu(len, 0.0), rd(len, 0.0), id(len, 0.0), rr(len, 0.0);
        {
            rnd::RoundingGuard g(FE_UPWARD);
            detail::gemm_acc(re_.data(), M.mre(), ru.data(), n, kd, p);
            detail::gemm_acc(nim_.data(), M.mim(), ru.data(), n, kd, p);
            detail::gemm_acc(re_.data(), M.mim(), iu.data(), n, kd, p);
            detail::gemm_acc(im_.data(), M.mre(), iu.data(), n, kd, p);
            detail::gemm_acc(absum_.data(), M.rad(), rr.data(), n, kd, p);
            detail::vec_add(ru.data(), rr.data(), ru.data(), len, 1.0);
            detail::vec_add(iu.data(), rr.data(), iu.data(), len, 1.0);
        }
        {
            rnd::RoundingGuard g(FE_DOWNWARD);
            detail::gemm_acc(re_.data(), M.mre(), rd.data(), n, kd, p);
            detail::gemm_acc(nim_.data(), M.mim(), rd.data(), n, kd, p);
            detail::gemm_acc(re_.data(), M.mim(), id.data(), n, kd, p);
            detail::gemm_acc(im_.data(), M.mre(), id.data(), n, kd, p);
            detail::vec_add(rd.data(), rr.data(), rd.data(), len, -1.0);
            detail::vec_add(id.data(), rr.data(), id.data(), len, -1.0);
        }
        IMatrix C(n, p);
        std::vector<double> r1(len), r2(len);
        {
            rnd::RoundingGuard g(FE_UPWARD);
            detail::midrad_from_bounds(rd.data(), ru.data(), C.mre(), r1.data(), len);
            detail::midrad_from_bounds(id.data(), iu.data(), C.mim(), r2.data(), len);
        }
        for (size_t i = 0; i < len; ++i) C.rad()[i] = std::max(r1[i], r2[i]);
        return C;
    }

    // rigorous enclosure of A * v
    std::vector<CInterval> operator*(const std::vector<CInterval>& v) const {
        std::vector<CInterval> r(rows_, CInterval(0.0));
        for (int i = 0; i < rows_; ++i) {
            CInterval acc(0.0);
            for (int c = 0; c < cols_; ++c) {
                size_t k = size_t(i) * cols_ + c;
                if (re_[k] == 0.0 && im_[k] == 0.0) continue;
                acc += CInterval(cplx(re_[k], im_[k])) * v[c];
            }
            r[i] = acc;
        }
        return r;
    }

    // upper bound of |A| u for nonnegative u
    std::vector<double> abs_times(const std::vector<double>& u) const {
        std::vector<double> r(rows_, 0.0);
        for (int i = 0; i < rows_; ++i) {
            double acc = 0.0;
            const double* a = abs_.data() + size_t(i) * cols_;
            for (int c = 0; c < cols_; ++c)
                if (u[c] != 0.0) acc = rnd::add_up(acc, rnd::mul_up(a[c], u[c]));
            r[i] = acc;
        }
        return r;
    }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> re_, im_, nim_, absum_, abs_;
    CMat mat_;
};

// X + sign * Y entrywise, rigorous
inline IMatrix add(const IMatrix& X, const IMatrix& Y, double sign = 1.0) {
    IMatrix R(X.rows(), X.cols());
    size_t len = size_t(X.rows()) * X.cols();
    std::vector<double> lo(len), hi(len);
    for (int part = 0; part < 2; ++part) {
        const double* x = part ? X.mim() : X.mre();
        const double* y = part ? Y.mim() : Y.mre();
        double* out = part ? R.mim() : R.mre();
        std::vector<double> rad(len);
        {
            rnd::RoundingGuard g(FE_DOWNWARD);
            detail::vec_add(x, y, lo.data(), len, sign);
        }
        {
            rnd::RoundingGuard g(FE_UPWARD);
            detail::vec_add(x, y, hi.data(), len, sign);
            detail::midrad_from_bounds(lo.data(), hi.data(), out, rad.data(), len);
            // total radius: midpoint rounding + both input radii
            detail::vec_add(rad.data(), X.rad(), rad.data(), len, 1.0);
            detail::vec_add(rad.data(), Y.rad(), rad.data(), len, 1.0);
        }
        for (size_t i = 0; i < len; ++i) R.rad()[i] = part ? std::max(R.rad()[i], rad[i]) : rad[i];
    }
    return R;
}

}  // namespace hopfval
