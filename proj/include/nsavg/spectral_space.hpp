#pragma once

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <vector>

namespace nsavg {

using Complex = std::complex<double>;
using CArray = Eigen::ArrayXXcd;
using RArray = Eigen::ArrayXXd;

// Grid geometry for the 2pi-periodic torus: wavenumbers k = (k1,k2) with
// -N/2 < ki <= N/2, Laplacian eigenvalues lambda_k = |k|^2, two-thirds
// dealias mask, and the forward/backward transform plans.
//
// Conventions: a field u with coefficient array c satisfies
//   u(xi) = (1/2pi) * sum_k c_k e^{i k.xi},
// so sum_k |c_k|^2 equals the squared L^2(T^2) norm and the mode basis is
// orthonormal. Entry (i1,i2) of an array holds wavenumber
// (wavenumber(i1), wavenumber(i2)).
//
// The retained state space is the dealiased band max(|k1|,|k2|) <= N/3 with
// the k = 0 (mean) mode excluded; the mask is zero on the mean mode.
//
// Immutable after construction and shareable across threads; transforms are
// safe to call concurrently on distinct buffers.
class SpectralSpace {
public:
    struct Mode {
        int i1, i2;     // array indices
        int k1, k2;     // wavenumbers
        double lambda;  // |k|^2
    };

    explicit SpectralSpace(int modes_per_axis);
    ~SpectralSpace();

    SpectralSpace(const SpectralSpace&) = delete;
    SpectralSpace& operator=(const SpectralSpace&) = delete;

    int size() const { return n_; }
    int dealias_limit() const { return band_; }

    int wavenumber(int index) const { return index <= n_ / 2 ? index : index - n_; }
    int index_of(int k) const { return k >= 0 ? k : k + n_; }
    bool in_band(int k1, int k2) const {
        const int a = k1 < 0 ? -k1 : k1;
        const int b = k2 < 0 ? -k2 : k2;
        return (a > b ? a : b) <= band_ && (k1 != 0 || k2 != 0);
    }

    const RArray& eigenvalues() const { return lambda_; }
    // 1.0 on retained modes, 0.0 elsewhere (including the mean mode).
    const RArray& dealias_mask() const { return mask_; }
    // 1/lambda on retained modes, 0 on the mean mode and outside the band.
    const RArray& inverse_eigenvalues() const { return inv_lambda_; }
    // i*k1 resp. i*k2 per entry, zeroed outside the band (spectral derivative).
    const CArray& ik1() const { return ik1_; }
    const CArray& ik2() const { return ik2_; }
    // k1, k2 and 1/lambda as complex arrays for expression use.
    const CArray& k1c() const { return k1c_; }
    const CArray& k2c() const { return k2c_; }
    const CArray& inv_lambda_c() const { return inv_lambda_c_; }

    // All retained modes (band, k != 0).
    const std::vector<Mode>& retained() const { return retained_; }
    // One representative per +-k pair (k2 > 0, or k2 == 0 and k1 > 0).
    const std::vector<Mode>& half_retained() const { return half_; }

    // Transforms carry the normalization described above. Thread-safe.
    void to_physical(const CArray& coeffs, CArray& phys) const;
    void to_spectral(const CArray& phys, CArray& coeffs) const;

private:
    int n_;
    int band_;
    RArray lambda_, mask_, inv_lambda_;
    CArray ik1_, ik2_, k1c_, k2c_, inv_lambda_c_;
    std::vector<Mode> retained_, half_;
    void* plan_fwd_ = nullptr;  // fftw_plan
    void* plan_bwd_ = nullptr;
};

using SpacePtr = std::shared_ptr<const SpectralSpace>;

SpacePtr make_space(int modes_per_axis);

}  // namespace nsavg
