#include "nsavg/spectral_space.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace nsavg {

namespace {
// The FFTW planner is not thread-safe; plan creation is serialized.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

SpectralSpace::SpectralSpace(int modes_per_axis) : n_(modes_per_axis) {
    if (n_ <= 0 || n_ % 2 != 0) {
        throw std::invalid_argument("modes_per_axis must be a positive even integer");
    }
    band_ = n_ / 3;  // kill max(|k1|,|k2|) > N/3

    lambda_.resize(n_, n_);
    mask_.resize(n_, n_);
    inv_lambda_.resize(n_, n_);
    ik1_.resize(n_, n_);
    ik2_.resize(n_, n_);
    k1c_.resize(n_, n_);
    k2c_.resize(n_, n_);
    inv_lambda_c_.resize(n_, n_);

    for (int i2 = 0; i2 < n_; ++i2) {
        for (int i1 = 0; i1 < n_; ++i1) {
            const int k1 = wavenumber(i1);
            const int k2 = wavenumber(i2);
            const double lam = static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2;
            const bool keep = in_band(k1, k2);
            lambda_(i1, i2) = lam;
            mask_(i1, i2) = keep ? 1.0 : 0.0;
            inv_lambda_(i1, i2) = keep ? 1.0 / lam : 0.0;
            ik1_(i1, i2) = keep ? Complex(0.0, k1) : Complex(0.0, 0.0);
            ik2_(i1, i2) = keep ? Complex(0.0, k2) : Complex(0.0, 0.0);
            k1c_(i1, i2) = Complex(k1, 0.0);
            k2c_(i1, i2) = Complex(k2, 0.0);
            inv_lambda_c_(i1, i2) = Complex(inv_lambda_(i1, i2), 0.0);
            if (keep) {
                Mode m{i1, i2, k1, k2, lam};
                retained_.push_back(m);
                if (k2 > 0 || (k2 == 0 && k1 > 0)) half_.push_back(m);
            }
        }
    }

    std::lock_guard<std::mutex> lock(planner_mutex());
    CArray scratch_in(n_, n_), scratch_out(n_, n_);
    auto* in = reinterpret_cast<fftw_complex*>(scratch_in.data());
    auto* out = reinterpret_cast<fftw_complex*>(scratch_out.data());
    // FFTW_UNALIGNED so plans can execute on any caller buffer.
    plan_fwd_ = fftw_plan_dft_2d(n_, n_, in, out, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plan_bwd_ = fftw_plan_dft_2d(n_, n_, in, out, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan_fwd_ == nullptr || plan_bwd_ == nullptr) {
        throw std::runtime_error("fftw plan creation failed");
    }
}

SpectralSpace::~SpectralSpace() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (plan_fwd_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    if (plan_bwd_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
}

void SpectralSpace::to_physical(const CArray& coeffs, CArray& phys) const {
    phys.resize(n_, n_);
    CArray tmp = coeffs;  // fftw may not preserve its input buffer
    fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_),
                     reinterpret_cast<fftw_complex*>(tmp.data()),
                     reinterpret_cast<fftw_complex*>(phys.data()));
    phys *= 1.0 / (2.0 * M_PI);
}

void SpectralSpace::to_spectral(const CArray& phys, CArray& coeffs) const {
    coeffs.resize(n_, n_);
    CArray tmp = phys;
    fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_),
                     reinterpret_cast<fftw_complex*>(tmp.data()),
                     reinterpret_cast<fftw_complex*>(coeffs.data()));
    coeffs *= 2.0 * M_PI / (static_cast<double>(n_) * n_);
}

SpacePtr make_space(int modes_per_axis) {
    return std::make_shared<const SpectralSpace>(modes_per_axis);
}

}  // namespace nsavg
