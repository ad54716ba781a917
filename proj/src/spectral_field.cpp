#include "nsavg/spectral_field.hpp"

#include "nsavg/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace nsavg {

void require_same_space(const SpectralField& a, const SpectralField& b) {
    if (a.space() == b.space()) return;
    if (a.space() == nullptr || b.space() == nullptr ||
        a.space()->size() != b.space()->size()) {
        throw std::invalid_argument("fields live on different spectral spaces");
    }
}

Complex SpectralField::mode(int k1, int k2, int comp) const {
    return c_[comp](space_->index_of(k1), space_->index_of(k2));
}

void SpectralField::set_mode_pair(int k1, int k2, Complex u1, Complex u2) {
    if (!space_->in_band(k1, k2)) {
        throw std::invalid_argument("mode outside the retained band");
    }
    const int i1 = space_->index_of(k1), i2 = space_->index_of(k2);
    const int j1 = space_->index_of(-k1), j2 = space_->index_of(-k2);
    c_[0](i1, i2) = u1;
    c_[1](i1, i2) = u2;
    c_[0](j1, j2) = std::conj(u1);
    c_[1](j1, j2) = std::conj(u2);
}

void SpectralField::canonicalize() {
    const int n = space_->size();
    const RArray& mask = space_->dealias_mask();
    for (auto& comp : c_) {
        comp *= mask;
        // Hermitian symmetrization: average each entry with the conjugate of
        // its mirror. Self-paired modes (k = -k mod N) are outside the band.
        for (int i2 = 0; i2 < n; ++i2) {
            const int j2 = (n - i2) % n;
            for (int i1 = 0; i1 < n; ++i1) {
                const int j1 = (n - i1) % n;
                if (i2 < j2 || (i2 == j2 && i1 < j1)) {
                    const Complex z = 0.5 * (comp(i1, i2) + std::conj(comp(j1, j2)));
                    comp(i1, i2) = z;
                    comp(j1, j2) = std::conj(z);
                } else if (i1 == j1 && i2 == j2) {
                    comp(i1, i2) = Complex(comp(i1, i2).real(), 0.0);
                }
            }
        }
    }
}

double SpectralField::norm() const { return std::sqrt(squared_norm()); }

double SpectralField::divergence_residual() const {
    double worst = 0.0;
    for (const auto& m : space_->retained()) {
        const Complex d = static_cast<double>(m.k1) * c_[0](m.i1, m.i2) +
                          static_cast<double>(m.k2) * c_[1](m.i1, m.i2);
        worst = std::max(worst, std::abs(d));
    }
    return worst;
}

SpectralField& SpectralField::operator+=(const SpectralField& other) {
    require_same_space(*this, other);
    c_[0] += other.c_[0];
    c_[1] += other.c_[1];
    return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& other) {
    require_same_space(*this, other);
    c_[0] -= other.c_[0];
    c_[1] -= other.c_[1];
    return *this;
}

SpectralField& SpectralField::operator*=(double s) {
    c_[0] *= s;
    c_[1] *= s;
    return *this;
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }
SpectralField operator*(SpectralField a, double s) { return a *= s; }
SpectralField operator-(SpectralField a) { return a *= -1.0; }

double inner_product(const SpectralField& a, const SpectralField& b) {
    require_same_space(a, b);
    double s = 0.0;
    for (int c = 0; c < 2; ++c) {
        s += (a.component(c) * b.component(c).conjugate()).real().sum();
    }
    return s;
}

SpectralField taylor_green(const SpacePtr& space, double amplitude) {
    const int n = space->size();
    CArray u1(n, n), u2(n, n);
    const double h = 2.0 * M_PI / n;
    for (int i2 = 0; i2 < n; ++i2) {
        for (int i1 = 0; i1 < n; ++i1) {
            const double x = i1 * h, y = i2 * h;
            u1(i1, i2) = amplitude * std::sin(x) * std::cos(y);
            u2(i1, i2) = -amplitude * std::cos(x) * std::sin(y);
        }
    }
    SpectralField f(space);
    space->to_spectral(u1, f.component(0));
    space->to_spectral(u2, f.component(1));
    f.canonicalize();
    return f;
}

SpectralField shear_flow(const SpacePtr& space, double amplitude) {
    SpectralField f(space);
    // u = (A sin(xi_2), 0): coefficient A/(2i) * 2pi at k = (0,1).
    f.set_mode_pair(0, 1, Complex(0.0, -amplitude * M_PI), Complex(0.0, 0.0));
    return f;
}

SpectralField random_divfree_field(const SpacePtr& space, NoiseStream& stream,
                                   double decay, double target_norm) {
    SpectralField f(space);
    for (const auto& m : space->half_retained()) {
        const double scale = std::pow(m.lambda, -decay / 2.0);
        for (int c = 0; c < 2; ++c) {
            const auto [z1, z2] = stream.normal_pair();
            const Complex v = scale * Complex(z1, z2);
            f.component(c)(m.i1, m.i2) = v;
            f.component(c)(space->index_of(-m.k1), space->index_of(-m.k2)) = std::conj(v);
        }
    }
    f = leray_project(std::move(f));
    const double nrm = f.norm();
    if (nrm > 0.0 && target_norm > 0.0) {
        f *= target_norm / nrm;
    } else if (target_norm == 0.0) {
        f = SpectralField::zero(space);
    }
    return f;
}

}  // namespace nsavg
