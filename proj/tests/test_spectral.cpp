#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nsavg/operators.hpp"
#include "nsavg/snapshot.hpp"
#include "test_helpers.hpp"

#include <cstdio>
#include <filesystem>
#include <thread>

using namespace nsavg;
using nsavg::testing::dense_leray_oracle;
using nsavg::testing::field_sampler;
using nsavg::testing::probe_stream;

TEST_CASE("space geometry: band, eigenvalues, mean exclusion") {
    auto sp = make_space(32);
    CHECK(sp->dealias_limit() == 10);  // floor(32/3)

    double lambda_min = 1e300;
    for (const auto& m : sp->retained()) {
        CHECK(std::max(std::abs(m.k1), std::abs(m.k2)) * 3 <= 32);
        CHECK((m.k1 != 0 || m.k2 != 0));
        lambda_min = std::min(lambda_min, m.lambda);
    }
    CHECK(lambda_min == 1.0);  // smallest retained nonzero eigenvalue on the 2pi torus

    // mask kills max(|k1|,|k2|) > N/3 and the mean mode
    const auto& mask = sp->dealias_mask();
    for (int i1 = 0; i1 < 32; ++i1) {
        for (int i2 = 0; i2 < 32; ++i2) {
            const int k1 = sp->wavenumber(i1), k2 = sp->wavenumber(i2);
            const bool keep = std::max(std::abs(k1), std::abs(k2)) <= 10 && (k1 != 0 || k2 != 0);
            CHECK(mask(i1, i2) == (keep ? 1.0 : 0.0));
        }
    }
    CHECK_THROWS_AS(make_space(15), std::invalid_argument);
    CHECK_THROWS_AS(make_space(0), std::invalid_argument);
}

TEST_CASE("leray: gradients vanish, shears are fixed, single mode closed form") {
    auto sp = make_space(32);

    // u = (cos xi1, 0) = grad(sin xi1): coefficient pi at k = (+-1, 0)
    SpectralField grad(sp);
    grad.set_mode_pair(1, 0, Complex(M_PI, 0.0), Complex(0.0, 0.0));
    CHECK(leray_project(grad).norm() == 0.0);

    const SpectralField shear = shear_flow(sp, 1.0);
    CHECK((leray_project(shear) - shear).norm() == 0.0);

    SpectralField single(sp);
    single.set_mode_pair(1, 1, Complex(1.0, 0.0), Complex(0.0, 0.0));
    const SpectralField proj = leray_project(single);
    CHECK(proj.mode(1, 1, 0) == Complex(0.5, 0.0));
    CHECK(proj.mode(1, 1, 1) == Complex(-0.5, 0.0));
}

TEST_CASE("leray: dense-matrix oracle agreement and idempotence (exact modewise)") {
    auto sp = make_space(16);
    NoiseStream st = probe_stream(101);
    for (int rep = 0; rep < 20; ++rep) {
        // non-divergence-free raw data: random coefficients, Hermitian only
        SpectralField raw(sp);
        for (const auto& m : sp->half_retained()) {
            for (int c = 0; c < 2; ++c) {
                const auto [a, b] = st.normal_pair();
                raw.component(c)(m.i1, m.i2) = Complex(a, b);
            }
        }
        raw.canonicalize();

        const SpectralField p = leray_project(raw);
        const SpectralField oracle = dense_leray_oracle(raw);
        CHECK((p - oracle).norm() <= 1e-14 * std::max(1.0, raw.norm()));

        const SpectralField pp = leray_project(p);
        CHECK((pp - p).norm() <= 1e-14 * std::max(1.0, p.norm()));
        CHECK(p.divergence_residual() <= 1e-12 * std::max(1e-30, sobolev_norm(p, 1.0)));
    }
}

TEST_CASE("semigroup: single-mode decay, identity at zero, composition, domain error") {
    auto sp = make_space(16);
    SpectralField u(sp);
    u.set_mode_pair(1, 0, Complex(0.0, 2.0), Complex(0.0, 0.0));

    const SpectralField decayed = apply_semigroup(u, 1.0);
    CHECK(std::abs(decayed.mode(1, 0, 0) - std::exp(-1.0) * u.mode(1, 0, 0)) <= 1e-15);

    auto sampler = field_sampler(sp, 7);
    const SpectralField r = sampler();
    const SpectralField id = apply_semigroup(r, 0.0);
    for (int c = 0; c < 2; ++c) CHECK((id.component(c) == r.component(c)).all());

    NoiseStream st = probe_stream(8);
    for (int rep = 0; rep < 20; ++rep) {
        const double s = st.uniform(), t = st.uniform();
        const SpectralField once = apply_semigroup(r, s + t);
        const SpectralField twice = apply_semigroup(apply_semigroup(r, s), t);
        CHECK((once - twice).norm() <= 1e-12 * r.norm());
    }

    CHECK_THROWS_AS(apply_semigroup(r, -0.1), std::domain_error);
}

TEST_CASE("semigroup smoothing: ||e^{tA}u||_1 <= (2et)^{-1/2} |u|") {
    auto sp = make_space(32);
    auto sampler = field_sampler(sp, 9, 1.0);
    int violations = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const SpectralField u = sampler();
        for (double t : {1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 0.3, 1.0}) {
            const double lhs = sobolev_norm(apply_semigroup(u, t), 1.0);
            const double rhs = std::pow(2.0 * M_E * t, -0.5) * u.norm();
            if (lhs > rhs * (1.0 + 1e-12)) ++violations;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("nonlinear term: shear and Taylor-Green nulls") {
    auto sp = make_space(32);
    const SpectralField shear = shear_flow(sp, 1.0);
    CHECK(nonlinear_B(shear, shear).norm() <= 1e-14);

    const SpectralField tg = taylor_green(sp, 1.0);
    CHECK(nonlinear_B(tg, tg).norm() <= 1e-10 * std::pow(sobolev_norm(tg, 1.0), 2));
}

TEST_CASE("Taylor-Green: independent physical-space quadrature oracle at N=64") {
    // w = (u.grad)u evaluated from closed forms on the 64^2 grid, then paired
    // against divergence-free basis modes by direct quadrature. All pairings
    // vanish: the advection term is a pure gradient.
    const int n = 64;
    auto sp = make_space(n);
    const double h = 2.0 * M_PI / n;

    double worst = 0.0;
    for (const auto& m : sp->half_retained()) {
        double cos_pairing = 0.0, sin_pairing = 0.0;
        const double klen = std::hypot(static_cast<double>(m.k1), static_cast<double>(m.k2));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double x = i * h, y = j * h;
                // (u.grad)u for u = (sin x cos y, -cos x sin y)
                const double w1 = std::sin(x) * std::cos(x);
                const double w2 = std::sin(y) * std::cos(y);
                const double along_kperp = (w1 * (-m.k2) + w2 * m.k1) / klen;
                const double norml = std::sqrt(2.0) / (2.0 * M_PI);
                cos_pairing += along_kperp * std::cos(m.k1 * x + m.k2 * y) * norml;
                sin_pairing += along_kperp * std::sin(m.k1 * x + m.k2 * y) * norml;
            }
        }
        worst = std::max({worst, std::abs(cos_pairing * h * h), std::abs(sin_pairing * h * h)});
    }
    CHECK(worst <= 1e-10);

    // the pseudospectral route agrees with the oracle at N=32
    auto sp32 = make_space(32);
    CHECK(nonlinear_B(taylor_green(sp32), taylor_green(sp32)).norm() <= 1e-10);
}

TEST_CASE("trilinear form: antisymmetry, null, consistency with B") {
    auto sp = make_space(32);
    auto sampler = field_sampler(sp, 12, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        const SpectralField u = sampler(), v = sampler(), w = sampler();
        const double scale = sobolev_norm(u, 0.5) * sobolev_norm(v, 1.5) * sobolev_norm(w, 0.5);

        const double bvw = trilinear_b(u, v, w);
        const double bwv = trilinear_b(u, w, v);
        CHECK(std::abs(bvw + bwv) <= 1e-10 * std::max(1e-30, scale));
        CHECK(std::abs(trilinear_b(u, v, v)) <= 1e-10 * std::max(1e-30, scale));

        CHECK(std::abs(inner_product(nonlinear_B(u, v), w) - bvw) <=
              1e-10 * std::max(1e-30, scale));
    }
}

TEST_CASE("energy conservation: <B(u,u), u> = 0") {
    auto sp = make_space(32);
    auto sampler = field_sampler(sp, 13, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        const SpectralField u = sampler();
        const double h1 = sobolev_norm(u, 1.0);
        CHECK(std::abs(inner_product(nonlinear_B(u, u), u)) <= 1e-10 * h1 * h1 * h1);
    }
}

TEST_CASE("trilinear continuity bound: fitted constant stable across N") {
    // |b(u,v,w)| <= C ||u||_{1/2} ||v||_1 ||w||_{1/2}
    double fitted[3] = {0, 0, 0};
    const int sizes[3] = {16, 32, 64};
    for (int s = 0; s < 3; ++s) {
        auto sp = make_space(sizes[s]);
        NoiseStream st = probe_stream(14);
        const double decays[3] = {0.5, 1.0, 2.0};
        for (int rep = 0; rep < 300; ++rep) {
            const double d = decays[rep % 3];
            const SpectralField u = random_divfree_field(sp, st, d, 1.0);
            const SpectralField v = random_divfree_field(sp, st, d, 1.0);
            const SpectralField w = random_divfree_field(sp, st, d, 1.0);
            const double denom =
                sobolev_norm(u, 0.5) * sobolev_norm(v, 1.0) * sobolev_norm(w, 0.5);
            fitted[s] = std::max(fitted[s], std::abs(trilinear_b(u, v, w)) / denom);
        }
    }
    CHECK(fitted[1] <= 2.0 * fitted[0]);
    CHECK(fitted[2] <= 2.0 * fitted[0]);
}

TEST_CASE("B2 bound: ||B(u)||_{-1} <= C |u| ||u||_1, no growth from N=16 to N=64") {
    double fitted16 = 0.0, fitted64 = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
        auto sp = make_space(pass == 0 ? 16 : 64);
        NoiseStream st = probe_stream(15);
        double& fitted = pass == 0 ? fitted16 : fitted64;
        const double decays[3] = {0.5, 1.0, 2.0};
        for (int rep = 0; rep < 300; ++rep) {
            const SpectralField u = random_divfree_field(sp, st, decays[rep % 3], 1.0);
            const double ratio =
                sobolev_norm(nonlinear_B(u, u), -1.0) / (u.norm() * sobolev_norm(u, 1.0));
            fitted = std::max(fitted, ratio);
        }
    }
    CHECK(fitted64 <= 1.5 * fitted16);
    CHECK(fitted16 > 0.0);
}

TEST_CASE("norms: mode example, Parseval, interpolation, domain error") {
    auto sp = make_space(16);

    // unit-L2 field concentrated on +-(1,1): sobolev(1) = sqrt(2)
    SpectralField u(sp);
    u.set_mode_pair(1, 1, Complex(0.25, 0.25), Complex(-0.25, -0.25));
    u *= 1.0 / u.norm();
    CHECK(u.norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(sobolev_norm(u, 1.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(field_norm(u, NormKind::sobolev(1.0)) == sobolev_norm(u, 1.0));

    auto sampler = field_sampler(sp, 16, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        const SpectralField r = sampler();
        CHECK(std::abs(sobolev_norm(r, 0.0) - lebesgue_norm(r, 2.0)) <= 1e-12 * r.norm());
    }
    for (int rep = 0; rep < 1000; ++rep) {
        const SpectralField r = sampler();
        const double mid = sobolev_norm(r, 0.5);
        CHECK(mid * mid <= r.norm() * sobolev_norm(r, 1.0) * (1.0 + 1e-12));
    }
    CHECK_THROWS_AS(lebesgue_norm(u, 0.5), std::domain_error);
}

TEST_CASE("poisson: trivial modes and round trip") {
    auto sp = make_space(16);
    SpectralField f(sp);
    f.set_mode_pair(1, 0, Complex(0.0, 1.0), Complex(0.0, 0.0));
    const SpectralField x = solve_poisson(f);
    CHECK((x - f).norm() == 0.0);  // lambda = 1

    CHECK(solve_poisson(SpectralField::zero(sp)).norm() == 0.0);

    auto sampler = field_sampler(sp, 17);
    for (int rep = 0; rep < 20; ++rep) {
        const SpectralField g = sampler();
        SpectralField back = solve_poisson(g);
        back.component(0) *= sp->eigenvalues();
        back.component(1) *= sp->eigenvalues();
        CHECK((back - g).norm() <= 1e-12 * g.norm());
    }
}

TEST_CASE("space mismatch is a structural error") {
    auto sp16 = make_space(16);
    auto sp32 = make_space(32);
    auto s16 = field_sampler(sp16, 18);
    auto s32 = field_sampler(sp32, 18);
    const SpectralField a = s16(), b = s32();
    CHECK_THROWS_AS(nonlinear_B(a, b), std::invalid_argument);
    CHECK_THROWS_AS(trilinear_b(a, a, b), std::invalid_argument);
    CHECK_THROWS_AS(a + b, std::invalid_argument);
    CHECK_THROWS_AS(inner_product(a, b), std::invalid_argument);
}

TEST_CASE("snapshot: bit-exact round trip and header validation") {
    auto sp = make_space(16);
    auto sampler = field_sampler(sp, 19);
    const std::vector<SpectralField> fields = {sampler(), sampler(), sampler()};
    const std::string path = "snapshot_test.nsef";
    write_snapshot(path, fields);

    const auto back = read_snapshot(path, sp);
    REQUIRE(back.size() == fields.size());
    for (size_t i = 0; i < fields.size(); ++i) {
        for (int c = 0; c < 2; ++c) {
            CHECK((back[i].component(c) == fields[i].component(c)).all());
        }
    }

    // self-describing read
    const auto fresh = read_snapshot(path);
    CHECK(fresh.size() == 3);
    CHECK(fresh.front().space()->size() == 16);

    // grid mismatch
    CHECK_THROWS(read_snapshot(path, make_space(32)));

    // corrupt magic
    {
        std::FILE* f = std::fopen(path.c_str(), "r+b");
        std::fputc('X', f);
        std::fclose(f);
    }
    CHECK_THROWS(read_snapshot(path));
    std::filesystem::remove(path);
}

TEST_CASE("transforms on distinct fields do not interfere across threads") {
    auto sp = make_space(32);
    auto sampler = field_sampler(sp, 20, 1.0);
    std::vector<SpectralField> inputs;
    for (int i = 0; i < 16; ++i) inputs.push_back(sampler());

    std::vector<SpectralField> serial;
    for (const auto& u : inputs) serial.push_back(nonlinear_B(u, u));

    std::vector<SpectralField> parallel(inputs.size());
    std::vector<std::thread> pool;
    for (int w = 0; w < 4; ++w) {
        pool.emplace_back([&, w] {
            for (size_t i = w; i < inputs.size(); i += 4) {
                parallel[i] = nonlinear_B(inputs[i], inputs[i]);
            }
        });
    }
    for (auto& t : pool) t.join();

    for (size_t i = 0; i < inputs.size(); ++i) {
        for (int c = 0; c < 2; ++c) {
            CHECK((parallel[i].component(c) == serial[i].component(c)).all());
        }
    }
}
