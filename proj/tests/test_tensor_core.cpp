#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mrisim/fft.hpp"
#include "mrisim/tensor.hpp"
#include "mrisim/tensor_io.hpp"

using namespace mrisim;
namespace fs = std::filesystem;

namespace {

RealTensor2 random_real(std::uint64_t seed, std::size_t n) {
    RngStream rng(seed);
    return gaussian_real(rng, n, n);
}

ComplexTensor2 random_complex(std::uint64_t seed, std::size_t n) {
    RngStream rng(seed);
    return gaussian_complex(rng, n, n);
}

double max_abs_diff(const ComplexTensor2& a, const ComplexTensor2& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace

TEST_CASE("fft2 of constant image concentrates at DC") {
    RealTensor2 x(4, 4, 1.0);
    ComplexTensor2 k = fft2(x);
    CHECK(k.at(0, 0).real() == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(k.at(0, 0).imag() == doctest::Approx(0.0).epsilon(1e-12));
    for (std::size_t i = 1; i < k.size(); ++i) CHECK(std::abs(k.data[i]) < 1e-12);
}

TEST_CASE("fft2/ifft2 roundtrip for power-of-two sizes up to 256") {
    for (std::size_t n : {2, 4, 8, 16, 32, 64, 128, 256}) {
        ComplexTensor2 x = random_complex(n, n);
        CHECK(max_abs_diff(ifft2(fft2(x)), x) < 1e-10);
    }
}

TEST_CASE("ifft2 of zero tensor is zero") {
    ComplexTensor2 z(8, 8);
    CHECK(l2_norm(ifft2(z)) == 0.0);
}

TEST_CASE("ifft2 of unit DC entry is constant 1/4 on a 4x4 grid") {
    ComplexTensor2 k(4, 4);
    k.at(0, 0) = {1.0, 0.0};
    ComplexTensor2 x = ifft2(k);
    for (const cplx& v : x.data) {
        CHECK(v.real() == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(std::abs(v.imag()) < 1e-12);
    }
}

TEST_CASE("Parseval holds under unitary normalization") {
    RealTensor2 x = random_real(7, 32);
    const double nx = l2_norm(x);
    CHECK(std::abs(l2_norm(fft2(x)) - nx) < 1e-9 * nx);
}

TEST_CASE("fft2 is linear") {
    ComplexTensor2 x = random_complex(1, 16);
    ComplexTensor2 y = random_complex(2, 16);
    const double a = 1.7, b = -0.3;
    ComplexTensor2 combo(16, 16);
    for (std::size_t i = 0; i < combo.size(); ++i) combo.data[i] = a * x.data[i] + b * y.data[i];
    ComplexTensor2 lhs = fft2(combo);
    ComplexTensor2 fx = fft2(x), fy = fft2(y);
    ComplexTensor2 rhs(16, 16);
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs.data[i] = a * fx.data[i] + b * fy.data[i];
    CHECK(max_abs_diff(lhs, rhs) < 1e-10);
}

TEST_CASE("non-power-of-two dims are rejected") {
    ComplexTensor2 x(6, 8);
    CHECK_THROWS_AS(fft2(x), SizingError);
    CHECK_THROWS_AS(ifft2(x), SizingError);
}

TEST_CASE("l2_norm basics") {
    CHECK(l2_norm(RealTensor2(3, 3)) == 0.0);
    RealTensor2 t(1, 2);
    t.data = {3.0, 4.0};
    CHECK(l2_norm(t) == doctest::Approx(5.0));
    ComplexTensor2 c(1, 1);
    c.data[0] = {1.0, 1.0};
    CHECK(l2_norm(c) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("RngStream determinism: equal seeds, equal draws") {
    RngStream a(123), b(123);
    for (int i = 0; i < 10000; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("gaussian seed 42 golden sequence") {
    // Frozen from the first generation with this generator.
    RngStream rng(42);
    RealTensor2 t = gaussian_real(rng, 2, 2);
    RngStream rng2(42);
    RealTensor2 t2 = gaussian_real(rng2, 2, 2);
    for (std::size_t i = 0; i < 4; ++i) CHECK(t.data[i] == t2.data[i]);
    // Golden values pinned below; regenerate only if the generator changes.
    CHECK(t.data[0] == doctest::Approx(-0.4812176998).epsilon(1e-9));
    CHECK(t.data[1] == doctest::Approx(-0.5745368739).epsilon(1e-9));
    CHECK(t.data[2] == doctest::Approx(0.4945838562).epsilon(1e-9));
    CHECK(t.data[3] == doctest::Approx(0.5701215522).epsilon(1e-9));
}

TEST_CASE("gaussian sample statistics") {
    RngStream rng(7);
    double sum = 0.0, cov = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n / 2; ++i) sum += rng.normal();
    RngStream rng2(8);
    for (int i = 0; i < n; ++i) {
        const double re = rng2.normal();
        const double im = rng2.normal();
        cov += re * im;
    }
    CHECK(std::abs(sum / (n / 2)) < 0.01);
    CHECK(std::abs(cov / n) < 0.01);
}

TEST_CASE("TNSR roundtrip is bit-exact") {
    const fs::path path = fs::temp_directory_path() / "mrisim_test_roundtrip.tnsr";
    ComplexTensor2 t = random_complex(9, 32);
    save_tensor(path.string(), t);
    ComplexTensor2 back = load_complex_tensor(path.string());
    REQUIRE(back.rows == t.rows);
    REQUIRE(back.cols == t.cols);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(back.data[i] == t.data[i]);
    fs::remove(path);
}

TEST_CASE("TNSR load errors are distinct") {
    const fs::path dir = fs::temp_directory_path();
    const fs::path good = dir / "mrisim_test_good.tnsr";
    RealTensor2 t = random_real(1, 8);
    save_tensor(good.string(), t);

    SUBCASE("bad magic") {
        const fs::path bad = dir / "mrisim_test_magic.tnsr";
        std::ofstream out(bad, std::ios::binary);
        out << "NOPE" << std::string(60, '\0');
        out.close();
        CHECK_THROWS_AS(load_real_tensor(bad.string()), BadMagicError);
        fs::remove(bad);
    }
    SUBCASE("truncated payload") {
        const fs::path bad = dir / "mrisim_test_trunc.tnsr";
        std::ifstream in(good, std::ios::binary);
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(bad, std::ios::binary);
        out.write(content.data(), static_cast<std::streamsize>(content.size() - 16));
        out.close();
        CHECK_THROWS_AS(load_real_tensor(bad.string()), TruncatedError);
        fs::remove(bad);
    }
    SUBCASE("version mismatch") {
        const fs::path bad = dir / "mrisim_test_version.tnsr";
        std::ifstream in(good, std::ios::binary);
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        content[4] = 9;  // version byte
        std::ofstream out(bad, std::ios::binary);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        CHECK_THROWS_AS(load_real_tensor(bad.string()), VersionError);
        fs::remove(bad);
    }
}
