#include <catch2/catch_amalgamated.hpp>

#include "qcycle/qstate.hpp"

#include "oracles.hpp"

using namespace qcycle;
using Catch::Approx;

TEST_CASE("space layout indexing") {
    SpaceLayout layout = atom_cavity_layout(4);
    REQUIRE(layout.total_dim() == 8);
    REQUIRE(layout.dim_of("atom") == 2);
    REQUIRE(layout.dim_of("cavity") == 4);

    SECTION("atom-major ravel") {
        REQUIRE(layout.ravel({0, 0}) == 0); // excited, vacuum
        REQUIRE(layout.ravel({0, 2}) == 2);
        REQUIRE(layout.ravel({1, 0}) == 4); // ground, vacuum
        REQUIRE(layout.ravel({1, 3}) == 7);
        for (int flat = 0; flat < 8; ++flat) REQUIRE(layout.ravel(layout.unravel(flat)) == flat);
    }

    SECTION("rejects bad layouts") {
        REQUIRE_THROWS_AS(SpaceLayout({{"a", 2}, {"a", 3}}), std::invalid_argument);
        REQUIRE_THROWS_AS(SpaceLayout({{"a", 0}}), std::invalid_argument);
        REQUIRE_THROWS_AS(layout.factor_index("nope"), std::invalid_argument);
    }
}

TEST_CASE("tensor product structure") {
    Rng rng(11);
    SpaceLayout la({{"a", 2}});
    SpaceLayout lb({{"b", 4}});
    DensityOperator a{la, oracles::random_density_matrix(rng, 2)};
    DensityOperator b{lb, oracles::random_density_matrix(rng, 4)};

    DensityOperator ab = tensor_product(a, b);
    REQUIRE(ab.layout.total_dim() == 8);
    REQUIRE(ab.layout.factors()[0].label == "a");
    REQUIRE(ab.layout.factors()[1].label == "b");
    REQUIRE(std::abs(ab.matrix.trace() - cplx(1.0)) < 1e-12);

    // kron block convention: (i,j) block of a times b
    REQUIRE((ab.matrix.block(0, 0, 4, 4) - a.matrix(0, 0) * b.matrix).cwiseAbs().maxCoeff() <
            1e-14);

    REQUIRE_THROWS_AS(tensor_product(a, a), std::invalid_argument);
}

TEST_CASE("partial trace") {
    Rng rng(12);

    SECTION("recovers product factors") {
        DensityOperator a{SpaceLayout({{"a", 2}}), oracles::random_density_matrix(rng, 2)};
        DensityOperator b{SpaceLayout({{"b", 4}}), oracles::random_density_matrix(rng, 4)};
        DensityOperator ab = tensor_product(a, b);
        REQUIRE((partial_trace(ab, {"a"}).matrix - a.matrix).cwiseAbs().maxCoeff() < 1e-13);
        REQUIRE((partial_trace(ab, {"b"}).matrix - b.matrix).cwiseAbs().maxCoeff() < 1e-13);
    }

    SECTION("trace preserved on correlated tripartite state") {
        SpaceLayout l3({{"a", 2}, {"b", 2}, {"c", 3}});
        DensityOperator rho{l3, oracles::random_density_matrix(rng, 12)};
        auto ac = partial_trace(rho, {"a", "c"});
        REQUIRE(ac.layout.total_dim() == 6);
        REQUIRE(std::abs(ac.matrix.trace() - cplx(1.0)) < 1e-12);
        // tracing in stages agrees with tracing at once
        auto a_direct = partial_trace(rho, {"a"});
        auto a_staged = partial_trace(ac, {"a"});
        REQUIRE((a_direct.matrix - a_staged.matrix).cwiseAbs().maxCoeff() < 1e-13);
    }

    SECTION("entangled state reduces to maximally mixed") {
        SpaceLayout l2({{"a", 2}, {"b", 2}});
        VectorXcd bell = (basis_ket(l2, {0, 0}) + basis_ket(l2, {1, 1})) / std::sqrt(2.0);
        DensityOperator rho = pure_density(l2, bell);
        auto ra = partial_trace(rho, {"a"});
        REQUIRE((ra.matrix - 0.5 * MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
    }

    SECTION("rejects empty or unknown keep set") {
        DensityOperator a{SpaceLayout({{"a", 2}}), oracles::random_density_matrix(rng, 2)};
        REQUIRE_THROWS_AS(partial_trace(a, {}), std::invalid_argument);
        REQUIRE_THROWS_AS(partial_trace(a, {"zz"}), std::invalid_argument);
    }
}

TEST_CASE("hermitian eigendecomposition") {
    Rng rng(13);
    MatrixXcd m = oracles::random_hermitian(rng, 8);

    EigResult eig = hermitian_eig(m);

    SECTION("reconstruction and orthonormality") {
        MatrixXcd rebuilt =
            eig.eigenvectors * eig.eigenvalues.asDiagonal() * eig.eigenvectors.adjoint();
        double scale = m.cwiseAbs().maxCoeff();
        REQUIRE((m - rebuilt).cwiseAbs().maxCoeff() < 1e-13 * 8 * scale);
        MatrixXcd gram = eig.eigenvectors.adjoint() * eig.eigenvectors;
        REQUIRE((gram - MatrixXcd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-13);
        for (int i = 1; i < 8; ++i) REQUIRE(eig.eigenvalues(i) >= eig.eigenvalues(i - 1));
    }

    SECTION("eigenvalues agree with characteristic-polynomial roots") {
        auto roots = oracles::companion_eigenvalues(m);
        for (int i = 0; i < 8; ++i)
            REQUIRE(eig.eigenvalues(i) == Approx(roots[i]).margin(1e-6));
    }

    SECTION("degenerate spectra order deterministically") {
        EigResult id4 = hermitian_eig(MatrixXcd::Identity(4, 4));
        REQUIRE((id4.eigenvectors - MatrixXcd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);

        Eigen::Vector3d d(1.0, 1.0, 2.0);
        EigResult deg = hermitian_eig(MatrixXcd(d.cast<cplx>().asDiagonal()));
        REQUIRE(std::abs(deg.eigenvectors(0, 0) - cplx(1.0)) < 1e-12);
        REQUIRE(std::abs(deg.eigenvectors(1, 1) - cplx(1.0)) < 1e-12);
        REQUIRE(std::abs(deg.eigenvectors(2, 2) - cplx(1.0)) < 1e-12);
    }

    SECTION("phase canonicalization is idempotent across repeats") {
        EigResult again = hermitian_eig(m);
        REQUIRE((eig.eigenvectors - again.eigenvectors).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("rejects non-Hermitian input") {
        MatrixXcd bad = m;
        bad(0, 1) += cplx(0.0, 1e-3);
        REQUIRE_THROWS_AS(hermitian_eig(bad), std::invalid_argument);
    }
}

TEST_CASE("clamped matrix logarithm") {
    SECTION("frozen diagonal values") {
        Eigen::Vector2d d(0.75, 0.25);
        MatrixXcd lg = matrix_log_clamped(MatrixXcd(d.cast<cplx>().asDiagonal()));
        REQUIRE(lg(0, 0).real() == Approx(-0.2876820724517809).margin(1e-13));
        REQUIRE(lg(1, 1).real() == Approx(-1.3862943611198906).margin(1e-13));
        REQUIRE(std::abs(lg(0, 1)) < 1e-15);
    }

    SECTION("exp inverts log on full-rank states") {
        Rng rng(14);
        MatrixXcd w = oracles::random_density_matrix(rng, 4);
        MatrixXcd rho = 0.9 * w + 0.1 * MatrixXcd::Identity(4, 4) / 4.0;
        MatrixXcd back = oracles::exp_oracle(matrix_log_clamped(rho));
        REQUIRE(trace_norm(back - rho) < 1e-10);
    }

    SECTION("rank-deficient directions land on the floor") {
        MatrixXcd pure = MatrixXcd::Zero(2, 2);
        pure(0, 0) = 1.0;
        MatrixXcd lg = matrix_log_clamped(pure);
        REQUIRE(lg(0, 0).real() == Approx(0.0).margin(1e-12));
        REQUIRE(lg(1, 1).real() == Approx(-41.44653167389282).margin(1e-10));
    }

    SECTION("rejects invalid input") {
        Eigen::Vector2d d(1.5, -0.5);
        REQUIRE_THROWS_AS(matrix_log_clamped(MatrixXcd(d.cast<cplx>().asDiagonal())),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(matrix_log_clamped(MatrixXcd::Identity(2, 2), 0.0),
                          std::invalid_argument);
    }
}

TEST_CASE("density validation") {
    Rng rng(15);
    MatrixXcd good = oracles::random_density_matrix(rng, 4);
    REQUIRE(validate_density(good).ok());

    SECTION("flags each defect separately") {
        MatrixXcd nh = good;
        nh(0, 1) += cplx(0.0, 1e-6);
        auto d1 = validate_density(nh);
        REQUIRE_FALSE(d1.herm_ok);

        auto d2 = validate_density(MatrixXcd(2.0 * good));
        REQUIRE(d2.herm_ok);
        REQUIRE_FALSE(d2.trace_ok);

        Eigen::Vector2d neg(1.5, -0.5);
        auto d3 = validate_density(MatrixXcd(neg.cast<cplx>().asDiagonal()));
        REQUIRE(d3.herm_ok);
        REQUIRE(d3.trace_ok);
        REQUIRE_FALSE(d3.psd_ok);
        REQUIRE(d3.min_eigenvalue == Approx(-0.5).margin(1e-12));
    }

    SECTION("factory enforces validity") {
        SpaceLayout l({{"a", 4}});
        REQUIRE_NOTHROW(DensityOperator::make(l, good));
        REQUIRE_THROWS_AS(DensityOperator::make(l, MatrixXcd(2.0 * good)),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(DensityOperator::make(atom_cavity_layout(4), good),
                          std::invalid_argument); // size mismatch
    }
}

TEST_CASE("state distances") {
    SpaceLayout l({{"q", 2}});
    DensityOperator zero = basis_projector(l, {0});
    DensityOperator one = basis_projector(l, {1});
    DensityOperator mixed = maximally_mixed(l);

    REQUIRE(trace_distance(zero, zero) == Approx(0.0).margin(1e-14));
    REQUIRE(trace_distance(zero, one) == Approx(1.0).margin(1e-12));
    REQUIRE(trace_distance(zero, mixed) == Approx(0.5).margin(1e-12));

    REQUIRE(fidelity(zero, zero) == Approx(1.0).margin(1e-12));
    REQUIRE(fidelity(zero, one) == Approx(0.0).margin(1e-12));
    REQUIRE(fidelity(zero, mixed) == Approx(0.5).margin(1e-12));

    REQUIRE(purity(zero) == Approx(1.0).margin(1e-14));
    REQUIRE(purity(mixed) == Approx(0.5).margin(1e-14));

    SECTION("fidelity is symmetric on random pairs") {
        Rng rng(16);
        DensityOperator a{l, oracles::random_density_matrix(rng, 2)};
        DensityOperator b{l, oracles::random_density_matrix(rng, 2)};
        REQUIRE(fidelity(a, b) == Approx(fidelity(b, a)).margin(1e-11));
    }
}

TEST_CASE("json serialization round trip") {
    Rng rng(17);
    DensityOperator rho{atom_cavity_layout(4), oracles::random_density_matrix(rng, 8)};

    nlohmann::json j = rho;
    std::string text = j.dump();
    DensityOperator back = nlohmann::json::parse(text).get<DensityOperator>();

    REQUIRE(back.layout == rho.layout);
    REQUIRE(back.matrix.rows() == 8);
    // exact: shortest round-trip double formatting
    for (int i = 0; i < 8; ++i)
        for (int k = 0; k < 8; ++k) {
            REQUIRE(back.matrix(i, k).real() == rho.matrix(i, k).real());
            REQUIRE(back.matrix(i, k).imag() == rho.matrix(i, k).imag());
        }

    SECTION("unitary round trip") {
        MatrixXcd h = oracles::random_hermitian(rng, 4);
        EigResult eig = hermitian_eig(h);
        UnitaryOperator u{SpaceLayout({{"cavity", 4}}), eig.eigenvectors};
        nlohmann::json ju = u;
        UnitaryOperator ub = nlohmann::json::parse(ju.dump()).get<UnitaryOperator>();
        REQUIRE(ub.layout == u.layout);
        REQUIRE((ub.matrix - u.matrix).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("malformed document throws") {
        nlohmann::json bad = {{"layout", rho.layout}, {"real", {{1.0}}}, {"imag", {}}};
        REQUIRE_THROWS(bad.get<DensityOperator>());
    }
}
