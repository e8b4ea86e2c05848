import math

import pytest
from fractions import Fraction

from takagi import spectra
from takagi.errors import ContractError, DomainError, IdentityError, ResourceError
from takagi.spectra import (
    ALPHA,
    GOLDEN,
    Polynomial,
    RationalMatrix,
    a_k_family,
    char_poly,
    compare_transcription,
    geometric_moran_dimension,
    jsr_bracket,
    moran_dimension,
    parse_matrices,
    psi,
    psi1,
    random_moran_root,
    rho_k,
    rho_k_limit_scan,
    spectral_radius,
    verify_jsr_identities,
    word_product,
    zeta_xi,
)


def test_matrix_algebra():
    g = spectra.G
    assert g**3 - 9 * g**2 - 6 * g == RationalMatrix.zeros(3)
    assert spectra.B @ spectra.A == spectra.M
    assert word_product("FE", {"E": spectra.E, "F": spectra.F}) == g
    with pytest.raises(ContractError):
        word_product("", {"E": spectra.E})


@pytest.mark.parametrize(
    "matrix, coefficients",
    [
        (spectra.G, [0, 6, 9, -1]),
        (RationalMatrix.identity(2), [1, -2, 1]),
        (spectra.M_HAT, [-6, -9, 1]),
        (a_k_family(1, "truncated"), [1, -1]),
    ],
)
def test_char_poly(matrix, coefficients):
    assert char_poly(matrix) == Polynomial(coefficients)


@pytest.mark.parametrize("k", range(2, 9))
def test_zeta_xi_recursion(k):
    zeta, xi = zeta_xi(k)
    assert zeta == char_poly(a_k_family(k, "truncated"))
    assert xi == char_poly(a_k_family(k))


def test_a_k_family_shape_and_errors():
    assert a_k_family(1) == RationalMatrix([[1, Fraction(1, 4)], [2, 1]])
    assert a_k_family(4).dim == 5
    assert a_k_family(4, "truncated").shape == (4, 4)
    with pytest.raises(DomainError):
        a_k_family(0)
    with pytest.raises(ContractError):
        a_k_family(3, "upper")


def test_spectral_radius():
    assert spectral_radius(spectra.M_HAT) == pytest.approx(ALPHA, abs=1e-10)
    assert spectral_radius(spectra.G) == pytest.approx(ALPHA, abs=1e-10)
    assert spectral_radius(RationalMatrix.zeros(2)) == 0.0
    with pytest.raises(DomainError):
        spectral_radius(spectra.G, tol=0)


def test_jsr_of_e_and_f():
    pair = {"E": spectra.E, "F": spectra.F}
    bracket = jsr_bracket(pair, 2)
    assert bracket.witness_product == "FE"
    assert bracket.lower == pytest.approx(math.sqrt(ALPHA), abs=1e-9)
    upper = [jsr_bracket(pair, n).upper for n in (3, 6, 12)]
    assert upper[2] <= upper[1] <= upper[0]
    assert upper[2] - math.sqrt(ALPHA) < 0.35


def test_jsr_guards():
    with pytest.raises(ResourceError):
        jsr_bracket([spectra.E, spectra.F, spectra.G], 15)
    with pytest.raises(DomainError):
        jsr_bracket([spectra.E], 0)
    with pytest.raises(DomainError):
        jsr_bracket([RationalMatrix([[1, -1], [0, 1]])], 2)


def test_verify_jsr_identities():
    report = verify_jsr_identities()
    assert report.passed
    assert any(check.name == "G^3 = 9G^2 + 6G" for check in report.checks)


def test_parse_matrices():
    text = "E\n2 0 1\n2 0 2\n2 0 1\n\n# unnamed block\n1/2 0\n0 1\n"
    parsed = parse_matrices(text)
    assert parsed["E"] == spectra.E
    assert parsed["A"] == RationalMatrix([[Fraction(1, 2), 0], [0, 1]])
    with pytest.raises(ContractError):
        parse_matrices("\n\n")
    with pytest.raises(ContractError):
        parse_matrices("E\n1\n\nE\n2\n")


def test_to_text_parses_back():
    for name, matrix in spectra.NAMED_MATRICES.items():
        assert parse_matrices(matrix.to_text(name))[name] == matrix


def test_compare_transcription():
    assert compare_transcription("F", spectra.F) is None
    wrong = RationalMatrix([[2, 0, 1], [2, 0, 3], [2, 0, 1]])
    assert compare_transcription("E", wrong) == "E[2,3] = 3, expected 2"
    assert "shape" in compare_transcription("E", RationalMatrix.identity(2))
    with pytest.raises(ContractError):
        compare_transcription("Q", spectra.E)


def test_rho_k_against_radius():
    for k in (3, 5, 8):
        assert rho_k(k) == pytest.approx(spectral_radius(a_k_family(k)), abs=1e-9)


def test_rho_scan_errors():
    with pytest.raises(DomainError):
        rho_k_limit_scan(2)


@pytest.mark.slow
def test_rho_scan_approaches_golden_ratio():
    scan = rho_k_limit_scan(200)
    assert scan.ks[0] == 3 and scan.ks[-1] == 200
    assert scan.minimum == min(scan.rhos)
    assert scan.gap_to_golden == pytest.approx(scan.minimum - GOLDEN)
    # a nonnegative matrix with a unit diagonal entry
    assert all(rho >= 1 for rho in scan.rhos)


def test_moran_dimension():
    assert moran_dimension([(2, Fraction(1, 4))]) == pytest.approx(0.5)
    assert moran_dimension([(1, Fraction(1, 2)), (1, Fraction(1, 2))]) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        moran_dimension([])
    with pytest.raises(DomainError):
        moran_dimension([(2, Fraction(3, 2))])


def test_geometric_moran_dimension():
    assert geometric_moran_dimension() == pytest.approx(math.log(GOLDEN) / math.log(4), abs=1e-9)


def test_hitting_pgf():
    assert psi1(0.7) == pytest.approx(0.4083674, abs=1e-7)
    assert psi(2, 0.7) == pytest.approx(0.1667640, abs=1e-7)
    assert psi1(1.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        psi1(0.0)


def test_random_moran_root():
    r = random_moran_root()
    g = psi1(r)
    assert 0 < r < 1
    assert 2 * r * g + g * g == pytest.approx(1.0, abs=1e-9)


def test_strict_identities_raise():
    report = verify_jsr_identities(max_k=2, strict=False)
    assert report.passed
    broken = dict(spectra.DISPLAYED)
    broken["FE"] = (spectra.E, "FE")
    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(spectra, "DISPLAYED", broken)
        with pytest.raises(IdentityError):
            verify_jsr_identities(max_k=2)
