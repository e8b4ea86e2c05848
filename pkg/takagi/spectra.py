"""Exact small-matrix algebra for the counting recursions.

Matrices hold Fractions; characteristic polynomials come from sympy's
division-free DomainMatrix.charpoly, and spectral radii are bisected on the
square-free part of that polynomial with exact Horner evaluation. numpy is
only used to seed brackets and to cross-check.
"""

import itertools
import logging
import math
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel
from sympy import Poly, QQ, Symbol
from sympy.polys.matrices import DomainMatrix

from takagi.errors import ContractError, DomainError, IdentityError, NumericError, ResourceError
from takagi.rationals import format_rational, parse_rational
from takagi.schema import JsrBracket, SelfTestReport

logger = logging.getLogger(__name__)

GOLDEN = (1 + math.sqrt(5)) / 2
ALPHA = (9 + math.sqrt(105)) / 2
D0 = math.log(GOLDEN) / math.log(4)
DV_STAR = math.log(ALPHA) / math.log(16)

DEFAULT_TOL = 1e-12
ENUMERATION_GUARD = 10**7
BISECTION_CAP = 400

Number = Union[int, Fraction]


class RationalMatrix:
    """Square or rectangular matrix of Fractions with the usual operators."""

    __slots__ = ("rows",)

    def __init__(self, rows: Iterable[Iterable[Number]]):
        rows = tuple(tuple(Fraction(e) for e in row) for row in rows)
        if not rows or any(len(row) != len(rows[0]) for row in rows):
            raise ContractError("matrix rows must be nonempty and of equal length")
        self.rows = rows

    @classmethod
    def identity(cls, d: int) -> "RationalMatrix":
        return cls([[1 if i == j else 0 for j in range(d)] for i in range(d)])

    @classmethod
    def zeros(cls, h: int, w: Optional[int] = None) -> "RationalMatrix":
        return cls([[0] * (w or h) for _ in range(h)])

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.rows), len(self.rows[0])

    @property
    def dim(self) -> int:
        h, w = self.shape
        if h != w:
            raise ContractError(f"matrix is {h}x{w}, not square")
        return h

    def __getitem__(self, index: Tuple[int, int]) -> Fraction:
        i, j = index
        return self.rows[i][j]

    def __eq__(self, other) -> bool:
        return isinstance(other, RationalMatrix) and self.rows == other.rows

    def __hash__(self) -> int:
        return hash(self.rows)

    def __add__(self, other: "RationalMatrix") -> "RationalMatrix":
        return RationalMatrix([[a + b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __sub__(self, other: "RationalMatrix") -> "RationalMatrix":
        return RationalMatrix([[a - b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __neg__(self) -> "RationalMatrix":
        return RationalMatrix([[-a for a in r] for r in self.rows])

    def __mul__(self, scalar: Number) -> "RationalMatrix":
        return RationalMatrix([[a * scalar for a in r] for r in self.rows])

    __rmul__ = __mul__

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        cols = list(zip(*other.rows))
        return RationalMatrix([[sum(a * b for a, b in zip(r, c)) for c in cols] for r in self.rows])

    def __pow__(self, e: int) -> "RationalMatrix":
        if e == 0:
            return RationalMatrix.identity(self.dim)
        if e == 1:
            return self
        if e % 2:
            return self @ (self ** (e - 1))
        half = self ** (e // 2)
        return half @ half

    def __repr__(self) -> str:
        return f"RationalMatrix({[[format_rational(a) for a in r] for r in self.rows]})"

    def apply(self, vector: Sequence[Number]) -> List[Fraction]:
        return [sum(a * Fraction(v) for a, v in zip(r, vector)) for r in self.rows]

    def left_apply(self, vector: Sequence[Number]) -> List[Fraction]:
        return self.transpose().apply(vector)

    def transpose(self) -> "RationalMatrix":
        return RationalMatrix(zip(*self.rows))

    def norm(self) -> Fraction:
        """Entry-sum norm, sum |t_ij|."""
        return sum(abs(a) for r in self.rows for a in r)

    def is_nonnegative(self) -> bool:
        return all(a >= 0 for r in self.rows for a in r)

    def is_zero(self) -> bool:
        return all(a == 0 for r in self.rows for a in r)

    def delete_last(self) -> "RationalMatrix":
        return RationalMatrix([r[:-1] for r in self.rows[:-1]])

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(a) for a in r] for r in self.rows])

    def to_domain(self) -> DomainMatrix:
        return DomainMatrix(
            [[QQ(a.numerator, a.denominator) for a in r] for r in self.rows], self.shape, QQ
        )

    def to_text(self, name: Optional[str] = None) -> str:
        lines = [name] if name else []
        lines += [" ".join(format_rational(a) for a in r) for r in self.rows]
        return "\n".join(lines)


class Polynomial:
    """Exact polynomial in lambda, coefficients in ascending degree."""

    __slots__ = ("coefficients",)

    def __init__(self, coefficients: Iterable[Number]):
        coeffs = [Fraction(c) for c in coefficients]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        self.coefficients = tuple(coeffs or [Fraction(0)])

    @classmethod
    def from_descending(cls, coefficients: Iterable[Number]) -> "Polynomial":
        return cls(list(coefficients)[::-1])

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        """Horner evaluation; exact for int/Fraction arguments, float otherwise."""
        exact = isinstance(x, (int, Fraction))
        acc = Fraction(0) if exact else 0.0
        for c in reversed(self.coefficients):
            acc = acc * x + (c if exact else float(c))
        return acc

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.coefficients == other.coefficients

    def __hash__(self) -> int:
        return hash(self.coefficients)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coefficients), len(other.coefficients))
        a = self.coefficients + (Fraction(0),) * (n - len(self.coefficients))
        b = other.coefficients + (Fraction(0),) * (n - len(other.coefficients))
        return Polynomial(x + y for x, y in zip(a, b))

    def __neg__(self) -> "Polynomial":
        return Polynomial(-c for c in self.coefficients)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: Union["Polynomial", Number]) -> "Polynomial":
        if not isinstance(other, Polynomial):
            return Polynomial(c * other for c in self.coefficients)
        out = [Fraction(0)] * (len(self.coefficients) + len(other.coefficients) - 1)
        for i, a in enumerate(self.coefficients):
            for j, b in enumerate(other.coefficients):
                out[i + j] += a * b
        return Polynomial(out)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"Polynomial({[format_rational(c) for c in self.coefficients]})"

    def to_sympy(self, symbol: Symbol) -> Poly:
        return Poly([QQ(c.numerator, c.denominator) for c in reversed(self.coefficients)], symbol, domain=QQ)

    def square_free(self) -> "Polynomial":
        lam = Symbol("lam")
        part = self.to_sympy(lam).sqf_part()
        return Polynomial.from_descending(Fraction(str(c)) for c in part.all_coeffs())


LAMBDA = Polynomial([0, 1])


def char_poly(matrix: RationalMatrix) -> Polynomial:
    """det(M - lambda I): monic for even size, negated monic for odd size."""
    d = matrix.dim
    monic = matrix.to_domain().charpoly()
    poly = Polynomial.from_descending(Fraction(str(c)) for c in monic)
    return poly if d % 2 == 0 else -poly


def _sign(x: Fraction) -> int:
    return (x > 0) - (x < 0)


def bisect_root(poly: Polynomial, low: Fraction, high: Fraction, tol: float = DEFAULT_TOL) -> Tuple[Fraction, Fraction]:
    """Shrink a sign-changing bracket of `poly` below `tol`, exactly."""
    f_low = _sign(poly(low))
    if f_low == 0:
        return low, low
    if _sign(poly(high)) == 0:
        return high, high
    for _ in range(BISECTION_CAP):
        if high - low < tol:
            return low, high
        mid = (low + high) / 2
        f_mid = _sign(poly(mid))
        if f_mid == 0:
            return mid, mid
        if f_mid == f_low:
            low = mid
        else:
            high = mid
    raise NumericError(f"bisection did not reach tol={tol} in {BISECTION_CAP} steps")


def root_bracket(poly: Polynomial, estimate: float, tol: float = DEFAULT_TOL) -> Tuple[Fraction, Fraction]:
    """Exact bracket around the simple root of `poly` nearest `estimate`."""
    poly = poly.square_free()
    centre = Fraction(estimate)
    width = Fraction(max(abs(estimate), 1.0) * 1e-9)
    for _ in range(200):
        low, high = centre - width, centre + width
        if _sign(poly(low)) * _sign(poly(high)) <= 0:
            return bisect_root(poly, low, high, tol)
        width *= 2
    raise NumericError(f"no sign change of the characteristic polynomial near {estimate}")


def _power_iteration(matrix: np.ndarray, steps: int = 2000) -> float:
    v = np.ones(matrix.shape[0])
    rate = 0.0
    for _ in range(steps):
        w = matrix @ v
        norm = np.abs(w).sum()
        if norm == 0:
            return 0.0
        rate, v = norm / np.abs(v).sum(), w / norm
    return float(rate)


def perron_bracket(matrix: RationalMatrix, tol: float = DEFAULT_TOL) -> Tuple[Fraction, Fraction]:
    """Exact bracket of the spectral radius of a nonnegative matrix."""
    if matrix.is_zero():
        return Fraction(0), Fraction(0)
    estimate = float(np.max(np.abs(np.linalg.eigvals(matrix.to_numpy()))))
    return root_bracket(char_poly(matrix), estimate, tol)


def spectral_radius(matrix: RationalMatrix, tol: float = DEFAULT_TOL) -> float:
    """rho(M) within tol.

    Nonnegative matrices get an exact bisection on the characteristic
    polynomial, cross-checked by power iteration; other matrices fall back to
    the float eigenvalue modulus.
    """
    if tol <= 0:
        raise DomainError(f"tol: must be positive, got {tol}")
    if matrix.is_zero():
        return 0.0
    if not matrix.is_nonnegative():
        return float(np.max(np.abs(np.linalg.eigvals(matrix.to_numpy()))))
    low, high = perron_bracket(matrix, tol)
    radius = float((low + high) / 2)
    check = _power_iteration(matrix.to_numpy())
    if abs(check - radius) > 1e-6 * max(1.0, radius):
        logger.warning("power iteration gives %.12g, bisection %.12g", check, radius)
    return radius


def word_product(word: str, alphabet: Mapping[str, RationalMatrix]) -> RationalMatrix:
    product = None
    for letter in word:
        product = alphabet[letter] if product is None else product @ alphabet[letter]
    if product is None:
        raise ContractError("empty word")
    return product


def jsr_bracket(
    matrices: Union[Mapping[str, RationalMatrix], Sequence[RationalMatrix]],
    max_len: int,
    tol: float = DEFAULT_TOL,
) -> JsrBracket:
    """Lower and upper bounds on the joint spectral radius from all products up to `max_len`.

    lower = max rho(P)**(1/k) over every product P of length k <= max_len,
    refined exactly for the winning word; upper = max ||P||**(1/max_len) over
    the products of length exactly max_len, with the entry-sum norm. Ties go
    to the shorter word, then to the later word in enumeration order.
    """
    if not isinstance(matrices, Mapping):
        matrices = dict(zip("ABCDEFGHIJKLMNOPQRSTUVWXYZ", matrices))
    names = list(matrices)
    if max_len < 1:
        raise DomainError(f"max-len: must be at least 1, got {max_len}")
    if len(names) ** max_len > ENUMERATION_GUARD:
        raise ResourceError(
            f"max-len: {len(names)}^{max_len} products exceed the guard of {ENUMERATION_GUARD}"
        )
    for name in names:
        if not matrices[name].is_nonnegative():
            raise DomainError(f"matrices: {name} has a negative entry")
    stack = np.stack([matrices[name].to_numpy() for name in names])
    products = stack
    words = list(names)
    best_value, best_word = -1.0, names[0]
    for length in range(1, max_len + 1):
        if length > 1:
            products = np.einsum("pij,qjk->pqik", products, stack).reshape(-1, *stack.shape[1:])
            words = [w + name for w in words for name in names]
        radii = np.max(np.abs(np.linalg.eigvals(products)), axis=1) ** (1.0 / length)
        level_best = float(radii.max())
        slack = 1e-9 * max(1.0, level_best)
        if level_best > best_value + slack:
            winner = int(np.nonzero(radii >= level_best - slack)[0][-1])
            best_value, best_word = level_best, words[winner]
        logger.debug("length %d: best %.12g (%s)", length, best_value, best_word)
    norms = np.abs(products).sum(axis=(1, 2)) ** (1.0 / max_len)
    witness = word_product(best_word, matrices)
    lower = spectral_radius(witness, tol) ** (1.0 / len(best_word))
    upper = float(norms.max())
    return JsrBracket(lower=lower, upper=max(upper, lower), witness_product=best_word, length=max_len)


def _m(rows) -> RationalMatrix:
    return RationalMatrix(rows)


A = _m([[2, 1, 0], [2, 1, 0], [0, 1, 0]])
B = _m([[2, 1, 1], [2, 1, 0], [0, 0, 1]])
M = _m([[6, 4, 0], [6, 3, 0], [0, 1, 0]])
M_HAT = _m([[6, 4], [6, 3]])
E = _m([[2, 0, 1], [2, 0, 2], [2, 0, 1]])
F = _m([[2, 1, 0], [2, 1, 0], [2, 0, 1]])
G = _m([[6, 0, 4], [6, 0, 4], [6, 0, 3]])
D = _m([[0, 0, 0], [0, 0, 0], [0, 0, 2]])

# the displayed products, pinned against recomputation
DISPLAYED = {
    "E2": (_m([[6, 0, 3], [8, 0, 4], [6, 0, 3]]), "EE"),
    "EF": (_m([[6, 2, 1], [8, 2, 2], [6, 2, 1]]), "EF"),
    "FE": (G, "FE"),
    "F2E": (_m([[18, 0, 12], [18, 0, 12], [18, 0, 11]]), "FFE"),
    "F3E": (_m([[54, 0, 36], [54, 0, 36], [54, 0, 35]]), "FFFE"),
    "FE2": (_m([[60, 0, 36], [60, 0, 36], [54, 0, 33]]), "FEFE"),
}

NAMED_MATRICES: Dict[str, RationalMatrix] = {
    "A": A,
    "B": B,
    "M": M,
    "M_HAT": M_HAT,
    "E": E,
    "F": F,
    "G": G,
    "D": D,
    **{name: matrix for name, (matrix, _) in DISPLAYED.items()},
}


def parse_matrices(text: str) -> Dict[str, RationalMatrix]:
    """Blank-line separated blocks of rows of rationals, each optionally headed by a name line.

    A name line starts with a letter; rows start with a digit or a sign.
    """
    blocks, current = [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            if current:
                blocks.append(current)
                current = []
            continue
        current.append(line)
    if current:
        blocks.append(current)
    if not blocks:
        raise ContractError("matrices: no matrix blocks found")
    named: Dict[str, RationalMatrix] = {}
    unnamed: List[RationalMatrix] = []
    for block in blocks:
        name = None
        if block[0][0].isalpha():
            name, block = block[0], block[1:]
        rows = [[parse_rational(tok, flag="matrices") for tok in line.split()] for line in block]
        matrix = RationalMatrix(rows)
        if name is None:
            unnamed.append(matrix)
        elif name in named:
            raise ContractError(f"matrices: duplicate name {name!r}")
        else:
            named[name] = matrix
    spare = (c for c in "ABCDEFGHIJKLMNOPQRSTUVWXYZ" if c not in named)
    for matrix in unnamed:
        named[next(spare)] = matrix
    return named


def compare_transcription(name: str, matrix: RationalMatrix) -> Optional[str]:
    """First entry where `matrix` differs from the pinned matrix `name`, or None."""
    if name not in NAMED_MATRICES:
        raise ContractError(f"check: unknown matrix name {name!r} (known: {', '.join(NAMED_MATRICES)})")
    pinned = NAMED_MATRICES[name]
    if matrix.shape != pinned.shape:
        return f"{name}: shape {matrix.shape[0]}x{matrix.shape[1]}, expected {pinned.shape[0]}x{pinned.shape[1]}"
    for i, j in itertools.product(range(pinned.shape[0]), range(pinned.shape[1])):
        if matrix[i, j] != pinned[i, j]:
            return (
                f"{name}[{i + 1},{j + 1}] = {format_rational(matrix[i, j])}, "
                f"expected {format_rational(pinned[i, j])}"
            )
    return None


def _words(letters: str, max_len: int, min_len: int = 0) -> Iterable[str]:
    for length in range(min_len, max_len + 1):
        for word in itertools.product(letters, repeat=length):
            yield "".join(word)


def _product(word: str) -> RationalMatrix:
    alphabet = {"E": E, "F": F}
    return word_product(word, alphabet) if word else RationalMatrix.identity(3)


def _sparse_form(s: RationalMatrix) -> Optional[Tuple[Fraction, Fraction]]:
    """(a, b) when s = [[a,0,0],[a,0,0],[0,0,-b]] with a >= b >= 0."""
    a, b = s[0, 0], -s[2, 2]
    expected = RationalMatrix([[a, 0, 0], [a, 0, 0], [0, 0, -b]])
    if s != expected or not a >= b >= 0:
        return None
    return a, b


def verify_jsr_identities(max_k: int = 10, strict: bool = True) -> SelfTestReport:
    """Exact checks behind rho({E, F}) = sqrt(rho(FE))."""
    report = SelfTestReport()
    ones = [1, 1, 1]

    for name, (displayed, word) in DISPLAYED.items():
        report.add(f"product {name} = {word}", _product(word) == displayed)
    report.add("M = BA", B @ A == M)
    report.add("G^3 = 9G^2 + 6G", G**3 - 9 * G**2 - 6 * G == RationalMatrix.zeros(3))
    report.add("F^2E = 3FE + D", _product("FFE") - 3 * G == D)
    report.add(
        "(FE)^2 - F^3E sparse",
        _product("FEFE") - _product("FFFE") == _m([[6, 0, 0], [6, 0, 0], [0, 0, -2]]),
    )

    f2e = _product("FFE")
    for k in range(max_k + 1):
        s_k = G ** (k + 3) - f2e @ G**k @ f2e
        expanded = 6 * G ** (k + 1) - 3 * (G ** (k + 1) @ D) - 3 * (D @ G ** (k + 1)) - D @ G**k @ D
        form = _sparse_form(s_k)
        alpha = (G ** (k + 1))[0, 0]
        delta_next, delta = (G ** (k + 1))[2, 2], (G**k)[2, 2]
        ok = (
            form is not None
            and form[0] == 6 * alpha
            and form[1] == 6 * delta_next + 4 * delta
            and s_k == expanded
        )
        report.add(f"S_{k} sparse form", ok, "" if ok else repr(s_k))

    for word in _words("EF", 6):
        tail = _product(word).apply(ones)
        lhs, rhs = (E @ E).apply(tail), (E @ F).apply(tail)
        if any(a > b for a, b in zip(lhs, rhs)):
            report.add("E^2 M 1 <= EF M 1", False, f"fails for M={word or 'I'}")
            break
    else:
        report.add("E^2 M 1 <= EF M 1", True)

    for word in _words("EF", 8):
        product = _product(word)
        v = product.left_apply(ones)
        w = product.apply(ones)
        if not (v[0] >= max(v[1], v[2]) and min(w[0], w[1]) >= w[2]):
            report.add("order properties of 1M and M1", False, f"fails for M={word or 'I'}")
            break
    else:
        report.add("order properties of 1M and M1", True)

    s = _product("FEFE") - _product("FFFE")
    worst = min(
        sum(a * b for a, b in zip(_product(w1).left_apply(ones), s.apply(_product(w2).apply(ones))))
        for w1 in _words("EF", 3)
        for w2 in _words("EF", 3)
    )
    report.add("1 M1 S M2 1 >= 0", worst >= 0, f"minimum {worst}")

    if strict and not report.passed:
        failed = next(check for check in report.checks if not check.passed)
        raise IdentityError(f"identity failed: {failed.name} {failed.detail}".strip())
    return report


def a_k_family(k: int, which: str = "full") -> RationalMatrix:
    """The (k+1)x(k+1) tridiagonal A_k, or with which='truncated' the k x k tilde A_k."""
    if k < 1:
        raise DomainError(f"k: must be at least 1, got {k}")
    if which not in ("full", "truncated"):
        raise ContractError(f"which: expected full or truncated, got {which!r}")
    q, h = Fraction(1, 4), Fraction(1, 2)
    size = k + 1
    rows = [[Fraction(0)] * size for _ in range(size)]
    for i in range(size):
        if i > 0:
            rows[i][i - 1] = q
        if i < size - 1:
            rows[i][i + 1] = q
        rows[i][i] = h
    rows[0][0] = Fraction(1)
    rows[1][0] = Fraction(2)
    if size > 2:
        rows[1][1] = Fraction(3, 4)
    rows[-1][-1] = Fraction(1)
    full = RationalMatrix(rows)
    return full if which == "full" else full.delete_last()


ZETA_1 = Polynomial([1, -1])
ZETA_2 = Polynomial([Fraction(1, 4), Fraction(-7, 4), 1])


def zeta_xi(k: int) -> Tuple[Polynomial, Polynomial]:
    """(zeta_k, xi_k) from the three-term recursion."""
    if k < 1:
        raise DomainError(f"k: must be at least 1, got {k}")
    zetas = [None, ZETA_1, ZETA_2]
    for i in range(3, k + 1):
        zetas.append(Polynomial([Fraction(1, 2), -1]) * zetas[i - 1] - zetas[i - 2] * Fraction(1, 16))
    zeta = zetas[k]
    if k == 1:
        return zeta, char_poly(a_k_family(1))
    xi = Polynomial([1, -1]) * zeta - zetas[k - 1] * Fraction(1, 16)
    return zeta, xi


def _xi_float(k: int, lam: float) -> float:
    zeta_prev, zeta = 1.0 - lam, lam * lam - 1.75 * lam + 0.25
    for _ in range(3, k + 1):
        zeta_prev, zeta = zeta, (0.5 - lam) * zeta - zeta_prev / 16.0
    return (1.0 - lam) * zeta - zeta_prev / 16.0


class RhoScan(BaseModel):
    ks: List[int]
    rhos: List[float]
    minimum: float
    argmin: int
    gap_to_golden: float
    nonincreasing: bool


def rho_k(k: int, tol: float = DEFAULT_TOL) -> float:
    """Spectral radius of A_k, by float bisection of xi_k seeded with eigvals."""
    estimate = float(np.max(np.linalg.eigvals(a_k_family(k).to_numpy()).real))
    width = 1e-9
    for _ in range(60):
        low, high = estimate - width, estimate + width
        if _xi_float(k, low) * _xi_float(k, high) <= 0:
            break
        width *= 2
    else:
        raise NumericError(f"xi_{k} has no sign change near {estimate}")
    for _ in range(BISECTION_CAP):
        if high - low < tol:
            break
        mid = (low + high) / 2
        if _xi_float(k, low) * _xi_float(k, mid) <= 0:
            high = mid
        else:
            low = mid
    return (low + high) / 2


def rho_k_limit_scan(k_max: int, tol: float = DEFAULT_TOL) -> RhoScan:
    if k_max < 3:
        raise DomainError(f"k-max: must be at least 3, got {k_max}")
    ks = list(range(3, k_max + 1))
    rhos = [rho_k(k, tol) for k in ks]
    i = int(np.argmin(rhos))
    nonincreasing = all(b <= a + tol for a, b in zip(rhos, rhos[1:]))
    logger.info("rho_k min %.12g at k=%d, gap to golden ratio %.3g", rhos[i], ks[i], rhos[i] - GOLDEN)
    return RhoScan(
        ks=ks,
        rhos=rhos,
        minimum=rhos[i],
        argmin=ks[i],
        gap_to_golden=rhos[i] - GOLDEN,
        nonincreasing=nonincreasing,
    )


def _bisect_decreasing(h: Callable[[float], float], low: float, high: float, tol: float) -> float:
    for _ in range(BISECTION_CAP):
        if high - low < tol:
            return (low + high) / 2
        mid = (low + high) / 2
        if h(mid) > 0:
            low = mid
        else:
            high = mid
    raise NumericError(f"bisection did not reach tol={tol}")


def moran_dimension(pieces: Sequence[Tuple[int, Number]], tol: float = DEFAULT_TOL) -> float:
    """The s >= 0 with sum count * ratio**s = 1."""
    if not pieces:
        raise DomainError("pieces: need at least one (count, ratio) pair")
    parsed = []
    for count, ratio in pieces:
        ratio = Fraction(ratio)
        if count < 1 or not 0 < ratio < 1:
            raise DomainError(f"pieces: bad piece {count}:{format_rational(ratio)}")
        parsed.append((count, float(ratio)))

    def h(s: float) -> float:
        return sum(c * r**s for c, r in parsed) - 1.0

    if h(0.0) <= 0:
        if h(0.0) == 0:
            return 0.0
        raise DomainError("pieces: total count is below one, no root s >= 0")
    if h(10.0) > 0:
        raise DomainError("pieces: no Moran root in [0, 10]")
    return _bisect_decreasing(h, 0.0, 10.0, tol)


def geometric_moran_dimension(
    base: int = 4, first: int = 1, step: int = 2, tol: float = DEFAULT_TOL
) -> float:
    """Root of sum_{m>=1} base**(-(first + (m-1) step) s) = 1 via t**first / (1 - t**step)."""

    def h(s: float) -> float:
        t = float(base) ** -s
        return t**first / (1.0 - t**step) - 1.0 if s > 0 else math.inf

    return _bisect_decreasing(h, 0.0, 10.0, tol)


def psi1(x: float) -> float:
    """pgf of the first hitting time of level 1 by a symmetric simple walk."""
    if not 0 < abs(x) <= 1:
        raise DomainError(f"x: {x} outside 0 < |x| <= 1")
    return (1.0 - math.sqrt(1.0 - x * x)) / x


def psi(m: int, x: float) -> float:
    return psi1(x) ** m


def random_moran_root(tol: float = DEFAULT_TOL) -> float:
    """r in (0, 1) with 2 r psi1(r) + psi1(r)**2 = 1."""

    def h(r: float) -> float:
        g = psi1(r)
        return 1.0 - 2.0 * r * g - g * g

    return _bisect_decreasing(h, tol, 1.0, tol)


def random_moran_dimension(tol: float = DEFAULT_TOL) -> float:
    return -math.log2(random_moran_root(tol))
