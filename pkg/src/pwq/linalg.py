"""Dense kernels: null-space bases, determinant polynomials of matrix pencils,
rational solution curves, and real-root isolation by Sturm sequences.

Polynomials are stored with coefficients in ascending degree order.  All
routines are pure functions on numpy arrays and are safe to call from
multiple threads.
"""

import numpy as np
from dataclasses import dataclass
from scipy.linalg import null_space as _scipy_null_space

COEFF_TRIM = 1e-12
RANK_RTOL = 1e-10
NODE_ROOT_GAP = 1e-3


class ZeroPolynomialError(ValueError):
    """Raised when an identically-zero polynomial is given to a root finder."""


class SingularPencilError(ValueError):
    """Raised when det(lam*P - Q) vanishes identically."""


@dataclass(frozen=True)
class Polynomial:
    """A univariate real polynomial, coefficients in ascending degree.

    Trailing coefficients below ``COEFF_TRIM`` times the largest magnitude
    are removed on construction, so the leading coefficient of a nonzero
    polynomial is meaningful.
    """

    coeffs: np.ndarray

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
        if c.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")
        scale = np.max(np.abs(c)) if c.size else 0.0
        if scale > 0.0:
            nz = np.nonzero(np.abs(c) > COEFF_TRIM * scale)[0]
            c = c[: nz[-1] + 1] if nz.size else np.zeros(1)
        else:
            c = np.zeros(1)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def is_zero(self):
        return self.degree == 0 and self.coeffs[0] == 0.0

    def __call__(self, x):
        # Horner evaluation; x may be a scalar or an array.
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=float)
        for c in self.coeffs[::-1]:
            out = out * x + c
        return out if out.ndim else float(out)

    def derivative(self):
        if self.degree == 0:
            return Polynomial([0.0])
        k = np.arange(1, len(self.coeffs))
        return Polynomial(self.coeffs[1:] * k)

    def scaled(self, factor):
        return Polynomial(self.coeffs * factor)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(np.polynomial.polynomial.polymul(self.coeffs, other.coeffs))
        return self.scaled(float(other))

    def __add__(self, other):
        return Polynomial(np.polynomial.polynomial.polyadd(self.coeffs, other.coeffs))

    def __sub__(self, other):
        return Polynomial(np.polynomial.polynomial.polysub(self.coeffs, other.coeffs))


@dataclass(frozen=True)
class RationalCurve:
    """Vector-valued rational function lam -> numerator(lam) / denominator(lam)."""

    numerator: tuple
    denominator: Polynomial

    @property
    def dim(self):
        return len(self.numerator)

    def __call__(self, lam):
        den = self.denominator(lam)
        return np.array([p(lam) for p in self.numerator]) / den


def null_space_basis(M):
    """Orthonormal basis of the null space of ``M``.

    Rank is decided at threshold ``RANK_RTOL * sigma_max``.  A zero (or
    empty) matrix yields the identity basis; a full-column-rank matrix
    yields an ``n x 0`` array.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[1]
    if M.size == 0 or not np.any(M):
        return np.eye(n)
    smax = np.linalg.norm(M, 2)
    Z = _scipy_null_space(M, rcond=RANK_RTOL)
    # scipy uses rcond * smax internally, matching the rank threshold.
    if Z.shape[1] == 0:
        return np.zeros((n, 0))
    assert np.linalg.norm(M @ Z) <= 1e-10 * (1.0 + smax) * max(1.0, np.sqrt(n))
    return Z


def numerical_rank(M, rtol=RANK_RTOL):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _cheb_nodes(k, lo=0.0, hi=1.0):
    """k Chebyshev points mapped to [lo, hi]."""
    j = np.arange(k)
    t = np.cos((2 * j + 1) * np.pi / (2 * k))
    return lo + (hi - lo) * (t + 1.0) / 2.0


def det_polynomial(P, Q):
    """Coefficients of lam -> det(lam*P - Q) by interpolation.

    The determinant is evaluated at ``n + 1`` Chebyshev nodes on [0, 1] and
    the (square) Vandermonde system is solved for the power-basis
    coefficients.  The identically-zero determinant comes back as the zero
    polynomial.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if P.shape != Q.shape or P.shape[0] != P.shape[1]:
        raise ValueError("P and Q must be square matrices of equal size")
    n = P.shape[0]
    nodes = _cheb_nodes(n + 1)
    vals = np.array([np.linalg.det(t * P - Q) for t in nodes])
    V = np.vander(nodes, n + 1, increasing=True)
    coeffs = np.linalg.solve(V, vals)
    scale = max(np.max(np.abs(vals)), 1e-300)
    coeffs[np.abs(coeffs) <= 1e-10 * scale] = 0.0
    return Polynomial(coeffs)


def parametric_inverse_curve(P, Q, p, q):
    """Rational curve ``x(lam) = (lam*P - Q)^{-1} (lam*p - q)``.

    The coordinate numerators (degree <= n) are recovered by interpolating
    ``det(lam*P - Q) * x(lam)`` at nodes kept at least ``NODE_ROOT_GAP``
    away from the real roots of the determinant polynomial.

    Raises ``SingularPencilError`` when the determinant polynomial is
    identically zero.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    n = P.shape[0]
    den = det_polynomial(P, Q)
    if den.is_zero():
        raise SingularPencilError("det(lam*P - Q) is identically zero")

    roots = real_roots_in_interval(den, -2.0, 3.0) if den.degree > 0 else []
    candidates = _cheb_nodes(8 * (n + 2), lo=0.0, hi=1.0)
    ok = [t for t in candidates
          if all(abs(t - r) >= NODE_ROOT_GAP for r in roots)]
    if len(ok) < n + 2:  # crowded unit interval; spread out instead
        candidates = _cheb_nodes(8 * (n + 2), lo=-2.0, hi=3.0)
        ok = [t for t in candidates
              if all(abs(t - r) >= NODE_ROOT_GAP for r in roots)]
    stride = max(1, len(ok) // (n + 2))
    nodes = np.array(ok[::stride][: n + 2])

    Y = np.empty((len(nodes), n))
    for k, t in enumerate(nodes):
        x_t = np.linalg.solve(t * P - Q, t * p - q)
        Y[k] = den(t) * x_t
    V = np.vander(nodes, n + 1, increasing=True)
    C, *_ = np.linalg.lstsq(V, Y, rcond=None)
    numerators = tuple(Polynomial(C[:, j]) for j in range(n))
    return RationalCurve(numerators, den)


# ---------------------------------------------------------------------------
# Sturm sequences and real-root isolation


def sturm_chain(poly):
    """Canonical Sturm chain p, p', -rem(...), each rescaled to unit size."""
    chain = [np.asarray(poly.coeffs, dtype=float)]
    d = poly.derivative()
    if not d.is_zero():
        chain.append(np.asarray(d.coeffs, dtype=float))
        while len(chain[-1]) > 1:
            _, rem = np.polynomial.polynomial.polydiv(chain[-2], chain[-1])
            rem = Polynomial(rem).coeffs
            if len(rem) == 1 and rem[0] == 0.0:
                break
            rem = -rem
            rem = rem / np.max(np.abs(rem))
            chain.append(rem)
    return [Polynomial(c) for c in chain]


def _sign_variations(chain, x):
    signs = []
    for f in chain:
        v = f(x)
        if v != 0.0:
            signs.append(1.0 if v > 0.0 else -1.0)
    return sum(1 for a, b in zip(signs, signs[1:]) if a * b < 0.0)


def count_real_roots(poly, lo, hi, chain=None):
    """Number of distinct real roots of ``poly`` in the half-open (lo, hi]."""
    if poly.is_zero():
        raise ZeroPolynomialError("zero-polynomial")
    if chain is None:
        chain = sturm_chain(poly)
    return _sign_variations(chain, lo) - _sign_variations(chain, hi)


def _poly_scale(poly, lo, hi):
    m = max(1.0, abs(lo), abs(hi))
    k = np.arange(len(poly.coeffs))
    return float(np.max(np.abs(poly.coeffs) * m ** k))


def real_roots_in_interval(poly, lo, hi, width_tol=1e-12):
    """All distinct real roots of ``poly`` in the closed interval [lo, hi].

    Roots are isolated with a Sturm chain and refined by bisection on the
    chain's variation count, so even-multiplicity roots are located too.
    Refinement stops when the bracket is narrower than ``width_tol``
    (absolute, floored at a few ulps of the endpoint magnitude); clustered
    roots closer than that collapse to one representative.
    """
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    if poly.is_zero():
        raise ZeroPolynomialError("zero-polynomial")
    if poly.degree == 0:
        return []

    chain = sturm_chain(poly)
    scale = _poly_scale(poly, lo, hi)
    roots = []

    # An endpoint counts as a root when its value is tiny AND the Sturm
    # count confirms a root within a hair of it (a small value alone also
    # occurs near an interior multiple root).
    def _endpoint_is_root(x):
        if abs(poly(x)) > 1e-12 * scale:
            return False
        delta = max(1e-9, 1e-9 * abs(x))
        return count_real_roots(poly, x - delta, x + delta, chain) > 0

    width = max(hi - lo, 1.0)
    endpoint_hits = []
    for endpoint in (lo, hi):
        if _endpoint_is_root(endpoint):
            endpoint_hits.append(endpoint)
            roots.append(_polish_endpoint_root(poly, endpoint, lo, hi, scale))

    eps = max(width * 1e-11, 1e-13)
    a, b = lo, hi
    if lo in endpoint_hits:
        a = a + eps
    if hi in endpoint_hits:
        b = b - eps
    # A Sturm count is exact at endpoints that are not roots; shift an
    # endpoint that still lands on a root of a chain element's leading zero.
    if a < b:
        stack = [(a, b, count_real_roots(poly, a, b, chain))]
        while stack:
            x0, x1, k = stack.pop()
            if k <= 0:
                continue
            tol = max(width_tol, 8 * np.spacing(max(abs(x0), abs(x1), 1.0)))
            if x1 - x0 <= tol:
                for _ in range(k):
                    roots.append(0.5 * (x0 + x1))
                continue
            mid = 0.5 * (x0 + x1)
            k_left = count_real_roots(poly, x0, mid, chain)
            if k_left > 0:
                stack.append((x0, mid, k_left))
            if k - k_left > 0:
                stack.append((mid, x1, k - k_left))

    roots.sort()
    merged = []
    for r in roots:
        if merged and abs(r - merged[-1]) <= max(1e-11, 1e-9 * max(1.0, abs(r))):
            continue
        merged.append(r)
    return merged


def _polish_endpoint_root(poly, x, lo, hi, scale):
    """One Newton step to sharpen a root detected at an interval endpoint."""
    d = poly.derivative()
    dx = d(x)
    if dx != 0.0:
        step = poly(x) / dx
        y = x - step
        if lo <= y <= hi and abs(poly(y)) <= abs(poly(x)):
            return y
    return x
