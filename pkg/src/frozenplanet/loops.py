"""Symmetry-adapted spectral representation of real loops on R/2Z.

A loop is stored as coefficients in one of three trigonometric bases:

* ``odd-sine``    sin((2k-1)*pi*tau), k >= 1.  Enforces the symmetries
  -z(1+tau) = z(tau) = z(1-tau) exactly (antiperiodic, even about 1/2).
* ``even-cosine`` cos(2k*pi*tau), k >= 0.  Enforces z(1+tau) = z(tau) = z(1-tau)
  (1-periodic and even).
* ``full``        c0 + sum_k a_k cos(k*pi*tau) + b_k sin(k*pi*tau).  Only
  2-periodicity.

All inner products are the half-period L2 pairing <u, v> = (1/2) int_0^2 u v,
which reduces to int_0^1 u v on both symmetric classes.  Nonlinear products
(squares, cubes, quartics) are formed on a dealiased uniform grid and
re-analyzed, so norms of z^2 and Galerkin projections of z^3 are exact for
band-limited loops.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ClassMismatchError, DomainError

ODD_SINE = "odd-sine"
EVEN_COSINE = "even-cosine"
FULL = "full"

CLASSES = (ODD_SINE, EVEN_COSINE, FULL)

#: oversampling factor for dealiased products: a grid of 16*N points on [0,2)
#: integrates quartics exactly and resolves cubes at full resolution.
QUAD_FACTOR = 16

#: tolerance for symmetry checks in analyze()
SYMMETRY_TOL = 1e-8

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _validate_class(klass):
    if klass not in CLASSES:
        raise DomainError(f"unknown symmetry class {klass!r}", tag="loops.class")


def mode_count(klass, n_coeffs):
    """Highest frequency (in units of pi) present in a coefficient vector."""
    if klass == ODD_SINE:
        return 2 * n_coeffs - 1
    if klass == EVEN_COSINE:
        return 2 * (n_coeffs - 1)
    # full layout: [c0, a1, b1, a2, b2, ...]
    return (n_coeffs - 1 + 1) // 2


def frequencies(klass, n_coeffs):
    """Angular frequencies omega_k (z_k'' = -omega_k^2 z_k) per coefficient."""
    if klass == ODD_SINE:
        return np.pi * (2 * np.arange(1, n_coeffs + 1) - 1)
    if klass == EVEN_COSINE:
        return 2 * np.pi * np.arange(n_coeffs)
    freqs = np.zeros(n_coeffs)
    k = (np.arange(1, n_coeffs) + 1) // 2
    freqs[1:] = np.pi * k
    return freqs


def gram_diag(klass, n_coeffs):
    """Diagonal of the Gram matrix <e_j, e_k> of the raw basis."""
    g = np.full(n_coeffs, 0.5)
    if klass in (EVEN_COSINE, FULL):
        g[0] = 1.0
    return g


def basis_matrix(klass, n_coeffs, taus):
    """Matrix B[k, i] = e_k(taus[i]) of raw basis functions."""
    taus = np.asarray(taus, dtype=float)
    if klass == ODD_SINE:
        ks = 2 * np.arange(1, n_coeffs + 1) - 1
        return np.sin(np.pi * np.outer(ks, taus))
    if klass == EVEN_COSINE:
        ks = 2 * np.arange(n_coeffs)
        return np.cos(np.pi * np.outer(ks, taus))
    B = np.empty((n_coeffs, taus.size))
    B[0] = 1.0
    for j in range(1, n_coeffs):
        k = (j + 1) // 2
        B[j] = np.cos(k * np.pi * taus) if j % 2 == 1 else np.sin(k * np.pi * taus)
    return B


def synthesize(klass, coeffs, taus):
    """Evaluate the loop with the given coefficients at points ``taus``."""
    coeffs = np.asarray(coeffs, dtype=float)
    return basis_matrix(klass, coeffs.size, taus).T @ coeffs


def grid_points(m):
    """Uniform grid of m points on [0, 2)."""
    return 2.0 * np.arange(m) / m


@dataclass(frozen=True)
class Loop:
    """A loop on R/2Z in a symmetry class.

    ``coeffs`` are the real coefficients in the class basis and ``grid``
    holds M uniform samples on [0, 2) consistent with them (M >= 4N, M a
    multiple of 4, so quartic nonlinearities can be dealiased).
    """

    klass: str
    coeffs: np.ndarray
    grid: np.ndarray
    symmetry_note: str | None = None

    def __post_init__(self):
        _validate_class(self.klass)
        coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        grid = np.asarray(self.grid, dtype=float)
        if coeffs.size < 1:
            raise DomainError("loop needs at least one coefficient", tag="loops.size")
        m = grid.size
        if m % 4 != 0 or m < 4 * self.n_active_modes(coeffs):
            raise DomainError(
                f"grid size {m} too small for {coeffs.size} coefficients "
                "(need a multiple of 4 with M >= 4N)",
                tag="loops.grid",
            )
        coeffs.setflags(write=False)
        grid.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "grid", grid)

    def n_active_modes(self, coeffs=None):
        c = self.coeffs if coeffs is None else coeffs
        if self.klass == FULL:
            return max(1, (c.size + 1) // 2)
        return c.size

    @property
    def n(self):
        return self.coeffs.size

    @property
    def m(self):
        return self.grid.size

    def __call__(self, taus):
        return synthesize(self.klass, self.coeffs, taus)

    def quad_samples(self, factor=QUAD_FACTOR):
        """Samples on the internal dealiased grid (cached per loop)."""
        p = quad_size(self.n_active_modes(), factor)
        key = ("quad", p)
        cache = _loop_cache(self)
        if key not in cache:
            cache[key] = self(grid_points(p))
        return cache[key]

    def with_coeffs(self, coeffs):
        return from_coeffs(self.klass, coeffs, m=None)


def _loop_cache(z: Loop) -> dict:
    cache = getattr(z, "_cache", None)
    if cache is None:
        object.__setattr__(z, "_cache", {})
        cache = z._cache
    return cache


def quad_size(n_modes, factor=QUAD_FACTOR):
    p = factor * max(int(n_modes), 4)
    return p + (-p) % 4


def default_grid_size(klass, n_coeffs):
    n_modes = max(1, (n_coeffs + 1) // 2) if klass == FULL else n_coeffs
    m = 8 * max(n_modes, 4)
    return m + (-m) % 4


def from_coeffs(klass, coeffs, m=None):
    """Build a Loop from basis coefficients, synthesizing its grid."""
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if m is None:
        m = default_grid_size(klass, coeffs.size)
    grid = synthesize(klass, coeffs, grid_points(m))
    return Loop(klass, coeffs, grid)


def _symmetry_residual(klass, samples):
    m = samples.size
    half = m // 2
    quarter = m // 4
    if klass == ODD_SINE:
        anti = samples[:half] + samples[half:]
        refl = samples[1:quarter] - samples[half - 1 : quarter:-1]
        return max(np.max(np.abs(anti)), np.max(np.abs(refl)) if refl.size else 0.0)
    if klass == EVEN_COSINE:
        per = samples[:half] - samples[half:]
        refl = samples[1:half] - samples[-1 : half:-1]
        return max(np.max(np.abs(per)), np.max(np.abs(refl)) if refl.size else 0.0)
    return 0.0


def analyze(samples, klass, tol=SYMMETRY_TOL):
    """Project M uniform samples on [0, 2) onto the class basis.

    Raises ClassMismatchError when the samples violate the class symmetry
    beyond ``tol``.  For band-limited input the synthesis reproduces the
    samples to ~1e-13; the stored grid is the synthesized (projected) one
    so the Loop invariant holds even for rough input.
    """
    _validate_class(klass)
    samples = np.asarray(samples, dtype=float)
    m = samples.size
    if m % 4 != 0:
        raise DomainError("sample count must be a multiple of 4", tag="loops.grid")
    scale = max(1.0, float(np.max(np.abs(samples))))
    res = _symmetry_residual(klass, samples)
    if res > tol * scale:
        raise ClassMismatchError(
            f"samples violate {klass} symmetry: residual {res:.3e} "
            f"exceeds tolerance {tol:.1e} (scale {scale:.3g})"
        )
    n = m // 4 if klass != FULL else m // 2 - 1
    B = basis_matrix(klass, n, grid_points(m))
    coeffs = (B @ samples) / (m * gram_diag(klass, n))
    grid = B.T @ coeffs
    return Loop(klass, coeffs, grid)


def inner(u: Loop, v: Loop):
    """Half-period L2 pairing (1/2) int_0^2 u v d tau."""
    if u.klass == v.klass and u.n == v.n:
        return float(np.sum(u.coeffs * v.coeffs * gram_diag(u.klass, u.n)))
    p = quad_size(max(u.n_active_modes(), v.n_active_modes()))
    taus = grid_points(p)
    return float(np.mean(u(taus) * v(taus)))


def norms(z: Loop):
    """L2 data of a loop: ||z||, ||z'||, ||z^2||, and the sup norm ||z||_0.

    The first three come from coefficient quadrature on the dealiased grid
    (exact for band-limited loops); the sup norm from a dense scan refined
    by golden-section search to 1e-10 in tau.
    """
    g = gram_diag(z.klass, z.n)
    w = frequencies(z.klass, z.n)
    l2 = float(np.sqrt(np.sum(g * z.coeffs**2)))
    l2_deriv = float(np.sqrt(np.sum(g * (w * z.coeffs) ** 2)))
    l2_square = float(np.sqrt(np.mean(z.quad_samples() ** 4)))
    return {
        "l2": l2,
        "l2_deriv": l2_deriv,
        "l2_square": l2_square,
        "sup": sup_norm(z),
    }


def sup_norm(z: Loop, tol=1e-10):
    """Max of |z| via coarse scan plus golden-section refinement."""
    p = max(4 * quad_size(z.n_active_modes()), 512)
    taus = grid_points(p)
    vals = np.abs(z(taus))
    i = int(np.argmax(vals))
    h = 2.0 / p
    a, b = taus[i] - h, taus[i] + h
    f = lambda t: -abs(float(z(np.array([t]))[0]))
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return max(float(vals[i]), -min(f1, f2))


def derivative(z: Loop) -> Loop:
    """Exact spectral derivative.

    The derivative of a symmetric-class loop leaves the class (sines map to
    cosines of the same frequencies), so it is returned as class ``full``
    with a note recording the residual symmetry.
    """
    w = frequencies(z.klass, z.n)
    if z.klass == ODD_SINE:
        n_full = 2 * (2 * z.n - 1) + 1
        coeffs = np.zeros(n_full)
        for k in range(z.n):
            j = 2 * k + 1  # frequency (2k+1) * pi
            coeffs[2 * j - 1] = w[k] * z.coeffs[k]  # cos slot
        note = "odd-cosine"
    elif z.klass == EVEN_COSINE:
        n_full = 2 * (2 * (z.n - 1)) + 1 if z.n > 1 else 1
        coeffs = np.zeros(max(n_full, 1))
        for k in range(1, z.n):
            j = 2 * k
            coeffs[2 * j] = -w[k] * z.coeffs[k]  # sin slot
        note = "even-sine"
    else:
        coeffs = np.zeros_like(z.coeffs)
        for j in range(1, z.n, 2):
            k = (j + 1) // 2
            a = z.coeffs[j]
            b = z.coeffs[j + 1] if j + 1 < z.n else 0.0
            coeffs[j] = k * np.pi * b
            if j + 1 < z.n:
                coeffs[j + 1] = -k * np.pi * a
        note = None
    m = default_grid_size(FULL, coeffs.size)
    out = from_coeffs(FULL, coeffs, m=max(m, z.m))
    return replace(out, symmetry_note=note)


def second_derivative_coeffs(z: Loop):
    """Coefficients of z'' in the same class basis."""
    w = frequencies(z.klass, z.n)
    return -(w**2) * z.coeffs


def project(klass, samples_fn_or_values, n_out, p=None):
    """Project sampled values onto ``n_out`` modes of a class basis.

    ``samples_fn_or_values`` is either an array of samples on the uniform
    [0, 2) grid of size p, or a callable evaluated there.
    """
    if p is None:
        p = quad_size(n_out, factor=8)
    taus = grid_points(p)
    vals = (
        samples_fn_or_values(taus)
        if callable(samples_fn_or_values)
        else np.asarray(samples_fn_or_values)
    )
    B = basis_matrix(klass, n_out, taus)
    return (B @ vals) / (p * gram_diag(klass, n_out))


def cube(z: Loop) -> Loop:
    """Pointwise cube, re-analyzed exactly in the class basis.

    Both symmetric classes are closed under the cube; the result carries
    triple the frequency content and its own (finer) grid.
    """
    if z.klass == ODD_SINE:
        n_coeffs = 3 * z.n - 1  # frequencies (2j-1) <= 3(2N-1)
    elif z.klass == EVEN_COSINE:
        n_coeffs = 3 * (z.n - 1) + 1
    else:
        n_coeffs = 2 * 3 * z.n_active_modes() + 1
    p = quad_size(z.n_active_modes())
    vals = z.quad_samples() ** 3
    coeffs = project(z.klass, vals, n_coeffs, p=p)
    return from_coeffs(z.klass, coeffs)


def rescale_cover(z: Loop, n: int) -> Loop:
    """The covering rescaling tau -> n^{-1/3} z(n tau).

    Solutions of the critical-point equation map to solutions with
    coefficients (a, b) -> (n^{8/3} a, n^2 b).  The odd-sine class is
    preserved only for odd n.
    """
    if n < 1 or int(n) != n:
        raise DomainError("cover order must be a positive integer", tag="loops.cover")
    n = int(n)
    if n == 1:
        return z
    scale = float(n) ** (-1.0 / 3.0)
    if z.klass == ODD_SINE:
        if n % 2 == 0:
            raise ClassMismatchError(
                "even cover order leaves the odd-sine class"
            )
        n_new = ((2 * z.n - 1) * n + 1) // 2
        coeffs = np.zeros(n_new)
        for k in range(z.n):
            j = ((2 * k + 1) * n + 1) // 2  # 1-based target index
            coeffs[j - 1] = scale * z.coeffs[k]
    elif z.klass == EVEN_COSINE:
        n_new = (z.n - 1) * n + 1
        coeffs = np.zeros(n_new)
        for k in range(z.n):
            coeffs[k * n] = scale * z.coeffs[k]
    else:
        n_modes = z.n_active_modes()
        coeffs = np.zeros(2 * n_modes * n + 1)
        coeffs[0] = scale * z.coeffs[0]
        for j in range(1, z.n):
            k = (j + 1) // 2
            tgt = 2 * (k * n) - 1 if j % 2 == 1 else 2 * (k * n)
            coeffs[tgt] = scale * z.coeffs[j]
    return from_coeffs(z.klass, coeffs)


def embed_full(z: Loop, n_modes=None) -> Loop:
    """Embed a symmetric-class loop into the unrestricted period-2 basis."""
    if z.klass == FULL:
        return z
    max_freq = mode_count(z.klass, z.n)
    if n_modes is None:
        n_modes = max_freq
    if n_modes < max_freq:
        raise DomainError("embedding would truncate the loop", tag="loops.embed")
    coeffs = np.zeros(2 * n_modes + 1)
    if z.klass == ODD_SINE:
        for k in range(z.n):
            j = 2 * k + 1
            coeffs[2 * j] = z.coeffs[k]  # sin slot
    else:
        coeffs[0] = z.coeffs[0]
        for k in range(1, z.n):
            j = 2 * k
            coeffs[2 * j - 1] = z.coeffs[k]  # cos slot
    return from_coeffs(FULL, coeffs)


def loop_to_json(z: Loop):
    return {"class": z.klass, "coeffs": list(map(float, z.coeffs))}


def loop_from_json(data) -> Loop:
    return from_coeffs(data["class"], np.asarray(data["coeffs"], dtype=float))
