"""Low-degree polynomials and moment-matching projections on grid regions.

The degree-s moment projection of f over a region E is the unique P with
``sum_cells (f - P)(x) x^gamma h^n = 0`` for all |gamma| <= s, i.e. the
orthogonal projection of f onto polynomials of degree <= s in the discrete
L^2(E) inner product.  Monomials are anchored at the region center and scaled
by the region half-size before the Gram matrix is formed; an explicit
condition-number gate rejects degenerate instances instead of regularizing.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lattice import EmptyRegionError, GridFunction, Region, Window, region_mask

__all__ = [
    "MAX_DEGREE",
    "ConditioningError",
    "multi_indices",
    "index_factorial",
    "Polynomial",
    "moment_projection",
    "sup_poly_norm",
    "orthonormal_basis",
    "dual_basis",
    "space_dimension",
]

MAX_DEGREE = 4
COND_LIMIT = 1e10


class ConditioningError(ValueError):
    """Gram matrix of the monomial basis is numerically singular on E."""


def multi_indices(n: int, s: int) -> list[tuple]:
    """All multi-indices gamma with |gamma| <= s, graded lexicographic."""
    out = []
    for d in range(s + 1):
        block = [g for g in itertools.product(range(d + 1), repeat=n) if sum(g) == d]
        out.extend(sorted(block))
    return out


def index_factorial(gamma) -> int:
    return int(np.prod([math.factorial(int(g)) for g in np.atleast_1d(gamma)]))


def space_dimension(n: int, s: int) -> int:
    return len(multi_indices(n, s))


def _scaled_design(pts: np.ndarray, anchor: np.ndarray, scale: float, gammas) -> np.ndarray:
    """Columns ((x - anchor)/scale)^gamma evaluated at pts, shape (m, len(gammas))."""
    z = (pts - anchor) / scale
    cols = []
    for g in gammas:
        c = np.ones(pts.shape[0])
        for axis, gi in enumerate(g):
            if gi:
                c = c * z[:, axis] ** gi
        cols.append(c)
    return np.stack(cols, axis=1)


@dataclass
class Polynomial:
    """Polynomial of degree <= s in the basis ((x - anchor)/scale)^gamma."""

    n: int
    s: int
    anchor: tuple
    scale: float
    coeffs: dict = field(default_factory=dict)  # gamma tuple -> coefficient

    def __post_init__(self):
        if self.s > MAX_DEGREE:
            raise ValueError(f"degree cap is {MAX_DEGREE}")
        self.anchor = tuple(float(a) for a in np.atleast_1d(self.anchor))
        self.scale = float(self.scale)
        self.coeffs = {tuple(int(i) for i in g): float(c) for g, c in self.coeffs.items()}

    @classmethod
    def constant(cls, n: int, value: float) -> "Polynomial":
        return cls(n, 0, (0.0,) * n, 1.0, {(0,) * n: float(value)})

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        z = (pts - np.asarray(self.anchor)) / self.scale
        out = np.zeros(pts.shape[0])
        for g, c in self.coeffs.items():
            term = np.full(pts.shape[0], c)
            for axis, gi in enumerate(g):
                if gi:
                    term = term * z[:, axis] ** gi
            out += term
        return out

    def on_grid(self, window: Window) -> GridFunction:
        return GridFunction(window, self(window.midpoints()).reshape(window.cells))

    def degree(self, tol: float = 0.0) -> int:
        degs = [sum(g) for g, c in self.coeffs.items() if abs(c) > tol]
        return max(degs) if degs else 0

    def raw_coeffs(self) -> dict:
        """Coefficients over plain monomials x^gamma (binomial expansion)."""
        n = self.n
        out: dict[tuple, float] = {}
        a = np.asarray(self.anchor)
        for g, c in self.coeffs.items():
            c_scaled = c / self.scale ** sum(g)
            # expand prod_i (x_i - a_i)^{g_i}
            axis_terms = []
            for axis, gi in enumerate(g):
                terms = [
                    (j, math.comb(gi, j) * (-a[axis]) ** (gi - j)) for j in range(gi + 1)
                ]
                axis_terms.append(terms)
            for combo in itertools.product(*axis_terms):
                mono = tuple(j for j, _ in combo)
                w = c_scaled * float(np.prod([w for _, w in combo]))
                out[mono] = out.get(mono, 0.0) + w
        return out

    @classmethod
    def from_raw_coeffs(cls, n: int, s: int, raw: dict, anchor=None, scale: float = 1.0) -> "Polynomial":
        anchor = (0.0,) * n if anchor is None else tuple(float(a) for a in np.atleast_1d(anchor))
        a = np.asarray(anchor)
        coeffs: dict[tuple, float] = {}
        # x^gamma = (scale z + a)^gamma with z = (x - a)/scale
        for g, c in raw.items():
            axis_terms = []
            for axis, gi in enumerate(g):
                terms = [
                    (j, math.comb(gi, j) * scale**j * a[axis] ** (gi - j))
                    for j in range(gi + 1)
                ]
                axis_terms.append(terms)
            for combo in itertools.product(*axis_terms):
                mono = tuple(j for j, _ in combo)
                w = c * float(np.prod([w for _, w in combo]))
                coeffs[mono] = coeffs.get(mono, 0.0) + w
        return cls(n, s, anchor, scale, coeffs)

    def rebase(self, anchor, scale: float) -> "Polynomial":
        return Polynomial.from_raw_coeffs(self.n, self.s, self.raw_coeffs(), anchor, scale)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        raw = self.raw_coeffs()
        for g, c in other.raw_coeffs().items():
            raw[g] = raw.get(g, 0.0) + c
        return Polynomial.from_raw_coeffs(
            self.n, max(self.s, other.s), raw, self.anchor, self.scale
        )

    def __mul__(self, scalar: float) -> "Polynomial":
        return Polynomial(
            self.n, self.s, self.anchor, self.scale,
            {g: c * float(scalar) for g, c in self.coeffs.items()},
        )

    __rmul__ = __mul__

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (other * -1.0)

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "anchor": list(self.anchor),
            "scale": self.scale,
            "coeffs": [{"gamma": list(g), "a": c} for g, c in sorted(self.coeffs.items())],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Polynomial":
        d = json.loads(Path(path).read_text())
        coeffs = {tuple(e["gamma"]): e["a"] for e in d["coeffs"]}
        n = len(d["anchor"])
        return cls(n, d["s"], tuple(d["anchor"]), d["scale"], coeffs)


def _region_points(f_or_window, region: Region):
    if isinstance(f_or_window, GridFunction):
        window = f_or_window.window
    else:
        window = f_or_window
    mask = region_mask(window, region)
    pts = window.midpoints()[mask]
    return window, mask, pts


def _gram(pts: np.ndarray, region: Region, n: int, s: int, weight: float):
    """Design matrix and Gram (weighted by `weight` per point) with a cond gate."""
    gammas = multi_indices(n, s)
    if pts.shape[0] < len(gammas):
        raise ConditioningError(
            f"region holds {pts.shape[0]} cells but degree-{s} space needs {len(gammas)}"
        )
    anchor = np.asarray(region.center, dtype=float)
    scale = float(region.scale)
    phi = _scaled_design(pts, anchor, scale, gammas)
    gram = (phi.T @ phi) * weight
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ConditioningError(f"monomial Gram condition {cond:.3e} exceeds {COND_LIMIT:.0e}")
    return gammas, anchor, scale, phi, gram


def moment_projection(f: GridFunction, region: Region, s: int) -> Polynomial:
    """Degree-s moment-matching projection of f over the region."""
    window, mask, pts = _region_points(f, region)
    if pts.shape[0] == 0:
        raise EmptyRegionError("cannot project over an empty region")
    gammas, anchor, scale, phi, gram = _gram(pts, region, window.n, s, window.cell_measure)
    rhs = phi.T @ f.flat[mask] * window.cell_measure
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"Gram matrix is not positive definite: {exc}") from exc
    coef = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
    return Polynomial(window.n, s, tuple(anchor), scale, dict(zip(gammas, coef)))


def sup_poly_norm(P: Polynomial, region: Region, pitch: float) -> float:
    """Max |P| over midpoints of a pitch-h lattice covering the region."""
    lo, hi = region.bounding_box()
    lo = np.atleast_1d(lo)
    hi = np.atleast_1d(hi)
    axes = []
    for a in range(P.n):
        count = max(int(math.ceil((hi[a] - lo[a]) / pitch)), 1)
        axes.append(lo[a] + (np.arange(count) + 0.5) * pitch)
    if P.n == 1:
        pts = axes[0][:, None]
    else:
        x, y = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.stack([x.ravel(), y.ravel()], axis=1)
    inside = region.contains(pts)
    if not inside.any():
        raise EmptyRegionError("no lattice midpoint falls in the region")
    return float(np.abs(P(pts[inside])).max())


def orthonormal_basis(window_or_f, region: Region, s: int) -> list[Polynomial]:
    """Gram-Schmidt orthonormal polynomials on E with weight 1/|E|.

    Ordered like :func:`multi_indices`; span equals the degree-s space on E.
    """
    window, mask, pts = _region_points(window_or_f, region)
    count = pts.shape[0]
    if count == 0:
        raise EmptyRegionError("cannot build a basis over an empty region")
    gammas, anchor, scale, phi, gram = _gram(pts, region, window.n, s, 1.0 / count)
    # gram = L L^T; columns of inv(L).T are the GS coefficients in the scaled basis
    L = np.linalg.cholesky(gram)
    coef = np.linalg.inv(L).T
    basis = []
    for k in range(len(gammas)):
        basis.append(
            Polynomial(window.n, s, tuple(anchor), scale, dict(zip(gammas, coef[:, k])))
        )
    return basis


def dual_basis(window_or_f, region: Region, s: int) -> list[Polynomial]:
    """Polynomials psi_nu with (1/|E|) int_E psi_nu1 x^nu2 = delta_{nu1,nu2}.

    If phi_nu = sum_gamma m[nu,gamma] x^gamma is the orthonormal basis, then
    psi_nu = sum_gamma m[gamma,nu] phi_gamma; both are built here.
    """
    window, mask, pts = _region_points(window_or_f, region)
    phis = orthonormal_basis(window_or_f, region, s)
    gammas = multi_indices(window.n, s)
    # m[nu, gamma]: coefficients of phi_nu over raw monomials x^gamma
    m = np.zeros((len(gammas), len(gammas)))
    for i, p in enumerate(phis):
        raw = p.raw_coeffs()
        for j, g in enumerate(gammas):
            m[i, j] = raw.get(g, 0.0)
    duals = []
    for nu_idx in range(len(gammas)):
        acc = None
        for g_idx, p in enumerate(phis):
            term = p * m[g_idx, nu_idx]
            acc = term if acc is None else acc + term
        duals.append(acc)
    return duals
