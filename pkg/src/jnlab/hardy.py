"""Atoms, molecules, admissible decay exponents, and the constructive
annulus decomposition of a molecule into atoms.

An atom is supported in a cube, L^q-normalized against the cube measure, and
moment-free up to degree s.  A molecule relaxes compact support to a dyadic
decay bound on annuli governed by an exponent epsilon.  The decomposition
splits a molecule over dyadic annuli: per-annulus projection residuals become
core atoms, and the projections themselves telescope (summation by parts on
tail moments) into correction atoms built from dual polynomial bases, plus an
explicit tail term at the outermost level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lattice import (
    Cube,
    GridFunction,
    Window,
    annulus,
    lq_norm,
    region_mask,
    region_measure,
)
from .polyproj import dual_basis, moment_projection, multi_indices

__all__ = [
    "ParameterError",
    "ZeroAtomError",
    "CertificationError",
    "WindowMismatchError",
    "AtomCertification",
    "AtomRecord",
    "MoleculeCertification",
    "MoleculeRecord",
    "make_atom",
    "validate_atom",
    "make_molecule",
    "validate_molecule",
    "repair_moments",
    "epsilon_window",
    "EpsilonWindow",
    "abel_transform",
    "decompose_molecule",
    "DecompositionReport",
    "DecompositionAtom",
    "pairing",
    "hk_upper_bound",
]

ATOM_NORM_RTOL = 1e-10
ATOM_MOMENT_RTOL = 1e-8
INF = math.inf


class ParameterError(ValueError):
    """Exponent hypothesis violated."""


class ZeroAtomError(ValueError):
    """Projection removed everything; no atom can be normalized."""


class CertificationError(ValueError):
    """An object failed atom/molecule certification."""


class WindowMismatchError(ValueError):
    """Pairing requires both functions on one lattice."""


def _inv(p: float) -> float:
    return 0.0 if p == INF else 1.0 / p


def norm_exponent(params) -> float:
    """1/q - 1/p - alpha: the size exponent of atom and molecule bounds."""
    return _inv(params.q) - _inv(params.p) - params.alpha


@dataclass
class AtomCertification:
    support_exact: bool
    norm_ratio: float
    moment_defects: dict
    moment_scales: dict
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass
class AtomRecord:
    cube: Cube
    params: object
    values: GridFunction
    seed: int | None
    certification: AtomCertification


def validate_atom(values: GridFunction, cube: Cube, params) -> AtomCertification:
    """Check support, L^q size, and vanishing moments; failures are data."""
    window = values.window
    mask = region_mask(window, cube)
    outside = values.flat[~mask]
    support_exact = bool(np.all(outside == 0.0))
    measure = region_measure(window, cube)
    bound = measure ** norm_exponent(params)
    norm = lq_norm(values, cube, params.q)
    norm_ratio = norm / bound if bound > 0 else INF
    pts = window.midpoints()
    a_l1 = float(np.abs(values.flat).sum()) * window.cell_measure
    defects, scales, failures = {}, {}, []
    if not support_exact:
        failures.append("support: nonzero cells outside the cube")
    if norm_ratio > 1.0 + ATOM_NORM_RTOL:
        failures.append(f"size: L^q ratio {norm_ratio:.12g} exceeds 1")
    for g in multi_indices(window.n, params.s):
        xg = np.ones(pts.shape[0])
        for axis, gi in enumerate(g):
            if gi:
                xg = xg * pts[:, axis] ** gi
        defect = abs(float((values.flat * xg).sum()) * window.cell_measure)
        scale = a_l1 * cube.side ** sum(g)
        defects[g] = defect
        scales[g] = scale
        if defect > ATOM_MOMENT_RTOL * scale:
            failures.append(f"moment {g}: defect {defect:.3e} exceeds tolerance")
    return AtomCertification(support_exact, norm_ratio, defects, scales, failures)


def make_atom(
    seed: int,
    cube: Cube,
    params,
    window: Window,
    seed_values=None,
) -> AtomRecord:
    """Seeded random atom: noise on the cube, moment projection removed,
    rescaled to meet the L^q bound with equality."""
    if params.q == INF:
        raise ParameterError("q = inf atoms are excluded (sup-norm certification is fragile)")
    mask = region_mask(window, cube)
    count = int(np.count_nonzero(mask))
    if count < (params.s + 2) ** window.n:
        raise ValueError(f"cube holds {count} cells; need at least {(params.s + 2) ** window.n}")
    if seed_values is None:
        rng = np.random.default_rng(seed)
        raw = rng.uniform(-1.0, 1.0, size=count)
    else:
        raw = np.broadcast_to(np.asarray(seed_values, dtype=float), (count,))
    vals = np.zeros(window.cell_count)
    vals[mask] = raw
    g = GridFunction(window, vals.reshape(window.cells))
    proj = moment_projection(g, cube, params.s)
    resid = np.zeros(window.cell_count)
    resid[mask] = g.flat[mask] - proj(window.midpoints()[mask])
    norm = lq_norm(GridFunction(window, resid.reshape(window.cells)), cube, params.q)
    ref = lq_norm(g, cube, params.q)
    if norm <= 1e-13 * max(ref, 1.0):
        raise ZeroAtomError("projection removed the seed function entirely")
    bound = region_measure(window, cube) ** norm_exponent(params)
    resid *= bound / norm
    a = GridFunction(window, resid.reshape(window.cells))
    cert = validate_atom(a, cube, params)
    if not cert.passed:
        raise CertificationError(f"constructed atom failed: {cert.failures}")
    return AtomRecord(cube, params, a, seed if seed_values is None else None, cert)


@dataclass
class MoleculeCertification:
    core_ratio: float
    annulus_ratios: list
    moment_defects: dict
    moment_scales: dict
    moment_tol: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def constant_needed(self) -> float:
        """Smallest C such that M / C meets the size conditions."""
        return max([self.core_ratio] + list(self.annulus_ratios))


@dataclass
class MoleculeRecord:
    cube: Cube
    params: object
    epsilon: float
    values: GridFunction
    certification: MoleculeCertification


def validate_molecule(
    values: GridFunction,
    cube: Cube,
    params,
    epsilon: float,
    j_max: int,
    moment_tol: float = ATOM_MOMENT_RTOL,
) -> MoleculeCertification:
    """Per-annulus decay margins, core margin, and global moment defects."""
    window = values.window
    c = norm_exponent(params)
    if c >= 0:
        raise ParameterError("molecules need alpha > 1/q - 1/p (negative size exponent)")
    if not 0 < epsilon < 1:
        raise ParameterError("the decay exponent must lie in (0, 1)")
    core_measure = region_measure(window, cube)
    core_bound = core_measure**c
    core_ratio = lq_norm(values, cube, params.q) / core_bound
    ratios = []
    failures = []
    if core_ratio > 1.0 + ATOM_NORM_RTOL:
        failures.append(f"core size ratio {core_ratio:.12g} exceeds 1")
    for j in range(1, j_max + 1):
        bound = 2.0 ** (j * window.n / epsilon * c) * core_bound
        ratio = lq_norm(values, annulus(cube.center, cube.side, j), params.q) / bound
        ratios.append(ratio)
        if ratio > 1.0 + ATOM_NORM_RTOL:
            failures.append(f"annulus j={j} decay ratio {ratio:.12g} exceeds 1")
    pts = window.midpoints()
    m_l1 = float(np.abs(values.flat).sum()) * window.cell_measure
    outer_side = cube.side * 2**j_max
    defects, scales = {}, {}
    for g in multi_indices(window.n, params.s):
        xg = np.ones(pts.shape[0])
        for axis, gi in enumerate(g):
            if gi:
                xg = xg * pts[:, axis] ** gi
        defect = abs(float((values.flat * xg).sum()) * window.cell_measure)
        scale = m_l1 * outer_side ** sum(g)
        defects[g] = defect
        scales[g] = scale
        if defect > moment_tol * scale:
            failures.append(f"moment {g}: defect {defect:.3e} exceeds tolerance")
    return MoleculeCertification(core_ratio, ratios, defects, scales, moment_tol, failures)


def repair_moments(values: GridFunction, cube: Cube, s: int) -> GridFunction:
    """Cancel the global moments by a dual-basis correction on the core cube.

    Wide-window operator images carry a truncation-level moment defect; this
    subtracts sum_nu (int M x^nu) psi_nu 1_core / |core|, which has exactly
    the same moments, leaving the tails untouched.
    """
    window = values.window
    mask = region_mask(window, cube)
    pts = window.midpoints()
    duals = dual_basis(window, cube, s)
    gammas = multi_indices(window.n, s)
    measure = region_measure(window, cube)
    out = values.flat.copy()
    # moments must be removed jointly: build the correction, then subtract
    corr = np.zeros(window.cell_count)
    for nu_idx, nu in enumerate(gammas):
        xg = np.ones(pts.shape[0])
        for axis, gi in enumerate(nu):
            if gi:
                xg = xg * pts[:, axis] ** gi
        m_nu = float((values.flat * xg).sum()) * window.cell_measure
        corr[mask] += m_nu * duals[nu_idx](pts[mask]) / measure
    out -= corr
    return GridFunction(window, out.reshape(window.cells))


def make_molecule(
    seed: int,
    cube: Cube,
    params,
    epsilon: float,
    window: Window,
    j_max: int,
    margin: float = 0.8,
    tail_weight: float = 0.1,
) -> MoleculeRecord:
    """Seeded molecule with nonzero tail moments and decay margins < 1.

    Per-annulus moment-free noise supplies the bulk; dual-basis pair terms on
    adjacent annuli (jointly moment-free, but with nonzero dyadic tail
    moments) make the decomposition's correction atoms nondegenerate.
    """
    if params.q == INF:
        raise ParameterError("q = inf molecules are excluded")
    rng = np.random.default_rng(seed)
    c = norm_exponent(params)
    core_bound = region_measure(window, cube) ** c
    total = np.zeros(window.cell_count)
    pts = window.midpoints()
    bounds, masks, duals, measures = [], [], [], []
    for j in range(0, j_max + 1):
        region = annulus(cube.center, cube.side, j)
        mask = region_mask(window, region)
        if not mask.any():
            raise ValueError(f"window does not reach annulus level {j}")
        masks.append(mask)
        measures.append(float(mask.sum()) * window.cell_measure)
        duals.append(dual_basis(window, region, params.s))
        bounds.append(core_bound * (2.0 ** (j * window.n / epsilon * c) if j else 1.0))
        raw = np.zeros(window.cell_count)
        raw[mask] = rng.uniform(-1.0, 1.0, size=int(mask.sum()))
        piece = GridFunction(window, raw.reshape(window.cells))
        proj = moment_projection(piece, region, params.s)
        resid = np.zeros(window.cell_count)
        resid[mask] = piece.flat[mask] - proj(pts[mask])
        norm = lq_norm(GridFunction(window, resid.reshape(window.cells)), region, params.q)
        if norm <= 0:
            raise ZeroAtomError("degenerate annulus piece")
        total += resid * (margin * bounds[j] / norm)
    gammas = multi_indices(window.n, params.s)
    for j in range(j_max):
        for gi, g in enumerate(gammas):
            pair = np.zeros(window.cell_count)
            pair[masks[j + 1]] += duals[j + 1][gi](pts[masks[j + 1]]) / measures[j + 1]
            pair[masks[j]] -= duals[j][gi](pts[masks[j]]) / measures[j]
            gf = GridFunction(window, pair.reshape(window.cells))
            norm_lo = lq_norm(gf, annulus(cube.center, cube.side, j), params.q)
            norm_hi = lq_norm(gf, annulus(cube.center, cube.side, j + 1), params.q)
            cap = min(
                bounds[j] / norm_lo if norm_lo > 0 else INF,
                bounds[j + 1] / norm_hi if norm_hi > 0 else INF,
            )
            amp = tail_weight * cap * rng.uniform(0.5, 1.0) / len(gammas)
            total += amp * pair * (1 if rng.random() < 0.5 else -1)
    values = GridFunction(window, total.reshape(window.cells))
    cert = validate_molecule(values, cube, params, epsilon, j_max)
    if not cert.passed:
        raise CertificationError(f"constructed molecule failed: {cert.failures}")
    return MoleculeRecord(cube, params, epsilon, values, cert)


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        if x == INF:
            raise ParameterError("use finite exponents for the epsilon window")
        return Fraction(str(x))
    raise TypeError(f"cannot interpret {x!r} as a rational number")


@dataclass
class EpsilonWindow:
    """Admissible decay exponents [lo, hi) intersected with (0, 1).

    The closed lower endpoint comes from the operator-image decay
    requirement, the open upper endpoint from the pairing summability
    requirement.
    """

    lo: Fraction
    hi: Fraction
    violations: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return self.lo >= self.hi

    def contains(self, eps) -> bool:
        e = _as_fraction(eps)
        return (not self.empty) and self.lo <= e < self.hi and 0 < e < 1

    def midpoint(self) -> Fraction | None:
        if self.empty:
            return None
        return (self.lo + min(self.hi, Fraction(1))) / 2


def epsilon_window(p, q, s, alpha, delta, n) -> EpsilonWindow:
    """Exact rational interval of admissible epsilon for given exponents.

    Requires alpha > 1/q - 1/p.  With c := 1/q - 1/p - alpha < 0 the two
    constraints (1/eps) c < -(1/q' + s/n) and (1/eps) c >= -(1/q' + (s+delta)/n)
    give eps in [ (-c)/(1/q' + (s+delta)/n), (-c)/(1/q' + s/n) ), then
    intersect with (0, 1).
    """
    p, q, alpha, delta = (_as_fraction(v) for v in (p, q, alpha, delta))
    s = int(s)
    n = int(n)
    if q <= 1 or p <= 1:
        raise ParameterError("p and q must exceed 1")
    c = 1 / q - 1 / p - alpha
    if c >= 0:
        raise ParameterError("alpha must exceed 1/q - 1/p")
    inv_q_conj = 1 - 1 / q  # positive, since q > 1
    lo = (-c) / (inv_q_conj + (s + delta) / Fraction(n))
    hi = (-c) / (inv_q_conj + Fraction(s, n))
    violations = []
    if not (alpha < (s + delta) / Fraction(n)):
        violations.append("alpha >= (s + delta)/n: outside the operator-extension range")
    hi = min(hi, Fraction(1))
    if lo <= 0:
        lo = Fraction(0)
    return EpsilonWindow(lo, hi, violations)


def abel_transform(a, b, k: int):
    """Summation by parts: both sides of
    sum_{j=1..k} a_j b_j = a_k sum b_j - sum_{j<k} (prefix b)(a_{j+1}-a_j)."""
    if len(a) < k or len(b) < k:
        raise ValueError("need at least k terms in both sequences")
    lhs = sum(a[j] * b[j] for j in range(k))
    prefix = list(np.cumsum(b[:k]))
    rhs = a[k - 1] * prefix[k - 1] - sum(prefix[j] * (a[j + 1] - a[j]) for j in range(k - 1))
    return lhs, rhs


def pairing(g: GridFunction, f: GridFunction) -> float:
    """Discrete integral of g * f; both functions must share one lattice."""
    if not g.window.same_lattice(f.window):
        raise WindowMismatchError("pairing requires identical windows; resample first")
    return float((g.flat * f.flat).sum()) * g.window.cell_measure


@dataclass
class DecompositionAtom:
    level: int
    kind: str  # "core" or "correction"
    nu: tuple | None
    lam: float
    record: AtomRecord


@dataclass
class DecompositionReport:
    atoms: list
    tail_term: GridFunction
    tail_level: int
    residuals: list
    coef_p_sum_core: float
    coef_p_sum_all: float
    geometric_bound: float
    constants: dict
    epsilon: float

    def hk_groups(self):
        """Each produced atom is its own single-atom polymer (their support
        cubes are nested, never disjoint)."""
        return [[(a.lam, a.record)] for a in self.atoms]

    def to_json(self) -> dict:
        return {
            "atoms": [
                {
                    "level": a.level,
                    "kind": a.kind,
                    "nu": None if a.nu is None else list(a.nu),
                    "lambda": a.lam,
                    "cube": a.record.cube.to_dict(),
                }
                for a in self.atoms
            ],
            "tail": {"level": self.tail_level, "values_ref": "tail_term"},
            "residuals": self.residuals,
            "coef_p_sum": self.coef_p_sum_core,
            "coef_p_sum_all": self.coef_p_sum_all,
            "geometric_bound": self.geometric_bound,
            "constants": self.constants,
            "epsilon": self.epsilon,
        }


def _monomial_values(pts: np.ndarray, g) -> np.ndarray:
    out = np.ones(pts.shape[0])
    for axis, gi in enumerate(g):
        if gi:
            out = out * pts[:, axis] ** gi
    return out


def decompose_molecule(
    mol: MoleculeRecord, l_max: int, moment_tol: float = ATOM_MOMENT_RTOL
) -> DecompositionReport:
    """Constructive decomposition of a molecule into certified atoms.

    Level-j residuals (M - P_j) 1_{L_j} give core atoms A_j with coefficients
    lambda_j = (1 + C) 2^{j n (1/eps - 1)(1/q - 1/p - alpha)}, where C is the
    measured annulus-projection constant.  Summation by parts on the tail
    moments eta_nu^{(j)} turns the projections into correction atoms built
    from dual bases on adjacent annuli, leaving the explicit tail term at the
    top level.  The reconstruction residual is checked at every level.
    """
    params = mol.params
    window = mol.values.window
    cube = mol.cube
    n = window.n
    h = window.h
    eps = float(mol.epsilon)
    s = params.s
    side_cells = round(cube.side / h)
    if abs(cube.side - side_cells * h) > 1e-9 * h:
        raise CertificationError("core cube side must be a whole number of cells")
    core_count = int(np.count_nonzero(region_mask(window, cube)))
    if core_count != side_cells**n:
        raise CertificationError("core cube must be cell-aligned inside the window")
    outer = annulus(cube.center, cube.side, l_max).outer if l_max else cube
    outer_count = int(np.count_nonzero(region_mask(window, outer)))
    if outer_count != (side_cells * 2**l_max) ** n:
        raise CertificationError(f"window does not fully contain level {l_max}")

    cert = validate_molecule(mol.values, cube, params, eps, l_max, moment_tol)
    if not cert.passed:
        raise CertificationError(f"molecule certification failed: {cert.failures}")

    c_exp = norm_exponent(params)
    decay = 2.0 ** (n * (1.0 / eps - 1.0) * c_exp)
    pts = window.midpoints()
    vals = mol.values.flat
    gammas = multi_indices(n, s)

    masks, resids, proj_sup = [], [], 0.0
    measures = []
    duals = []
    for j in range(l_max + 1):
        region = annulus(cube.center, cube.side, j)
        mask = region_mask(window, region)
        masks.append(mask)
        measures.append(float(mask.sum()) * window.cell_measure)
        gf = mol.values
        P = moment_projection(gf, region, s)
        resid = np.zeros(window.cell_count)
        resid[mask] = vals[mask] - P(pts[mask])
        resids.append(resid)
        mean_abs = float(np.abs(vals[mask]).mean())
        if mean_abs > 0:
            proj_sup = max(proj_sup, float(np.abs(P(pts[mask])).max()) / mean_abs)
        duals.append(dual_basis(window, region, s))

    c_proj = proj_sup
    lam_core = 1.0 + c_proj

    atoms: list[DecompositionAtom] = []
    partial_core = np.zeros(window.cell_count)
    core_partials = []
    for j in range(l_max + 1):
        lam_j = lam_core * decay**j
        if not np.any(resids[j]):
            core_partials.append(partial_core.copy())
            continue
        a_vals = resids[j] / lam_j
        rec_gf = GridFunction(window, a_vals.reshape(window.cells))
        support = Cube(cube.center, cube.side * 2**j)
        cert_j = validate_atom(rec_gf, support, params)
        if not cert_j.passed:
            raise CertificationError(f"core atom at level {j} failed: {cert_j.failures}")
        atoms.append(
            DecompositionAtom(j, "core", None, lam_j, AtomRecord(support, params, rec_gf, None, cert_j))
        )
        partial_core = partial_core + lam_j * a_vals
        core_partials.append(partial_core.copy())

    # tail moments over the window beyond each dyadic cube
    eta = np.zeros((l_max + 1, len(gammas)))
    for j in range(l_max + 1):
        outside = ~region_mask(window, Cube(cube.center, cube.side * 2**j))
        for gi, g in enumerate(gammas):
            eta[j, gi] = float((vals[outside] * _monomial_values(pts[outside], g)).sum()) * window.cell_measure

    # correction pieces eta_nu^{(j)} [ psi^{(j+1)} 1_{L_{j+1}} / |L_{j+1}| - psi^{(j)} 1_{L_j} / |L_j| ]
    tilde_raw = {}
    tilde_norm_max = 0.0
    for j in range(l_max):
        support = Cube(cube.center, cube.side * 2 ** (j + 1))
        bound = decay**j * region_measure(window, support) ** c_exp
        for gi, g in enumerate(gammas):
            piece = np.zeros(window.cell_count)
            piece[masks[j + 1]] = duals[j + 1][gi](pts[masks[j + 1]]) / measures[j + 1]
            piece[masks[j]] -= duals[j][gi](pts[masks[j]]) / measures[j]
            piece *= eta[j, gi]
            norm = lq_norm(GridFunction(window, piece.reshape(window.cells)), support, params.q)
            tilde_raw[(j, g)] = (piece, norm, bound)
            if norm > 0:
                tilde_norm_max = max(tilde_norm_max, norm / bound)

    c_tilde = tilde_norm_max * (1.0 + 1e-8)
    corr_partial = np.zeros(window.cell_count)
    corr_partials = [corr_partial.copy()]  # corrections up to level l-1 for l = 0
    for j in range(l_max):
        lam_t = c_tilde * decay**j
        for gi, g in enumerate(gammas):
            piece, norm, _ = tilde_raw[(j, g)]
            if norm == 0.0 or c_tilde == 0.0:
                continue
            support = Cube(cube.center, cube.side * 2 ** (j + 1))
            a_vals = piece / lam_t
            rec_gf = GridFunction(window, a_vals.reshape(window.cells))
            cert_t = validate_atom(rec_gf, support, params)
            if not cert_t.passed:
                raise CertificationError(
                    f"correction atom level {j}, nu={g} failed: {cert_t.failures}"
                )
            atoms.append(
                DecompositionAtom(
                    j, "correction", g, lam_t, AtomRecord(support, params, rec_gf, None, cert_t)
                )
            )
            corr_partial = corr_partial + piece
        corr_partials.append(corr_partial.copy())

    # tail term and reconstruction residual per level
    residuals = []
    m_l1 = float(np.abs(vals).sum()) * window.cell_measure
    tail_term_top = None
    for l in range(l_max + 1):
        tail = np.zeros(window.cell_count)
        for gi, g in enumerate(gammas):
            tail[masks[l]] -= eta[l, gi] * duals[l][gi](pts[masks[l]]) / measures[l]
        if l == l_max:
            tail_term_top = tail
        inside = region_mask(window, Cube(cube.center, cube.side * 2**l))
        recon = core_partials[l] + corr_partials[l] + tail
        diff = np.where(inside, vals, 0.0) - recon
        residuals.append(float(np.abs(diff).sum()) * window.cell_measure / max(m_l1, 1e-300))

    p = params.p
    lam_values = [a.lam for a in atoms if a.kind == "core"]
    coef_core = float(sum(l**p for l in lam_values))
    coef_all = float(sum(a.lam**p for a in atoms))
    ratio_p = decay**p
    geometric = lam_core**p / (1.0 - ratio_p) if ratio_p < 1 else INF

    return DecompositionReport(
        atoms=atoms,
        tail_term=GridFunction(window, tail_term_top.reshape(window.cells)),
        tail_level=l_max,
        residuals=residuals,
        coef_p_sum_core=coef_core,
        coef_p_sum_all=coef_all,
        geometric_bound=geometric,
        constants={"annulus_projection": c_proj, "core_factor": lam_core, "correction_factor": c_tilde},
        epsilon=eps,
    )


def hk_upper_bound(groups, p: float) -> float:
    """Finite-decomposition upper bound: sum over polymers of (sum |lam|^p)^(1/p).

    Each group must consist of atoms on congruent, pairwise-disjoint cubes.
    """
    total = 0.0
    for group in groups:
        if not group:
            continue
        sides = [rec.cube.side for _, rec in group]
        if any(abs(s0 - sides[0]) > 1e-12 * sides[0] for s0 in sides):
            raise ValueError("polymer group mixes cube side lengths")
        for i in range(len(group)):
            for k in range(i + 1, len(group)):
                ci = np.asarray(group[i][1].cube.center)
                ck = np.asarray(group[k][1].cube.center)
                half = (group[i][1].cube.side + group[k][1].cube.side) / 2.0
                if np.all(np.abs(ci - ck) < half - 1e-12 * half):
                    raise ValueError("polymer group has overlapping support cubes")
        lams = np.asarray([abs(l) for l, _ in group])
        total += float((lams**p).sum() ** (1.0 / p)) if p != INF else float(lams.max())
    return total
