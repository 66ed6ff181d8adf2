"""Oscillatory-integral regularizer: cutoff, coefficients and powers of L.

The identity exp(i Phi) = M[exp(i Phi)] with
M[f] = sum_l alpha_l d_xi_l f + sum_k beta_k d_y_k f + gamma f
turns the divergent integral of exp(i Phi) a psi into the absolutely
convergent integral of exp(i Phi) L^kappa[a psi], where L is the transpose
of M.  The coefficients divide by r = ||xi||^2 |grad_xi Phi|^2 +
|grad_y Phi|^2, which nondegeneracy keeps above alpha ||xi||^2 outside the
unit ball; inside it the cutoff chi makes M the identity, so r is never
actually inverted there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .jets import (
    Coords,
    IndexSet,
    SmoothMap,
    VarLayout,
    _uni_iset,
    _xi_norm_sq_table,
    _xi_norm_table,
    as_coords,
    embed_table,
    t_add,
    t_blank,
    t_compose,
    t_div,
    t_exp,
    t_mul,
    t_pow,
    t_scale,
    t_shift,
)

__all__ = [
    "CutoffChi",
    "KappaPlan",
    "RegularizerCoeffs",
    "RegCoeffTables",
    "select_kappa",
    "compute_r",
    "compute_coeffs",
    "coefficient_tables",
    "apply_l_ladder",
    "apply_L_power",
    "check_coefficient_symbol_bounds",
]


@dataclass(frozen=True)
class CutoffChi:
    """Radial cutoff: 1 inside ``inner_radius``, 0 outside ``outer_radius``.

    The profile between the radii is the standard smooth partition
    g(1-u) / (g(1-u) + g(u)) with g(s) = exp(-1/s), u the normalised radial
    coordinate.  Within ``guard`` of either end the exact values differ from
    0 or 1 by less than 1e-18, far below quadrature resolution, so they are
    clamped to the exact constants; this keeps every derivative finite and
    exactly zero on the plateaus.
    """

    inner_radius: float = 1.0
    outer_radius: float = 2.0
    guard: float = 0.015

    def __post_init__(self):
        if not (0.0 < self.inner_radius < self.outer_radius):
            raise ValueError("need 0 < inner_radius < outer_radius")
        if not (0.0 < self.guard < 0.1):
            raise ValueError("guard must lie in (0, 0.1)")

    def rescaled(self, factor: float) -> "CutoffChi":
        """Cutoff of the dilated argument: chi(factor * xi)."""
        return CutoffChi(self.inner_radius / factor, self.outer_radius / factor, self.guard)

    def profile_derivs(self, s, order: int) -> list:
        """Values and s-derivatives of the radial profile, orders 0..order."""
        s = np.asarray(s, dtype=float)
        width = self.outer_radius - self.inner_radius
        u = (s - self.inner_radius) / width
        lo = u <= self.guard
        hi = u >= 1.0 - self.guard
        mid = ~(lo | hi)
        out = [np.where(lo, 1.0, 0.0)] + [np.zeros(s.shape) for _ in range(order)]
        if np.any(mid):
            um = u[mid]
            iset = _uni_iset(order)
            tu = t_blank(iset)
            tu[(0,)] = um
            if order >= 1:
                tu[(1,)] = 1.0 / width
            tv = t_scale(tu, -1.0)
            tv[(0,)] = 1.0 - um
            a = t_exp(t_scale(t_pow(tv, -1.0, iset), -1.0), iset)
            b = t_exp(t_scale(t_pow(tu, -1.0, iset), -1.0), iset)
            q = t_div(a, t_add(a, b, iset), iset)
            for k in range(order + 1):
                out[k][mid] = np.broadcast_to(np.real(q[(k,)]), um.shape)
        return out

    def values(self, xi) -> np.ndarray:
        return self.profile_derivs(np.abs(np.asarray(xi, dtype=float)), 0)[0]

    def xi_table(self, coords: Coords, iset: IndexSet) -> dict:
        """Derivative table of chi(||xi||) over the full layout of ``iset``."""
        norm_t = _xi_norm_table(coords, iset)
        derivs = self.profile_derivs(norm_t[iset.zero], iset.max_total())
        return t_compose(derivs, norm_t, iset)

    def as_map(self, n_xi: int = 1) -> SmoothMap:
        layout = VarLayout(0, 0, n_xi)
        return SmoothMap(layout, lambda coords, iset: self.xi_table(coords, iset),
                         12, f"chi on [{self.inner_radius}, {self.outer_radius}]",
                         {"xi": (-self.outer_radius, self.outer_radius)})


@dataclass(frozen=True)
class KappaPlan:
    """Number of L applications and the integrand decay it buys."""

    kappa: int
    gain: float
    decay_exponent: float
    d: float
    rho: float
    delta: float
    n_xi: int
    extra_decay: int

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "gain": self.gain,
                "decay_exponent": self.decay_exponent, "d": self.d,
                "rho": self.rho, "delta": self.delta, "n_xi": self.n_xi,
                "extra_decay": self.extra_decay}


def select_kappa(d: float, rho: float, delta: float, n_xi: int,
                 extra_decay: int = 0) -> KappaPlan:
    """Smallest kappa making the regularized integrand absolutely integrable.

    Each application of L improves the xi decay by min(rho, 1 - delta), so
    the regularized amplitude is O(||xi||^(d - kappa gain)); we require the
    exponent to be at most -(n_xi + 1 + extra_decay), leaving one power
    beyond bare integrability plus any decay requested for tail control.
    """
    if not (0.0 < rho <= 1.0) or not (0.0 <= delta < 1.0):
        raise ValueError("need 0 < rho <= 1 and 0 <= delta < 1")
    if extra_decay < 0:
        raise ValueError("extra_decay must be nonnegative")
    gain = min(rho, 1.0 - delta)
    required = (d + n_xi + 1 + extra_decay) / gain
    kappa = max(0, math.ceil(required - 1e-12))
    return KappaPlan(kappa, gain, d - kappa * gain, d, rho, delta, n_xi, extra_decay)


@dataclass(frozen=True)
class RegCoeffTables:
    """Derivative tables of the regularizer coefficients on one index set."""

    alpha: tuple
    beta: tuple
    gamma: dict
    r: dict
    iset: IndexSet


def coefficient_tables(phase_table: dict, coords: Coords, chi: CutoffChi,
                       iset: IndexSet) -> RegCoeffTables:
    """Tables of alpha_l, beta_k, gamma and r on ``iset``.

    ``phase_table`` must contain every key of ``iset`` plus one extra order
    in each y and xi direction (it is shifted to read the phase gradient).
    On points where chi == 1 exactly, r is swapped for 1 before dividing;
    the factor (1 - chi) and all its derivatives vanish exactly there, so
    the finite quotient is multiplied away and alpha = beta = 0 exactly.
    """
    layout = iset.layout
    nx, ny, nxi = layout.n_x, layout.n_y, layout.n_xi
    base = nx + ny
    dphi_xi = [t_shift(phase_table, base + l, iset) for l in range(nxi)]
    dphi_y = [t_shift(phase_table, nx + k, iset) for k in range(ny)]
    nsq = _xi_norm_sq_table(coords, iset)
    grad = None
    for t in dphi_xi:
        sq = t_mul(t, t, iset)
        grad = sq if grad is None else t_add(grad, sq, iset)
    r = t_mul(nsq, grad, iset)
    for t in dphi_y:
        r = t_add(r, t_mul(t, t, iset), iset)
    gamma = chi.xi_table(coords, iset)
    omc = t_scale(gamma, -1.0)
    omc[iset.zero] = 1.0 - np.asarray(gamma[iset.zero])
    inner = np.asarray(omc[iset.zero]) == 0.0
    r_safe = dict(r)
    r_safe[iset.zero] = np.where(inner, 1.0, np.asarray(r[iset.zero]))
    s = t_div(omc, r_safe, iset)
    s = t_scale(s, -1.0j)
    alpha = tuple(t_mul(s, t_mul(nsq, t, iset), iset) for t in dphi_xi)
    beta = tuple(t_mul(s, t, iset) for t in dphi_y)
    return RegCoeffTables(alpha, beta, gamma, r, iset)


@dataclass(frozen=True)
class RegularizerCoeffs:
    """Point values of the coefficients together with the exactness residual."""

    alpha: tuple
    beta: tuple
    gamma: float
    r: float
    identity_residual: complex
    point: tuple


def compute_r(phase, point) -> float:
    """r = ||xi||^2 |grad_xi Phi|^2 + |grad_y Phi|^2 at one point."""
    m = phase.map if hasattr(phase, "map") else phase
    layout = m.layout
    coords = as_coords(layout, point)
    iset = IndexSet(layout, 0, 1)
    t = m.table(coords, iset)
    nsq = sum(float(v) ** 2 for v in coords.xi)
    base = layout.n_x + layout.n_y
    gxi = sum(abs(complex(np.asarray(t[_unit(layout, base + l)]).reshape(()))) ** 2
              for l in range(layout.n_xi))
    gy = sum(abs(complex(np.asarray(t[_unit(layout, layout.n_x + k)]).reshape(()))) ** 2
             for k in range(layout.n_y))
    return nsq * gxi + gy


def _unit(layout: VarLayout, i: int) -> tuple:
    return tuple(1 if j == i else 0 for j in range(layout.nvars))


def compute_coeffs(phase, chi: CutoffChi, point) -> RegularizerCoeffs:
    """Regularizer coefficients at one point, with the exactness residual.

    The residual i sum alpha d_xi Phi + i sum beta d_y Phi + gamma - 1 is
    algebraically zero; anything beyond roundoff indicates a broken phase
    provider.
    """
    m = phase.map if hasattr(phase, "map") else phase
    layout = m.layout
    coords = as_coords(layout, point)
    iset = IndexSet(layout, 0, 0)
    phase_t = m.table(coords, IndexSet(layout, 0, 1))
    ct = coefficient_tables(phase_t, coords, chi, iset)
    z = iset.zero
    base = layout.n_x + layout.n_y

    def sc(v):
        return complex(np.asarray(v).reshape(()))

    alpha = tuple(sc(a[z]) for a in ct.alpha)
    beta = tuple(sc(b[z]) for b in ct.beta)
    gamma = float(np.real(np.asarray(ct.gamma[z])))
    r = float(np.real(np.asarray(ct.r[z])))
    resid = gamma - 1.0 + 0.0j
    for l, a in enumerate(alpha):
        resid += 1.0j * a * sc(phase_t[_unit(layout, base + l)])
    for k, b in enumerate(beta):
        resid += 1.0j * b * sc(phase_t[_unit(layout, layout.n_x + k)])
    return RegularizerCoeffs(alpha, beta, gamma, r, resid, point)


def apply_l_ladder(f: dict, coeffs: RegCoeffTables, kappa: int,
                   iset: IndexSet) -> dict:
    """L^kappa f, consuming one integration order per application.

    ``f`` lives on ``iset`` (whose int cap must be at least kappa) and the
    coefficient tables on a superset.  Each step forms the products on the
    current set and differentiates them by shifting, returning a table one
    int order smaller.
    """
    layout = iset.layout
    base = layout.n_x + layout.n_y
    g = f
    cur = iset
    for _ in range(kappa):
        nxt = cur.shrink_int(1)
        acc = t_mul(coeffs.gamma, g, nxt)
        for l, a in enumerate(coeffs.alpha):
            p = t_mul(a, g, cur)
            acc = t_add(acc, t_scale(t_shift(p, base + l, nxt), -1.0), nxt)
        for k, b in enumerate(coeffs.beta):
            p = t_mul(b, g, cur)
            acc = t_add(acc, t_scale(t_shift(p, layout.n_x + k, nxt), -1.0), nxt)
        g = acc
        cur = nxt
    return g


def apply_L_power(phase, amplitude, testfn: SmoothMap, chi: CutoffChi,
                  kappa: int, point) -> complex:
    """Value of L^kappa (a * psi) at one point of (x, y, xi) space."""
    pm = phase.map if hasattr(phase, "map") else phase
    am = amplitude.map if hasattr(amplitude, "map") else amplitude
    layout = pm.layout
    coords = as_coords(layout, point)
    iset = IndexSet(layout, 0, kappa)
    phase_t = pm.table(coords, IndexSet(layout, 0, kappa + 1))
    coeffs = coefficient_tables(phase_t, coords, chi, iset)
    from .jets import project_coords
    amp_t = embed_table(am.provider(project_coords(coords, am.layout),
                                    IndexSet(am.layout, 0, kappa)), am.layout, iset)
    psi_t = embed_table(testfn.provider(project_coords(coords, testfn.layout),
                                        IndexSet(testfn.layout, 0, kappa)),
                        testfn.layout, iset)
    f = t_mul(amp_t, psi_t, iset)
    out = apply_l_ladder(f, coeffs, kappa, iset)
    return complex(np.asarray(out[iset.zero]).reshape(()))


@dataclass(frozen=True)
class CoeffBoundReport:
    """Observed symbol behaviour of the regularizer coefficients."""

    constants: dict
    exponent_fits: dict
    predicted: dict
    max_misfit: float
    skipped: int
    passed: bool


def check_coefficient_symbol_bounds(phase, chi: CutoffChi,
                                    x_box=None, y_box=None, m: int = 2,
                                    radii=(4.0, 8.0, 16.0, 32.0),
                                    points_per_axis: int = 7,
                                    negligible: float = 1e-12,
                                    tol: float = 0.15) -> CoeffBoundReport:
    """Fit the xi scaling of the coefficients beyond the cutoff.

    alpha is asymptotically 0-homogeneous and beta (-1)-homogeneous in xi,
    so each xi derivative lowers the expected exponent by one; x and y
    derivatives leave it unchanged.  Series that vanish identically (for
    instance every xi derivative of alpha when n_xi = 1, where a
    0-homogeneous function is constant on each ray) satisfy their bound
    trivially and are skipped rather than fitted.
    """
    from .symbol_spaces import compact_box, _scan_points, _unit_sphere

    pm = phase.map if hasattr(phase, "map") else phase
    layout = pm.layout
    x_box = x_box if x_box is not None else compact_box(("whole", layout.n_x), 2)
    y_box = y_box if y_box is not None else compact_box(("whole", layout.n_y), 2)
    if min(radii) <= chi.outer_radius:
        raise ValueError("radii must lie beyond the outer cutoff radius")
    iset = IndexSet(layout, m, m, m)
    base = layout.n_x + layout.n_y
    series: dict = {}
    for s_val in radii:
        xi_pts = [tuple(s_val * u for u in unit) for unit in _unit_sphere(layout.n_xi)]
        scan = _scan_points(layout, x_box, y_box, xi_pts, points_per_axis)
        coords, _shape = scan
        phase_t = pm.table(coords, IndexSet(layout, m, m + 1, m + m + 1))
        ct = coefficient_tables(phase_t, coords, chi, iset)
        named = [(f"alpha_{l}", t) for l, t in enumerate(ct.alpha)]
        named += [(f"beta_{k}", t) for k, t in enumerate(ct.beta)]
        for name, table in named:
            for key in iset.keys():
                mx = float(np.max(np.abs(np.asarray(table[key]))))
                series.setdefault((name, key), []).append(mx)
    constants: dict = {}
    fits: dict = {}
    predicted: dict = {}
    skipped = 0
    misfit = 0.0
    logs = np.log(np.asarray(radii, dtype=float))
    for (name, key), vals in series.items():
        deg = 0.0 if name.startswith("alpha") else -1.0
        l = sum(key[base:])
        pred = deg - l
        arr = np.asarray(vals)
        cname = name
        constants[cname] = max(constants.get(cname, 0.0),
                               float(np.max(arr * np.asarray(radii) ** (-pred))))
        if np.max(arr) <= negligible:
            skipped += 1
            continue
        slope = float(np.polyfit(logs, np.log(arr), 1)[0])
        fits[(name, key)] = slope
        predicted[(name, key)] = pred
        misfit = max(misfit, abs(slope - pred))
    passed = misfit <= tol and all(np.isfinite(v) for v in constants.values())
    return CoeffBoundReport(constants, fits, predicted, misfit, skipped, passed)
