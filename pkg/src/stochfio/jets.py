"""Jet arithmetic for smooth maps on a product space X x Y x Xi.

Phases, amplitudes, cutoffs and test functions all enter the quadrature
pipeline through one interface: a *jet*, the dense table of partial
derivatives of a map up to a requested order at a point.  Points live in a
space with three coordinate blocks (output variables x, integration
variables y, frequency variables xi); block sizes are fixed per map by a
:class:`VarLayout`.

Tables are plain dicts keyed by flat multi-index tuples.  Values may be
scalars or numpy arrays of mutually broadcastable shapes, so the same
kernels serve the per-point public API (:class:`Jet`) and the vectorised
quadrature engine.  Exact zeros are stored as the scalar ``0.0`` and skipped
by the kernels; for sparse tables (polynomial phases) this is the main
source of speed.

Index sets may be anisotropic: the order cap on the x block can differ from
the cap on the (y, xi) blocks.  The regularising operator downstream only
differentiates in y and xi, so its operands need full order only there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product as _iproduct
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "VarLayout",
    "IndexSet",
    "MultiIndex",
    "Coords",
    "Jet",
    "SmoothMap",
    "builtin_map",
    "fd_jet",
    "jet_mul",
    "jet_div",
    "jet_linear",
]

DEFAULT_MAX_ORDER = 8


class VarLayout(NamedTuple):
    """Block sizes (n_x, n_y, n_xi) of the variable groups."""

    n_x: int
    n_y: int
    n_xi: int

    @property
    def nvars(self) -> int:
        return self.n_x + self.n_y + self.n_xi

    def block_slice(self, block: str) -> slice:
        starts = {"x": 0, "y": self.n_x, "xi": self.n_x + self.n_y}
        sizes = {"x": self.n_x, "y": self.n_y, "xi": self.n_xi}
        if block not in starts:
            raise ValueError(f"unknown block {block!r}")
        return slice(starts[block], starts[block] + sizes[block])

    def block_size(self, block: str) -> int:
        return {"x": self.n_x, "y": self.n_y, "xi": self.n_xi}[block]


class Coords(NamedTuple):
    """Per-coordinate value arrays for a (batch of) evaluation point(s)."""

    x: tuple
    y: tuple
    xi: tuple

    def flat(self) -> tuple:
        return tuple(self.x) + tuple(self.y) + tuple(self.xi)


def as_coords(layout: VarLayout, point) -> Coords:
    """Normalise a point given as (x_tuple, y_tuple, xi_tuple) of floats."""
    x, y, xi = point
    x, y, xi = (tuple(np.atleast_1d(np.asarray(b, dtype=float))) for b in (x, y, xi))
    if (len(x), len(y), len(xi)) != tuple(layout):
        raise ValueError(f"point blocks {(len(x), len(y), len(xi))} do not match layout {tuple(layout)}")
    return Coords(tuple(np.asarray(float(v)) for v in x),
                  tuple(np.asarray(float(v)) for v in y),
                  tuple(np.asarray(float(v)) for v in xi))


# ---------------------------------------------------------------------------
# index sets and cached combinatorial plans


@dataclass(frozen=True)
class IndexSet:
    """Multi-indices with capped order in the x block and in the (y, xi) blocks.

    ``cap_total`` additionally bounds the total order; it defaults to
    ``cap_x + cap_int``.  The isotropic set of all indices of total order
    <= m is ``IndexSet(layout, m, m, m)``.
    """

    layout: VarLayout
    cap_x: int
    cap_int: int
    cap_total: int | None = None

    def __post_init__(self):
        if self.cap_x < 0 or self.cap_int < 0:
            raise ValueError("order caps must be nonnegative")
        if self.cap_total is None:
            object.__setattr__(self, "cap_total", self.cap_x + self.cap_int)

    @property
    def zero(self) -> tuple:
        return (0,) * self.layout.nvars

    def keys(self) -> tuple:
        return _enum_keys(self.layout, self.cap_x, self.cap_int, self.cap_total)

    def cap_for_block(self, block: str) -> int:
        cap = self.cap_x if block == "x" else self.cap_int
        return min(cap, self.cap_total)

    def shrink_int(self, by: int = 1) -> "IndexSet":
        return IndexSet(self.layout, self.cap_x, self.cap_int - by,
                        min(self.cap_total, self.cap_x + self.cap_int - by))

    def max_total(self) -> int:
        return min(self.cap_total, self.cap_x + self.cap_int)


@lru_cache(maxsize=None)
def _enum_keys(layout: VarLayout, cap_x: int, cap_int: int, cap_total: int) -> tuple:
    nx = layout.n_x
    out = []
    for k in _iproduct(*(range(cap_total + 1) for _ in range(layout.nvars))):
        if sum(k) > cap_total:
            continue
        if sum(k[:nx]) > cap_x or sum(k[nx:]) > cap_int:
            continue
        out.append(k)
    out.sort(key=lambda k: (sum(k), k))
    return tuple(out)


def _binom_prod(nu: tuple, mu: tuple) -> int:
    c = 1
    for n, m in zip(nu, mu):
        c *= math.comb(n, m)
    return c


@lru_cache(maxsize=None)
def _mul_plan(layout, cap_x, cap_int, cap_total):
    """For each sigma in the set: tuple of (mu, sigma-mu, binomial coeff)."""
    plan = {}
    for sigma in _enum_keys(layout, cap_x, cap_int, cap_total):
        rows = []
        for mu in _iproduct(*(range(s + 1) for s in sigma)):
            nu = tuple(s - m for s, m in zip(sigma, mu))
            rows.append((mu, nu, _binom_prod(sigma, mu)))
        plan[sigma] = tuple(rows)
    return plan


@lru_cache(maxsize=None)
def _sub_splits(sigma: tuple) -> tuple:
    """All (mu, sigma-mu, C(sigma, mu)) splits of a single multi-index."""
    rows = []
    for mu in _iproduct(*(range(s + 1) for s in sigma)):
        nu = tuple(s - m for s, m in zip(sigma, mu))
        rows.append((mu, nu, _binom_prod(sigma, mu)))
    return tuple(rows)


def _plan(iset: IndexSet):
    return _mul_plan(iset.layout, iset.cap_x, iset.cap_int, iset.cap_total)


# ---------------------------------------------------------------------------
# table kernels.  A Table is dict[flat multi-index, scalar or ndarray].


def _is_zero(v) -> bool:
    return not isinstance(v, np.ndarray) and v == 0


def t_blank(iset: IndexSet) -> dict:
    return dict.fromkeys(iset.keys(), 0.0)


def t_mul(a: dict, b: dict, iset: IndexSet) -> dict:
    plan = _plan(iset)
    out = {}
    for sigma in iset.keys():
        acc = None
        for mu, nu, c in plan[sigma]:
            av = a[mu]
            if _is_zero(av):
                continue
            bv = b[nu]
            if _is_zero(bv):
                continue
            term = av * bv
            if c != 1:
                term = term * c
            acc = term if acc is None else acc + term
        out[sigma] = 0.0 if acc is None else acc
    return out


def t_div(a: dict, b: dict, iset: IndexSet) -> dict:
    b0 = b[iset.zero]
    if _is_zero(b0):
        raise ZeroDivisionError("division by zero-valued jet")
    out = {}
    for sigma in iset.keys():  # ascending total order
        acc = a[sigma]
        for mu, nu, c in _sub_splits(sigma):
            if sum(mu) == 0:
                continue
            bv = b[mu]
            if _is_zero(bv):
                continue
            hv = out[nu]
            if _is_zero(hv):
                continue
            acc = acc - c * bv * hv
        out[sigma] = acc / b0 if not _is_zero(acc) else 0.0
    return out


def _pivot(sigma: tuple) -> int:
    for i, s in enumerate(sigma):
        if s:
            return i
    raise ValueError("zero index has no pivot")


def _dec(sigma: tuple, i: int) -> tuple:
    return sigma[:i] + (sigma[i] - 1,) + sigma[i + 1:]


def _inc(sigma: tuple, i: int) -> tuple:
    return sigma[:i] + (sigma[i] + 1,) + sigma[i + 1:]


def t_pow(u: dict, p: float, iset: IndexSet) -> dict:
    """Table of u**p; u must have a nonvanishing base value."""
    out = {}
    u0 = u[iset.zero]
    for sigma in iset.keys():
        if sum(sigma) == 0:
            out[sigma] = u0 ** p
            continue
        i = _pivot(sigma)
        sp = _dec(sigma, i)
        s1 = None
        s2 = None
        for mu, nu, c in _sub_splits(sp):
            uv = u[_inc(nu, i)]
            hv = out[mu]
            if not (_is_zero(uv) or _is_zero(hv)):
                term = c * hv * uv
                s1 = term if s1 is None else s1 + term
            if sum(mu) > 0:
                uv2 = u[mu]
                hv2 = out[_inc(nu, i)]
                if not (_is_zero(uv2) or _is_zero(hv2)):
                    term = c * uv2 * hv2
                    s2 = term if s2 is None else s2 + term
        acc = 0.0
        if s1 is not None:
            acc = p * s1
        if s2 is not None:
            acc = acc - s2
        out[sigma] = acc / u0 if not _is_zero(acc) else 0.0
    return out


def t_exp(u: dict, iset: IndexSet) -> dict:
    out = {}
    for sigma in iset.keys():
        if sum(sigma) == 0:
            out[sigma] = np.exp(u[sigma])
            continue
        i = _pivot(sigma)
        sp = _dec(sigma, i)
        acc = None
        for mu, nu, c in _sub_splits(sp):
            uv = u[_inc(nu, i)]
            if _is_zero(uv):
                continue
            hv = out[mu]
            if _is_zero(hv):
                continue
            term = c * hv * uv
            acc = term if acc is None else acc + term
        out[sigma] = 0.0 if acc is None else acc
    return out


def t_compose(fderivs: Sequence, s: dict, iset: IndexSet) -> dict:
    """Table of f(s(.)) given derivatives of f at the base values of s.

    ``fderivs[k]`` holds f^(k) evaluated at s's base value (scalar or array,
    broadcastable against the table entries), for k up to the maximal total
    order of the index set.
    """
    kmax = iset.max_total()
    if len(fderivs) < kmax + 1:
        raise ValueError("not enough derivatives of the outer function")
    keys = iset.keys()
    upper = {iset.zero: fderivs[kmax]}
    for k in range(kmax - 1, -1, -1):
        cur = {}
        for sigma in keys:
            tot = sum(sigma)
            if tot > kmax - k:
                continue
            if tot == 0:
                cur[sigma] = fderivs[k]
                continue
            i = _pivot(sigma)
            sp = _dec(sigma, i)
            acc = None
            for mu, nu, c in _sub_splits(sp):
                sv = s[_inc(nu, i)]
                if _is_zero(sv):
                    continue
                gv = upper[mu]
                if _is_zero(gv):
                    continue
                term = c * gv * sv
                acc = term if acc is None else acc + term
            cur[sigma] = 0.0 if acc is None else acc
        upper = cur
    return {sigma: upper.get(sigma, 0.0) for sigma in keys}


def t_shift(a: dict, var: int, out_iset: IndexSet) -> dict:
    """Derivative in variable ``var``: entry sigma of output is a[sigma + e_var]."""
    return {sigma: a[_inc(sigma, var)] for sigma in out_iset.keys()}


def t_scale(a: dict, c) -> dict:
    return {k: (0.0 if _is_zero(v) else c * v) for k, v in a.items()}


def t_add(a: dict, b: dict, iset: IndexSet) -> dict:
    out = {}
    for k in iset.keys():
        av, bv = a[k], b[k]
        if _is_zero(av):
            out[k] = bv
        elif _is_zero(bv):
            out[k] = av
        else:
            out[k] = av + bv
    return out


def embed_table(t: dict, src_layout: VarLayout, dst_iset: IndexSet) -> dict:
    """Lift a table over a sub-layout into a larger layout.

    Source block coordinates are identified with the leading coordinates of
    each destination block.  Entries carrying derivatives in coordinates the
    source map does not depend on are exactly zero.
    """
    dl = dst_iset.layout
    if (src_layout.n_x > dl.n_x or src_layout.n_y > dl.n_y or src_layout.n_xi > dl.n_xi):
        raise ValueError("source layout does not fit inside destination layout")
    out = {}
    for k in dst_iset.keys():
        kx = k[:dl.n_x]
        ky = k[dl.n_x:dl.n_x + dl.n_y]
        kxi = k[dl.n_x + dl.n_y:]
        extra = (sum(kx[src_layout.n_x:]) + sum(ky[src_layout.n_y:])
                 + sum(kxi[src_layout.n_xi:]))
        if extra:
            out[k] = 0.0
            continue
        src_key = kx[:src_layout.n_x] + ky[:src_layout.n_y] + kxi[:src_layout.n_xi]
        out[k] = t.get(src_key, 0.0)
    return out


def project_coords(coords: Coords, src_layout: VarLayout) -> Coords:
    return Coords(tuple(coords.x[:src_layout.n_x]),
                  tuple(coords.y[:src_layout.n_y]),
                  tuple(coords.xi[:src_layout.n_xi]))


def _uni_iset(cap: int) -> IndexSet:
    return IndexSet(VarLayout(1, 0, 0), cap, 0)


# ---------------------------------------------------------------------------
# public jet objects


@dataclass(frozen=True)
class MultiIndex:
    """Derivative orders per variable group."""

    x: tuple = ()
    y: tuple = ()
    xi: tuple = ()

    @property
    def total(self) -> int:
        return sum(self.x) + sum(self.y) + sum(self.xi)

    def flat(self) -> tuple:
        return tuple(self.x) + tuple(self.y) + tuple(self.xi)

    @classmethod
    def from_flat(cls, layout: VarLayout, key: tuple) -> "MultiIndex":
        return cls(tuple(key[:layout.n_x]),
                   tuple(key[layout.n_x:layout.n_x + layout.n_y]),
                   tuple(key[layout.n_x + layout.n_y:]))


@dataclass(frozen=True)
class Jet:
    """All partial derivatives of a map at one point, up to ``order``.

    The table is dense: every multi-index of total order <= order is a key.
    """

    layout: VarLayout
    point: tuple
    order: int
    table: dict = field(repr=False)

    @property
    def value(self) -> complex:
        return self.table[(0,) * self.layout.nvars]

    def __getitem__(self, idx) -> complex:
        if isinstance(idx, MultiIndex):
            key = idx.flat()
        else:
            key = tuple(idx)
            if key and isinstance(key[0], tuple):
                key = tuple(i for block in key for i in block)
        if sum(key) > self.order:
            raise KeyError(f"multi-index {key} exceeds jet order {self.order}")
        return self.table[key]

    def multi_indices(self):
        return [MultiIndex.from_flat(self.layout, k) for k in sorted(self.table, key=lambda k: (sum(k), k))]


def _scalarize(table: dict, iset: IndexSet) -> dict:
    out = {}
    for k in iset.keys():
        v = table[k]
        out[k] = complex(np.asarray(v).reshape(()))
    return out


def _same_base(a: Jet, b: Jet) -> bool:
    return a.layout == b.layout and a.order == b.order and a.point == b.point


@dataclass(frozen=True)
class SmoothMap:
    """A smooth function of (x, y, xi) exposing exact jets.

    ``provider(coords, iset)`` returns the dense derivative table on the
    requested index set; coordinate entries of ``coords`` are scalars or
    broadcastable numpy arrays.  Providers must be pure so that maps can be
    shared across worker processes.
    """

    layout: VarLayout
    provider: Callable = field(repr=False)
    max_order: int = DEFAULT_MAX_ORDER
    describe: str = ""
    support: dict = field(default_factory=dict)

    def table(self, coords: Coords, iset: IndexSet) -> dict:
        if iset.max_total() > self.max_order:
            raise ValueError(f"requested order {iset.max_total()} exceeds max_order {self.max_order}")
        return self.provider(coords, iset)

    def jet(self, point, order: int) -> Jet:
        if order < 0:
            raise ValueError("order must be nonnegative")
        coords = as_coords(self.layout, point)
        iset = IndexSet(self.layout, order, order, order)
        table = self.table(coords, iset)
        pt = (tuple(float(v) for v in coords.x),
              tuple(float(v) for v in coords.y),
              tuple(float(v) for v in coords.xi))
        return Jet(self.layout, pt, order, _scalarize(table, iset))

    def value(self, point) -> complex:
        return self.jet(point, 0).value


def jet_mul(a: Jet, b: Jet) -> Jet:
    if not _same_base(a, b):
        raise ValueError("jet_mul requires matching base point, order and layout")
    iset = IndexSet(a.layout, a.order, a.order, a.order)
    return Jet(a.layout, a.point, a.order, t_mul(a.table, b.table, iset))


def jet_div(a: Jet, b: Jet) -> Jet:
    if not _same_base(a, b):
        raise ValueError("jet_div requires matching base point, order and layout")
    iset = IndexSet(a.layout, a.order, a.order, a.order)
    return Jet(a.layout, a.point, a.order, t_div(a.table, b.table, iset))


def jet_linear(coeffs: Sequence[complex], jets: Sequence[Jet]) -> Jet:
    if len(coeffs) != len(jets) or not jets:
        raise ValueError("need equal, nonzero numbers of coefficients and jets")
    first = jets[0]
    for j in jets[1:]:
        if not _same_base(first, j):
            raise ValueError("jet_linear requires matching base point, order and layout")
    table = dict.fromkeys(first.table, 0.0)
    for c, j in zip(coeffs, jets):
        for k in table:
            table[k] = table[k] + c * j.table[k]
    return Jet(first.layout, first.point, first.order, table)


# ---------------------------------------------------------------------------
# builtin families


def _layout_for_block(block: str) -> VarLayout:
    return {"x": VarLayout(1, 0, 0), "y": VarLayout(0, 1, 0), "xi": VarLayout(0, 0, 1)}[block]


def _univariate_map(block: str, derivs_fn, describe: str, support=None,
                    max_order: int = DEFAULT_MAX_ORDER) -> SmoothMap:
    """Map depending on a single coordinate of one block.

    ``derivs_fn(v, cap)`` returns the list of derivative values d^k/dv^k for
    k = 0..cap at the array of coordinate values v.
    """
    layout = _layout_for_block(block)

    def provider(coords: Coords, iset: IndexSet) -> dict:
        v = coords.flat()[0]
        cap = iset.cap_for_block(block)
        der = derivs_fn(np.asarray(v), cap)
        t = t_blank(iset)
        for k in range(cap + 1):
            key = (k,)
            if key in t:
                t[key] = der[k]
        return t

    sup = {block: tuple(support)} if support is not None else {}
    return SmoothMap(layout, provider, max_order, describe, sup)


def _gaussian_derivs(center: float, width: float):
    def fn(v, cap):
        u = (v - center) / width
        s = {(0,): -u * u, (1,): np.asarray(-2.0 * u / width)}
        for k in range(2, cap + 1):
            s[(k,)] = -2.0 / width ** 2 if k == 2 else 0.0
        h = t_exp(s, _uni_iset(cap))
        return [h[(k,)] for k in range(cap + 1)]
    return fn


def _mollifier_derivs(center: float, radius: float):
    # flat outside |u| < 1 - eps: values there are below 1e-18 and are
    # clamped to exact zero so the support is genuinely compact.
    eps = 0.01

    def fn(v, cap):
        v = np.asarray(v)
        u = (v - center) / radius
        inside = np.abs(u) < 1.0 - eps
        us = np.where(inside, u, 0.0)
        w = {(0,): 1.0 - us * us, (1,): np.asarray(-2.0 * us / radius)}
        for k in range(2, cap + 1):
            w[(k,)] = -2.0 / radius ** 2 if k == 2 else 0.0
        iset = _uni_iset(cap)
        inv = t_pow(w, -1.0, iset)
        arg = t_scale(inv, -1.0)
        arg[(0,)] = arg[(0,)] + 1.0
        h = t_exp(arg, iset)
        out = []
        for k in range(cap + 1):
            hv = h[(k,)]
            out.append(np.where(inside, hv, 0.0))
        return out
    return fn


def _trig_derivs(terms, offset: float):
    def fn(v, cap):
        v = np.asarray(v)
        out = []
        for k in range(cap + 1):
            acc = np.zeros(v.shape)
            for amp, freq, ph in terms:
                acc = acc + amp * freq ** k * np.cos(freq * v + ph + k * np.pi / 2.0)
            if k == 0:
                acc = acc + offset
            out.append(acc)
        return out
    return fn


def _bracket_derivs(exponent: float):
    def fn(v, cap):
        v = np.asarray(v)
        u = {(0,): 1.0 + v * v, (1,): np.asarray(2.0 * v)}
        for k in range(2, cap + 1):
            u[(k,)] = 2.0 if k == 2 else 0.0
        h = t_pow(u, exponent / 2.0, _uni_iset(cap))
        return [h[(k,)] for k in range(cap + 1)]
    return fn


def _sqrt_cos_derivs(omega: float):
    def fn(v, cap):
        v = np.asarray(v)
        iset = _uni_iset(cap)
        u = {(0,): 1.0 + v * v, (1,): np.asarray(2.0 * v)}
        for k in range(2, cap + 1):
            u[(k,)] = 2.0 if k == 2 else 0.0
        q = t_pow(u, 0.25, iset)
        ep = t_exp(t_scale(q, 1j * omega), iset)
        em = t_exp(t_scale(q, -1j * omega), iset)
        return [0.5 * (ep[(k,)] + em[(k,)]) for k in range(cap + 1)]
    return fn


def _xi_norm_table(coords: Coords, iset: IndexSet) -> dict:
    """Table of ||xi|| over the full layout of ``iset`` (xi away from 0)."""
    layout = iset.layout
    n = layout.n_xi
    if n == 0:
        raise ValueError("layout has no xi block")
    base = layout.n_x + layout.n_y
    t = t_blank(iset)
    if n == 1:
        v = np.asarray(coords.xi[0])
        key1 = iset.zero[:base] + (1,)
        t[iset.zero] = np.abs(v)
        if key1 in t:
            t[key1] = np.sign(v)
        return t
    sq = t_blank(iset)
    acc = None
    for i, v in enumerate(coords.xi):
        v = np.asarray(v)
        acc = v * v if acc is None else acc + v * v
        k1 = list(iset.zero)
        k1[base + i] = 1
        k2 = list(iset.zero)
        k2[base + i] = 2
        if tuple(k1) in sq:
            sq[tuple(k1)] = 2.0 * v
        if tuple(k2) in sq:
            sq[tuple(k2)] = 2.0
    sq[iset.zero] = acc
    return t_pow(sq, 0.5, iset)


def _xi_norm_sq_table(coords: Coords, iset: IndexSet) -> dict:
    layout = iset.layout
    base = layout.n_x + layout.n_y
    t = t_blank(iset)
    acc = None
    for i, v in enumerate(coords.xi):
        v = np.asarray(v)
        acc = v * v if acc is None else acc + v * v
        k1 = list(iset.zero)
        k1[base + i] = 1
        k2 = list(iset.zero)
        k2[base + i] = 2
        if tuple(k1) in t:
            t[tuple(k1)] = 2.0 * v
        if tuple(k2) in t:
            t[tuple(k2)] = 2.0
    t[iset.zero] = 0.0 if acc is None else acc
    return t


def _linear_phase_map(n: int) -> SmoothMap:
    layout = VarLayout(n, n, n)

    def provider(coords: Coords, iset: IndexSet) -> dict:
        t = t_blank(iset)
        val = None
        for i in range(n):
            xi_, yi, wi = (np.asarray(coords.x[i]), np.asarray(coords.y[i]), np.asarray(coords.xi[i]))
            term = (xi_ - yi) * wi
            val = term if val is None else val + term
            ex = tuple(1 if j == i else 0 for j in range(3 * n))
            ey = tuple(1 if j == n + i else 0 for j in range(3 * n))
            ew = tuple(1 if j == 2 * n + i else 0 for j in range(3 * n))
            for key, v in ((ex, wi), (ey, -wi), (ew, xi_ - yi),
                           (tuple(a + b for a, b in zip(ex, ew)), 1.0),
                           (tuple(a + b for a, b in zip(ey, ew)), -1.0)):
                if key in t:
                    t[key] = v
        t[iset.zero] = val
        return t

    return SmoothMap(layout, provider, DEFAULT_MAX_ORDER, f"<x-y, xi> on R^{n}")


def _scaled_norm_phase_map(speed, sign: int, n: int) -> SmoothMap:
    """<x - y, xi> + sign * c(x) * t * ||xi|| with time as the last x coordinate."""
    if isinstance(speed, (int, float)):
        speed = builtin_map("constant", value=float(speed), layout=VarLayout(n, 0, 0))
    if speed.layout != VarLayout(n, 0, 0):
        raise ValueError("speed must be a map of the spatial x variables only")
    layout = VarLayout(n + 1, n, n)
    lin = _linear_phase_map(n)

    def provider(coords: Coords, iset: IndexSet) -> dict:
        sp_coords = Coords(coords.x[:n], coords.y, coords.xi)
        lin_t = embed_table(lin.provider(Coords(coords.x[:n], coords.y, coords.xi),
                                         IndexSet(VarLayout(n, n, n), iset.cap_x, iset.cap_int, iset.cap_total)),
                            VarLayout(n, n, n), iset)
        # the embed above maps spatial x to the leading x coordinates; time is coordinate n
        c_t = embed_table(speed.provider(Coords(coords.x[:n], (), ()),
                                         IndexSet(VarLayout(n, 0, 0), iset.cap_x, 0, iset.cap_x)),
                          VarLayout(n, 0, 0), iset)
        tt = t_blank(iset)
        tt[iset.zero] = np.asarray(coords.x[n])
        et = tuple(1 if j == n else 0 for j in range(layout.nvars))
        if et in tt:
            tt[et] = 1.0
        nrm = _xi_norm_table(coords, iset)
        prod = t_mul(t_mul(c_t, tt, iset), nrm, iset)
        if sign < 0:
            prod = t_scale(prod, -1.0)
        return t_add(lin_t, prod, iset)

    return SmoothMap(layout, provider, DEFAULT_MAX_ORDER,
                     f"<x-y, xi> {'+' if sign > 0 else '-'} c(x) t ||xi||")


def _tabulated_phase_map(g_provider, describe: str = "xi (g(x) - y)") -> SmoothMap:
    """Phase xi * (g(x) - y) with x-jets of g supplied by a callback.

    ``g_provider(x, sgn, order)`` returns the list of d^j g / dx^j arrays for
    j = 0..order; it may depend on sign(xi) (sgn is an array broadcastable
    against x).
    """
    layout = VarLayout(1, 1, 1)

    def provider(coords: Coords, iset: IndexSet) -> dict:
        x = np.asarray(coords.x[0])
        y = np.asarray(coords.y[0])
        xi = np.asarray(coords.xi[0])
        g = g_provider(x, np.sign(xi), iset.cap_x)
        t = t_blank(iset)
        for j in range(iset.cap_x + 1):
            kj = (j, 0, 0)
            kjl = (j, 0, 1)
            gz = g[j] - y if j == 0 else g[j]
            if kj in t:
                t[kj] = xi * gz
            if kjl in t:
                t[kjl] = gz
        if (0, 1, 0) in t:
            t[(0, 1, 0)] = -xi
        if (0, 1, 1) in t:
            t[(0, 1, 1)] = -1.0
        return t

    return SmoothMap(layout, provider, DEFAULT_MAX_ORDER, describe)


def _coordinate_map(block: str, index: int = 0) -> SmoothMap:
    sizes = {"x": (index + 1, 0, 0), "y": (0, index + 1, 0), "xi": (0, 0, index + 1)}
    layout = VarLayout(*sizes[block])

    def provider(coords: Coords, iset: IndexSet) -> dict:
        t = t_blank(iset)
        t[iset.zero] = np.asarray(coords.flat()[layout.nvars - 1])
        e = (0,) * (layout.nvars - 1) + (1,)
        if e in t:
            t[e] = 1.0
        return t

    return SmoothMap(layout, provider, DEFAULT_MAX_ORDER, f"coordinate {block}[{index}]")


def _merge_layout(maps) -> VarLayout:
    return VarLayout(max(m.layout.n_x for m in maps),
                     max(m.layout.n_y for m in maps),
                     max(m.layout.n_xi for m in maps))


def _sub_iset(iset: IndexSet, layout: VarLayout) -> IndexSet:
    return IndexSet(layout, iset.cap_x if layout.n_x else 0, iset.cap_int, iset.cap_total)


def _merge_support(maps, mode: str) -> dict:
    out: dict = {}
    for block in ("x", "y", "xi"):
        intervals = [m.support[block] for m in maps if block in m.support]
        if not intervals:
            continue
        if mode == "product":
            lo = max(iv[0] for iv in intervals)
            hi = min(iv[1] for iv in intervals)
            out[block] = (lo, hi)
        else:  # sum: union only meaningful when every term is supported
            if len(intervals) == len(maps):
                out[block] = (min(iv[0] for iv in intervals), max(iv[1] for iv in intervals))
    return out


def _product_map(factors) -> SmoothMap:
    if not factors:
        raise ValueError("product needs at least one factor")
    layout = _merge_layout(factors)

    def provider(coords: Coords, iset: IndexSet) -> dict:
        acc = None
        for f in factors:
            ft = embed_table(f.provider(project_coords(coords, f.layout), _sub_iset(iset, f.layout)),
                             f.layout, iset)
            acc = ft if acc is None else t_mul(acc, ft, iset)
        return acc

    return SmoothMap(layout, provider, min(f.max_order for f in factors),
                     " * ".join(f.describe or "?" for f in factors),
                     _merge_support(factors, "product"))


def _sum_map(terms, coefficients=None) -> SmoothMap:
    if not terms:
        raise ValueError("sum needs at least one term")
    coeffs = [1.0] * len(terms) if coefficients is None else list(coefficients)
    if len(coeffs) != len(terms):
        raise ValueError("coefficients must match terms")
    layout = _merge_layout(terms)

    def provider(coords: Coords, iset: IndexSet) -> dict:
        acc = t_blank(iset)
        for c, f in zip(coeffs, terms):
            ft = embed_table(f.provider(project_coords(coords, f.layout), _sub_iset(iset, f.layout)),
                             f.layout, iset)
            if c != 1:
                ft = t_scale(ft, c)
            acc = t_add(acc, ft, iset)
        return acc

    return SmoothMap(layout, provider, min(f.max_order for f in terms),
                     " + ".join(f.describe or "?" for f in terms),
                     _merge_support(terms, "sum"))


def _scaled_map(inner: SmoothMap, factor) -> SmoothMap:
    def provider(coords: Coords, iset: IndexSet) -> dict:
        return t_scale(inner.provider(coords, iset), factor)
    return SmoothMap(inner.layout, provider, inner.max_order,
                     f"{factor} * ({inner.describe})", dict(inner.support))


_GAUSS_SUPPORT_DECADES = 6.5  # exp(-6.5^2) ~ 4.4e-19, below quadrature resolution


def builtin_map(family: str, **params) -> SmoothMap:
    """Construct one of the built-in smooth map families.

    Families: constant, linear_phase, scaled_norm_phase, tabulated_phase,
    gaussian_bump, mollifier_bump, trig_polynomial, coordinate,
    bracket_power, sqrt_cos_symbol, product, sum, scaled.
    """
    if family == "constant":
        layout = params.pop("layout", VarLayout(0, 0, 0))
        value = params.pop("value")
        _no_extra(params)
        layout = VarLayout(*layout)

        def provider(coords, iset, _v=value):
            t = t_blank(iset)
            t[iset.zero] = _v
            return t
        return SmoothMap(layout, provider, DEFAULT_MAX_ORDER, f"constant {value}")

    if family == "linear_phase":
        n = params.pop("n", 1)
        _no_extra(params)
        if n < 1:
            raise ValueError("dimension must be positive")
        return _linear_phase_map(n)

    if family == "scaled_norm_phase":
        speed = params.pop("speed")
        sign = params.pop("sign", +1)
        n = params.pop("n", 1)
        _no_extra(params)
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return _scaled_norm_phase_map(speed, sign, n)

    if family == "tabulated_phase":
        g_provider = params.pop("g_provider")
        describe = params.pop("describe", "xi (g(x) - y)")
        _no_extra(params)
        return _tabulated_phase_map(g_provider, describe)

    if family == "gaussian_bump":
        block = params.pop("block", "y")
        center = float(params.pop("center", 0.0))
        width = float(params.pop("width", 1.0))
        _no_extra(params)
        if width <= 0:
            raise ValueError("width must be positive")
        halfw = _GAUSS_SUPPORT_DECADES * width
        return _univariate_map(block, _gaussian_derivs(center, width),
                               f"exp(-(({block}-{center})/{width})^2)",
                               (center - halfw, center + halfw))

    if family == "mollifier_bump":
        block = params.pop("block", "y")
        center = float(params.pop("center", 0.0))
        radius = float(params.pop("radius", 1.0))
        _no_extra(params)
        if radius <= 0:
            raise ValueError("radius must be positive")
        return _univariate_map(block, _mollifier_derivs(center, radius),
                               f"bump at {center}, radius {radius}",
                               (center - radius, center + radius))

    if family == "trig_polynomial":
        block = params.pop("block", "x")
        terms = [tuple(map(float, t)) for t in params.pop("terms")]
        offset = float(params.pop("offset", 0.0))
        _no_extra(params)
        return _univariate_map(block, _trig_derivs(terms, offset),
                               f"trig polynomial in {block}")

    if family == "coordinate":
        block = params.pop("block")
        index = params.pop("index", 0)
        _no_extra(params)
        return _coordinate_map(block, index)

    if family == "bracket_power":
        d = float(params.pop("exponent"))
        _no_extra(params)
        return _univariate_map("xi", _bracket_derivs(d), f"<xi>^{d}")

    if family == "sqrt_cos_symbol":
        omega = float(params.pop("omega", 2.0))
        _no_extra(params)
        return _univariate_map("xi", _sqrt_cos_derivs(omega), f"cos({omega} <xi>^1/2)")

    if family == "product":
        factors = list(params.pop("factors"))
        _no_extra(params)
        return _product_map(factors)

    if family == "sum":
        terms = list(params.pop("terms"))
        coefficients = params.pop("coefficients", None)
        _no_extra(params)
        return _sum_map(terms, coefficients)

    if family == "scaled":
        inner = params.pop("inner")
        factor = params.pop("factor")
        _no_extra(params)
        return _scaled_map(inner, factor)

    raise ValueError(f"unknown family {family!r}")


def _no_extra(params: dict):
    if params:
        raise ValueError(f"unexpected parameters {sorted(params)}")


# ---------------------------------------------------------------------------
# finite-difference oracle

_FD_STENCILS = {
    0: ((0, 1.0),),
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
    4: ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)),
}


def fd_jet(f: SmoothMap, point, order: int, step: float = 1e-3) -> Jet:
    """Central finite-difference jet, O(step^2) accurate.  Validation only.

    The xi block of the point must stay clear of the origin so that no
    stencil point crosses it.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if order > 4:
        raise ValueError("finite differences are limited to order 4")
    coords = as_coords(f.layout, point)
    vals = [float(v) for v in coords.flat()]
    nxi = f.layout.n_xi
    if nxi:
        xinorm = math.sqrt(sum(float(v) ** 2 for v in coords.xi))
        if xinorm <= 2.0 * step * max(order, 1):
            raise ValueError("stencil would reach across xi = 0; decrease step or move the point")
    iset = IndexSet(f.layout, order, order, order)
    table = {}
    for key in iset.keys():
        acc = 0.0
        for combo in _iproduct(*(_FD_STENCILS[k] for k in key)):
            shift = [vals[i] + combo[i][0] * step for i in range(len(vals))]
            w = 1.0
            for off, c in combo:
                w *= c
            pt = (tuple(shift[:f.layout.n_x]),
                  tuple(shift[f.layout.n_x:f.layout.n_x + f.layout.n_y]),
                  tuple(shift[f.layout.n_x + f.layout.n_y:]))
            acc = acc + w * f.value(pt)
        table[key] = acc / step ** sum(key)
    pt = (tuple(vals[:f.layout.n_x]),
          tuple(vals[f.layout.n_x:f.layout.n_x + f.layout.n_y]),
          tuple(vals[f.layout.n_x + f.layout.n_y:]))
    return Jet(f.layout, pt, order, table)
