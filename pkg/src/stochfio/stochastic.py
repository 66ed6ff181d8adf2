"""Random speed models, expected operators and streaming Monte Carlo.

Two randomness models are supported.  A scalar gaussian speed c = c0 + s W
keeps the phase gaussian, so the expected operator is again a Fourier
integral operator: E exp(i Phi) = exp(i Phi_mean - var(Phi)/2) folds the
randomness into a deterministic amplitude damping exp(-s^2 t^2 xi^2 / 2).
A random field speed c(x) = c0 + sum sigma_j tanh(Z_j) cos(k_j x + th_j)
stays uniformly positive because |tanh| < 1, giving hyperbolicity for
every draw.

Monte Carlo accumulates complex moments in one streaming pass (Welford
updates, Chan merging), with per-replicate seeds spawned deterministically
from one base seed so results are reproducible and mergeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .jets import SmoothMap, VarLayout, builtin_map
from .oscillatory import FioOperator, GridField, QuadratureConfig, apply
from .regularizer import CutoffChi, select_kappa
from .symbol_spaces import Amplitude, PhaseFunction

__all__ = [
    "RandomFieldModel",
    "sample_field",
    "TruncatedSpeedModel",
    "sample_speeds",
    "MCStats",
    "mc_estimate",
    "expected_wave_field",
    "expected_wave_analytic",
    "mc_wave_estimate",
    "map_values",
]


def map_values(m: SmoothMap, arr, block: str = "y") -> np.ndarray:
    """Values of a single-block map on an array of coordinates."""
    from .jets import Coords, IndexSet
    arr = np.asarray(arr, dtype=float)
    blocks = {"x": (arr,), "y": (arr,), "xi": (arr,)}
    coords = Coords(blocks["x"] if block == "x" else (),
                    blocks["y"] if block == "y" else (),
                    blocks["xi"] if block == "xi" else ())
    iset = IndexSet(m.layout, 0, 0)
    return np.broadcast_to(np.asarray(m.provider(coords, iset)[iset.zero]), arr.shape)


@dataclass(frozen=True)
class RandomFieldModel:
    """Speed field c0 + sum sigma_j tanh(Z_j) cos(k_j x + theta_j).

    The amplitude budget sum sigma_j must leave a floor: c0 - sum sigma_j
    >= alpha_floor > 0, so every realization is a uniformly positive speed.
    """

    c0: float
    amplitudes: tuple
    wavenumbers: tuple
    phases: tuple
    alpha_floor: float = 0.25

    def __post_init__(self):
        amps = tuple(float(a) for a in self.amplitudes)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "wavenumbers", tuple(float(k) for k in self.wavenumbers))
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        if not (len(amps) == len(self.wavenumbers) == len(self.phases)):
            raise ValueError("amplitudes, wavenumbers and phases must align")
        if any(a < 0 for a in amps):
            raise ValueError("amplitudes must be nonnegative")
        if self.c0 - sum(amps) < self.alpha_floor:
            raise ValueError(
                f"amplitude budget {sum(amps)} exceeds c0 - alpha_floor = "
                f"{self.c0 - self.alpha_floor}; field would lose hyperbolicity")

    @property
    def n_modes(self) -> int:
        return len(self.amplitudes)


def _rng(base_seed: int, index: int | None = None) -> np.random.Generator:
    if index is None:
        ss = np.random.SeedSequence(entropy=base_seed)
    else:
        ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(ss))


def sample_field(model: RandomFieldModel, seed_or_rng) -> SmoothMap:
    """One realization of the field as a smooth speed map."""
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) \
        else _rng(int(seed_or_rng))
    z = rng.standard_normal(model.n_modes)
    terms = [(a * math.tanh(zj), k, th) for a, k, th, zj
             in zip(model.amplitudes, model.wavenumbers, model.phases, z)]
    from .applications import make_speed
    return make_speed("trig_field", offset=model.c0, terms=terms)


@dataclass(frozen=True)
class TruncatedSpeedModel:
    """Scalar speed c0 + s W with W standard normal truncated to keep c >= alpha."""

    c0: float
    s: float
    alpha: float = 0.25

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("s must be nonnegative")
        if self.c0 <= self.alpha:
            raise ValueError("c0 must exceed the hyperbolicity floor alpha")

    @property
    def bound(self) -> float:
        # s = 0 is the deterministic limit: W is pinned to 0.
        if self.s == 0:
            return 0.0
        return (self.c0 - self.alpha) / self.s

    @property
    def truncation_mass(self) -> float:
        """Probability mass removed by the truncation (the sampling bias scale)."""
        if self.s == 0:
            return 0.0
        return float(2.0 * ndtr(-self.bound))


def sample_speeds(model: TruncatedSpeedModel, rng: np.random.Generator,
                  n: int) -> np.ndarray:
    """Inverse-CDF draws of the truncated speed, c in [alpha, 2 c0 - alpha]."""
    b = model.bound
    lo, hi = ndtr(-b), ndtr(b)
    u = rng.random(n)
    w = ndtri(lo + u * (hi - lo))
    return model.c0 + model.s * w


@dataclass
class MCStats:
    """Streaming complex moments: count, mean, sum of |delta|^2 and, for the
    selected flat-index ``pairs`` (p, q), the co-moment
    sum of conj(x_p - mean_p) (x_q - mean_q)."""

    n: int
    mean: np.ndarray
    m2: np.ndarray
    failures: tuple = ()
    pairs: tuple = ()
    comoment: np.ndarray | None = None

    @staticmethod
    def empty(shape, pairs=()) -> "MCStats":
        pairs = tuple((int(p), int(q)) for p, q in pairs)
        co = np.zeros(len(pairs), dtype=complex) if pairs else None
        return MCStats(0, np.zeros(shape, dtype=complex), np.zeros(shape),
                       pairs=pairs, comoment=co)

    def _pair_indices(self):
        idx = np.asarray(self.pairs, dtype=int).reshape(len(self.pairs), 2)
        return idx[:, 0], idx[:, 1]

    def push(self, value: np.ndarray) -> None:
        self.n += 1
        delta = value - self.mean
        self.mean = self.mean + delta / self.n
        self.m2 = self.m2 + np.real(np.conj(delta) * (value - self.mean))
        if self.pairs:
            p, q = self._pair_indices()
            resid = np.ravel(value - self.mean)
            self.comoment = self.comoment + np.conj(np.ravel(delta)[p]) * resid[q]

    @property
    def variance(self) -> np.ndarray:
        if self.n < 2:
            return np.full_like(self.m2, np.nan)
        return self.m2 / (self.n - 1)

    @property
    def std_error(self) -> np.ndarray:
        return np.sqrt(self.variance / self.n)

    @property
    def autocovariance(self) -> np.ndarray:
        """Sample autocovariance for each selected pair, conj on the first slot."""
        if self.comoment is None:
            return np.zeros(0, dtype=complex)
        if self.n < 2:
            return np.full(len(self.pairs), np.nan, dtype=complex)
        return self.comoment / (self.n - 1)

    @staticmethod
    def merge(a: "MCStats", b: "MCStats") -> "MCStats":
        if a.pairs != b.pairs:
            raise ValueError("cannot merge stats with different autocovariance pairs")
        failures = a.failures + b.failures
        if a.n == 0 or b.n == 0:
            src = b if a.n == 0 else a
            co = None if src.comoment is None else src.comoment.copy()
            return MCStats(src.n, src.mean.copy(), src.m2.copy(), failures,
                           src.pairs, co)
        n = a.n + b.n
        delta = b.mean - a.mean
        mean = a.mean + delta * (b.n / n)
        m2 = a.m2 + b.m2 + np.real(np.conj(delta) * delta) * (a.n * b.n / n)
        co = None
        if a.pairs:
            p, q = a._pair_indices()
            flat = np.ravel(delta)
            co = a.comoment + b.comoment + np.conj(flat[p]) * flat[q] * (a.n * b.n / n)
        return MCStats(n, mean, m2, failures, a.pairs, co)


def mc_estimate(sampler, n_samples: int, base_seed: int, shape=None,
                pairs=()) -> MCStats:
    """Stream ``sampler(rng) -> complex array`` over spawned replicate seeds.

    Replicate i draws from SeedSequence(base_seed, spawn_key=(i,)), so any
    subset of replicates is reproducible independently of the others.
    Failed replicates are recorded (index and message) and skipped.
    ``pairs`` are flat-index pairs to track autocovariance for.
    """
    stats = None
    failures = []
    for i in range(n_samples):
        rng = _rng(base_seed, i)
        try:
            v = np.asarray(sampler(rng), dtype=complex)
        except Exception as e:  # noqa: BLE001 - replicate isolation is the point
            failures.append((i, f"{type(e).__name__}: {e}"))
            continue
        if stats is None:
            stats = MCStats.empty(v.shape, pairs)
        stats.push(v)
    if stats is None:
        stats = MCStats.empty(shape if shape is not None else (), pairs)
    stats.failures = tuple(failures)
    return stats


# ---------------------------------------------------------------------------
# gaussian-speed wave: expected operator and Monte Carlo


def _damping_amplitude(s: float, t: float, value: float = 0.5) -> Amplitude:
    """Amplitude value * exp(-s^2 t^2 xi^2 / 2) for the expected operator."""
    st = abs(s * t)
    if st == 0:
        return Amplitude(builtin_map("constant", value=value, layout=VarLayout(2, 1, 1)))
    width = math.sqrt(2.0) / st
    gauss = builtin_map("gaussian_bump", block="xi", center=0.0, width=width)
    return Amplitude(builtin_map("scaled", inner=gauss, factor=value))


def expected_wave_field(model: TruncatedSpeedModel, u0: SmoothMap, t: float,
                        x_points, config: QuadratureConfig | None = None,
                        workers: int | None = None) -> GridField:
    """E[u_omega(x, t)] as a single deterministic operator application.

    For gaussian W the phase average E exp(+- i s W t |xi|) equals
    exp(-s^2 t^2 xi^2 / 2), so the expected field is the mean-speed wave
    operator with a gaussian-damped amplitude on each branch.  The
    truncation of W changes this by at most ``model.truncation_mass``
    relative mass, reported in the metadata.
    """
    xs = np.atleast_1d(np.asarray(x_points, dtype=float))
    cols = (xs, np.full(xs.size, float(t)))
    total = None
    for sign in (+1, -1):
        phase = builtin_map("scaled_norm_phase", speed=model.c0, sign=sign, n=1)
        amp = _damping_amplitude(model.s, t)
        plan = select_kappa(0.0, 1.0, 0.0, 1)
        op = FioOperator(PhaseFunction(phase), amp, CutoffChi(), plan,
                         config or QuadratureConfig())
        out = apply(op, u0, cols, workers=workers)
        total = out.value if total is None else total + out.value
    meta = {"truncation_mass": model.truncation_mass, "t": t,
            "c0": model.c0, "s": model.s}
    return GridField((xs,), {(0,): total}, meta)


def expected_wave_analytic(model: TruncatedSpeedModel, t: float, x_points,
                           u0_center: float = 0.0, u0_width: float = 1.0) -> np.ndarray:
    """Closed-form E[u] for gaussian initial data exp(-((y-c)/w)^2).

    Averaging the translated gaussian over the (untruncated) normal speed
    is a gaussian convolution: each branch widens by 2 s^2 t^2 w^-2 in the
    exponent scale.
    """
    xs = np.atleast_1d(np.asarray(x_points, dtype=float))
    w2 = u0_width ** 2
    k = 1.0 + 2.0 * model.s ** 2 * t ** 2 / w2
    out = np.zeros_like(xs)
    for sign in (+1, -1):
        z = xs - sign * model.c0 * t - u0_center
        out += 0.5 / math.sqrt(k) * np.exp(-z ** 2 / (w2 * k))
    return out


@dataclass(frozen=True)
class MCWaveResult:
    stats: MCStats
    model: TruncatedSpeedModel
    t: float
    points: np.ndarray
    engine: str

    @property
    def mean(self) -> np.ndarray:
        return self.stats.mean

    @property
    def std_error(self) -> np.ndarray:
        return self.stats.std_error


def mc_wave_estimate(model: TruncatedSpeedModel, u0: SmoothMap, t: float,
                     x_points, n_samples: int, base_seed: int,
                     engine: str = "translation",
                     config: QuadratureConfig | None = None,
                     autocov_pairs=()) -> MCWaveResult:
    """Monte Carlo mean of the random constant-speed wave field.

    ``engine="translation"`` evaluates each replicate by the exact
    d'Alembert translation u = (u0(x - ct) + u0(x + ct)) / 2, the same
    identity the quadrature engine reproduces for constant speeds;
    ``engine="fio"`` runs every replicate through the full operator
    quadrature (slow, used to cross-check the fast path).
    ``autocov_pairs`` are grid-index pairs (p, q) whose sample
    autocovariance is tracked alongside the pointwise moments.
    """
    xs = np.atleast_1d(np.asarray(x_points, dtype=float))

    if engine == "translation":
        def sampler(rng):
            c = float(sample_speeds(model, rng, 1)[0])
            return 0.5 * (map_values(u0, xs - c * t) + map_values(u0, xs + c * t))
    elif engine == "fio":
        from .applications import wave_solve

        def sampler(rng):
            c = float(sample_speeds(model, rng, 1)[0])
            return wave_solve(c, u0, t, xs, config=config).value
    else:
        raise ValueError("engine must be 'translation' or 'fio'")

    stats = mc_estimate(sampler, n_samples, base_seed, shape=xs.shape,
                        pairs=autocov_pairs)
    return MCWaveResult(stats, model, t, xs, engine)
