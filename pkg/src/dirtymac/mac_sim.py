"""Sample-level Monte Carlo of the lattice transmission schemes.

One batch of ``n`` samples is one n-dimensional codeword over the product of
scalar lattices. Every random role (messages, dithers, interference, estimation
errors, noise) draws from its own substream of the master seed, in fixed-size
blocks, so any array can be regenerated in isolation and results do not depend
on how blocks are distributed across workers.

Presets
-------
T1-Case1   user 1 helps user 2, needs P1 >= P2((P2+res)/P2)^2
T1-Case2   user 1 helps user 2, needs P2 >= P1((P1+res)/P1)^2
T1-Case3   user 2 helps user 1 (mirror of T1-Case2), needs P1 >= P2((P2+res)/P2)^2
T1-Case4   user 2 helps user 1 (mirror of T1-Case1), needs P2 >= P1((P1+res)/P1)^2
T2-Balanced  both users active, P1 == P2
T3-Case1   user 1 active, user 2 aligns; base lattice is user 2's
T3-Case2   user 1 active, user 2 aligns; base lattice is user 1's
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy import stats

from . import kernels
from .lattice_core import (ScalarLattice, is_scaled_copy, lattice_for_power, mod_lattice,
                           sample_dither, shaping_penalty_bits)
from .rate_regions import (ChannelParams, Regime, classify_regime, corner_condition_user1_helps,
                           corner_condition_user2_helps, is_balanced, mmse_alpha)

PRESETS = ("T1-Case1", "T1-Case2", "T1-Case3", "T1-Case4", "T2-Balanced", "T3-Case1", "T3-Case2")
CORNER_PRESETS = ("T1-Case1", "T1-Case2", "T1-Case3", "T1-Case4")
_MIRRORS = {"T1-Case3": "T1-Case2", "T1-Case4": "T1-Case1"}

ROLES = ("message1", "message2", "dither1", "dither2", "s1", "s2", "w1", "w2", "z")
BLOCK = 1 << 17
CHI2_BINS = 32
POWER_SLACK = 0.02


class PresetError(ValueError):
    """Channel parameters violate a preset's regime or power precondition."""


@dataclass(frozen=True)
class SchemeConfig:
    preset_id: str
    alpha1: float
    alpha2: float
    alpha_r: float
    k1: float
    k2: float
    kr: float
    beta: float
    gamma: float
    lattice1: ScalarLattice
    lattice2: ScalarLattice
    lattice_r: ScalarLattice
    v1_active: bool
    v2_active: bool
    d1_zero: bool = False
    d2_zero: bool = False

    @property
    def info_user(self) -> int | None:
        """The single information-carrying user, or None when both are active."""
        if self.v1_active and self.v2_active:
            return None
        return 1 if self.v1_active else 2

    def swapped(self, preset_id=None) -> "SchemeConfig":
        return SchemeConfig(
            preset_id=preset_id or self.preset_id,
            alpha1=self.alpha2, alpha2=self.alpha1, alpha_r=self.alpha_r,
            k1=self.k2, k2=self.k1, kr=self.kr,
            beta=self.gamma, gamma=self.beta,
            lattice1=self.lattice2, lattice2=self.lattice1, lattice_r=self.lattice_r,
            v1_active=self.v2_active, v2_active=self.v1_active,
            d1_zero=self.d2_zero, d2_zero=self.d1_zero,
        )

    def to_dict(self):
        d = asdict(self)
        for name in ("lattice1", "lattice2", "lattice_r"):
            d[name] = d[name]["step"]
        return d


# ---------------------------------------------------------------------------
# presets

def _t1_case1(params, alpha):
    a2 = mmse_alpha("ImbalancedUser2", params) if alpha is None else alpha
    if alpha is None and not corner_condition_user1_helps(params):
        raise PresetError("T1-Case1 needs P1 >= P2((P2+N+E1+E2)/P2)^2")
    # user 2 spends exactly P2; the helper lattice follows from the nesting
    base = lattice_for_power(params.p2 / (a2 * a2))
    fine = base.scaled(a2)
    return SchemeConfig("T1-Case1", alpha1=1.0, alpha2=a2, alpha_r=a2, k1=1.0, k2=a2, kr=a2,
                        beta=1.0, gamma=a2, lattice1=base, lattice2=fine, lattice_r=fine,
                        v1_active=False, v2_active=True)


def _t1_case2(params, alpha):
    a1 = mmse_alpha("ImbalancedUser1", params) if alpha is None else alpha
    if alpha is None and not corner_condition_user2_helps(params):
        raise PresetError("T1-Case2 needs P2 >= P1((P1+N+E1+E2)/P1)^2")
    base = lattice_for_power(params.p1 / (a1 * a1))
    fine = base.scaled(a1)
    return SchemeConfig("T1-Case2", alpha1=a1, alpha2=1.0, alpha_r=a1, k1=a1, k2=1.0, kr=a1,
                        beta=0.0, gamma=1.0, lattice1=fine, lattice2=base, lattice_r=fine,
                        v1_active=False, v2_active=True, d2_zero=True)


def _t2(params, alpha):
    if not is_balanced(params.p1, params.p2):
        raise PresetError("T2-Balanced needs P1 == P2")
    p = min(params.p1, params.p2)
    a = mmse_alpha("Balanced", params) if alpha is None else alpha
    lat = lattice_for_power(p)
    return SchemeConfig("T2-Balanced", alpha1=a, alpha2=a, alpha_r=a, k1=1.0, k2=1.0, kr=1.0,
                        beta=1.0, gamma=1.0, lattice1=lat, lattice2=lat, lattice_r=lat,
                        v1_active=True, v2_active=True)


def _t3_check(params):
    if classify_regime(params) is Regime.IMBALANCED:
        raise PresetError("T3 presets need E1+E2+N >= sqrt(P1 P2) - min(P1, P2)")
    p1, p2, r = params.p1, params.p2, params.residual
    first = p1 <= p2 <= p1 * ((p1 + r) / r) ** 2
    second = p2 <= p1 <= p2 * ((p2 + r) / r) ** 2
    if not (first or second):
        raise PresetError("T3 presets need P1 <= P2 <= P1((P1+N+E1+E2)/(N+E1+E2))^2 "
                          "or P2 <= P1 <= P2((P2+N+E1+E2)/(N+E1+E2))^2")


def _t3_alphas(params, alpha):
    a1 = mmse_alpha("GeneralNearly", params) if alpha is None else alpha
    return a1, a1 / math.sqrt(params.p1 / params.p2)


def _t3_case1(params, alpha):
    if alpha is None:
        _t3_check(params)
    a1, a2 = _t3_alphas(params, alpha)
    ratio = a1 / a2
    base = lattice_for_power(params.p2)
    coarse = base.scaled(ratio)
    return SchemeConfig("T3-Case1", alpha1=a1, alpha2=a2, alpha_r=a1, k1=ratio, k2=1.0, kr=ratio,
                        beta=ratio, gamma=1.0, lattice1=coarse, lattice2=base, lattice_r=coarse,
                        v1_active=True, v2_active=False)


def _t3_case2(params, alpha):
    if alpha is None:
        _t3_check(params)
    a1, a2 = _t3_alphas(params, alpha)
    ratio = a2 / a1
    base = lattice_for_power(params.p1)
    other = base.scaled(ratio)
    return SchemeConfig("T3-Case2", alpha1=a1, alpha2=a2, alpha_r=a2, k1=1.0, k2=ratio, kr=ratio,
                        beta=1.0, gamma=ratio, lattice1=base, lattice2=other, lattice_r=other,
                        v1_active=True, v2_active=False)


_BUILDERS = {"T1-Case1": _t1_case1, "T1-Case2": _t1_case2, "T2-Balanced": _t2,
             "T3-Case1": _t3_case1, "T3-Case2": _t3_case2}


def _check_preset_id(preset_id):
    if preset_id not in PRESETS:
        raise ValueError(f"unknown preset {preset_id!r}; expected one of {PRESETS}")


def build_preset(preset_id: str, params: ChannelParams, alpha: float | None = None) -> SchemeConfig:
    """Scheme configuration for a preset at its MMSE-optimal scaling.

    ``alpha`` overrides the preset's primary scaling factor (see
    :func:`primary_alpha`) while keeping the decoder lattice's second moment and
    all nesting relations; preconditions are not checked in that mode.
    """
    _check_preset_id(preset_id)
    if preset_id in _MIRRORS:
        base_id = _MIRRORS[preset_id]
        try:
            cfg = _BUILDERS[base_id](params.swapped(), alpha)
        except PresetError as exc:
            raise PresetError(str(exc).replace(base_id, preset_id)
                              .replace("P1", "P#").replace("P2", "P1").replace("P#", "P2")) from None
        cfg = cfg.swapped(preset_id)
    else:
        cfg = _BUILDERS[preset_id](params, alpha)
    if alpha is None:
        problems = validate_config(cfg, params)
        if problems:
            raise PresetError("; ".join(problems))
    return cfg


def primary_alpha(cfg: SchemeConfig) -> float:
    """The MMSE-tuned scaling factor of a preset (the one ``build_preset(alpha=...)`` sets)."""
    base = _base_preset(cfg.preset_id)
    c = cfg if base == cfg.preset_id else cfg.swapped()
    return c.alpha2 if base == "T1-Case1" else c.alpha1


def validate_config(cfg: SchemeConfig, params: ChannelParams) -> list[str]:
    """Invariant violations of a configuration (empty list when consistent)."""
    problems = []
    for name in ("alpha1", "alpha2", "alpha_r"):
        a = getattr(cfg, name)
        if not 0.0 <= a <= 1.0:
            problems.append(f"{name}={a:.6g} outside [0, 1]")
    base = _base_preset(cfg.preset_id)
    c = cfg if base == cfg.preset_id else cfg.swapped()
    nest = {
        "T1-Case1": (c.lattice1, c.lattice2, c.alpha2),
        "T1-Case2": (c.lattice2, c.lattice1, c.alpha1),
        "T2-Balanced": (c.lattice1, c.lattice2, 1.0),
        "T3-Case1": (c.lattice2, c.lattice1, c.alpha1 / c.alpha2),
        "T3-Case2": (c.lattice1, c.lattice2, c.alpha2 / c.alpha1),
    }[base]
    if not is_scaled_copy(*nest, rtol=1e-9):
        problems.append("lattice nesting broken")
    for i, (lat, p) in enumerate(((cfg.lattice1, params.p1), (cfg.lattice2, params.p2)), start=1):
        if lat.second_moment > p * (1 + 1e-9):
            problems.append(f"sigma{i}^2={lat.second_moment:.6g} exceeds P{i}={p:.6g}")
    return problems


def break_nesting(cfg: SchemeConfig, factor: float = 1.01) -> SchemeConfig:
    """Negative control: rescale user 2's encoder lattice only."""
    return replace(cfg, lattice2=cfg.lattice2.scaled(factor))


def _base_preset(preset_id):
    return _MIRRORS.get(preset_id, preset_id)


# ---------------------------------------------------------------------------
# signals

@dataclass
class SignalBatch:
    n: int
    seed: int
    v1: np.ndarray
    v2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    s1_est: np.ndarray
    s2_est: np.ndarray
    z: np.ndarray
    x1: np.ndarray | None = None
    x2: np.ndarray | None = None
    y: np.ndarray | None = None
    y_prime: np.ndarray | None = None

    def swapped(self) -> "SignalBatch":
        return SignalBatch(self.n, self.seed, self.v2, self.v1, self.d2, self.d1, self.s2, self.s1,
                           self.s2_est, self.s1_est, self.z, self.x2, self.x1, self.y, self.y_prime)

    def replace(self, **changes) -> "SignalBatch":
        return replace(self, **changes)

    def arrays(self):
        return {f.name: getattr(self, f.name) for f in fields(self)
                if isinstance(getattr(self, f.name), np.ndarray)}


def substream(seed: int, role: str, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(ROLES.index(role), block)))


def role_stream(seed: int, role: str, n: int, draw, workers: int = 1) -> np.ndarray:
    """Concatenate ``draw(rng, size)`` over fixed-size blocks of one role's substream."""
    sizes = [min(BLOCK, n - start) for start in range(0, n, BLOCK)]

    def one(b):
        return draw(substream(seed, role, b), sizes[b])

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    else:
        parts = [one(b) for b in range(len(sizes))]
    return np.concatenate(parts) if parts else np.empty(0)


def _gauss(scale):
    return lambda rng, k: scale * rng.standard_normal(k)


def generate_batch(cfg: SchemeConfig, params: ChannelParams, n: int, seed: int,
                   workers: int = 1) -> SignalBatch:
    if n < 1:
        raise ValueError("n must be positive")

    def cell(lat):
        return lambda rng, k: sample_dither(lat, rng, k)

    zeros = np.zeros(n)
    v1 = role_stream(seed, "message1", n, cell(cfg.lattice1), workers) if cfg.v1_active else zeros
    v2 = role_stream(seed, "message2", n, cell(cfg.lattice2), workers) if cfg.v2_active else zeros
    d1 = zeros if cfg.d1_zero else role_stream(seed, "dither1", n, cell(cfg.lattice1), workers)
    d2 = zeros if cfg.d2_zero else role_stream(seed, "dither2", n, cell(cfg.lattice2), workers)
    q = math.sqrt(params.interference_power)
    s1 = role_stream(seed, "s1", n, _gauss(q), workers)
    s2 = role_stream(seed, "s2", n, _gauss(q), workers)
    s1_est = s1 + role_stream(seed, "w1", n, _gauss(math.sqrt(params.e1)), workers)
    s2_est = s2 + role_stream(seed, "w2", n, _gauss(math.sqrt(params.e2)), workers)
    z = role_stream(seed, "z", n, _gauss(math.sqrt(params.noise)), workers)
    return SignalBatch(n, seed, v1, v2, d1, d2, s1, s2, s1_est, s2_est, z)


def encode(cfg: SchemeConfig, batch: SignalBatch) -> SignalBatch:
    x1 = kernels.encode(batch.v1, batch.s1_est, batch.d1, cfg.alpha1, cfg.lattice1.step)
    x2 = kernels.encode(batch.v2, batch.s2_est, batch.d2, cfg.alpha2, cfg.lattice2.step)
    return batch.replace(x1=x1, x2=x2)


def apply_channel(batch: SignalBatch) -> SignalBatch:
    return batch.replace(y=batch.x1 + batch.x2 + batch.s1 + batch.s2 + batch.z)


def decode_frontend(cfg: SchemeConfig, batch: SignalBatch) -> SignalBatch:
    y_prime = kernels.decode(batch.y, batch.d1, batch.d2, cfg.alpha_r, cfg.gamma, cfg.beta,
                             cfg.lattice_r.step)
    return batch.replace(y_prime=y_prime)


def run_pipeline(cfg: SchemeConfig, batch: SignalBatch) -> SignalBatch:
    return decode_frontend(cfg, apply_channel(encode(cfg, batch)))


# ---------------------------------------------------------------------------
# equivalent channel and effective noise

def _terms(cfg: SchemeConfig, b: SignalBatch):
    """Signal, effective noise, closed-form lattice part of the noise power, and
    the gain on Z and the estimation errors, all in the decoder's coordinates."""
    base = _base_preset(cfg.preset_id)
    if base != cfg.preset_id:
        return _terms(cfg.swapped(base), b.swapped())
    e1 = b.s1 - b.s1_est
    e2 = b.s2 - b.s2_est
    sig1, sig2 = cfg.lattice1.second_moment, cfg.lattice2.second_moment
    if base == "T1-Case1":
        a = cfg.alpha2
        noise = -(1 - a) * b.x2 + a * e1 + a * e2 + a * b.z
        return b.v2, noise, (1 - a) ** 2 * sig2, a
    if base == "T1-Case2":
        a = cfg.alpha1
        noise = -(1 - a) * b.x1 + a * e1 + a * e2 + a * b.z
        return a * b.v2, noise, (1 - a) ** 2 * sig1, a
    if base == "T2-Balanced":
        a = cfg.alpha1
        noise = -(1 - a) * b.x1 - (1 - a) * b.x2 + a * e1 + a * e2 + a * b.z
        return b.v1 + b.v2, noise, (1 - a) ** 2 * (sig1 + sig2), a
    if base == "T3-Case1":
        a1, a2 = cfg.alpha1, cfg.alpha2
        r = a1 / a2
        noise = -(1 - a1) * b.x1 - r * (1 - a2) * b.x2 + a1 * b.z + a1 * e1 + a1 * e2
        return b.v1, noise, (1 - a1) ** 2 * sig1 + r * r * (1 - a2) ** 2 * sig2, a1
    if base == "T3-Case2":
        a1, a2 = cfg.alpha1, cfg.alpha2
        r = a2 / a1
        noise = -r * (1 - a1) * b.x1 - (1 - a2) * b.x2 + a2 * b.z + a2 * e1 + a2 * e2
        return r * b.v1, noise, r * r * (1 - a1) ** 2 * sig1 + (1 - a2) ** 2 * sig2, a2
    raise ValueError(f"unknown preset {cfg.preset_id!r}")


def equivalent_channel(cfg: SchemeConfig, batch: SignalBatch) -> np.ndarray:
    """Decoder output predicted by the simplified (post-cancellation) channel."""
    _check_preset_id(cfg.preset_id)
    signal, noise, _, _ = _terms(cfg, batch)
    return mod_lattice(cfg.lattice_r, signal + noise)


def equivalence_residual(cfg: SchemeConfig, batch: SignalBatch) -> float:
    """Largest per-dimension distance, on the decoder's torus, between Y' and its prediction."""
    diff = mod_lattice(cfg.lattice_r, batch.y_prime - equivalent_channel(cfg, batch))
    return float(np.max(np.abs(diff)))


@dataclass(frozen=True)
class NoiseMeasurement:
    measured: float
    analytic: float
    stderr: float
    signal_power: float

    @property
    def empirical_sinr(self):
        return self.signal_power / self.measured

    @property
    def analytic_sinr(self):
        return self.signal_power / self.analytic

    @property
    def relative_error(self):
        return abs(self.measured - self.analytic) / self.analytic


def effective_noise_power(cfg: SchemeConfig, batch: SignalBatch, params: ChannelParams | None = None
                          ) -> NoiseMeasurement:
    """Second moment of the pre-modulo effective noise, measured and in closed form.

    ``params`` supplies the distortions and noise for the closed form; when it
    is omitted they are not known and the residual term uses the batch's own
    sample variances.
    """
    _, noise, lattice_part, a = _terms(cfg, batch)
    sq = noise * noise
    measured = float(np.mean(sq))
    stderr = float(np.std(sq) / math.sqrt(batch.n))
    if params is None:
        res = float(np.var(batch.s1 - batch.s1_est) + np.var(batch.s2 - batch.s2_est) + np.var(batch.z))
    else:
        res = params.residual
    analytic = lattice_part + a * a * res
    return NoiseMeasurement(measured, analytic, stderr, cfg.lattice_r.second_moment)


# ---------------------------------------------------------------------------
# statistics

def chi2_uniform_pvalue(x: np.ndarray, lattice: ScalarLattice, bins: int = CHI2_BINS) -> float:
    """Chi-square test that ``x`` is uniform over the fundamental cell of ``lattice``."""
    h = lattice.step / 2
    counts, _ = np.histogram(x, bins=bins, range=(-h, h))
    return float(stats.chisquare(counts).pvalue)


def abs_correlation(a: np.ndarray, b: np.ndarray) -> float:
    if np.std(a) == 0 or np.std(b) == 0:
        return 0.0
    return float(abs(np.corrcoef(a, b)[0, 1]))


@dataclass
class SimReport:
    preset_id: str
    n: int
    seed: int
    backend: str
    measured_effective_noise_power: float
    analytic_effective_noise_power: float
    effective_noise_stderr: float
    equivalence_max_residual: float
    equivalence_relative_residual: float
    empirical_sinr: float
    analytic_sinr: float
    scalar_rate_bound: float
    analytic_scalar_rate_bound: float
    uniformity_pvalue: float
    independence_stat: float
    transmit_power: tuple
    estimate_distortion: tuple
    interference_sweep: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def scalar_rate_bound(sinr: float) -> float:
    """Operational rate of the scalar scheme: ``0.5*log2(SINR)`` minus the cell-shape penalty."""
    return 0.5 * math.log2(sinr) - shaping_penalty_bits()


def interference_sweep(preset_id: str, params: ChannelParams, q_values, n: int, seed: int,
                       cfg: SchemeConfig | None = None, workers: int = 1):
    """``[(Q, measured noise power, stderr, scalar rate bound), ...]`` with common seeds."""
    q_values = list(q_values)
    if not q_values:
        raise ValueError("q_values must be nonempty")
    cfg = cfg or build_preset(preset_id, params)
    rows = []
    for q in q_values:
        p = params.replace(interference_power=float(q))
        batch = run_pipeline(cfg, generate_batch(cfg, p, n, seed, workers))
        m = effective_noise_power(cfg, batch, p)
        rows.append((float(q), m.measured, m.stderr, scalar_rate_bound(m.empirical_sinr)))
    return rows


def sweep_is_flat(rows, k: float = 3.0) -> bool:
    """Every pair of sweep rows agrees within ``k`` combined standard errors."""
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            if abs(rows[i][1] - rows[j][1]) >= k * math.hypot(rows[i][2], rows[j][2]):
                return False
    return True


def run_experiment(preset_id: str, params: ChannelParams, n: int, seed: int,
                   q_values=None, cfg: SchemeConfig | None = None, workers: int = 1) -> SimReport:
    """Generate, encode, transmit, decode and check one preset.

    The report's ``checks`` hold the pass/fail outcome of every invariant; the
    statistical ones widen to a few standard errors when ``n`` is small.
    """
    cfg = cfg or build_preset(preset_id, params)
    batch = run_pipeline(cfg, generate_batch(cfg, params, n, seed, workers))
    resid = equivalence_residual(cfg, batch)
    noise = effective_noise_power(cfg, batch, params)

    xs = ((batch.x1, cfg.lattice1), (batch.x2, cfg.lattice2))
    pvalue = min(chi2_uniform_pvalue(x, lat) for x, lat in xs)
    active = [(batch.x1, batch.v1)] if cfg.v1_active else []
    active += [(batch.x2, batch.v2)] if cfg.v2_active else []
    indep = max(abs_correlation(x, v) for x, v in active)
    powers = (float(np.var(batch.x1)), float(np.var(batch.x2)))
    distortion = (float(np.mean((batch.s1 - batch.s1_est) ** 2)),
                  float(np.mean((batch.s2 - batch.s2_est) ** 2)))

    sweep = []
    if q_values:
        sweep = interference_sweep(preset_id, params, q_values, n, seed, cfg, workers)

    def within(measured, expected, samples_sq):
        se = float(np.std(samples_sq) / math.sqrt(n))
        return abs(measured - expected) <= 4 * se + 1e-15

    checks = {
        "equivalence": resid < 1e-9 * cfg.lattice_r.step,
        "effective_noise": abs(noise.measured - noise.analytic)
        <= max(0.01 * noise.analytic, 4 * noise.stderr),
        "power": all(pw <= p * (1 + POWER_SLACK) + 4 * float(np.std(x * x)) / math.sqrt(n)
                     for pw, p, x in zip(powers, (params.p1, params.p2), (batch.x1, batch.x2))),
        "uniformity": pvalue >= 0.01,
        "independence": indep < max(0.01, 4 / math.sqrt(n)),
        "estimate_distortion": within(distortion[0], params.e1, (batch.s1 - batch.s1_est) ** 2)
        and within(distortion[1], params.e2, (batch.s2 - batch.s2_est) ** 2),
    }
    if sweep:
        checks["interference_independence"] = sweep_is_flat(sweep)

    return SimReport(
        preset_id=cfg.preset_id, n=n, seed=seed, backend=kernels.BACKEND,
        measured_effective_noise_power=noise.measured,
        analytic_effective_noise_power=noise.analytic,
        effective_noise_stderr=noise.stderr,
        equivalence_max_residual=resid,
        equivalence_relative_residual=resid / cfg.lattice_r.step,
        empirical_sinr=noise.empirical_sinr,
        analytic_sinr=noise.analytic_sinr,
        scalar_rate_bound=scalar_rate_bound(noise.empirical_sinr),
        analytic_scalar_rate_bound=scalar_rate_bound(noise.analytic_sinr),
        uniformity_pvalue=pvalue,
        independence_stat=indep,
        transmit_power=powers,
        estimate_distortion=distortion,
        interference_sweep=sweep,
        checks=checks,
        config=cfg.to_dict(),
    )


# ---------------------------------------------------------------------------
# nested scalar code

def nested_code_experiment(preset_id: str, params: ChannelParams, codebook_size: int, n: int,
                           seed: int, cfg: SchemeConfig | None = None) -> float:
    """Symbol error rate of an M-point nested scalar code carried by the active user.

    Codeword indices come from the message substream and the active user's
    dither is drawn as ``[U - V] mod cell`` (still uniform and independent of
    V), so runs with different M at one seed see identical transmitted
    signals and noise.
    """
    m = int(codebook_size)
    if m < 2:
        raise ValueError("codebook size must be at least 2")
    cfg = cfg or build_preset(preset_id, params)
    user = cfg.info_user
    if user is None:
        raise ValueError(f"{cfg.preset_id} has two active users; nested code needs exactly one")
    batch = generate_batch(cfg, params, n, seed)
    lat = cfg.lattice1 if user == 1 else cfg.lattice2
    u = role_stream(seed, f"message{user}", n, lambda rng, k: rng.random(k))
    idx = np.minimum((u * m).astype(np.int64), m - 1)
    v = mod_lattice(lat, idx * (lat.step / m))
    d_old = batch.d1 if user == 1 else batch.d2
    zero_dither = cfg.d1_zero if user == 1 else cfg.d2_zero
    d = d_old if zero_dither else mod_lattice(lat, d_old - v)
    if user == 1:
        batch = batch.replace(v1=v, d1=d)
    else:
        batch = batch.replace(v2=v, d2=d)
    batch = run_pipeline(cfg, batch)
    decoded = kernels.nearest_index(batch.y_prime, cfg.lattice_r.step, m)
    return float(np.mean(decoded != idx))
