"""Synthetic indicator data under several causal structures.

Scenarios
---------
structural
    Z shifts the latent only: eta = mu + eta_shift[Z] + eta_sd * xi,
    X_i = lambda_i * eta + eps_i.
direct
    Z shifts indicators directly: X_i = lambda_i * eta + direct_shift[i, Z] + eps_i.
    A nonzero ``eta_shift`` is accepted only with ``allow_mixed=True``.
confounded
    An unrecorded C ~ N(0, 1) raises eta by ``confounder_strength * C`` and
    tilts group membership through a multinomial-logit link with the same slope.
single_indicator
    Z is an outcome whose group probabilities depend on one indicator,
    X_l, alone (X_l is causally efficacious, the latent is not).

Every random quantity comes from its own stream keyed by (seed, role,
indicator), so adding indicators or subjects leaves existing draws intact.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidSpec, Unsupported
from .model import IndicatorDataset

SCENARIOS = ("structural", "direct", "confounded", "single_indicator")
NOISE_DISTS = ("gaussian", "uniform")

_GROUP, _ETA, _CONF, _NOISE, _NOISE_JOINT, _MISSING = range(6)


def _tuple(x):
    return tuple(float(v) for v in x)


@dataclass(frozen=True)
class ScenarioSpec:
    n: int
    lam: tuple[float, ...]
    N: int
    group_probs: tuple[float, ...] = (0.5, 0.5)
    noise_sd: tuple[float, ...] | None = None
    noise_corr: tuple[tuple[float, ...], ...] | None = None
    eta_mean: float = 0.0
    eta_sd: float = 1.0
    scenario: str = "structural"
    eta_shift: tuple[float, ...] | None = None
    direct_shift: tuple[tuple[float, ...], ...] | None = None
    confounder_strength: float = 0.0
    allow_mixed: bool = False
    outcome_indicator: int = 0
    outcome_strength: float = 1.0
    noise_dist: str = "gaussian"
    missing_prob: float = 0.0

    def __post_init__(self):
        n = int(self.n)
        p = len(self.group_probs)
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("lam", _tuple(self.lam))
        set_("group_probs", _tuple(self.group_probs))
        set_("noise_sd", _tuple(self.noise_sd) if self.noise_sd is not None else (1.0,) * n)
        set_("eta_shift", _tuple(self.eta_shift) if self.eta_shift is not None else (0.0,) * p)
        if self.direct_shift is None:
            set_("direct_shift", tuple((0.0,) * p for _ in range(n)))
        else:
            set_("direct_shift", tuple(_tuple(row) for row in self.direct_shift))
        if self.noise_corr is not None:
            set_("noise_corr", tuple(_tuple(row) for row in self.noise_corr))
        self._check()

    @classmethod
    def default(cls, n: int = 5, p: int = 2, N: int = 2000, **kw) -> ScenarioSpec:
        """Loadings evenly spaced from 0.9 down to 0.5, unit noise, equal groups."""
        kw.setdefault("lam", tuple(np.linspace(0.9, 0.5, n)) if n > 1 else (0.9,))
        kw.setdefault("group_probs", (1.0 / p,) * p)
        return cls(n=n, N=N, **kw)

    @property
    def p(self) -> int:
        return len(self.group_probs)

    def _check(self):
        n, p = self.n, self.p
        if n < 1 or self.N < 1 or p < 1:
            raise InvalidSpec("n, N and the number of groups must be positive")
        if self.scenario not in SCENARIOS:
            raise InvalidSpec(f"unknown scenario {self.scenario!r}")
        if self.noise_dist not in NOISE_DISTS:
            raise InvalidSpec(f"unknown noise distribution {self.noise_dist!r}")
        if len(self.lam) != n or len(self.noise_sd) != n:
            raise InvalidSpec("lam and noise_sd need one entry per indicator")
        if any(s <= 0 for s in self.noise_sd) or self.eta_sd <= 0:
            raise InvalidSpec("noise_sd and eta_sd must be positive")
        probs = np.array(self.group_probs)
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9:
            raise InvalidSpec("group_probs must be nonnegative and sum to 1")
        if len(self.eta_shift) != p:
            raise InvalidSpec("eta_shift needs one entry per group")
        if len(self.direct_shift) != n or any(len(r) != p for r in self.direct_shift):
            raise InvalidSpec("direct_shift must be n x p")
        if not 0.0 <= self.missing_prob < 1.0:
            raise InvalidSpec("missing_prob must lie in [0, 1)")
        has_direct = any(v != 0 for row in self.direct_shift for v in row)
        has_eta = any(v != 0 for v in self.eta_shift)
        if self.scenario in ("structural", "confounded", "single_indicator") and has_direct:
            raise InvalidSpec(f"scenario {self.scenario!r} does not allow direct_shift")
        if self.scenario == "direct" and has_eta and not self.allow_mixed:
            raise InvalidSpec("direct scenario with eta_shift requires allow_mixed=True")
        if self.scenario == "single_indicator":
            if has_eta:
                raise InvalidSpec("single_indicator scenario does not allow eta_shift")
            if not 0 <= self.outcome_indicator < n:
                raise InvalidSpec("outcome_indicator out of range")
        if self.noise_corr is not None:
            R = np.array(self.noise_corr)
            if R.shape != (n, n) or not np.allclose(R, R.T) or not np.allclose(np.diag(R), 1):
                raise InvalidSpec("noise_corr must be a symmetric n x n correlation matrix")
            try:
                np.linalg.cholesky(R)
            except np.linalg.LinAlgError:
                raise InvalidSpec("noise_corr is not positive definite") from None

    def replace(self, **changes) -> ScenarioSpec:
        d = asdict(self)
        d.update(changes)
        return ScenarioSpec(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = list(d.pop("lam"))
        return json.loads(json.dumps(d))

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioSpec:
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidSpec(f"unknown spec fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None


def _stream(seed: int, role: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(role, index))
    return np.random.Generator(np.random.PCG64(ss))


def _draw_groups(u: np.ndarray, log_probs: np.ndarray, tilt: np.ndarray | None) -> np.ndarray:
    p = log_probs.size
    if tilt is None:
        cum = np.cumsum(np.exp(log_probs))
        return np.minimum(np.searchsorted(cum, u, side="right"), p - 1)
    logits = log_probs[None, :] + tilt[:, None] * np.arange(p)[None, :]
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    cum = np.cumsum(w / w.sum(axis=1, keepdims=True), axis=1)
    return np.minimum((cum <= u[:, None]).sum(axis=1), p - 1)


def _noise(spec: ScenarioSpec, seed: int) -> np.ndarray:
    N, n = spec.N, spec.n

    def standard(gen, size):
        if spec.noise_dist == "uniform":
            return gen.uniform(-math.sqrt(3.0), math.sqrt(3.0), size)
        return gen.standard_normal(size)

    if spec.noise_corr is None:
        eps = np.column_stack([standard(_stream(seed, _NOISE, i), N) for i in range(n)])
    else:
        L = np.linalg.cholesky(np.array(spec.noise_corr))
        eps = standard(_stream(seed, _NOISE_JOINT), (N, n)) @ L.T
    return eps * np.array(spec.noise_sd)


def generate(spec: ScenarioSpec, seed: int) -> IndicatorDataset:
    """Draw one dataset; identical (spec, seed) give identical values."""
    if int(seed) < 0:
        raise InvalidSpec("seed must be nonnegative")
    N, n, p = spec.N, spec.n, spec.p
    lam = np.array(spec.lam)
    with np.errstate(divide="ignore"):
        log_probs = np.log(np.array(spec.group_probs))
    u_group = _stream(seed, _GROUP).random(N)
    xi = _stream(seed, _ETA).standard_normal(N)
    eps = _noise(spec, seed)
    eta_shift = np.array(spec.eta_shift)

    if spec.scenario == "single_indicator":
        eta = spec.eta_mean + spec.eta_sd * xi
        X = eta[:, None] * lam[None, :] + eps
        score = spec.outcome_strength * X[:, spec.outcome_indicator]
        z = _draw_groups(u_group, log_probs, score)
    else:
        if spec.scenario == "confounded":
            c = _stream(seed, _CONF).standard_normal(N)
            z = _draw_groups(u_group, log_probs, spec.confounder_strength * c)
            eta = spec.eta_mean + eta_shift[z] + spec.confounder_strength * c + spec.eta_sd * xi
        else:
            z = _draw_groups(u_group, log_probs, None)
            eta = spec.eta_mean + eta_shift[z] + spec.eta_sd * xi
        X = eta[:, None] * lam[None, :] + eps
        if spec.scenario == "direct":
            X = X + np.array(spec.direct_shift)[:, z].T

    if spec.missing_prob > 0:
        drop = _stream(seed, _MISSING).random((N, n)) < spec.missing_prob
        X = np.where(drop, np.nan, X)

    return IndicatorDataset(
        values=X,
        group=z,
        group_names=tuple(str(k + 1) for k in range(p)),
        indicator_names=tuple(f"x{i + 1}" for i in range(n)),
    )


def population_cell_means(spec: ScenarioSpec) -> np.ndarray:
    """Exact E(X_i | Z = z) for the structural and direct scenarios."""
    if spec.scenario not in ("structural", "direct"):
        raise Unsupported(
            f"population means for scenario {spec.scenario!r} require integrating over "
            "the confounder or the outcome model"
        )
    lam = np.array(spec.lam)
    means = np.outer(lam, spec.eta_mean + np.array(spec.eta_shift))
    if spec.scenario == "direct":
        means = means + np.array(spec.direct_shift)
    return means
