"""Monte Carlo security games over the commitment protocol.

Binding game: Alice commits to a uniformly random bit ``c``, then a
uniform challenge bit ``b`` is drawn. If ``b == c`` she opens honestly;
otherwise her strategy tries to open ``b``. A trial succeeds when Bob
accepts the announced bit ``b``, so 1/2 is the floor every strategy gets
for free and the excess over 1/2 is the cheating advantage.

Hiding game: Bob, who knows his own ``U_B``, tries to guess the bit from
the committed state with the optimal (Helstrom) measurement.

Every trial draws its randomness from a generator seeded by
``SeedSequence(master_seed, spawn_key=(stream, trial_index))``, so the
outcome of trial ``i`` does not depend on how trials are scheduled.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from . import __version__
from .adversary import (
    EPR_MODEL,
    HONEST,
    ORACLE_SUBSTITUTION,
    RANDOM_SUBSTITUTION,
    AttackStrategy,
    epr_instance_success,
    forged_reveal,
)
from .codec import canonical_json
from .errors import InvalidConfig
from .protocol import Alice, BasisPair, Bob, ProtocolParams, UnitaryFamily
from .qcore import DensityMatrix, Povm, apply, haar_random_unitary, measure_povm, trace_distance

BINDING = "binding"
HIDING = "hiding"
EPR_DEMO = "epr-demo"
SWEEP = "sweep"
EXPERIMENT_KINDS = (BINDING, HIDING, EPR_DEMO, SWEEP)
SWEEP_AXES = ("m", "trials", "alice_family", "bob_family", "assumed_bob_family", "basis", "tolerance")

ENGINE_VERSION = f"qcommit {__version__}"
Z_95 = NormalDist().inv_cdf(0.975)

# Bob's transforms are sampled this many times when his family is continuous.
HIDING_BOB_SAMPLES = 64

# stream tags for seed derivation
_STREAM_BINDING = 1
_STREAM_HIDING_TWIRL = 2
_STREAM_HIDING_BOB = 3
_STREAM_HIDING_GAME = 4
_STREAM_EPR = 5
_STREAM_SWEEP = 6


def derive_seed(master_seed: int, *path: int) -> int:
    """64-bit seed hashed from ``master_seed`` and an integer path."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])


def trial_rng(master_seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(stream, index)))


def wilson_interval(successes: int, trials: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # keep lo <= p <= hi despite rounding at p in {0, 1}
    return min(max(0.0, center - half), p), max(min(1.0, center + half), p)


def helstrom_bound(rho0: DensityMatrix, rho1: DensityMatrix) -> float:
    """Best probability of telling ``rho0`` from ``rho1`` given equal priors."""
    return 0.5 + 0.5 * trace_distance(rho0, rho1)


# -- config and result -------------------------------------------------------


def _normalize_axis_value(name: str, value):
    if name in ("m", "trials"):
        return int(value)
    if name == "tolerance":
        return float(value)
    if name in ("alice_family", "bob_family", "assumed_bob_family"):
        fam = value if isinstance(value, UnitaryFamily) else UnitaryFamily.from_dict(value)
        return fam.to_dict()
    if name == "basis":
        basis = value if isinstance(value, BasisPair) else BasisPair.from_dict(value)
        return basis.to_dict()
    raise InvalidConfig(f"unknown sweep axis {name!r}; choose from {', '.join(SWEEP_AXES)}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    ``base_kind`` names the experiment a sweep repeats; it is set iff
    ``kind`` is ``sweep``, as is ``sweep_axis`` (name, values).
    """

    kind: str
    params: ProtocolParams
    strategy: AttackStrategy = field(default_factory=AttackStrategy.honest)
    trials: int = 10_000
    master_seed: int = 0
    sweep_axis: Optional[tuple[str, tuple]] = None
    base_kind: Optional[str] = None

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise InvalidConfig(f"unknown experiment kind {self.kind!r}")
        if int(self.trials) < 1:
            raise InvalidConfig(f"trials must be >= 1, got {self.trials}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise InvalidConfig(f"master seed must be a 64-bit unsigned integer, got {self.master_seed}")
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "master_seed", int(self.master_seed))
        if (self.kind == SWEEP) != (self.sweep_axis is not None):
            raise InvalidConfig("sweep_axis must be given exactly when kind is sweep")
        if (self.kind == SWEEP) != (self.base_kind is not None):
            raise InvalidConfig("base_kind must be given exactly when kind is sweep")
        if self.kind == SWEEP:
            if self.base_kind not in (BINDING, HIDING, EPR_DEMO):
                raise InvalidConfig(f"cannot sweep over experiment kind {self.base_kind!r}")
            name, values = self.sweep_axis
            if not values:
                raise InvalidConfig("sweep axis needs at least one value")
            values = tuple(_normalize_axis_value(name, v) for v in values)
            object.__setattr__(self, "sweep_axis", (name, values))
        if self.kind == EPR_DEMO and self.strategy.kind != EPR_MODEL:
            raise InvalidConfig("an epr-demo needs the epr-model strategy")

    def replace(self, **changes) -> "ExperimentConfig":
        d = dict(kind=self.kind, params=self.params, strategy=self.strategy, trials=self.trials,
                 master_seed=self.master_seed, sweep_axis=self.sweep_axis, base_kind=self.base_kind)
        d.update(changes)
        return ExperimentConfig(**d)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params.to_dict(),
            "strategy": self.strategy.to_dict(),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "sweep_axis": None if self.sweep_axis is None
            else {"name": self.sweep_axis[0], "values": list(self.sweep_axis[1])},
            "base_kind": self.base_kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        axis = d.get("sweep_axis")
        try:
            return cls(
                kind=d["kind"],
                params=ProtocolParams.from_dict(d["params"]),
                strategy=AttackStrategy.from_dict(d.get("strategy", "honest")),
                trials=d.get("trials", 10_000),
                master_seed=d.get("master_seed", 0),
                sweep_axis=None if axis is None else (axis["name"], tuple(axis["values"])),
                base_kind=d.get("base_kind"),
            )
        except KeyError as exc:
            raise InvalidConfig(f"config is missing field {exc}") from None

    def echo(self) -> str:
        """Canonical one-line rendering; identical to a result's config echo."""
        return canonical_json(self.to_dict())


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


@dataclass
class ExperimentResult:
    kind: str
    successes: int
    trials: int
    estimate: float
    wilson_interval_95: tuple[float, float]
    scalar_metrics: dict[str, float]
    config_echo: dict
    engine_version: str = ENGINE_VERSION

    @classmethod
    def from_counts(cls, config: ExperimentConfig, successes: int, metrics: dict) -> "ExperimentResult":
        return cls(
            kind=config.kind,
            successes=int(successes),
            trials=config.trials,
            estimate=successes / config.trials,
            wilson_interval_95=wilson_interval(successes, config.trials),
            scalar_metrics={k: float(v) for k, v in sorted(metrics.items())},
            config_echo=config.to_dict(),
        )

    @property
    def config(self) -> ExperimentConfig:
        return ExperimentConfig.from_dict(self.config_echo)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "successes": self.successes,
            "trials": self.trials,
            "estimate": self.estimate,
            "wilson_interval_95": list(self.wilson_interval_95),
            "scalar_metrics": dict(self.scalar_metrics),
            "config_echo": self.config_echo,
            "engine_version": self.engine_version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentResult":
        return cls(
            kind=d["kind"],
            successes=d["successes"],
            trials=d["trials"],
            estimate=d["estimate"],
            wilson_interval_95=tuple(d["wilson_interval_95"]),
            scalar_metrics=dict(d["scalar_metrics"]),
            config_echo=d["config_echo"],
            engine_version=d["engine_version"],
        )


# -- trial execution ---------------------------------------------------------


def _count_successes(trial: Callable[[int], bool], n: int, workers: int) -> int:
    """Run ``trial(i)`` for ``i < n``; ordered reduction, any worker count."""
    if workers <= 1:
        return sum(1 for i in range(n) if trial(i))
    chunk = max(1, math.ceil(n / (workers * 4)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        flags = pool.map(trial, range(n), chunksize=chunk)
        return sum(1 for ok in flags if ok)


def _binding_reference(strategy: AttackStrategy, m: int, epr_success: float = 0.0) -> float:
    """Closed-form success probability of the binding game."""
    if strategy.kind == HONEST:
        return 0.5
    if strategy.kind == ORACLE_SUBSTITUTION:
        return 1.0
    if strategy.kind == RANDOM_SUBSTITUTION:
        # each forged instance opens the other bit with probability 1/2
        return 0.5 + 0.5 * 2.0**-m
    return 0.5 + 0.5 * epr_success**m


def run_binding_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    if config.kind != BINDING:
        raise InvalidConfig(f"expected a binding config, got {config.kind!r}")
    params, strategy = config.params, config.strategy
    metrics: dict[str, float] = {}

    epr_p = 0.0
    if strategy.kind == EPR_MODEL:
        if not (params.alice_family.is_finite and params.bob_family.is_finite):
            raise InvalidConfig("the epr-model strategy needs finite Alice and Bob families")
        epr = epr_instance_success(params.alice_family, params.bob_family, strategy.assumed_bob_family, params.basis)
        epr_p = epr["attack_success"]
        metrics.update(hiding_td=epr["hiding_td"], residual=epr["residual"], attack_success=epr_p)

    def trial(i: int) -> bool:
        rng = trial_rng(config.master_seed, _STREAM_BINDING, i)
        committed = int(rng.integers(2))
        challenge = int(rng.integers(2))
        if strategy.kind == EPR_MODEL and challenge != committed:
            # abstract-model switch: each instance passes Bob's check w.p. epr_p
            return bool(np.all(rng.random(params.m) < epr_p))
        bob = Bob(params, rng)
        alice = Alice(params, committed, rng)
        bob.receive_commitment(alice.commit(bob.offer()))
        if challenge == committed or strategy.kind == EPR_MODEL:
            reveal = alice.open()
        else:
            reveal = forged_reveal(strategy, alice.secret, bob.secret, params, challenge, rng)
        verdict = bob.verify(reveal)
        return verdict.accepted and reveal.announced_bit == challenge

    successes = _count_successes(trial, config.trials, workers)
    metrics["reference"] = _binding_reference(strategy, params.m, epr_p)
    metrics["advantage"] = successes / config.trials - 0.5
    return ExperimentResult.from_counts(config, successes, metrics)


def _twirl_superoperator(family: UnitaryFamily, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Average of ``U (x) conj(U)``: maps row-major vec(rho) to vec(avg U rho U^dag).

    Finite families are averaged exactly over their members; continuous
    ones over ``samples`` draws.
    """
    if family.is_finite:
        mats = [u.entries for u in family.enumerate()]
    else:
        mats = [haar_random_unitary(2, rng).entries for _ in range(samples)]
    return np.mean([np.kron(u, u.conj()) for u in mats], axis=0)


def _bob_candidates(family: UnitaryFamily, rng: np.random.Generator):
    if family.is_finite:
        return list(family.enumerate())
    return [haar_random_unitary(2, rng) for _ in range(HIDING_BOB_SAMPLES)]


def _hiding(config: ExperimentConfig) -> ExperimentResult:
    params = config.params
    samples = config.trials
    twirl = _twirl_superoperator(params.alice_family, samples, trial_rng(config.master_seed, _STREAM_HIDING_TWIRL, 0))
    candidates = _bob_candidates(params.bob_family, trial_rng(config.master_seed, _STREAM_HIDING_BOB, 0))

    worst_td, worst = -1.0, None
    for u_b in candidates:
        views = []
        for phi in params.basis.states:
            sent = apply(u_b, phi).amps
            rho = (twirl @ np.outer(sent, sent.conj()).reshape(-1)).reshape(2, 2)
            views.append(DensityMatrix(0.5 * (rho + rho.conj().T)))
        td = trace_distance(*views)
        if td > worst_td:
            worst_td, worst = td, (u_b, views)
    u_b, (rho0, rho1) = worst

    # Helstrom measurement: guess 0 on the positive part of rho0 - rho1
    evals, evecs = np.linalg.eigh(rho0.entries - rho1.entries)
    pos = evecs[:, evals > 1e-12]
    p_plus = pos @ pos.conj().T
    helstrom = Povm((p_plus, np.eye(2) - p_plus))

    def trial(i: int) -> bool:
        rng = trial_rng(config.master_seed, _STREAM_HIDING_GAME, i)
        bit = int(rng.integers(2))
        u_a = params.alice_family.sample(rng)
        received = apply(u_a, apply(u_b, params.basis.state(bit)))
        return measure_povm(received, helstrom, rng) == bit

    successes = _count_successes(trial, samples, 1)
    metrics = {
        "trace_distance": worst_td,
        "helstrom_bound": 0.5 + 0.5 * worst_td,
        "bob_transforms_checked": len(candidates),
    }
    return ExperimentResult.from_counts(config, successes, metrics)


def estimate_hiding(params: ProtocolParams, samples: int, master_seed: int = 0) -> ExperimentResult:
    """Bob's best distinguishing power before the opening.

    For each of Bob's candidate transforms, his two possible views are
    ``rho_b = E[U_A U_B |phi_b><phi_b| U_B^dag U_A^dag]`` over Alice's
    family. The largest trace distance over the candidates is reported
    with its Helstrom bound; the estimate is the empirical success of the
    Helstrom guess at that worst-case ``U_B`` over ``samples`` games.
    """
    return _hiding(ExperimentConfig(HIDING, params, trials=samples, master_seed=master_seed))


def _epr_demo(config: ExperimentConfig) -> ExperimentResult:
    params = config.params
    r = epr_instance_success(params.alice_family, params.bob_family, config.strategy.assumed_bob_family, params.basis)
    p = r["attack_success"]

    def trial(i: int) -> bool:
        # Bob's projective test onto the genuine opposite-bit commitment
        return bool(trial_rng(config.master_seed, _STREAM_EPR, i).random() < p)

    successes = _count_successes(trial, config.trials, 1)
    metrics = {"hiding_td": r["hiding_td"], "residual": r["residual"], "attack_success": p}
    return ExperimentResult.from_counts(config, successes, metrics)


def run_epr_demo(
    alice_family: UnitaryFamily,
    bob_family: UnitaryFamily,
    assumed_bob_family: UnitaryFamily,
    basis: BasisPair,
    master_seed: int = 0,
    trials: int = 10_000,
) -> ExperimentResult:
    """EPR attack in the register model with ``V`` built from the assumed Bob family.

    ``scalar_metrics`` carry the exact ``hiding_td`` of the true states,
    the construction ``residual`` and the ``attack_success`` overlap; the
    estimate samples Bob's test of the switched state ``trials`` times.
    """
    params = ProtocolParams(basis, alice_family, bob_family)
    config = ExperimentConfig(
        EPR_DEMO, params, AttackStrategy.epr_model(assumed_bob_family), trials=trials, master_seed=master_seed
    )
    return _epr_demo(config)


def _apply_axis(config: ExperimentConfig, name: str, value) -> ExperimentConfig:
    if name == "trials":
        return config.replace(trials=value)
    if name == "assumed_bob_family":
        return config.replace(strategy=AttackStrategy.epr_model(UnitaryFamily.from_dict(value)))
    if name in ("alice_family", "bob_family"):
        value = UnitaryFamily.from_dict(value)
    elif name == "basis":
        value = BasisPair.from_dict(value)
    return config.replace(params=config.params.replace(**{name: value}))


def run_sweep(config: ExperimentConfig, workers: int = 1) -> list[ExperimentResult]:
    """Repeat the base experiment once per axis value, in axis order."""
    if config.kind != SWEEP:
        raise InvalidConfig(f"expected a sweep config, got {config.kind!r}")
    name, values = config.sweep_axis
    base = config.replace(kind=config.base_kind, sweep_axis=None, base_kind=None)
    results = []
    for i, value in enumerate(values):
        point = _apply_axis(base, name, value).replace(master_seed=derive_seed(config.master_seed, _STREAM_SWEEP, i))
        results.append(run_experiment(point, workers))
    return results


def run_experiment(config: ExperimentConfig, workers: int = 1):
    """Dispatch on ``config.kind``; a sweep returns a list of results."""
    if config.kind == BINDING:
        return run_binding_experiment(config, workers)
    if config.kind == HIDING:
        return _hiding(config)
    if config.kind == EPR_DEMO:
        return _epr_demo(config)
    return run_sweep(config, workers)


# -- serialization -----------------------------------------------------------

CSV_FIXED_COLUMNS = ("kind", "strategy", "m", "trials", "estimate", "ci_lo", "ci_hi")
STRUCTURED_TEXT = "structured-text"
CSV = "csv"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _csv_rows(results: Sequence[ExperimentResult]) -> str:
    metric_keys = sorted({k for r in results for k in r.scalar_metrics})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(CSV_FIXED_COLUMNS) + metric_keys)
    for r in results:
        cfg = r.config_echo
        writer.writerow(
            [r.kind, cfg["strategy"]["kind"], cfg["params"]["m"], r.trials, _fmt(r.estimate),
             _fmt(r.wilson_interval_95[0]), _fmt(r.wilson_interval_95[1])]
            + [_fmt(r.scalar_metrics[k]) if k in r.scalar_metrics else "" for k in metric_keys]
        )
    return buf.getvalue()


def serialize_result(r: Union[ExperimentResult, Sequence[ExperimentResult]], format: str = STRUCTURED_TEXT) -> str:
    """Render one result (or a sweep's list) as structured text (JSON) or CSV.

    The CSV header is ``kind,strategy,m,trials,estimate,ci_lo,ci_hi``
    followed by the sorted metric names; reals use 17 significant digits.
    """
    many = not isinstance(r, ExperimentResult)
    results = list(r) if many else [r]
    if format == CSV:
        return _csv_rows(results)
    if format != STRUCTURED_TEXT:
        raise InvalidConfig(f"unknown output format {format!r}")
    doc: Any = [x.to_dict() for x in results] if many else results[0].to_dict()
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def parse_result(text: str):
    """Inverse of the structured-text form of :func:`serialize_result`."""
    doc = json.loads(text)
    if isinstance(doc, list):
        return [ExperimentResult.from_dict(d) for d in doc]
    return ExperimentResult.from_dict(doc)
