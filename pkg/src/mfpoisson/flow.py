"""Training loop: dataset generation, shuffled minibatching, the explicit
descent step, trajectory recording and error evaluation.

Two conventions coexist in the source material and are exposed explicitly:

* network scaling -- the represented function is the particle mean of the
  features ("mean", the theory's normalization) or their plain sum ("sum",
  what a stock dense layer computes);
* learning-rate scale -- the step multiplies the loss gradient by zeta
  ("loss", standard SGD) or by zeta * m ("velocity", the explicit Euler
  discretization of the per-particle mean-field ODE, whose stability
  boundary is the 1/(2 n m) rule).

All particles update simultaneously from one velocity report; constrained
mode retracts back to the manifold, ambient mode takes the plain step. The
optimization horizon T counts zeta-units: steps = round(T / zeta). All
randomness derives from one master seed through named streams.
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .activation import DEFAULT_TAU, MollifiedActivation, get_activation
from .field import SampleBatch, empirical_velocity, network_eval, quadrature_batch
from .params import ParticleCloud, init_cloud, retract_cloud
from .spectral import (CosineSeries, exact_solution, load_series, make_source,
                       mixed_source, series_eval, series_l2_norm)


class DivergenceError(RuntimeError):
    """Raised when a run produces a non-finite loss or parameter (stability
    violation of the explicit scheme)."""

    def __init__(self, step: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at step {step}")
        self.step = step
        self.loss = loss


def derive_seed(master: int, label: str) -> int:
    """Deterministic named sub-seed of a master seed."""
    ss = np.random.SeedSequence([int(master), zlib.crc32(label.encode())])
    return int(ss.generate_state(1, np.uint64)[0])


def parse_source(spec: str, dim: int) -> CosineSeries:
    """Source spec: 'k:1,1' single mode, 'mixed', or 'series:PATH'."""
    spec = spec.strip()
    if spec == "mixed":
        return mixed_source(dim)
    if spec.startswith("k:"):
        k = tuple(int(v) for v in spec[2:].split(","))
        if len(k) != dim:
            raise ValueError(f"mode {k} does not match dim {dim}")
        return make_source(k)
    if spec.startswith("series:"):
        s = load_series(spec[len("series:"):])
        if s.dim != dim:
            raise ValueError("series file dimension does not match dim")
        return s
    raise ValueError(f"unrecognized source spec {spec!r}")


@dataclass
class TrainConfig:
    """One experiment: geometry, width, source, sampling and step-size rule."""

    dim: int = 1
    width: int = 100
    tau: float = DEFAULT_TAU
    source: str = "k:1"
    batch_size: int = 100
    dataset_size: int = 100_000
    learning_rate: float | None = None   # None -> 1 / (2 n m)
    lr_mult: float = 1.0
    total_time: float = 2.0
    seed: int = 0
    repeats: int = 4
    eval_samples: int = 100_000
    eval_every: int | None = None        # None -> ~100 rows per run
    constrained: bool = True
    full_batch: bool = False
    quad_level: int = 64
    scaling: str = "sum"
    lr_scale: str = "velocity"           # "velocity": zeta*m on grad L; "loss": zeta
    deterministic_timing: bool = False

    @property
    def base_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        n = self.quad_level ** self.dim if self.full_batch else self.batch_size
        return 1.0 / (2.0 * n * self.width)

    @property
    def zeta(self) -> float:
        return self.base_rate * self.lr_mult

    @property
    def steps(self) -> int:
        return max(1, round(self.total_time / self.zeta))

    def grad_step(self) -> float:
        """Multiplier applied to the loss gradient each step."""
        if self.lr_scale == "velocity":
            return self.zeta * self.width
        if self.lr_scale == "loss":
            return self.zeta
        raise ValueError("lr_scale must be 'velocity' or 'loss'")

    def validate(self) -> None:
        if self.dim < 1 or self.width < 1:
            raise ValueError("dim and width must be >= 1")
        if not self.full_batch and self.batch_size > self.dataset_size:
            raise ValueError("batch_size must not exceed dataset_size")
        if self.zeta <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.scaling not in ("mean", "sum"):
            raise ValueError("scaling must be 'mean' or 'sum'")
        self.grad_step()
        parse_source(self.source, self.dim)

    def source_series(self) -> CosineSeries:
        return parse_source(self.source, self.dim)

    def exact_series(self) -> CosineSeries:
        return exact_solution(self.source_series())

    def to_dict(self) -> dict:
        return {
            "dim": self.dim, "width": self.width, "tau": self.tau,
            "source": self.source, "batch_size": self.batch_size,
            "dataset_size": self.dataset_size, "learning_rate": self.learning_rate,
            "lr_mult": self.lr_mult, "total_time": self.total_time,
            "seed": self.seed, "repeats": self.repeats,
            "eval_samples": self.eval_samples, "eval_every": self.eval_every,
            "constrained": self.constrained, "full_batch": self.full_batch,
            "quad_level": self.quad_level, "scaling": self.scaling,
            "lr_scale": self.lr_scale,
            "deterministic_timing": self.deterministic_timing,
        }

    @staticmethod
    def from_dict(data: dict) -> "TrainConfig":
        cfg = TrainConfig()
        for key, value in data.items():
            if not hasattr(cfg, key):
                raise ValueError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
        return cfg


@dataclass
class EvalRow:
    step: int
    epoch: int
    loss: float
    l2_rel_error: float
    wall_ms: float


@dataclass
class RunRecord:
    """Trajectory of one training run plus provenance and terminal cloud."""

    config: TrainConfig
    run_id: int
    seed: int
    rows: list[EvalRow] = field(default_factory=list)
    terminal_cloud: ParticleCloud | None = None
    streams: dict[str, int] = field(default_factory=dict)

    CSV_HEADER = "run_id,seed,step,epoch,loss,l2_rel_error,wall_ms"

    def final_error(self) -> float:
        return self.rows[-1].l2_rel_error

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for r in self.rows:
                fh.write(f"{self.run_id},{self.seed},{r.step},{r.epoch},"
                         f"{r.loss!r},{r.l2_rel_error!r},{r.wall_ms!r}\n")

    def sidecar(self) -> dict:
        return {"config": self.config.to_dict(), "run_id": self.run_id,
                "seed": self.seed, "streams": self.streams}

    def save_sidecar(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def generate_dataset(d: int, n_samples: int, seed: int) -> np.ndarray:
    """n_samples i.i.d. uniform points in [0,1]^d, fully determined by seed."""
    if n_samples < 1:
        raise ValueError("dataset must contain at least one point")
    rng = np.random.default_rng(seed)
    return rng.random((n_samples, d))


def apply_velocity(cloud: ParticleCloud, report, grad_step: float,
                   constrained: bool = True, scaling: str = "sum") -> ParticleCloud:
    """Simultaneous explicit step: theta <- theta - grad_step * grad L.

    The report's ambient field is the loss gradient divided by the network
    scale, so the retraction step is grad_step * scale.
    """
    step = grad_step / cloud.m if scaling == "mean" else grad_step
    if constrained:
        return retract_cloud(cloud, -report.tangent, step)
    c = cloud.c - step * report.ambient[:, 0]
    a = cloud.a - step * report.ambient[:, 1]
    w = cloud.w - step * report.ambient[:, 2:-1]
    b = cloud.b - step * report.ambient[:, -1]
    return ParticleCloud(cloud.dim, cloud.tau, c, a, w, b)


def sgd_step(cloud: ParticleCloud, batch: SampleBatch, f: CosineSeries,
             act: MollifiedActivation, zeta: float, constrained: bool = True,
             scaling: str = "sum", lr_scale: str = "velocity") -> ParticleCloud:
    """Velocity from the pre-step cloud, then a simultaneous update of all
    particles (retraction in constrained mode, plain step in ambient mode).

    With the default "velocity" scale the loss gradient is multiplied by
    zeta * m (one explicit Euler step of the mean-field flow); "loss" applies
    zeta as a standard SGD implementation would.
    """
    report = empirical_velocity(cloud, batch, f, act, scaling=scaling)
    grad_step = zeta * cloud.m if lr_scale == "velocity" else zeta
    return apply_velocity(cloud, report, grad_step, constrained, scaling)


def eval_l2_error(cloud: ParticleCloud, u_star: CosineSeries, samples: int,
                  seed: int, act: MollifiedActivation | None = None,
                  scaling: str = "sum") -> float:
    """Monte-Carlo relative L2 error against the exact series; the denominator
    uses the exact series norm."""
    denom = series_l2_norm(u_star)
    if denom == 0.0:
        raise ValueError("exact solution is identically zero")
    if act is None:
        act = get_activation(cloud.tau)
    pts = np.random.default_rng(seed).random((samples, cloud.dim))
    u = network_eval(cloud, pts, act, scaling=scaling)
    diff = u - series_eval(u_star, pts)
    with np.errstate(over="ignore"):
        return float(np.sqrt(np.mean(diff * diff)) / denom)


def train(config: TrainConfig, run_id: int = 0,
          seed_override: int | None = None) -> RunRecord:
    """Run one training; raises DivergenceError on a non-finite loss."""
    config.validate()
    master = config.seed if seed_override is None else seed_override
    streams = {name: derive_seed(master, name)
               for name in ("dataset", "init", "eval")}
    record = RunRecord(config=config, run_id=run_id, seed=master, streams=streams)

    f = config.source_series()
    u_star = config.exact_series()
    act = get_activation(config.tau)
    cloud = init_cloud(config.width, config.dim, streams["init"], tau=config.tau)

    grad_step = config.grad_step()
    steps = config.steps
    eval_every = config.eval_every or max(1, steps // 100)

    if config.full_batch:
        full = quadrature_batch(config.dim, config.quad_level)
        steps_per_epoch = 1
    else:
        data = generate_dataset(config.dim, config.dataset_size, streams["dataset"])
        steps_per_epoch = max(1, config.dataset_size // config.batch_size)

    clock = time.perf_counter
    t0 = clock()
    perm = None
    for step in range(1, steps + 1):
        epoch = (step - 1) // steps_per_epoch
        if config.full_batch:
            batch = full
        else:
            pos = (step - 1) % steps_per_epoch
            if pos == 0:
                shuffle_seed = derive_seed(master, f"epoch:{epoch}")
                record.streams[f"epoch:{epoch}"] = shuffle_seed
                perm = np.random.default_rng(shuffle_seed).permutation(
                    config.dataset_size)
            idx = perm[pos * config.batch_size:(pos + 1) * config.batch_size]
            batch = SampleBatch(data[idx])

        report = empirical_velocity(cloud, batch, f, act, scaling=config.scaling)
        if not np.isfinite(report.loss_value):
            raise DivergenceError(step, report.loss_value)
        cloud = apply_velocity(cloud, report, grad_step, config.constrained,
                               config.scaling)

        if step % eval_every == 0 or step == steps:
            if not cloud.finite():
                raise DivergenceError(step, float("nan"))
            err = eval_l2_error(cloud, u_star, config.eval_samples,
                                streams["eval"], act, scaling=config.scaling)
            wall = 0.0 if config.deterministic_timing else (clock() - t0) * 1e3
            record.rows.append(EvalRow(step=step, epoch=epoch,
                                       loss=report.loss_value,
                                       l2_rel_error=err, wall_ms=wall))

    record.terminal_cloud = cloud
    return record


def train_repeats(config: TrainConfig) -> list[RunRecord]:
    """`repeats` runs with per-run derived seeds (fresh dataset and init each)."""
    records = []
    for i in range(config.repeats):
        run_seed = derive_seed(config.seed, f"run:{i}")
        records.append(train(config, run_id=i, seed_override=run_seed))
    return records


def summarize(records: list[RunRecord]) -> list[dict]:
    """Per eval step: mean/stddev of loss and error across runs (population
    stddev so a single run collapses to a zero-width band)."""
    if not records:
        return []
    steps = [r.step for r in records[0].rows]
    for rec in records[1:]:
        if [r.step for r in rec.rows] != steps:
            raise ValueError("runs have mismatched evaluation schedules")
    out = []
    for i, step in enumerate(steps):
        losses = np.array([rec.rows[i].loss for rec in records])
        errs = np.array([rec.rows[i].l2_rel_error for rec in records])
        out.append({
            "step": step,
            "epoch": records[0].rows[i].epoch,
            "mean_loss": float(losses.mean()),
            "std_loss": float(losses.std()),
            "mean_l2_rel_error": float(errs.mean()),
            "std_l2_rel_error": float(errs.std()),
        })
    return out
