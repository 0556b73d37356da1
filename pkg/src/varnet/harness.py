"""Sweep orchestration: rate, variation, Rademacher and gradient-check experiments.

A sweep is a list of independent cells. Each cell derives its own seed from
``(base_seed, experiment, n, replication)``, runs single-threaded, and returns
one CSV row. Rows are sorted before output, so the CSV does not depend on the
number of worker processes.
"""
import copy
import csv
import dataclasses
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .complexity import RademacherConfig, rademacher_estimate
from .data import NoiseLaw, make_teacher, sample_dataset
from .network import ArchitectureSpec, build_network, variation
from .risk import DEFAULT_TEST_SIZE, fit_loglog_slope, risk_l1, risk_l2
from .seeds import derive_seed
from .train import (LossKind, Penalty, Projection, TrainConfig, finite_diff_gradient,
                    gradient, train)

OUTPUT_ENV = "VARNET_OUTPUT_DIR"

RISK_COLUMNS = [
    "experiment", "n", "replication", "seed", "constraint", "train_loss",
    "max_row_variation", "total_l1_norm", "risk_l2_sq", "risk_l2", "risk_l1", "wall_ms",
]
RADEMACHER_COLUMNS = ["experiment", "n", "V", "d", "sign_draws", "seed", "estimate", "wall_ms"]
GRAD_CHECK_COLUMNS = [
    "experiment", "architecture", "trial", "seed", "n_params", "max_rel_err",
    "max_abs_err", "passed", "wall_ms",
]
COLUMNS = {
    "rate": RISK_COLUMNS,
    "variation": RISK_COLUMNS,
    "rademacher": RADEMACHER_COLUMNS,
    "grad_check": GRAD_CHECK_COLUMNS,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config schema


@dataclass
class TeacherSpec:
    kind: str = "linear"
    d: int = 5
    beta: list = None
    layer_widths: list = None
    V: float = None
    input_law: str = "gaussian_standard"
    box: float = 1.0


@dataclass
class NoiseSpec:
    kind: str = "gaussian"
    tau: float = 1.0


@dataclass
class ArchitectureConfig:
    layer_widths: list = field(default_factory=lambda: [5, 50, 10, 1])
    init_radius: object = 1.0


@dataclass
class TrainSpec:
    loss: str = "square_l2"
    mode: str = "penalty"
    V: float = None
    lam: float = 0.0
    style: str = "sum_rows"
    target_total: float = None
    dual_lr: float = 1e-4
    epochs: int = 1000
    batch_size: object = None
    learning_rate: float = 0.1
    lr_decay: str = "none"

    def constraint(self, V=None):
        if self.mode == "projection":
            return Projection(float(V if V is not None else self.V))
        if self.mode == "penalty":
            return Penalty(float(self.lam), self.style, self.target_total, float(self.dual_lr))
        raise ConfigError(f"train.mode must be 'projection' or 'penalty', got {self.mode!r}")

    def config(self, seed, V=None):
        return TrainConfig(
            mode=self.constraint(V), loss=self.loss, epochs=int(self.epochs),
            batch_size=self.batch_size, learning_rate=float(self.learning_rate),
            lr_decay=self.lr_decay, seed=seed,
        )


@dataclass
class RademacherSpec:
    V: float = 2.0
    d: int = 5
    sign_draws: int = 64
    starts: int = 32
    ascent_steps: int = 200
    lr: float = 0.1
    V_list: list = field(default_factory=lambda: [2.0])


@dataclass
class GradCheckSpec:
    architectures: list = field(default_factory=lambda: [[1, 1, 1], [2, 3, 1], [5, 50, 10, 1]])
    trials: int = 20
    batch_size: int = 8
    h: float = 1e-5
    tolerance: float = 1e-4


@dataclass
class SweepConfig:
    experiment: str = "rate"
    n_list: list = field(default_factory=lambda: [2 ** k for k in range(5, 12)])
    replications: int = 20
    base_seed: int = 0
    test_size: int = DEFAULT_TEST_SIZE
    teacher: TeacherSpec = field(default_factory=TeacherSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    architecture: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    train: TrainSpec = field(default_factory=TrainSpec)
    V_list: list = None
    rademacher: RademacherSpec = field(default_factory=RademacherSpec)
    grad_check: GradCheckSpec = field(default_factory=GradCheckSpec)
    output: str = "results"

    def validate(self):
        if self.experiment not in COLUMNS:
            raise ConfigError(f"experiment must be one of {sorted(COLUMNS)}, got {self.experiment!r}")
        if int(self.replications) < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if not self.n_list or any(int(n) < 1 for n in self.n_list):
            raise ConfigError("n_list must be a non-empty list of positive integers")
        if list(self.n_list) != sorted(self.n_list):
            raise ConfigError("n_list must be sorted ascending")
        if int(self.test_size) < 1:
            raise ConfigError(f"test_size must be >= 1, got {self.test_size}")
        if self.experiment == "variation":
            if not self.V_list:
                raise ConfigError("variation sweep needs a non-empty V_list")
            if self.train.mode != "projection":
                raise ConfigError("variation sweep trains under projection; set train.mode='projection'")
        if self.experiment == "rademacher" and not self.rademacher.V_list:
            raise ConfigError("rademacher.V_list must be non-empty")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data, strict=False):
        """Build from a JSON-like dict. ``strict`` also rejects missing fields."""
        return _build(cls, data, "config", strict).validate()


def _build(cls, data, where, strict):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = set(fields) - set(data)
    if strict and missing:
        raise ConfigError(f"{where}: missing field(s) {sorted(missing)}")
    kwargs = {}
    for name, value in data.items():
        f = fields[name]
        default = f.default_factory() if f.default_factory is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            value = _build(type(default), value, f"{where}.{name}", strict)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path):
    """Read a config file; every field must be present."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return SweepConfig.from_dict(data, strict=True)


def save_config(cfg, path):
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)


# ---------------------------------------------------------------- presets


def _fig2_default():
    # d=5 linear teacher, Gaussian x and noise, [5,50,10,1], total l1 norm held
    # near 250 by a dual-ascent sum_rows penalty; optimizer settings are tuned
    return SweepConfig(
        experiment="rate",
        n_list=[2 ** k for k in range(5, 12)],
        replications=20,
        base_seed=0,
        teacher=TeacherSpec(kind="linear", d=5),
        noise=NoiseSpec("gaussian", 1.0),
        architecture=ArchitectureConfig([5, 50, 10, 1], [4.0, 4.0, 0.5]),
        train=TrainSpec(
            loss="square_l2", mode="penalty", lam=1e-4, style="sum_rows",
            target_total=250.0, dual_lr=1e-4, epochs=2000, batch_size="full",
            learning_rate=0.3,
        ),
        output="results/fig2",
    )


def _variation_default():
    return SweepConfig(
        experiment="variation",
        n_list=[256],
        replications=5,
        base_seed=0,
        teacher=TeacherSpec(kind="teacher_net", d=2, layer_widths=[2, 8, 1], V=3.0,
                            input_law="uniform_box", box=1.0),
        noise=NoiseSpec("gaussian", 0.5),
        architecture=ArchitectureConfig([2, 16, 1], 0.25),
        train=TrainSpec(loss="square_l2", mode="projection", V=1.0, epochs=1500,
                        batch_size="full", learning_rate=0.3),
        V_list=[0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0],
        output="results/variation",
    )


def _rademacher_default():
    return SweepConfig(
        experiment="rademacher",
        n_list=[2 ** k for k in range(6, 13)],
        replications=1,
        base_seed=0,
        rademacher=RademacherSpec(V=2.0, d=5, sign_draws=64, starts=32, ascent_steps=200,
                                  lr=0.1, V_list=[0.5, 1.0, 2.0, 4.0]),
        output="results/rademacher",
    )


def _grad_check_default():
    return SweepConfig(experiment="grad_check", n_list=[8], replications=1,
                       output="results/grad_check")


def _train_default():
    cfg = _fig2_default()
    cfg.n_list = [512]
    cfg.replications = 1
    cfg.output = "results/train"
    return cfg


PRESETS = {
    "fig2-default": _fig2_default,
    "variation-default": _variation_default,
    "rademacher-default": _rademacher_default,
    "grad-check-default": _grad_check_default,
    "train-default": _train_default,
}


def preset(name):
    try:
        return PRESETS[name]().validate()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# ---------------------------------------------------------------- results


@dataclass
class SweepResult:
    experiment: str
    rows: list
    summary: dict

    @property
    def columns(self):
        return COLUMNS[self.experiment]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.columns, lineterminator="\n")
            w.writeheader()
            for row in self.rows:
                w.writerow({k: _fmt(row[k]) for k in self.columns})

    def write_summary(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary, fh, indent=2)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_rows(path):
    """Read a sweep CSV back into typed rows."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        typed = {}
        for k, v in r.items():
            if k in ("experiment", "architecture"):
                typed[k] = v
            elif k == "passed":
                typed[k] = v == "True"
            elif k in ("n", "replication", "seed", "d", "sign_draws", "trial", "n_params", "wall_ms"):
                typed[k] = int(v)
            else:
                typed[k] = float(v)
        out.append(typed)
    return out


# ---------------------------------------------------------------- cells


def make_sweep_teacher(cfg):
    t = cfg.teacher
    rng = np.random.default_rng(derive_seed(cfg.base_seed, "teacher"))
    if t.kind == "linear":
        return make_teacher("linear", rng, d=t.d, beta=t.beta, input_law=t.input_law, box=t.box)
    if t.kind == "teacher_net":
        return make_teacher("teacher_net", rng, layer_widths=t.layer_widths, V=t.V,
                            input_law=t.input_law, box=t.box)
    raise ConfigError(f"teacher.kind must be 'linear' or 'teacher_net', got {t.kind!r}")


def cell_seed(cfg, n, rep):
    return derive_seed(cfg.base_seed, cfg.experiment, n, rep)


def train_cell(cfg, n, rep, V=None, teacher=None):
    """Sample, train and score one cell. Returns ``(row, net, trace)``."""
    start = time.perf_counter()
    teacher = teacher or make_sweep_teacher(cfg)
    noise = NoiseLaw(cfg.noise.kind, cfg.noise.tau)
    seed = cell_seed(cfg, n, rep)
    ds = sample_dataset(teacher, n, noise, np.random.default_rng(derive_seed(seed, "data")), seed=seed)
    spec = ArchitectureSpec(tuple(cfg.architecture.layer_widths))
    if spec.input_dim != teacher.d:
        raise ConfigError(f"architecture input width {spec.input_dim} != teacher dimension {teacher.d}")
    net0 = build_network(spec, cfg.architecture.init_radius,
                         np.random.default_rng(derive_seed(seed, "init")))
    tcfg = cfg.train.config(derive_seed(seed, "train"), V)
    net, trace = train(net0, ds.inputs, ds.responses, tcfg)
    test_rng = np.random.default_rng(derive_seed(seed, "test"))
    X_test = teacher.sample_inputs(test_rng, int(cfg.test_size))
    r2 = risk_l2(net, teacher, X_test)
    r1 = risk_l1(net, teacher, noise, X_test, noise.sample(test_rng, int(cfg.test_size)))
    rep_var = variation(net)
    row = {
        "experiment": cfg.experiment,
        "n": int(n),
        "replication": int(rep),
        "seed": int(seed),
        "constraint": float(tcfg.mode.value),
        "train_loss": trace.loss[-1],
        "max_row_variation": rep_var.max_norm,
        "total_l1_norm": rep_var.total_l1,
        "risk_l2_sq": r2.squared_value,
        "risk_l2": r2.value,
        "risk_l1": r1.value,
        "wall_ms": int(round(1000 * (time.perf_counter() - start))),
    }
    return row, net, trace


def _risk_cell(args):
    cfg_dict, n, rep, V = args
    cfg = SweepConfig.from_dict(cfg_dict)
    with threadpool_limits(1):
        row, _, trace = train_cell(cfg, n, rep, V)
    row["_violations"] = trace.violations
    return row


def _rademacher_cell(args):
    cfg_dict, n, V = args
    cfg = SweepConfig.from_dict(cfg_dict)
    r = cfg.rademacher
    seed = derive_seed(cfg.base_seed, "rademacher", n)
    start = time.perf_counter()
    with threadpool_limits(1):
        est = rademacher_estimate(RademacherConfig(
            V=float(V), d=int(r.d), n=int(n), sign_draws=int(r.sign_draws), starts=int(r.starts),
            ascent_steps=int(r.ascent_steps), lr=float(r.lr), seed=seed,
        ))
    return {
        "experiment": "rademacher", "n": int(n), "V": float(V), "d": int(r.d),
        "sign_draws": int(r.sign_draws), "seed": int(seed), "estimate": est,
        "wall_ms": int(round(1000 * (time.perf_counter() - start))),
    }


def relative_error(a, b, floor=1e-6):
    """Elementwise ``|a - b| / max(|a|, |b|, floor)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def gradient_check_trial(layer_widths, seed, batch_size=8, h=1e-5):
    """Backprop vs central differences on one random net and batch."""
    rng = np.random.default_rng(seed)
    spec = ArchitectureSpec(tuple(layer_widths))
    net = build_network(spec, rng.uniform(0.5, 3.0), rng)
    X = rng.standard_normal((batch_size, spec.input_dim))
    y = rng.standard_normal(batch_size)
    g = np.concatenate([G.ravel() for G in gradient(net, X, y, LossKind.SQUARE_L2)])
    fd = np.concatenate([G.ravel() for G in finite_diff_gradient(net, X, y, LossKind.SQUARE_L2, h)])
    return float(relative_error(g, fd).max()), float(np.abs(g - fd).max()), spec.n_params


def _grad_cell(args):
    cfg_dict, arch, trial = args
    cfg = SweepConfig.from_dict(cfg_dict)
    gc = cfg.grad_check
    arch_id = "-".join(str(w) for w in arch)
    seed = derive_seed(cfg.base_seed, "grad_check", arch_id, trial)
    start = time.perf_counter()
    with threadpool_limits(1):
        rel, ab, n_params = gradient_check_trial(arch, seed, int(gc.batch_size), float(gc.h))
    return {
        "experiment": "grad_check", "architecture": arch_id, "trial": int(trial), "seed": int(seed),
        "n_params": n_params, "max_rel_err": rel, "max_abs_err": ab,
        "passed": bool(rel < gc.tolerance),
        "wall_ms": int(round(1000 * (time.perf_counter() - start))),
    }


def _pmap(fn, tasks, threads):
    if threads is None or threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------- sweeps


def _risk_summary(cfg, rows, key):
    groups = {}
    for r in rows:
        groups.setdefault(r[key], []).append(r)
    per = []
    for k in sorted(groups):
        g = groups[k]
        sq = np.array([r["risk_l2_sq"] for r in g])
        norms = np.array([r["total_l1_norm"] for r in g])
        per.append({
            key: k,
            "replications": len(g),
            "mean_sq_risk": float(sq.mean()),
            "median_sq_risk": float(np.median(sq)),
            "std": float(sq.std(ddof=1)) if len(g) > 1 else 0.0,
            "mean_risk_l1": float(np.mean([r["risk_l1"] for r in g])),
            "mean_total_l1": float(norms.mean()),
            "mean_max_row_variation": float(np.mean([r["max_row_variation"] for r in g])),
        })
    return per


def run_rate_sweep(cfg, threads=1):
    if cfg.experiment != "rate":
        raise ConfigError(f"run_rate_sweep needs experiment='rate', got {cfg.experiment!r}")
    cfg.validate()
    d = cfg.to_dict()
    tasks = [(d, int(n), rep, None) for n in cfg.n_list for rep in range(int(cfg.replications))]
    rows = sorted(_pmap(_risk_cell, tasks, threads), key=lambda r: (r["n"], r["replication"]))
    violations = sum(r.pop("_violations") for r in rows)
    per_n = _risk_summary(cfg, rows, "n")
    summary = {"experiment": "rate", "slope": None, "intercept": None, "r_squared": None}
    if len(per_n) >= 2:
        fit = fit_loglog_slope([(p["n"], p["mean_sq_risk"]) for p in per_n])
        summary.update(slope=fit.slope, intercept=fit.intercept, r_squared=fit.r_squared)
    norms = [r["total_l1_norm"] for r in rows]
    summary["per_n"] = per_n
    summary["realized_total_l1"] = {"mean": float(np.mean(norms)), "min": float(np.min(norms)),
                                    "max": float(np.max(norms))}
    summary["constraint_violations"] = violations
    summary["teacher"] = make_sweep_teacher(cfg).teacher_id
    return SweepResult("rate", rows, summary)


def run_variation_sweep(cfg, threads=1):
    if cfg.experiment != "variation":
        raise ConfigError(f"run_variation_sweep needs experiment='variation', got {cfg.experiment!r}")
    cfg.validate()
    d = cfg.to_dict()
    # one dataset per (n, rep), shared by every V
    tasks = [(d, int(n), rep, float(V)) for n in cfg.n_list for V in cfg.V_list
             for rep in range(int(cfg.replications))]
    rows = sorted(_pmap(_risk_cell, tasks, threads),
                  key=lambda r: (r["n"], r["constraint"], r["replication"]))
    violations = sum(r.pop("_violations") for r in rows)
    teacher = make_sweep_teacher(cfg)
    summary = {
        "experiment": "variation", "slope": None, "intercept": None, "r_squared": None,
        "per_V": _risk_summary(cfg, rows, "constraint"),
        "constraint_violations": violations,
        "teacher": teacher.teacher_id,
        "teacher_variation": variation(teacher.net).max_norm if teacher.net is not None else None,
    }
    for p in summary["per_V"]:
        p["V"] = p.pop("constraint")
    return SweepResult("variation", rows, summary)


def run_rademacher_sweep(cfg, threads=1):
    if cfg.experiment != "rademacher":
        raise ConfigError(f"run_rademacher_sweep needs experiment='rademacher', got {cfg.experiment!r}")
    cfg.validate()
    if len(set(cfg.n_list)) < 2:
        raise ConfigError("rademacher sweep needs at least 2 distinct n values for a slope fit")
    d = cfg.to_dict()
    V_list = sorted({float(v) for v in cfg.rademacher.V_list} | {float(cfg.rademacher.V)})
    tasks = [(d, int(n), V) for V in V_list for n in cfg.n_list]
    rows = sorted(_pmap(_rademacher_cell, tasks, threads), key=lambda r: (r["V"], r["n"]))
    by_V = {}
    for V in V_list:
        pts = [(r["n"], r["estimate"]) for r in rows if r["V"] == V]
        fit = fit_loglog_slope(pts)
        by_V[repr(V)] = {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared}
    main = by_V[repr(float(cfg.rademacher.V))]
    summary = {
        "experiment": "rademacher", **main,
        "V": float(cfg.rademacher.V),
        "per_n": [{"n": r["n"], "estimate": r["estimate"]} for r in rows
                  if r["V"] == float(cfg.rademacher.V)],
        "by_V": by_V,
        "note": "estimates are lower bounds on the expected supremum (multi-start ascent)",
    }
    return SweepResult("rademacher", rows, summary)


def run_grad_check(cfg, threads=1):
    if cfg.experiment != "grad_check":
        raise ConfigError(f"run_grad_check needs experiment='grad_check', got {cfg.experiment!r}")
    cfg.validate()
    d = cfg.to_dict()
    gc = cfg.grad_check
    tasks = [(d, list(a), t) for a in gc.architectures for t in range(int(gc.trials))]
    rows = _pmap(_grad_cell, tasks, threads)
    order = {"-".join(map(str, a)): i for i, a in enumerate(gc.architectures)}
    rows.sort(key=lambda r: (order[r["architecture"]], r["trial"]))
    per_arch = {}
    for r in rows:
        per_arch[r["architecture"]] = max(per_arch.get(r["architecture"], 0.0), r["max_rel_err"])
    summary = {
        "experiment": "grad_check",
        "slope": None, "intercept": None, "r_squared": None,
        "tolerance": gc.tolerance,
        "max_rel_err": max(per_arch.values()),
        "per_architecture": per_arch,
        "passed": all(r["passed"] for r in rows),
    }
    return SweepResult("grad_check", rows, summary)


RUNNERS = {
    "rate": run_rate_sweep,
    "variation": run_variation_sweep,
    "rademacher": run_rademacher_sweep,
    "grad_check": run_grad_check,
}


def run_sweep(cfg, threads=1):
    return RUNNERS[cfg.experiment](cfg, threads)


def output_dir(cfg, override=None):
    return override or os.environ.get(OUTPUT_ENV) or cfg.output


def write_outputs(result, out_dir, plot=True):
    """Write ``<experiment>.csv``, ``<experiment>_summary.json`` and, optionally, a figure."""
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, result.experiment)
    paths = {"csv": f"{base}.csv", "summary": f"{base}_summary.json"}
    result.write_csv(paths["csv"])
    result.write_summary(paths["summary"])
    if plot:
        from . import plotting
        paths["figure"] = plotting.plot_result(result, f"{base}.png")
    return paths


def with_overrides(cfg, **kw):
    cfg = copy.deepcopy(cfg)
    for k, v in kw.items():
        setattr(cfg, k, v)
    return cfg.validate()
