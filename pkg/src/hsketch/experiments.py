"""Batch experiment runner: seeded trials, scheme comparison, CSV emission.

Trials are embarrassingly parallel (trial t uses seed base_seed + t) and the
CSV is written in deterministic trial order regardless of completion order,
so identical configs produce byte-identical output.  ``HSKETCH_THREADS``
caps worker processes; 1 disables multiprocessing.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NoSamplesError, SaturatedError, SchemaError
from .estimator import (
    column_aggregates,
    estimate_f,
    estimate_modulo,
    estimate_support,
    estimate_union,
)
from .groups import FunctionTable, dft, make_group
from .sampler import SamplerSketch, equal_memory_m_prime, sample_f_moment
from .tower import IntegerTowerSketch, SketchConfig, TowerSketch, default_window
from .workloads import WorkloadSpec, gen_stream, signed_representative

CSV_HEADER = [
    "workload",
    "scheme",
    "quantity",
    "trial",
    "seed",
    "estimate",
    "imag_residual",
    "truth",
]


@dataclass(frozen=True)
class SchemeSpec:
    """One estimation scheme: fourier{m} or a sampler at matched memory."""

    kind: str  # fourier | fingerprint | ideal-oracle
    m: int  # tower accuracy parameter (fourier) or the budget it matches
    r: int = 3
    clamp_nonnegative: bool = False
    literal_truncation: bool = False

    def label(self) -> str:
        if self.kind == "fourier":
            return "fourier"
        if self.kind == "ideal-oracle":
            return "ideal-oracle"
        if self.kind == "fingerprint":
            return f"fingerprint-r{self.r}"
        raise SchemaError(f"unknown scheme kind {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    workloads: tuple[WorkloadSpec, ...]
    schemes: tuple[SchemeSpec, ...]
    trials: int
    base_seed: int
    p: int = 7

    def __post_init__(self):
        if self.trials < 1:
            raise SchemaError("trials must be >= 1")


def thread_budget() -> int:
    env = os.environ.get("HSKETCH_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _map_trials(fn: Callable, args_list: list) -> list:
    workers = min(thread_budget(), len(args_list))
    if workers <= 1:
        return [fn(args) for args in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args_list, chunksize=1))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_rows(path, rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row)


# -- modulo-distribution experiment -------------------------------------------


def _modulo_trial(args) -> list[list]:
    spec, schemes, p, trial, seed = args
    vs, ys, truth = gen_stream(spec)
    support_mod = truth.support_size_mod(p)
    residue_truth = truth.residue_counts(p)
    rows: list[list] = []
    group = make_group([p])
    for scheme in schemes:
        label = scheme.label()
        estimates: dict[str, tuple[float, float]] = {}
        if scheme.kind == "fourier":
            a, b = default_window(scheme.m)
            sk = IntegerTowerSketch(SketchConfig(None, scheme.m, a, b, seed, "poisson"))
            sk.update_batch(vs, ys)
            agg = column_aggregates(
                sk.reduce_values_mod(p), literal=scheme.literal_truncation
            )
            rep = estimate_support(
                agg, p, clamp_nonnegative=scheme.clamp_nonnegative,
                literal=scheme.literal_truncation,
            )
            estimates["lambda0"] = (rep.estimate, rep.imag_residual)
            for j in range(1, p):
                rep = estimate_modulo(
                    agg, p, j, clamp_nonnegative=scheme.clamp_nonnegative,
                    literal=scheme.literal_truncation,
                )
                estimates[f"lambda{j}"] = (rep.estimate, rep.imag_residual)
        else:
            m_prime = equal_memory_m_prime(scheme.m, scheme.r, group)
            if scheme.kind == "ideal-oracle":
                m_prime = 3 * scheme.m
            sampler = SamplerSketch(
                group,
                m_prime,
                seed,
                r=scheme.r,
                mode="ideal" if scheme.kind == "ideal-oracle" else "fingerprint",
            )
            sampler.update_batch(vs, np.mod(ys, p))
            try:
                lam0 = sampler.estimate_support()
            except SaturatedError:
                lam0 = math.nan
            estimates["lambda0"] = (lam0, 0.0)
            tally = sampler.singleton_tally()
            total = sum(tally.values())
            for j in range(1, p):
                if total == 0 or math.isnan(lam0):
                    estimates[f"lambda{j}"] = (math.nan, 0.0)
                else:
                    estimates[f"lambda{j}"] = (lam0 * tally.get((j,), 0) / total, 0.0)
        for j in range(p):
            quantity = f"lambda{j}"
            est, imag = estimates[quantity]
            tr = support_mod if j == 0 else residue_truth[j]
            rows.append(
                [spec.name, label, quantity, trial, seed, _fmt(est), _fmt(imag), _fmt(tr)]
            )
    return rows


def run_modulo_experiment(config: ExperimentConfig, out_path) -> None:
    args = [
        (spec, config.schemes, config.p, trial, config.base_seed + trial)
        for spec in config.workloads
        for trial in range(config.trials)
    ]
    results = _map_trials(_modulo_trial, args)
    write_rows(out_path, [row for rows in results for row in rows])


# -- L2-style moment experiment ------------------------------------------------


def squared_rep_table(modulus: int) -> FunctionTable:
    group = make_group([modulus])
    return FunctionTable.from_function(
        group, lambda x: float(signed_representative(x[0], modulus)) ** 2
    )


def _l2_trial(args) -> list[list]:
    spec, schemes, modulus, trial, seed = args
    vs, ys, truth = gen_stream(spec)
    group = make_group([modulus])
    ftable = squared_rep_table(modulus)
    struth = dft(group, ftable)
    exact = truth.moment_mod(modulus, ftable)
    rows: list[list] = []
    for scheme in schemes:
        label = scheme.label()
        if scheme.kind == "fourier":
            a, b = default_window(scheme.m)
            sk = TowerSketch(SketchConfig(group, scheme.m, a, b, seed, "poisson"))
            sk.update_batch(vs, np.mod(ys, modulus))
            rep = estimate_f(
                sk, struth, clamp_nonnegative=scheme.clamp_nonnegative,
                literal=scheme.literal_truncation,
            )
            est, imag = rep.estimate, rep.imag_residual
        else:
            m_prime = (
                3 * scheme.m
                if scheme.kind == "ideal-oracle"
                else equal_memory_m_prime(scheme.m, scheme.r, group)
            )
            sampler = SamplerSketch(
                group, m_prime, seed, r=scheme.r,
                mode="ideal" if scheme.kind == "ideal-oracle" else "fingerprint",
            )
            sampler.update_batch(vs, np.mod(ys, modulus))
            try:
                est = sample_f_moment(sampler, ftable)
            except (NoSamplesError, SaturatedError):
                est = math.nan
            imag = 0.0
        rows.append([spec.name, label, "l2", trial, seed, _fmt(est), _fmt(imag), _fmt(exact)])
    return rows


def run_l2_experiment(config: ExperimentConfig, out_path, modulus: int = 128) -> None:
    args = [
        (spec, config.schemes, modulus, trial, config.base_seed + trial)
        for spec in config.workloads
        for trial in range(config.trials)
    ]
    results = _map_trials(_l2_trial, args)
    write_rows(out_path, [row for rows in results for row in rows])


# -- union experiment -----------------------------------------------------------


@dataclass(frozen=True)
class UnionWorkload:
    """Two Z_p streams over a shared universe with a prescribed overlap."""

    name: str
    only_first: int
    only_second: int
    overlap: int
    p: int = 7
    shuffle_seed: int = 0

    @property
    def union_size(self) -> int:
        return self.only_first + self.only_second + self.overlap

    def streams(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(ids1, values1, ids2, values2); values are nonzero residues."""
        n1 = self.only_first + self.overlap
        ids1 = np.arange(n1, dtype=np.int64)
        ids2 = np.arange(self.only_first, self.union_size, dtype=np.int64)
        from . import prf as _prf

        def values(ids, salt):
            u = _prf.draw(
                _prf.stream_state(self.shuffle_seed, _prf.DOMAIN_VALUE, ids),
                _prf.tuple_key(j=salt),
            )
            return 1 + (u % np.uint64(self.p - 1)).astype(np.int64)

        return ids1, values(ids1, 11), ids2, values(ids2, 12)


def _union_trial(args) -> list[list]:
    wl, m, trial, seed, clamp, literal = args
    group = make_group([wl.p])
    a, b = default_window(m)
    ids1, y1, ids2, y2 = wl.streams()
    s1 = TowerSketch(SketchConfig(group, m, a, b, seed, "poisson"))
    s2 = TowerSketch(SketchConfig(group, m, a, b, seed, "poisson"))
    s1.update_batch(ids1, y1)
    s2.update_batch(ids2, y2)
    rep = estimate_union(s1, s2, clamp_nonnegative=clamp, literal=literal)
    return [
        [wl.name, "fourier", "union", trial, seed, _fmt(rep.estimate),
         _fmt(rep.imag_residual), _fmt(wl.union_size)]
    ]


def run_union_experiment(
    wl: UnionWorkload, m: int, trials: int, base_seed: int, out_path,
    clamp_nonnegative: bool = False, literal_truncation: bool = False,
) -> None:
    args = [
        (wl, m, trial, base_seed + trial, clamp_nonnegative, literal_truncation)
        for trial in range(trials)
    ]
    results = _map_trials(_union_trial, args)
    write_rows(out_path, [row for rows in results for row in rows])


# -- summaries -------------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    workload: str
    scheme: str
    quantity: str
    trials: int
    mean: float
    std: float
    bias: float
    rmse: float
    truth: float


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise SchemaError(f"unexpected CSV header {header}")
        out = []
        for row in reader:
            if len(row) != len(CSV_HEADER):
                raise SchemaError(f"malformed row {row}")
            out.append(
                {
                    "workload": row[0],
                    "scheme": row[1],
                    "quantity": row[2],
                    "trial": int(row[3]),
                    "seed": int(row[4]),
                    "estimate": float(row[5]),
                    "imag_residual": float(row[6]),
                    "truth": float(row[7]),
                }
            )
    return out


def summarize(path) -> list[SummaryRow]:
    """Per-(workload, scheme, quantity) mean/std/bias/RMSE against truth."""
    rows = read_rows(path)
    groups: dict[tuple[str, str, str], list[dict]] = {}
    for row in rows:
        groups.setdefault((row["workload"], row["scheme"], row["quantity"]), []).append(row)
    out = []
    for (wl, scheme, quantity), items in sorted(groups.items()):
        est = np.array([r["estimate"] for r in items])
        truth = items[0]["truth"]
        finite = est[np.isfinite(est)]
        if finite.size == 0:
            mean = std = bias = rmse = math.nan
        else:
            mean = float(finite.mean())
            std = float(finite.std(ddof=1)) if finite.size > 1 else 0.0
            bias = mean - truth
            rmse = float(np.sqrt(np.mean((finite - truth) ** 2)))
        out.append(SummaryRow(wl, scheme, quantity, len(items), mean, std, bias, rmse, truth))
    return out


def format_summary(rows: list[SummaryRow]) -> str:
    lines = [
        f"{'workload':<12} {'scheme':<16} {'quantity':<10} {'trials':>6} "
        f"{'truth':>12} {'mean':>12} {'std':>10} {'bias':>10} {'rmse':>10}"
    ]
    for r in rows:
        lines.append(
            f"{r.workload:<12} {r.scheme:<16} {r.quantity:<10} {r.trials:>6} "
            f"{r.truth:>12.2f} {r.mean:>12.2f} {r.std:>10.2f} {r.bias:>10.2f} {r.rmse:>10.2f}"
        )
    return "\n".join(lines)
