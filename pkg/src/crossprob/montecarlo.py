"""Simulation oracle for crossing and last-exit laws.

Paths are simulated in fixed blocks of 4096 on counter-based random
streams (Philox keyed by the seed, one stream per block index), so every
estimate is bit-identical for a given (seed, paths, steps) no matter how
many worker threads run the blocks.  Between grid points a Brownian
bridge correction accepts a crossing of the chord-linearized barrier
with probability exp(-2 d1 d2 / dt); each path consumes a single uniform
per scan direction, turned into the exact first-success law through the
running survival product.

Block draw layout is fixed (normals matrix, crossing uniform, last-exit
uniform, initial-value normal) so that different barrier configurations
evaluated at the same (seed, paths, steps) see common random numbers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .barriers import (
    ImagesLambertBarrier,
    TimeInvertedBarrier,
    TwoSidedConstantBarrier,
    TwoSidedCurvedBarrier,
    ONE_SIDED,
)
from .errors import DomainError
from .special import INV_SQRT_TWO_PI

BLOCK_PATHS = 4096
INVERTED_WINDOW = 100.0  # simulate the [T, inf) families on [T, 100 T]
_EXP_SKIP = 45.0         # bridge acceptance below exp(-45) is dropped


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("CROSSPROB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class McConfig:
    paths: int = 100_000
    steps: int = 4096
    seed: int = 0
    bridge_correction: bool = True
    start: float = 0.0

    def __post_init__(self):
        if self.paths < 1:
            raise DomainError("paths must be >= 1")
        if self.steps < 2:
            raise DomainError("steps must be >= 2")


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    std_error: float
    paths_used: int
    config: McConfig

    @property
    def ci95(self) -> tuple[float, float]:
        half = 1.96 * self.std_error
        return (self.estimate - half, self.estimate + half)


@dataclass(frozen=True)
class LastExitResult:
    times: np.ndarray
    sigma: tuple[McEstimate, ...]
    lam: tuple[McEstimate, ...] | None


@dataclass(frozen=True)
class FortetResult:
    lhs: float
    rhs: McEstimate


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------


def _block_rng(seed: int, block: int) -> np.random.Generator:
    key = np.array([seed % (1 << 64), 0x9E3779B97F4A7C15], dtype=np.uint64)
    counter = np.array([0, 0, 0, block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def _gen_block(seed: int, block: int, bp: int, steps: int):
    rng = _block_rng(seed, block)
    z = rng.standard_normal((bp, steps))
    u_cross = rng.random(bp)
    u_exit = rng.random(bp)
    z_init = rng.standard_normal(bp)
    return z, u_cross, u_exit, z_init


def _block_sizes(paths: int) -> list[int]:
    full, rem = divmod(paths, BLOCK_PATHS)
    sizes = [BLOCK_PATHS] * full
    if rem:
        sizes.append(rem)
    return sizes


# ---------------------------------------------------------------------------
# path kernels
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _k_cross(z, u, w0, g, sdt, dt, bridge):
    bp, m = z.shape
    out = np.zeros(bp, dtype=np.uint8)
    for i in range(bp):
        w = w0[i]
        if w >= g[0]:
            out[i] = 1
            continue
        surv = 1.0
        ui = u[i]
        for k in range(m):
            w2 = w + z[i, k] * sdt[k]
            if w2 >= g[k + 1]:
                out[i] = 1
                break
            if bridge:
                q = 2.0 * (g[k] - w) * (g[k + 1] - w2) / dt[k]
                if q < _EXP_SKIP:
                    surv *= 1.0 - math.exp(-q)
                    if ui > surv:
                        out[i] = 1
                        break
            w = w2
    return out


@njit(cache=True, nogil=True)
def _k_cross_two_sided(z, u, w0, g0, g1, sdt, dt, bridge):
    bp, m = z.shape
    out = np.zeros(bp, dtype=np.uint8)
    for i in range(bp):
        w = w0[i]
        if w >= g0[0] or w <= g1[0]:
            out[i] = 1
            continue
        surv = 1.0
        ui = u[i]
        for k in range(m):
            w2 = w + z[i, k] * sdt[k]
            if w2 >= g0[k + 1] or w2 <= g1[k + 1]:
                out[i] = 1
                break
            if bridge:
                pstay = 1.0
                q = 2.0 * (g0[k] - w) * (g0[k + 1] - w2) / dt[k]
                if q < _EXP_SKIP:
                    pstay *= 1.0 - math.exp(-q)
                q = 2.0 * (w - g1[k]) * (w2 - g1[k + 1]) / dt[k]
                if q < _EXP_SKIP:
                    pstay *= 1.0 - math.exp(-q)
                if pstay < 1.0:
                    surv *= pstay
                    if ui > surv:
                        out[i] = 1
                        break
            w = w2
    return out


@njit(cache=True, nogil=True)
def _k_last_touch(z, u, w0, g, sdt, dt, bridge):
    # last interval in which the path touches the barrier, scanned in
    # reverse time so one uniform per path gives the exact first-success
    # law; returns the right-endpoint grid index (0 = never touched)
    bp, m = z.shape
    last = np.zeros(bp, dtype=np.int32)
    wend = np.empty(bp, dtype=np.float64)
    for i in range(bp):
        w = w0[i]
        for k in range(m):
            w += z[i, k] * sdt[k]
        wend[i] = w
        ui = u[i]
        surv = 1.0
        w_hi = w
        for k in range(m, 0, -1):
            w_lo = w_hi - z[i, k - 1] * sdt[k - 1]
            a_hi = w_hi - g[k]
            a_lo = w_lo - g[k - 1]
            if a_hi == 0.0 or a_lo == 0.0 or (a_hi > 0.0) != (a_lo > 0.0):
                last[i] = k
                break
            if bridge:
                q = 2.0 * a_hi * a_lo / dt[k - 1]
                if q < _EXP_SKIP:
                    surv *= 1.0 - math.exp(-q)
                    if ui > surv:
                        last[i] = k
                        break
            w_hi = w_lo
    return last, wend


@njit(cache=True, nogil=True)
def _k_last_outside(z, u, w0, g0, g1, sdt, dt, bridge):
    # two-sided variant: last interval at-or-outside either corridor wall
    bp, m = z.shape
    last = np.zeros(bp, dtype=np.int32)
    wend = np.empty(bp, dtype=np.float64)
    for i in range(bp):
        w = w0[i]
        for k in range(m):
            w += z[i, k] * sdt[k]
        wend[i] = w
        ui = u[i]
        surv = 1.0
        w_hi = w
        for k in range(m, 0, -1):
            w_lo = w_hi - z[i, k - 1] * sdt[k - 1]
            hi_out = w_hi >= g0[k] or w_hi <= g1[k]
            lo_out = w_lo >= g0[k - 1] or w_lo <= g1[k - 1]
            if hi_out or lo_out:
                last[i] = k
                break
            if bridge:
                pstay = 1.0
                q = 2.0 * (g0[k] - w_hi) * (g0[k - 1] - w_lo) / dt[k - 1]
                if q < _EXP_SKIP:
                    pstay *= 1.0 - math.exp(-q)
                q = 2.0 * (w_hi - g1[k]) * (w_lo - g1[k - 1]) / dt[k - 1]
                if q < _EXP_SKIP:
                    pstay *= 1.0 - math.exp(-q)
                if pstay < 1.0:
                    surv *= pstay
                    if ui > surv:
                        last[i] = k
                        break
            w_hi = w_lo
    return last, wend


@njit(cache=True, nogil=True)
def _k_fortet(z, u, w0, g, t, sdt, dt, bridge, v, horizon):
    # per-path value of (T - tau)^{-1/2} phi((g(tau) - v)/sqrt(T - tau)),
    # zero when the path never crosses; tau interpolated on the chord for
    # grid-time detections, midpoint for bridge detections
    bp, m = z.shape
    out = np.zeros(bp, dtype=np.float64)
    for i in range(bp):
        w = w0[i]
        tau = -1.0
        g_tau = 0.0
        if w >= g[0]:
            tau = t[0]
            g_tau = g[0]
        else:
            surv = 1.0
            ui = u[i]
            for k in range(m):
                w2 = w + z[i, k] * sdt[k]
                if w2 >= g[k + 1]:
                    d1 = g[k] - w
                    ex = w2 - g[k + 1]
                    frac = 0.5 if d1 + ex <= 0.0 else d1 / (d1 + ex)
                    tau = t[k] + frac * dt[k]
                    g_tau = g[k] + frac * (g[k + 1] - g[k])
                    break
                if bridge:
                    q = 2.0 * (g[k] - w) * (g[k + 1] - w2) / dt[k]
                    if q < _EXP_SKIP:
                        surv *= 1.0 - math.exp(-q)
                        if ui > surv:
                            tau = t[k] + 0.5 * dt[k]
                            g_tau = 0.5 * (g[k] + g[k + 1])
                            break
                w = w2
        if tau >= 0.0:
            rem = horizon - tau
            if rem > 0.0:
                x = (g_tau - v) / math.sqrt(rem)
                out[i] = INV_SQRT_TWO_PI * math.exp(-0.5 * x * x) / math.sqrt(rem)
    return out


# ---------------------------------------------------------------------------
# task plumbing: one task = one barrier configuration on one time grid
# ---------------------------------------------------------------------------

_CROSS, _CROSS2, _TOUCH, _OUTSIDE, _FORTET = range(5)


@dataclass
class _Task:
    kind: int
    t: np.ndarray
    g: np.ndarray
    g1: np.ndarray | None = None
    start: float = 0.0
    init_scale: float = 0.0  # w0 = start + init_scale * z_init
    v: float = 0.0
    horizon: float = 0.0


def _time_grid(spec, steps: int):
    if isinstance(spec, TimeInvertedBarrier):
        # quadratic refinement near the left endpoint where the
        # first-hit density concentrates
        T = spec.horizon
        k = np.arange(steps + 1, dtype=np.float64) / steps
        return T * (1.0 + (INVERTED_WINDOW - 1.0) * k * k)
    return np.linspace(0.0, spec.horizon, steps + 1)


def _make_task(spec, steps: int, start: float) -> _Task:
    t = _time_grid(spec, steps)
    if isinstance(spec, (TwoSidedConstantBarrier, TwoSidedCurvedBarrier)):
        return _Task(_CROSS2, t, spec.upper_grid(t), g1=spec.lower_grid(t),
                     start=start)
    if isinstance(spec, TimeInvertedBarrier):
        if start != 0.0:
            raise DomainError("time-inverted simulation requires start = 0")
        return _Task(
            _CROSS, t, spec.grid(t), start=0.0,
            init_scale=math.sqrt(spec.horizon),
        )
    return _Task(_CROSS, t, spec.grid(t), start=start)


def _run_tasks(tasks, paths: int, seed: int, steps: int, bridge: bool,
               workers: int | None, collect):
    """Drive all tasks over shared per-block draws; reduce in block order.

    collect(task_index, block_index, kernel_output) stores raw results;
    the caller reduces them afterwards (keeping reduction deterministic).
    """
    sizes = _block_sizes(paths)
    prepared = []
    for task in tasks:
        sdt = np.sqrt(np.diff(task.t))
        dt = np.diff(task.t)
        prepared.append((task, sdt, dt))

    def run_block(block: int):
        bp = sizes[block]
        z, u_cross, u_exit, z_init = _gen_block(seed, block, bp, steps)
        results = []
        for task, sdt, dt in prepared:
            w0 = np.full(bp, task.start)
            if task.init_scale != 0.0:
                w0 += task.init_scale * z_init
            if task.kind == _CROSS:
                out = _k_cross(z, u_cross, w0, task.g, sdt, dt, bridge)
            elif task.kind == _CROSS2:
                out = _k_cross_two_sided(
                    z, u_cross, w0, task.g, task.g1, sdt, dt, bridge)
            elif task.kind == _TOUCH:
                out = _k_last_touch(z, u_exit, w0, task.g, sdt, dt, bridge)
            elif task.kind == _OUTSIDE:
                out = _k_last_outside(
                    z, u_exit, w0, task.g, task.g1, sdt, dt, bridge)
            else:
                out = _k_fortet(z, u_cross, w0, task.g, task.t, sdt, dt,
                                bridge, task.v, task.horizon)
            results.append(out)
        return results

    nblocks = len(sizes)
    workers = default_workers() if workers is None else max(1, workers)
    if workers == 1 or nblocks == 1:
        per_block = (run_block(b) for b in range(nblocks))
        for block, results in enumerate(per_block):
            for ti, out in enumerate(results):
                collect(ti, block, out)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_block, b) for b in range(nblocks)]
            for block, fut in enumerate(futures):
                for ti, out in enumerate(fut.result()):
                    collect(ti, block, out)


def _binomial(count: int, n: int, cfg: McConfig) -> McEstimate:
    p = count / n
    se = math.sqrt(p * (1.0 - p) / n)
    return McEstimate(p, se, n, cfg)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def mc_crossing(spec, cfg: McConfig, workers: int | None = None) -> McEstimate:
    """Estimate P(the path meets the barrier inside the simulated window).

    The window is [0, horizon] for all families except the time-inverted
    one, which is simulated on [horizon, 100 * horizon] from a normal
    start at the inner endpoint.
    """
    task = _make_task(spec, cfg.steps, cfg.start)
    counts = [0] * len(_block_sizes(cfg.paths))

    def collect(ti, block, out):
        counts[block] = int(np.sum(out, dtype=np.int64))

    _run_tasks([task], cfg.paths, cfg.seed, cfg.steps,
               cfg.bridge_correction, workers, collect)
    return _binomial(sum(counts), cfg.paths, cfg)


def _snap_times(times, t_grid):
    times = np.asarray(times, dtype=np.float64)
    idx = np.searchsorted(t_grid, times)
    idx = np.clip(idx, 1, len(t_grid) - 1)
    left_closer = np.abs(t_grid[idx - 1] - times) <= np.abs(t_grid[idx] - times)
    idx = np.where(left_closer, idx - 1, idx)
    return idx.astype(np.int64)


def mc_last_exit(spec, cfg: McConfig, times,
                 workers: int | None = None) -> LastExitResult:
    """Empirical CDFs of the last exceedance (sigma) and last touch
    (lambda) at the requested times, snapped to the step grid.

    Per path the backward scan yields the last touched interval; sigma
    uses the identity "last exceedance <= t iff last touch <= t and the
    endpoint value is below the barrier end".  Paths that never touch
    count toward both events at every t > 0.
    """
    if not isinstance(spec, ONE_SIDED):
        raise DomainError("mc_last_exit needs a one-sided [0, horizon] barrier")
    task = _make_task(spec, cfg.steps, cfg.start)
    task = replace(task, kind=_TOUCH)
    idx = _snap_times(times, task.t)
    g_end = task.g[-1]
    nb = len(_block_sizes(cfg.paths))
    sig = np.zeros((nb, len(idx)), dtype=np.int64)
    lam = np.zeros((nb, len(idx)), dtype=np.int64)

    def collect(ti, block, out):
        last, wend = out
        below = wend <= g_end
        for j, k in enumerate(idx):
            touched_by = last <= k
            lam[block, j] = np.count_nonzero(touched_by)
            sig[block, j] = np.count_nonzero(touched_by & below)

    _run_tasks([task], cfg.paths, cfg.seed, cfg.steps,
               cfg.bridge_correction, workers, collect)
    sig_tot = sig.sum(axis=0)
    lam_tot = lam.sum(axis=0)
    return LastExitResult(
        times=task.t[idx],
        sigma=tuple(_binomial(int(c), cfg.paths, cfg) for c in sig_tot),
        lam=tuple(_binomial(int(c), cfg.paths, cfg) for c in lam_tot),
    )


def mc_last_outside(spec, cfg: McConfig, times,
                    workers: int | None = None) -> LastExitResult:
    """Two-sided analogue of mc_last_exit: empirical CDF of the last time
    at or outside either corridor wall."""
    if not isinstance(spec, (TwoSidedConstantBarrier, TwoSidedCurvedBarrier)):
        raise DomainError("mc_last_outside needs a two-sided corridor")
    task = _make_task(spec, cfg.steps, cfg.start)
    task = replace(task, kind=_OUTSIDE)
    idx = _snap_times(times, task.t)
    g0_end, g1_end = task.g[-1], task.g1[-1]
    nb = len(_block_sizes(cfg.paths))
    sig = np.zeros((nb, len(idx)), dtype=np.int64)

    def collect(ti, block, out):
        last, wend = out
        inside = (wend < g0_end) & (wend > g1_end)
        for j, k in enumerate(idx):
            sig[block, j] = np.count_nonzero((last <= k) & inside)

    _run_tasks([task], cfg.paths, cfg.seed, cfg.steps,
               cfg.bridge_correction, workers, collect)
    sig_tot = sig.sum(axis=0)
    return LastExitResult(
        times=task.t[idx],
        sigma=tuple(_binomial(int(c), cfg.paths, cfg) for c in sig_tot),
        lam=None,
    )


def mc_fortet_check(spec, v: float, u: float, cfg: McConfig,
                    workers: int | None = None) -> FortetResult:
    """Check the hitting-time integral equation for a one-sided barrier.

    lhs = phi((u - v)/sqrt(T))/sqrt(T) analytically; rhs averages
    (T - tau)^{-1/2} phi((g(tau) - v)/sqrt(T - tau)) over simulated paths
    started at u, zero for paths that never cross (the integrand vanishes
    there since v exceeds the barrier end).
    """
    if not isinstance(spec, ONE_SIDED):
        raise DomainError("mc_fortet_check needs a one-sided barrier")
    T = spec.horizon
    if not v > spec.value(T):
        raise DomainError(f"need v > barrier end {spec.value(T)}, got {v}")
    if not u <= spec.value(0.0):
        raise DomainError(f"need start u <= barrier start {spec.value(0.0)}")
    task = _make_task(spec, cfg.steps, u)
    task = replace(task, kind=_FORTET, v=v, horizon=T)
    nb = len(_block_sizes(cfg.paths))
    sums = [0.0] * nb
    sqsums = [0.0] * nb

    def collect(ti, block, out):
        sums[block] = float(np.sum(out))
        sqsums[block] = float(np.sum(out * out))

    _run_tasks([task], cfg.paths, cfg.seed, cfg.steps,
               cfg.bridge_correction, workers, collect)
    n = cfg.paths
    mean = math.fsum(sums) / n
    var = max(0.0, math.fsum(sqsums) / n - mean * mean)
    rhs = McEstimate(mean, math.sqrt(var / n), n, cfg)
    sT = math.sqrt(T)
    lhs = INV_SQRT_TWO_PI * math.exp(-0.5 * ((u - v) / sT) ** 2) / sT
    return FortetResult(lhs, rhs)


# ---------------------------------------------------------------------------
# agreement suite: analytic formulas vs the simulation oracle
# ---------------------------------------------------------------------------


def _suite_specs():
    # import here: analytics sits on top of this module's siblings and is
    # only needed when the suite runs
    from .barriers import (
        HermiteBarrier,
        LinearBarrier,
        LogRemainingBarrier,
        SqrtRemainingBarrier,
    )

    e = math.e
    return [
        ("linear", LinearBarrier(1.0, 0.0, 1.0)),
        ("sqrt-remaining", SqrtRemainingBarrier(1.0, 1.0, 1.0)),
        ("log-remaining", LogRemainingBarrier(1.5, e, 1.0)),
        ("hermite", HermiteBarrier(2.0, 10.0, 2, 1.0)),
        ("time-inverted", TimeInvertedBarrier(SqrtRemainingBarrier(1.0, 1.0, 1.0))),
        ("two-sided-constant", TwoSidedConstantBarrier(1.0, -1.0, 1.0)),
        ("two-sided-curved", TwoSidedCurvedBarrier(1.0, -1.0, 0.5, 1.0)),
        ("images-lambert", ImagesLambertBarrier(1.0, 2.0, 1.0)),
    ]


def agreement_suite(paths: int = 1_000_000, steps: int = 4096, seed: int = 0,
                    bridge: bool = True, exit_paths: int = 250_000,
                    workers: int | None = None) -> dict:
    """Run every analytic-vs-simulation comparison and return a report.

    One shared pass over the draws covers the eight crossing
    configurations and the three integral-equation triples; a second,
    smaller pass covers the last-exit laws at nine grid times.  The
    report is a plain JSON-compatible dict and is deterministic for a
    given (paths, steps, seed): serializing two runs yields identical
    bytes.
    """
    from . import analytics
    from .barriers import LinearBarrier, SqrtRemainingBarrier

    specs = _suite_specs()
    cross_tol = 5e-3

    # ---- tier 1: crossing + integral-equation tasks on shared draws ----
    tasks = []
    rows = []
    for name, spec in specs:
        if isinstance(spec, ImagesLambertBarrier):
            res = analytics.images_crossing(spec)
        else:
            res = analytics.crossing_prob(spec)
        if isinstance(spec, TimeInvertedBarrier):
            # simulation stops at the window edge; compare against the
            # analytic CDF there (the remaining tail is far below the
            # tolerance for this configuration)
            analytic = analytics.hitting_cdf_inverted(
                spec, INVERTED_WINDOW * spec.horizon)
        else:
            analytic = res.probability
        row = {"name": name, "analytic": analytic}
        if analytic is None:
            row["refused"] = res.failed()
            row["note"] = ("crossing formula refuses (start above barrier); "
                           "agreement carried by the last-exit rows")
            row["pass"] = not res.conditions_met
        else:
            tasks.append(_make_task(spec, steps, 0.0))
            row["task"] = len(tasks) - 1
        rows.append(row)

    fortet_rows = [
        {"name": "linear", "u": 0.0, "v": 1.5},
        {"name": "linear-degenerate-start", "u": 1.0, "v": 1.5},
        {"name": "sqrt-remaining", "u": 0.0, "v": 2.0},
    ]
    fortet_specs = [
        LinearBarrier(1.0, 0.0, 1.0),
        LinearBarrier(1.0, 0.0, 1.0),
        SqrtRemainingBarrier(1.0, 0.5, 1.0),
    ]
    fortet_base = len(tasks)
    for frow, fspec in zip(fortet_rows, fortet_specs):
        task = _make_task(fspec, steps, frow["u"])
        task = replace(task, kind=_FORTET, v=frow["v"], horizon=fspec.horizon)
        tasks.append(task)

    nb = len(_block_sizes(paths))
    counts = np.zeros((len(tasks), nb), dtype=np.int64)
    fsums = np.zeros((len(tasks), nb))
    fsq = np.zeros((len(tasks), nb))

    def collect(ti, block, out):
        if tasks[ti].kind == _FORTET:
            fsums[ti, block] = float(np.sum(out))
            fsq[ti, block] = float(np.sum(out * out))
        else:
            counts[ti, block] = int(np.sum(out, dtype=np.int64))

    _run_tasks(tasks, paths, seed, steps, bridge, workers, collect)

    cfg = McConfig(paths=paths, steps=steps, seed=seed,
                   bridge_correction=bridge)
    report_cross = []
    for row in rows:
        out = {"name": row["name"]}
        if "task" in row:
            est = _binomial(int(counts[row["task"]].sum()), paths, cfg)
            err = abs(row["analytic"] - est.estimate)
            tol = max(3.0 * est.std_error, cross_tol)
            out.update(analytic=row["analytic"], estimate=est.estimate,
                       std_error=est.std_error, abs_error=err,
                       tolerance=tol)
            out["pass"] = err < tol
        else:
            out.update(analytic=None, refused=row["refused"],
                       note=row["note"])
            out["pass"] = row["pass"]
        report_cross.append(out)

    report_fortet = []
    for j, frow in enumerate(fortet_rows):
        ti = fortet_base + j
        mean = math.fsum(fsums[ti]) / paths
        var = max(0.0, math.fsum(fsq[ti]) / paths - mean * mean)
        se = math.sqrt(var / paths)
        fspec = fortet_specs[j]
        sT = math.sqrt(fspec.horizon)
        lhs = (INV_SQRT_TWO_PI
               * math.exp(-0.5 * ((frow["u"] - frow["v"]) / sT) ** 2) / sT)
        err = abs(lhs - mean)
        ok = err <= 3.0 * se if se > 0 else err < 1e-12
        report_fortet.append({
            "name": frow["name"], "u": frow["u"], "v": frow["v"],
            "lhs": lhs, "rhs": mean, "std_error": se, "pass": bool(ok),
        })

    # ---- tier 2: last-exit laws at nine grid times, one shared pass ----
    frac = np.arange(1, 10) / 10.0
    exit_tasks = []
    exit_meta = []
    for name, spec in specs:
        if isinstance(spec, (TimeInvertedBarrier, ImagesLambertBarrier)):
            continue
        two = isinstance(spec, (TwoSidedConstantBarrier, TwoSidedCurvedBarrier))
        task = _make_task(spec, steps, 0.0)
        task = replace(task, kind=_OUTSIDE if two else _TOUCH)
        idx = _snap_times(frac * spec.horizon, task.t)
        exit_meta.append((name, spec, two, idx, task))
        exit_tasks.append(task)

    nb2 = len(_block_sizes(exit_paths))
    sig = np.zeros((len(exit_tasks), nb2, len(frac)), dtype=np.int64)
    lam = np.zeros_like(sig)

    def collect_exit(ti, block, out):
        last, wend = out
        _, _, two, idx, task = exit_meta[ti]
        if two:
            keep = (wend < task.g[-1]) & (wend > task.g1[-1])
        else:
            keep = wend <= task.g[-1]
        for j, k in enumerate(idx):
            touched_by = last <= k
            lam[ti, block, j] = np.count_nonzero(touched_by)
            sig[ti, block, j] = np.count_nonzero(touched_by & keep)

    _run_tasks(exit_tasks, exit_paths, seed, steps, bridge, None
               if workers is None else workers, collect_exit)

    report_exit = []
    for ti, (name, spec, two, idx, task) in enumerate(exit_meta):
        times = task.t[idx]
        if two:
            pairs = [("sigma", sig[ti], analytics.two_sided_sigma_cdf)]
        else:
            pairs = [("sigma", sig[ti], analytics.sigma_cdf)]
            if name in ("linear", "sqrt-remaining"):
                pairs.append(("lambda", lam[ti], analytics.lambda_cdf))
        for law, per_block, fn in pairs:
            totals = per_block.sum(axis=0)
            analytic = [fn(spec, float(t)) for t in times]
            ests, zs, ok = [], [], True
            for a, c in zip(analytic, totals):
                p = c / exit_paths
                se = math.sqrt(p * (1.0 - p) / exit_paths)
                err = abs(a - p)
                ests.append((p, se))
                zs.append(err / max(se, 1e-12))
                ok = ok and err <= 3.0 * se
            report_exit.append({
                "name": name, "law": law,
                "times": [float(t) for t in times],
                "analytic": analytic,
                "estimate": [p for p, _ in ests],
                "std_error": [s for _, s in ests],
                "max_z": max(zs), "pass": bool(ok),
            })

    all_parts = report_cross + report_fortet + report_exit
    return {
        "paths": paths, "exit_paths": exit_paths, "steps": steps,
        "seed": seed, "bridge_correction": bridge,
        "crossing": report_cross,
        "fortet": report_fortet,
        "last_exit": report_exit,
        "all_pass": all(p["pass"] for p in all_parts),
    }
