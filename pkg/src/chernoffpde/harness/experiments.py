"""Convergence, tangency and audit runners with CSV/text emission."""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..chernoff import ChernoffConfig, TestFunction, apply_S_grid, iterate, solve, tangency_residual
from ..fields import ScalarField, validate_coefficients
from ..grid import GridSpec, sample, sup_norm
from ..measure import evaluate_exact, propagate
from ..reference import exact_const, exact_const_quadrature, feynman_kac
from .problem import ProblemSpec

__all__ = [
    "NOISE_FLOOR",
    "ConvergenceReport",
    "TangencyReport",
    "AuditLine",
    "AuditReport",
    "closed_form_oracle",
    "fit_order",
    "run_convergence",
    "run_tangency",
    "run_audits",
    "run_mc_check",
]

NOISE_FLOOR = 1e-12


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def _write(text: str, path) -> str:
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def fit_order(xs: Sequence[float], ys: Sequence[float], floor: float = NOISE_FLOOR) -> Optional[float]:
    """Least-squares slope of ``log y`` against ``log x`` over points with
    ``y > floor``; ``None`` with fewer than three such points."""
    pts = [(x, y) for x, y in zip(xs, ys) if y > floor]
    if len(pts) < 3:
        return None
    lx, ly = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
    return float(np.polyfit(lx, ly, 1)[0])


def closed_form_oracle(spec: ProblemSpec) -> Callable[[float], Callable]:
    """Map ``t`` to a vectorised exact solution ``u(t, .)``, when one exists.

    Pure reaction (``a = b = 0``) has ``u = exp(c(x) t) u0(x)`` for any data;
    constant coefficients use the Gaussian closed form or quadrature.
    """
    co = spec.coeffs
    zero_transport = all(f.constant == 0 for f in (*co.a, *co.b))
    if zero_transport:
        return lambda t: (lambda X: np.exp(co.c(X) * t) * spec.u0(X))
    if not co.is_constant():
        raise ValueError("closed_form oracle needs constant coefficients or a = b = 0")
    a = [f.constant for f in co.a]
    b = [f.constant for f in co.b]
    c = co.c.constant
    if spec.u0_profile is not None:
        prof = spec.u0_profile
        return lambda t: (lambda X: np.array([exact_const(t, x, a, b, c, prof) for x in np.atleast_2d(X)]))
    return lambda t: (lambda X: np.array([exact_const_quadrature(t, x, a, b, c, spec.u0) for x in np.atleast_2d(X)]))


@dataclass
class ConvergenceReport:
    oracle: str
    ns: List[int]
    errors: List[float]
    order: Optional[float]
    wandering_radius: List[float]
    wall_time: List[float]
    time_errors: Dict[Tuple[int, float], float] = field(default_factory=dict)

    @property
    def local_orders(self) -> List[Optional[float]]:
        out = [None]
        for i in range(1, len(self.ns)):
            e0, e1 = self.errors[i - 1], self.errors[i]
            if e0 > NOISE_FLOOR and e1 > NOISE_FLOOR:
                out.append(math.log(e0 / e1) / math.log(self.ns[i] / self.ns[i - 1]))
            else:
                out.append(None)
        return out

    def header(self) -> str:
        lines = [
            f"# oracle={self.oracle}",
            f"# fitted_order={'' if self.order is None else repr(self.order)}",
            f"# wandering_radius={';'.join(repr(r) for r in self.wandering_radius)}",
            f"# wall_time_s={';'.join(f'{w:.6f}' for w in self.wall_time)}",
        ]
        return "\n".join(lines) + "\n"

    def body(self) -> str:
        rows = ["n,error,order_estimate"]
        for n, e, p in zip(self.ns, self.errors, self.local_orders):
            rows.append(f"{n},{_fmt(e)},{_fmt(p)}")
        return "\n".join(rows) + "\n"

    def to_csv(self, path=None) -> str:
        return _write(self.header() + self.body(), path)

    def times_csv(self, path=None) -> str:
        rows = ["n,t,error"] + [f"{n},{t!r},{e!r}" for (n, t), e in sorted(self.time_errors.items())]
        return _write("\n".join(rows) + "\n", path)


def _config(spec: ProblemSpec, n: int, t: Optional[float] = None, grid: Optional[GridSpec] = None):
    return ChernoffConfig(spec.t if t is None else t, n, grid or spec.grid, spec.mode, spec.budget, spec.extension)


def run_convergence(spec: ProblemSpec, threads=None, oracle: Optional[str] = None) -> ConvergenceReport:
    """Sup error over the inner box against the selected oracle, for each ``n``.

    With the closed-form or exact-tree oracle the error is also recorded at
    ``t_k = k t / 4``, ``k = 1..4``.
    """
    oracle = oracle or spec.oracles.selected
    if oracle is None:
        raise ValueError("run_convergence needs an enabled oracle")
    grid = spec.grid
    mask = grid.inner_mask(spec.inner_fraction)
    inner = grid.points()[mask]
    times = [k * spec.t / 4 for k in range(1, 5)] if oracle != "monte_carlo" else [spec.t]

    if oracle == "closed_form":
        exact = closed_form_oracle(spec)
        truth = {t: exact(t)(inner) for t in times}
        points = inner
    elif oracle == "monte_carlo":
        points = np.array(spec.oracles.points, dtype=float)
        o = spec.oracles
        truth = {spec.t: np.array([
            feynman_kac(spec.t, x, spec.coeffs, spec.u0, o.paths, o.steps, o.seed, threads).mean for x in points
        ])}
    elif oracle != "exact_tree":
        raise ValueError(f"unknown oracle {oracle!r}")

    report = ConvergenceReport(oracle, [], [], None, [], [])
    for n in spec.n_list:
        for t in times:
            start = time.perf_counter()
            gf = solve(_config(spec, n, t), spec.u0, spec.coeffs, threads)
            elapsed = time.perf_counter() - start
            if oracle == "exact_tree":
                points = inner
                ref = np.array([evaluate_exact(x, t, n, spec.coeffs, spec.u0, spec.budget) for x in inner])
            else:
                ref = truth[t]
            approx = gf(points)
            if not (np.all(np.isfinite(ref)) and np.all(np.isfinite(approx))):
                raise ArithmeticError(f"non-finite value comparing n={n}, t={t} against {oracle}")
            err = float(np.max(np.abs(approx - ref)))
            report.time_errors[(n, t)] = err
            if t == times[-1]:
                report.ns.append(n)
                report.errors.append(err)
                report.wandering_radius.append(float(gf.metadata.get("wandering_radius", float("nan"))))
                report.wall_time.append(elapsed)
    report.order = None
    slope = fit_order(report.ns, report.errors)
    if slope is not None:
        report.order = -slope
    return report


@dataclass
class TangencyReport:
    ts: List[float]
    residuals: List[float]
    slope: Optional[float]

    def to_csv(self, path=None) -> str:
        rows = [f"# fitted_slope={_fmt(self.slope)}", "t,residual"]
        rows += [f"{t!r},{r!r}" for t, r in zip(self.ts, self.residuals)]
        return _write("\n".join(rows) + "\n", path)


def run_tangency(spec: ProblemSpec, phi: Optional[TestFunction] = None, t_list: Optional[Sequence[float]] = None) -> TangencyReport:
    """Tangency residuals ``|S(t) phi - phi - t H phi| / t`` over the grid; reports only."""
    phi = phi or spec.tangency.build(spec.d)
    ts = [float(t) for t in (spec.tangency.t if t_list is None else t_list)]
    if len(ts) < 3:
        raise ValueError("run_tangency needs at least three t values")
    if ts != sorted(ts) or len(set(ts)) != len(ts) or ts[0] <= 0:
        raise ValueError("t values must be positive and strictly ascending")
    residuals = [tangency_residual(phi, spec.coeffs, spec.grid, t) for t in ts]
    return TangencyReport(ts, residuals, fit_order(ts, residuals))


@dataclass
class AuditLine:
    tag: str
    status: str  # PASS, FAIL or SKIP
    measured: Optional[float]
    bound: Optional[float]
    detail: str = ""

    def __str__(self) -> str:
        return f"[{self.tag}] {self.status} measured={_fmt(self.measured)} bound={_fmt(self.bound)} {self.detail}".rstrip()


@dataclass
class AuditReport:
    lines: List[AuditLine]

    @property
    def passed(self) -> bool:
        return all(line.status != "FAIL" for line in self.lines)

    def __getitem__(self, tag: str) -> AuditLine:
        for line in self.lines:
            if line.tag == tag:
                return line
        raise KeyError(tag)

    def to_text(self, path=None) -> str:
        rows = ["tag,status,measured,bound,detail"]
        rows += [f"{l.tag},{l.status},{_fmt(l.measured)},{_fmt(l.bound)},{l.detail}" for l in self.lines]
        return _write("\n".join(rows) + "\n", path)


def _check(tag, measured, bound, detail="", exact=False):
    ok = measured == bound if exact else measured <= bound
    return AuditLine(tag, "PASS" if ok else "FAIL", measured, bound, detail)


def doubled_grid(grid: GridSpec) -> GridSpec:
    """Box twice as wide about the same centre, same spacing."""
    lo, hi = np.array(grid.lo), np.array(grid.hi)
    mid, half = (lo + hi) / 2, (hi - lo) / 2
    return GridSpec(tuple(mid - 2 * half), tuple(mid + 2 * half), tuple(2 * (n - 1) + 1 for n in grid.nodes))


def run_audits(spec: ProblemSpec, threads=None) -> AuditReport:
    """Norm bound, constant preservation, contraction, mass law and domain doubling."""
    grid, co = spec.grid, spec.coeffs
    n_max = spec.n_list[-1]
    t = spec.t
    lines = []

    # one full step S(t) must satisfy |S f| <= (1 + |c| t) |f|
    c_norm = co.c_norm(grid)
    u0_grid = sample(spec.u0, grid, spec.extension, threads)
    one = apply_S_grid(t, u0_grid, co, threads)
    bound = (1 + c_norm * t) * sup_norm(u0_grid)
    lines.append(_check("norm_bound", sup_norm(one), bound + 1e-10, f"|c|={c_norm!r} t={t!r}"))

    # constants are preserved when c = 0
    co0 = co if co.c.constant == 0 else co.replace(c=ScalarField.const(0.0, co.d))
    ones = iterate(_config(spec, n_max), lambda X: np.ones(len(X)), co0, threads)
    detail = "c=0" if co0 is co else "c replaced by 0"
    lines.append(_check("constant_preservation", float(np.max(np.abs(ones.flat() - 1.0))), 0.0, detail, exact=True))

    report = validate_coefficients(co, grid)
    sol = solve(_config(spec, n_max), spec.u0, co, threads)
    if report.c_nonpositive:
        lines.append(_check("contraction", sup_norm(sol), sup_norm(u0_grid) + 1e-10, f"n={n_max}"))
    else:
        lines.append(AuditLine("contraction", "SKIP", None, None, "c <= 0 not satisfied on the sample"))

    centre = (np.array(grid.lo) + np.array(grid.hi)) / 2
    if co.c.constant == 0:
        n_mass = min(spec.n_list[0], 4)
        m = propagate(centre, t, n_mass, co, 0.0, spec.budget)
        lines.append(_check("mass_law", abs(m.total_mass - 1.0), 1e-12, f"c=0 n={n_mass}"))
    else:
        tau = t / n_max
        m = propagate(centre, tau, 1, co, 0.0, spec.budget)
        expected = 1.0 + tau * float(co.c(centre.reshape(1, -1))[0])
        lines.append(_check("mass_law", abs(m.total_mass - expected), 4 * np.spacing(abs(expected)) + 1e-300,
                            f"one step tau={tau!r}"))

    # the truncated box must not pollute the inner region
    inner_pts = grid.points()[grid.inner_mask(spec.inner_fraction)]
    big = solve(_config(spec, n_max, grid=doubled_grid(grid)), spec.u0, co, threads)
    measured = float(np.max(np.abs(big(inner_pts) - sol(inner_pts))))
    try:
        ref = closed_form_oracle(spec)(t)(inner_pts)
        n_err = float(np.max(np.abs(sol(inner_pts) - ref)))
        what = "closed-form error"
    except ValueError:
        prev = spec.n_list[-2] if len(spec.n_list) > 1 else max(n_max // 2, 1)
        coarse = solve(_config(spec, prev), spec.u0, co, threads)
        n_err = float(np.max(np.abs(sol(inner_pts) - coarse(inner_pts))))
        what = f"|u_{n_max} - u_{prev}|"
    lines.append(_check("domain_doubling", measured, 10 * n_err, f"bound = 10 x {what} at n={n_max}"))
    return AuditReport(lines)


@dataclass
class McCheckReport:
    rows: List[dict]

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)

    def to_csv(self, path=None) -> str:
        if not self.rows:
            return _write("", path)
        d = len(self.rows[0]["x"])
        head = [f"x{j + 1}" for j in range(d)] + ["n", "chernoff", "mc_mean", "mc_stderr", "diff", "tolerance", "pass"]
        out = [",".join(head)]
        for r in self.rows:
            out.append(",".join([*map(repr, r["x"]), str(r["n"]), repr(r["chernoff"]), repr(r["mc_mean"]),
                                 repr(r["mc_stderr"]), repr(r["diff"]), repr(r["tolerance"]), str(r["pass"]).lower()]))
        return _write("\n".join(out) + "\n", path)


def run_mc_check(spec: ProblemSpec, threads=None) -> McCheckReport:
    """Grid iterate vs Feynman-Kac at the oracle points.

    Tolerance per point: ``3 stderr + |u_n - u_{n_prev}|``.
    """
    o = spec.oracles
    points = np.array(o.points, dtype=float)
    sols = {n: solve(_config(spec, n), spec.u0, spec.coeffs, threads) for n in spec.n_list}
    rows = []
    for x in points:
        mc = feynman_kac(spec.t, x, spec.coeffs, spec.u0, o.paths, o.steps, o.seed, threads)
        prev = None
        for n in spec.n_list:
            u = float(sols[n](x.reshape(1, -1))[0])
            gap = abs(u - prev) if prev is not None else 0.0
            tol = 3 * mc.stderr + gap
            diff = abs(u - mc.mean)
            rows.append({"x": x.tolist(), "n": n, "chernoff": u, "mc_mean": mc.mean, "mc_stderr": mc.stderr,
                         "diff": diff, "tolerance": tol, "pass": diff <= tol})
            prev = u
    return McCheckReport(rows)
