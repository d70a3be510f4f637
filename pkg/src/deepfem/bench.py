"""Experiment driver: run a registered example end to end, compute
convergence orders, check the quadratic-recursion bound, and emit
CSV/markdown reports.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, fields

import numpy as np

from .autodiff import ConfigurationError
from .fem import build_mesh, interpolate_at_nodes, l2_norm, max_node_error
from .problems import ProblemCase, get_case
from .solvers import (
    SolverConfig,
    newton_semilinear,
    newton_nonlinear_eigen,
    power_eigen,
)
from .training import TrainConfig, network_eigenvalue, train

__all__ = [
    "ResultRow",
    "run_example",
    "convergence_order",
    "check_recursion_bound",
    "emit_report",
    "parse_report",
]


@dataclass
class ResultRow:
    h: float
    epochs: int | None = None
    e_dl: float | None = None
    k: int | None = None
    e_h: float | None = None
    order: float | None = None
    lambda_dl: float | None = None
    lambda_h: float | None = None
    err_lambda: float | None = None
    res: float | None = None
    train_time: float | None = None
    solve_time: float | None = None


_FLOAT_COLUMNS = (
    "h",
    "e_dl",
    "e_h",
    "order",
    "lambda_dl",
    "lambda_h",
    "err_lambda",
    "res",
    "train_time",
    "solve_time",
)
_COLUMN_ORDER = (
    "h",
    "epochs",
    "e_dl",
    "k",
    "e_h",
    "order",
    "lambda_dl",
    "lambda_h",
    "err_lambda",
    "res",
    "train_time",
    "solve_time",
)


def convergence_order(errors, hs) -> list[float]:
    """order_i = log2(err_i / err_{i+1}); requires hs strictly halving."""
    errors = [float(e) for e in errors]
    hs = [float(h) for h in hs]
    if len(errors) != len(hs):
        raise ConfigurationError("errors and hs must have equal length")
    for coarse, fine in zip(hs, hs[1:]):
        if abs(coarse / fine - 2.0) > 1e-9:
            raise ConfigurationError("mesh sizes must halve between rows")
    return [float(np.log2(a / b)) for a, b in zip(errors, errors[1:])]


def check_recursion_bound(a0: float, b: float, K: int) -> bool:
    """Worst-case iteration a_{k+1} = a_k^2 + b stays below the closed bound
    a_k <= a0^(2^k) + (2 + 1/(1 - 2 a0)) b for k = 0..K."""
    if not (0.0 <= a0 < 0.5):
        raise ValueError("need 0 <= a0 < 1/2")
    if not (0.0 < b < 0.25):
        raise ValueError("need 0 < b < 1/4")
    c = 2.0 + 1.0 / (1.0 - 2.0 * a0)
    a = a0
    for k in range(K + 1):
        bound = a0 ** (2.0**k) + c * b
        if a > bound:
            return False
        a = a * a + b
    return True


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------


def _initial_vector(mesh, case: ProblemCase, init: str, model, seed: int):
    """Interior coefficient vector for the mesh phase, per the init mode."""
    if init == "dl":
        if model is None:
            raise ConfigurationError("init 'dl' requires a trained model")
        u0 = interpolate_at_nodes(mesh, model.value_fn(case.domain))
    elif init == "exact":
        if case.exact is None:
            raise ConfigurationError(f"{case.id} has no exact solution")
        u0 = interpolate_at_nodes(mesh, case.exact)
    elif init.startswith("constant:"):
        u0 = np.full(mesh.n_interior, float(init.split(":", 1)[1]))
    elif init == "noise":
        rng = np.random.default_rng(seed)
        base = (
            interpolate_at_nodes(mesh, case.exact)
            if case.exact is not None
            else np.zeros(mesh.n_interior)
        )
        u0 = base + rng.standard_normal(mesh.n_interior)
    else:
        raise ConfigurationError(f"unknown init mode {init!r}")
    if case.eigen:
        norm = l2_norm(mesh, u0)
        if norm <= 0:
            raise ConfigurationError("cannot normalize a zero initial vector")
        u0 = u0 / norm
    return u0


def _sign_align(mesh, u, ref):
    """Flip the sign of u if that reduces the L2 distance to ref."""
    if l2_norm(mesh, u + ref) < l2_norm(mesh, u - ref):
        return -u
    return u


def run_example(example_id: str, overrides: dict | None = None, seed: int = 0):
    """Run Phase I (unless the init override skips it) and the mesh phase
    for each requested h; returns one ResultRow per h."""
    ov = dict(overrides or {})
    case = get_case(example_id, ov.get("dim"))
    hs = [float(h) for h in ov.get("hs", [case.eval_h])]
    epochs = int(ov.get("epochs", case.epochs_default))
    init = str(ov.get("init", "dl"))
    width = int(ov.get("width", 50))
    depth = int(ov.get("depth", 6))

    model = None
    train_time = None
    if init == "dl":
        net = case.network_config(width=width, depth=depth, seed=seed)
        tc = TrainConfig(
            epochs=epochs,
            batch_interior=case.batch_size,
            batch_boundary=case.batch_size,
            seed=seed,
        )
        model = train(net, case.loss_spec, case.domain, tc)
        train_time = model.wall_time

    eval_mesh = build_mesh(case.domain, case.eval_h)
    e_dl = lambda_dl = None
    if model is not None:
        if case.eigen:
            lambda_dl = network_eigenvalue(model, case.domain, eval_mesh)
        if case.exact is not None:
            fn = model.value_fn(case.domain)
            if case.eigen:
                u_dl = interpolate_at_nodes(eval_mesh, fn)
                u_dl = _sign_align(
                    eval_mesh,
                    u_dl / max(l2_norm(eval_mesh, u_dl), 1e-300),
                    interpolate_at_nodes(eval_mesh, case.exact),
                )
                e_dl = max_node_error(eval_mesh, u_dl, case.exact)
            else:
                e_dl = max_node_error(
                    eval_mesh, interpolate_at_nodes(eval_mesh, fn), case.exact
                )

    rows = []
    for h in hs:
        row = ResultRow(h=h, epochs=epochs if init == "dl" else None,
                        e_dl=e_dl, lambda_dl=lambda_dl, train_time=train_time)
        if case.phase2 is None:
            # coarse-phase-only case: measure the trained field on this mesh
            if model is not None and case.exact is not None:
                mesh = build_mesh(case.domain, h)
                row.e_dl = max_node_error(
                    mesh,
                    interpolate_at_nodes(mesh, model.value_fn(case.domain)),
                    case.exact,
                )
            rows.append(row)
            continue
        mesh = build_mesh(case.domain, h)
        p2 = case.phase2
        cfg = SolverConfig(eps=p2.eps(h), n_max=p2.n_max)
        u0 = _initial_vector(mesh, case, init, model, seed)
        t0 = time.perf_counter()
        try:
            if p2.kind == "newton":
                rep = newton_semilinear(mesh, p2.f, p2.fprime, u0, cfg)
            elif p2.kind == "power":
                rep = power_eigen(mesh, u0, cfg)
            elif p2.kind == "gp":
                rep = newton_nonlinear_eigen(mesh, p2.V, p2.beta, u0, cfg)
            else:
                raise ConfigurationError(f"unknown phase-2 kind {p2.kind!r}")
        except Exception:  # record solver failures in the row
            row.k = -1
            row.e_h = float("nan")
            row.res = float("nan")
            row.solve_time = time.perf_counter() - t0
            rows.append(row)
            continue
        row.solve_time = time.perf_counter() - t0
        row.k = rep.iterations
        if rep.lam is not None:
            row.lambda_h = rep.lam
            if case.exact_lambda is not None:
                row.err_lambda = abs(case.exact_lambda - rep.lam)
        if rep.residual_norm is not None:
            row.res = rep.residual_norm
        if case.exact is not None:
            u = rep.u
            if case.eigen:
                norm = l2_norm(mesh, u)
                if norm > 0:
                    u = u / norm
                u = _sign_align(mesh, u, interpolate_at_nodes(mesh, case.exact))
                diff = u - interpolate_at_nodes(mesh, case.exact)
                row.e_h = l2_norm(mesh, diff)
            else:
                row.e_h = max_node_error(mesh, u, case.exact)
        rows.append(row)

    _fill_orders(rows)
    return rows


def _fill_orders(rows: list[ResultRow]) -> None:
    """Attach order = log2(err_h / err_{h/2}) to each finer row."""
    if len(rows) < 2:
        return
    hs = [r.h for r in rows]
    for coarse, fine in zip(hs, hs[1:]):
        if abs(coarse / fine - 2.0) > 1e-9:
            return  # orders only defined on a halving ladder
    key = None
    for cand in ("e_h", "err_lambda", "e_dl"):
        vals = [getattr(r, cand) for r in rows]
        if all(v is not None and np.isfinite(v) and v > 0 for v in vals):
            key = cand
            break
    if key is None:
        return
    errs = [getattr(r, key) for r in rows]
    for row, order in zip(rows[1:], convergence_order(errs, hs)):
        row.order = order


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------


def _active_columns(rows) -> list[str]:
    return [
        c
        for c in _COLUMN_ORDER
        if any(getattr(r, c) is not None for r in rows)
    ] or list(_COLUMN_ORDER)


def _fmt_short(name: str, value) -> str:
    if value is None:
        return ""
    if name in _FLOAT_COLUMNS:
        return f"{float(value):.1e}"
    return str(value)


def _fmt_full(value) -> str:
    return "" if value is None else repr(float(value))


def emit_report(rows, format: str = "csv") -> str:
    """Render result rows; floats appear in 2-significant-digit scientific
    form plus a full-precision companion column."""
    cols = _active_columns(list(rows))
    header = []
    for c in cols:
        header.append(c)
        if c in _FLOAT_COLUMNS:
            header.append(c + "_full")
    table = []
    for r in rows:
        cells = []
        for c in cols:
            v = getattr(r, c)
            cells.append(_fmt_short(c, v))
            if c in _FLOAT_COLUMNS:
                cells.append(_fmt_full(v))
        table.append(cells)
    if format == "csv":
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for cells in table:
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()
    if format == "markdown":
        out = ["| " + " | ".join(header) + " |",
               "|" + "|".join(" --- " for _ in header) + "|"]
        for cells in table:
            out.append("| " + " | ".join(c if c else " " for c in cells) + " |")
        return "\n".join(out) + "\n"
    raise ConfigurationError(f"unknown report format {format!r}")


def parse_report(doc: str) -> list[ResultRow]:
    """Inverse of emit_report for CSV, using the full-precision columns."""
    lines = [ln for ln in doc.strip().splitlines() if ln]
    header = lines[0].split(",")
    valid = {f.name for f in fields(ResultRow)}
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        kwargs = {}
        for name, cell in zip(header, cells):
            if name.endswith("_full"):
                base = name[: -len("_full")]
                if cell:
                    kwargs[base] = float(cell)
            elif name in valid and name not in _FLOAT_COLUMNS:
                if cell:
                    kwargs[name] = int(cell)
        rows.append(ResultRow(**kwargs))
    return rows
