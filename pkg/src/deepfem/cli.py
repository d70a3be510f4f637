"""Command-line interface.

``deepfem run`` executes a registered example end to end and writes a
report (optionally with figures); ``deepfem check`` runs fast self-check
suites and exits 0 iff everything passes.  The DEEPFEM_THREADS environment
variable caps the numerical thread pools.
"""

from __future__ import annotations

import argparse
import os
import sys

__all__ = ["main"]


def _apply_thread_env() -> None:
    n = os.environ.get("DEEPFEM_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


_apply_thread_env()

import numpy as np  # noqa: E402


def _parse_h(text: str) -> float:
    """Accept '2^-7', '2**-7' or a plain decimal."""
    t = text.strip().replace("**", "^")
    if "^" in t:
        base, exp = t.split("^", 1)
        return float(base) ** float(exp)
    return float(t)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deepfem")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a registered example end to end")
    run.add_argument("--example", required=True, help="example id, e.g. ex5_4")
    run.add_argument("--dim", type=int, choices=(1, 2), default=None)
    run.add_argument("--h", nargs="+", default=None,
                     help="mesh sizes, e.g. 2^-7 2^-8")
    run.add_argument("--epochs", type=int, default=None)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--init", default="dl",
                     help="dl | exact | constant:<v> | noise")
    run.add_argument("--width", type=int, default=50)
    run.add_argument("--depth", type=int, default=6)
    run.add_argument("--out", default=None, help="report path (default stdout)")
    run.add_argument("--format", choices=("csv", "markdown"), default="csv")
    run.add_argument("--plot", action="store_true",
                     help="render figures next to the report")

    chk = sub.add_parser("check", help="run a self-check suite")
    chk.add_argument("--suite", required=True,
                     choices=("gradients", "fem", "lemma-b", "orders"))
    return ap


def _cmd_run(args) -> int:
    from .bench import emit_report, run_example

    overrides = {}
    if args.dim is not None:
        overrides["dim"] = args.dim
    if args.h:
        overrides["hs"] = [_parse_h(h) for h in args.h]
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    overrides["init"] = args.init
    overrides["width"] = args.width
    overrides["depth"] = args.depth

    rows = run_example(args.example, overrides, seed=args.seed)
    doc = emit_report(rows, format=args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(doc)
        print(f"wrote {args.out}")
        if args.plot:
            from .figures import render_figures

            stem = os.path.splitext(args.out)[0]
            for path in render_figures(rows, stem):
                print(f"wrote {path}")
    else:
        sys.stdout.write(doc)
        if args.plot:
            from .figures import render_figures

            for path in render_figures(rows, "deepfem_report"):
                print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# check suites
# ---------------------------------------------------------------------------


def _check_gradients() -> bool:
    """Reverse gradients of all five losses vs central finite differences."""
    from .autodiff import reverse_gradient
    from .domain import unit_box
    from .losses import (
        FrictionJ2,
        GpEigenJ5,
        LinearEigenJ3,
        LsmSemilinear,
        RitzLinear,
    )
    from .network import NetworkConfig, init_network
    from .problems import get_case
    from .training import TrainConfig, _draw_batches, evaluate_loss

    ok = True
    friction = get_case("ex5_2").domain
    cases = [
        ("lsm", unit_box(1), LsmSemilinear(
            source=lambda x: np.ones(len(np.atleast_2d(x))),
            nonlinearity=lambda phi, x: phi.square(),
            gamma=10.0)),
        ("ritz", unit_box(1), RitzLinear(
            p=lambda x: np.ones(len(np.atleast_2d(x))),
            q=lambda x: np.ones(len(np.atleast_2d(x))),
            f=lambda x: np.ones(len(np.atleast_2d(x))),
            gamma=10.0)),
        ("friction", friction, FrictionJ2(
            f=lambda x: np.ones(len(np.atleast_2d(x))),
            g=lambda x: np.ones(len(np.atleast_2d(x))),
            gamma=10.0)),
        ("eigen", unit_box(1), LinearEigenJ3(
            p=lambda x: np.ones(len(np.atleast_2d(x))),
            q=lambda x: np.zeros(len(np.atleast_2d(x))),
            gamma=10.0, x0=(0.5,))),
        ("gp", unit_box(1), GpEigenJ5(
            V=lambda x: -np.ones(len(np.atleast_2d(x))),
            beta=2.0, gamma=10.0, x0=(0.5,))),
    ]
    rng = np.random.default_rng(7)
    for name, domain, spec in cases:
        net = NetworkConfig(arch="fnn", width=8, depth=2, activation="tanh",
                            input_dim=domain.dim, seed=3)
        params = init_network(net)
        tc = TrainConfig(batch_interior=16, batch_boundary=8, epochs=1, seed=5)
        batches = _draw_batches(spec, domain, tc, np.random.default_rng(11))

        def loss_of(p):
            return float(evaluate_loss(p, net, spec, domain, batches).value)

        loss = evaluate_loss(params, net, spec, domain, batches)
        g = reverse_gradient(loss, params)
        idx = rng.choice(params.size, size=min(40, params.size), replace=False)
        fd = np.zeros(params.size)
        work = params.copy()
        step = 1e-5
        for i in idx:
            orig = work.data[i]
            work.data[i] = orig + step
            fp = loss_of(work)
            work.data[i] = orig - step
            fm = loss_of(work)
            work.data[i] = orig
            fd[i] = (fp - fm) / (2 * step)
        scale = np.maximum(np.abs(fd[idx]), 1e-8)
        rel = float(np.max(np.abs(g[idx] - fd[idx]) / scale))
        passed = rel <= 1e-4
        ok &= passed
        print(f"gradients/{name}: max rel err {rel:.2e} "
              f"{'PASS' if passed else 'FAIL'}")
    return ok


def _check_fem() -> bool:
    from .domain import unit_box
    from .fem import assemble_load, build_mesh, l2_norm, interpolate_at_nodes
    from .linalg import solve_spd

    ok = True
    # 1D matrices against the analytic tridiagonals
    mesh = build_mesh(unit_box(1), 1.0 / 8.0)
    A = mesh.stiffness().toarray()
    M = mesh.mass().toarray()
    n = mesh.n_interior
    h = mesh.h
    A_ref = (np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1)
             - np.diag(np.ones(n - 1), -1)) / h
    M_ref = (np.diag(np.full(n, 4.0)) + np.diag(np.ones(n - 1), 1)
             + np.diag(np.ones(n - 1), -1)) * h / 6.0
    err = max(np.max(np.abs(A - A_ref)), np.max(np.abs(M - M_ref)))
    passed = err <= 1e-14
    ok &= passed
    print(f"fem/1d-matrices: max entry err {err:.2e} {'PASS' if passed else 'FAIL'}")

    # 2D Poisson manufactured order
    domain = unit_box(2)

    def exact(x):
        return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])

    def source(x):
        return 2.0 * np.pi**2 * exact(np.atleast_2d(x))

    errs, hs = [], []
    for k in (3, 4, 5):
        m = build_mesh(domain, 2.0**-k)
        u = solve_spd(m.stiffness(), assemble_load(m, source))
        diff = u - interpolate_at_nodes(m, exact)
        errs.append(l2_norm(m, diff))
        hs.append(m.h)
    from .bench import convergence_order

    orders = convergence_order(errs, hs)
    passed = all(abs(o - 2.0) <= 0.05 for o in orders)
    ok &= passed
    print(f"fem/2d-poisson-order: orders {['%.3f' % o for o in orders]} "
          f"{'PASS' if passed else 'FAIL'}")
    return ok


def _check_lemma_b() -> bool:
    from .bench import check_recursion_bound

    a0s = np.linspace(0.0, 0.5, 22)[1:-1]
    bs = np.linspace(0.0, 0.25, 22)[1:-1]
    bad = [(a0, b) for a0 in a0s for b in bs
           if not check_recursion_bound(float(a0), float(b), 60)]
    passed = not bad
    print(f"lemma-b/recursion-bound: 20x20 grid, {len(bad)} violations "
          f"{'PASS' if passed else 'FAIL'}")
    return passed


def _check_orders() -> bool:
    """Eigenvalue convergence order with an exact-start power iteration."""
    from .domain import unit_box
    from .fem import build_mesh, interpolate_at_nodes, l2_norm
    from .problems import get_case
    from .solvers import SolverConfig, power_eigen
    from .bench import convergence_order

    case = get_case("ex5_3")
    errs, hs = [], []
    for k in (4, 5, 6, 7):
        mesh = build_mesh(case.domain, 2.0**-k)
        u0 = interpolate_at_nodes(mesh, case.exact)
        u0 /= l2_norm(mesh, u0)
        rep = power_eigen(mesh, u0, SolverConfig(eps=mesh.h**2, n_max=10))
        errs.append(abs(case.exact_lambda - rep.lam))
        hs.append(mesh.h)
    orders = convergence_order(errs, hs)
    passed = all(abs(o - 2.0) <= 0.2 for o in orders)
    print(f"orders/eigen-1d: orders {['%.3f' % o for o in orders]} "
          f"{'PASS' if passed else 'FAIL'}")
    return passed


_SUITES = {
    "gradients": _check_gradients,
    "fem": _check_fem,
    "lemma-b": _check_lemma_b,
    "orders": _check_orders,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    ok = _SUITES[args.suite]()
    print(f"suite {args.suite}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
