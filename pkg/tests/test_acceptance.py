"""Acceptance gate: ten end-to-end criteria with pinned tolerances.

Each test prints a single PASS/FAIL line (run pytest with -s or check the
captured output) and then asserts, so a red test is an honest red.
"""

import time

import numpy as np
import pytest
import scipy.linalg

from deepfem.bench import check_recursion_bound, convergence_order, run_example
from deepfem.domain import unit_box
from deepfem.fem import (
    assemble_load,
    assemble_weighted_mass,
    build_mesh,
    interpolate_at_nodes,
    l2_norm,
    max_node_error,
)
from deepfem.linalg import solve_spd
from deepfem.problems import get_case
from deepfem.solvers import (
    SolverConfig,
    newton_nonlinear_eigen,
    picard_semilinear,
    power_eigen,
    two_grid_semilinear,
)
from deepfem.training import TrainConfig, train


def _report(num: int, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE CRITERION {num}: {'PASS' if passed else 'FAIL'} — {detail}")


def _dense_smallest(mesh, V=None):
    A = mesh.stiffness().toarray()
    if V is not None:
        A = A + assemble_weighted_mass(mesh, V).toarray()
    return float(scipy.linalg.eigh(A, mesh.mass().toarray(), eigvals_only=True,
                                   subset_by_index=[0, 0])[0])


def _train_case(case, epochs, seed, width=50, depth=6):
    net = case.network_config(width=width, depth=depth, seed=seed)
    tc = TrainConfig(epochs=epochs, batch_interior=case.batch_size,
                     batch_boundary=case.batch_size, seed=seed)
    return train(net, case.loss_spec, case.domain, tc)


def _normalized_start(mesh, case, model):
    u0 = interpolate_at_nodes(mesh, model.value_fn(case.domain))
    return u0 / l2_norm(mesh, u0)


def test_criterion_01_semilinear_1d_table():
    t0 = time.perf_counter()
    hs = [2.0**-7, 2.0**-8, 2.0**-9, 2.0**-10]
    rows = run_example("ex5_4", {"dim": 1, "hs": hs, "epochs": 200}, seed=0)
    wall = time.perf_counter() - t0
    ks = [r.k for r in rows]
    orders = convergence_order([r.e_h for r in rows], hs)
    e_fine = rows[-1].e_h
    passed = (
        all(k is not None and 1 <= k <= 8 for k in ks)
        and 6e-6 <= e_fine <= 6e-5
        and all(abs(o - 2.0) <= 0.10 for o in orders)
        and wall <= 180.0
    )
    _report(1, passed,
            f"#K={ks}, e_h(2^-10)={e_fine:.2e}, "
            f"orders={['%.3f' % o for o in orders]}, wall={wall:.0f}s")
    assert all(k is not None and 1 <= k <= 8 for k in ks)
    assert 6e-6 <= e_fine <= 6e-5
    for o in orders:
        assert abs(o - 2.0) <= 0.10
    assert wall <= 180.0


def test_criterion_02_semilinear_2d_table():
    t0 = time.perf_counter()
    hs = [2.0**-4, 2.0**-5, 2.0**-6]
    rows = run_example("ex5_4", {"dim": 2, "hs": hs, "epochs": 200}, seed=0)
    wall = time.perf_counter() - t0
    ks = [r.k for r in rows]
    orders = convergence_order([r.e_h for r in rows], hs)
    passed = (
        all(k is not None and 1 <= k <= 8 for k in ks)
        and all(o >= 1.7 for o in orders)
        and wall <= 600.0
    )
    _report(2, passed,
            f"#K={ks}, orders={['%.3f' % o for o in orders]}, wall={wall:.0f}s")
    assert all(k is not None and 1 <= k <= 8 for k in ks)
    for o in orders:
        assert o >= 1.7
    assert wall <= 600.0


def test_criterion_03_linear_eigen_1d_table():
    t0 = time.perf_counter()
    hs = [2.0**-5, 2.0**-6, 2.0**-7, 2.0**-8]
    # the lambda ladder is a mesh property: any init that lands in the ground
    # state's basin gives the same table, so a short training run suffices
    rows = run_example("ex5_3", {"hs": hs, "epochs": 200}, seed=0)
    errlam = [r.err_lambda for r in rows]
    orders = convergence_order(errlam, hs)

    # independent oracle: dense generalized eigensolve at the coarsest mesh
    mesh = build_mesh(get_case("ex5_3").domain, 2.0**-5)
    lam_dense = _dense_smallest(mesh)
    case = get_case("ex5_3")
    u0 = interpolate_at_nodes(mesh, case.exact)
    u0 /= l2_norm(mesh, u0)
    rep = power_eigen(mesh, u0, SolverConfig(eps=1e-14, n_max=30))
    rel = abs(rep.lam - lam_dense) / abs(lam_dense)
    wall = time.perf_counter() - t0
    passed = (
        rel <= 1e-10
        and all(abs(o - 2.0) <= 0.10 for o in orders)
        and wall <= 60.0
    )
    _report(3, passed,
            f"oracle rel={rel:.2e}, |lam-lam_h|={['%.2e' % e for e in errlam]}, "
            f"orders={['%.3f' % o for o in orders]}, wall={wall:.0f}s")
    assert rel <= 1e-10
    for o in orders:
        assert abs(o - 2.0) <= 0.10
    assert wall <= 60.0


def test_criterion_04_linear_eigen_2d_table():
    t0 = time.perf_counter()
    hs = [2.0**-4, 2.0**-5, 2.0**-6, 2.0**-7]
    rows = run_example("ex5_5", {"dim": 2, "hs": hs, "epochs": 300}, seed=0)
    errlam = [r.err_lambda for r in rows]
    orders = convergence_order(errlam, hs)
    wall = time.perf_counter() - t0
    fine_ok = errlam[-1] <= 2.0 * 2.97e-3 and errlam[-1] >= 2.97e-3 / 2.0
    passed = (
        all(abs(o - 2.0) <= 0.15 for o in orders)
        and fine_ok
        and wall <= 600.0
    )
    _report(4, passed,
            f"|lam-lam_h|(2^-7)={errlam[-1]:.2e} (ref 2.97e-3), "
            f"orders={['%.3f' % o for o in orders]}, wall={wall:.0f}s")
    for o in orders:
        assert abs(o - 2.0) <= 0.15
    assert fine_ok
    assert wall <= 600.0


def test_criterion_05_gross_pitaevskii_properties():
    case = get_case("ex5_6", dim=1)
    model = _train_case(case, epochs=1000, seed=0)
    V, beta = case.phase2.V, case.phase2.beta
    lams, others = [], []
    for k in (5, 6, 7):
        mesh = build_mesh(case.domain, 2.0**-k)
        u0 = _normalized_start(mesh, case, model)
        rep = newton_nonlinear_eigen(mesh, V, beta, u0, SolverConfig(eps=1e-12, n_max=5))
        norm_defect = abs(l2_norm(mesh, rep.u) - 1.0)
        others.append((rep.iterations, rep.residual_norm, norm_defect))
        lams.append(rep.lam)
    d1, d2 = abs(lams[0] - lams[1]), abs(lams[1] - lams[2])
    fit = float(np.log2(d1 / d2))

    # beta = 0 reduces to the linear eigenproblem; cross-check both solvers
    mesh6 = build_mesh(case.domain, 2.0**-6)
    u06 = _normalized_start(mesh6, case, model)
    cfg = SolverConfig(eps=1e-13, n_max=20)
    lam_newton = newton_nonlinear_eigen(mesh6, V, 0.0, u06, cfg).lam
    lam_power = power_eigen(mesh6, u06, cfg, V=V).lam
    cross = abs(lam_newton - lam_power)

    res_ok = all(it <= 5 and res <= 1e-9 and nd <= 1e-6 for it, res, nd in others)
    passed = res_ok and fit >= 1.7 and cross <= 1e-9
    _report(5, passed,
            f"(#K,res,|norm-1|)={[(i, '%.1e' % r, '%.1e' % n) for i, r, n in others]}, "
            f"lam={['%.4f' % l for l in lams]}, fitted order={fit:.2f}, "
            f"beta=0 cross-check diff={cross:.2e}")
    assert res_ok
    assert fit >= 1.7
    assert cross <= 1e-9


def test_criterion_06_baseline_failures_and_two_grid():
    case = get_case("ex5_4", dim=1)
    h = 2.0**-10
    mesh = build_mesh(case.domain, h)
    cfg = SolverConfig(eps=0.01 * h * h, n_max=100)

    # Newton from u0 = -1 misses the solution basin
    rows = run_example("ex5_4", {"dim": 1, "hs": [h], "init": "constant:-1"})
    newton_bad = rows[0].e_h
    newton_fail = (newton_bad is None or not np.isfinite(newton_bad)
                   or newton_bad > 1.0)

    # Picard from zero stalls near the spurious solution
    rep_p = picard_semilinear(mesh, case.phase2.f, np.zeros(mesh.n_interior), cfg)
    e_picard = max_node_error(mesh, rep_p.u, case.exact)
    picard_stuck = 1.5 <= e_picard <= 2.5

    # two-grid: trained coarse start vs a zero coarse start
    H = 2.0**-5
    mesh_H = build_mesh(case.domain, H)
    model = _train_case(case, epochs=200, seed=0)
    u0H = interpolate_at_nodes(mesh_H, model.value_fn(case.domain))
    tg_cfg = SolverConfig(eps=0.01 * h * h, n_max=30)
    rep_dl = two_grid_semilinear(case.domain, case.phase2.f, case.phase2.fprime,
                                 H, h, u0H, tg_cfg)
    rep_zero = two_grid_semilinear(case.domain, case.phase2.f, case.phase2.fprime,
                                   H, h, np.zeros(mesh_H.n_interior), tg_cfg)
    e_dl = max_node_error(mesh, rep_dl.u, case.exact)
    e_zero = max_node_error(mesh, rep_zero.u, case.exact)
    ratio = e_zero / e_dl
    passed = newton_fail and picard_stuck and ratio >= 1e3
    _report(6, passed,
            f"newton(u0=-1) e={newton_bad:.2e}, picard(u0=0) e={e_picard:.3f}, "
            f"two-grid zero/dl error ratio={ratio:.1e}")
    assert newton_fail
    assert picard_stuck
    assert ratio >= 1e3


def _phase1_passes(example_id: str, epochs: int, threshold: float):
    """Phase-I error per seed; stop as soon as two seeds pass."""
    results = []
    passes = 0
    for seed in (0, 1, 2):
        rows = run_example(example_id, {"epochs": epochs}, seed=seed)
        e = rows[0].e_dl
        results.append((seed, e))
        if e is not None and e <= threshold:
            passes += 1
        if passes >= 2:
            break
    return passes, results


def test_criterion_07_phase1_standalone():
    outcomes = {}
    ok = True
    for ex, epochs, thr in (("ex5_1", 1000, 5e-3),
                            ("ex5_2", 1000, 2e-2),
                            ("ex5_3", 500, 5e-2)):
        passes, results = _phase1_passes(ex, epochs, thr)
        outcomes[ex] = (passes, results, thr)
        ok &= passes >= 2
    detail = "; ".join(
        f"{ex}: {passes}/{len(results)} seeds <= {thr:g} "
        f"({', '.join('seed %d: %.2e' % (s, e) for s, e in results)})"
        for ex, (passes, results, thr) in outcomes.items()
    )
    _report(7, ok, detail)
    for ex, (passes, _, _) in outcomes.items():
        assert passes >= 2, f"{ex}: fewer than 2 of 3 seeds reached the target"


def test_criterion_08_loss_gradients_vs_fd():
    from deepfem.autodiff import reverse_gradient
    from deepfem.losses import (
        FrictionJ2,
        GpEigenJ5,
        LinearEigenJ3,
        LsmSemilinear,
        RitzLinear,
    )
    from deepfem.network import NetworkConfig, init_network
    from deepfem.training import _draw_batches, evaluate_loss

    ones = lambda x: np.ones(len(np.atleast_2d(x)))
    zeros = lambda x: np.zeros(len(np.atleast_2d(x)))
    friction_dom = get_case("ex5_2").domain
    specs = [
        ("lsm", unit_box(1), LsmSemilinear(
            source=ones, nonlinearity=lambda phi, x: phi.square(), gamma=10.0)),
        ("ritz", unit_box(1), RitzLinear(p=ones, q=ones, f=ones, gamma=10.0)),
        ("friction", friction_dom, FrictionJ2(f=ones, g=ones, gamma=10.0)),
        ("eigen", unit_box(1), LinearEigenJ3(p=ones, q=zeros, gamma=10.0, x0=(0.5,))),
        ("gp", unit_box(1), GpEigenJ5(V=lambda x: -ones(x), beta=2.0,
                                      gamma=10.0, x0=(0.5,))),
    ]
    rng = np.random.default_rng(17)
    worst = {}
    for name, domain, spec in specs:
        net = NetworkConfig(arch="fnn", width=8, depth=2, activation="tanh",
                            input_dim=domain.dim, seed=3)
        params = init_network(net)
        tc = TrainConfig(batch_interior=16, batch_boundary=8, epochs=1, seed=5)
        batches = _draw_batches(spec, domain, tc, np.random.default_rng(11))
        g = reverse_gradient(evaluate_loss(params, net, spec, domain, batches), params)
        idx = rng.choice(params.size, size=min(100, params.size), replace=False)
        work = params.copy()
        step = 1e-5
        rel_max = 0.0
        for i in idx:
            orig = work.data[i]
            work.data[i] = orig + step
            fp = float(evaluate_loss(work, net, spec, domain, batches).value)
            work.data[i] = orig - step
            fm = float(evaluate_loss(work, net, spec, domain, batches).value)
            work.data[i] = orig
            fd = (fp - fm) / (2 * step)
            rel_max = max(rel_max, abs(g[i] - fd) / max(abs(fd), 1e-8))
        worst[name] = rel_max
    passed = all(v <= 1e-4 for v in worst.values())
    _report(8, passed,
            "max rel err " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))
    for name, v in worst.items():
        assert v <= 1e-4, name


def test_criterion_09_fem_suite():
    mesh = build_mesh(unit_box(1), 1.0 / 8.0)
    n, h = mesh.n_interior, mesh.h
    A_ref = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h
    M_ref = (4 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)) * h / 6
    entry_err = max(np.max(np.abs(mesh.stiffness().toarray() - A_ref)),
                    np.max(np.abs(mesh.mass().toarray() - M_ref)))

    def exact(x):
        return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])

    def source(x):
        x = np.atleast_2d(x)
        return 2.0 * np.pi**2 * exact(x)

    errs, hs = [], []
    for k in (3, 4, 5):
        m = build_mesh(unit_box(2), 2.0**-k)
        u = solve_spd(m.stiffness(), assemble_load(m, source))
        errs.append(l2_norm(m, u - interpolate_at_nodes(m, exact)))
        hs.append(m.h)
    orders = convergence_order(errs, hs)
    passed = entry_err <= 1e-14 and all(abs(o - 2.0) <= 0.05 for o in orders)
    _report(9, passed,
            f"1D matrix entry err={entry_err:.1e}, "
            f"2D Poisson orders={['%.3f' % o for o in orders]}")
    assert entry_err <= 1e-14
    for o in orders:
        assert abs(o - 2.0) <= 0.05


def test_criterion_10_recursion_bound_and_network_size_independence():
    a0s = np.linspace(0.0, 0.5, 22)[1:-1]
    bs = np.linspace(0.0, 0.25, 22)[1:-1]
    violations = sum(
        not check_recursion_bound(float(a0), float(b), 60)
        for a0 in a0s for b in bs
    )

    # mesh-phase error must not depend on the network that produced the
    # initial guess, as long as every start lands in the right basin
    case = get_case("ex5_4", dim=1)
    h = 2.0**-10
    mesh = build_mesh(case.domain, h)
    errors = {}
    for width in (10, 30, 50):
        for depth in (2, 4, 6):
            model = _train_case(case, epochs=1000, seed=2, width=width, depth=depth)
            u0 = interpolate_at_nodes(mesh, model.value_fn(case.domain))
            from deepfem.solvers import newton_semilinear

            rep = newton_semilinear(mesh, case.phase2.f, case.phase2.fprime, u0,
                                    SolverConfig(eps=1e-14, n_max=30))
            errors[(width, depth)] = max_node_error(mesh, rep.u, case.exact)
    spread = max(errors.values()) - min(errors.values())
    passed = violations == 0 and spread <= 1e-12
    _report(10, passed,
            f"recursion-bound violations={violations}/400, "
            f"(N,L) sweep error spread={spread:.2e}")
    assert violations == 0
    assert spread <= 1e-12
