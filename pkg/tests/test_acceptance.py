"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are printed in the
terminal summary) or ``python3 tests/test_acceptance.py``.
"""

import math
import time

import numpy as np

from nodalq.cli import main as cli_main
from nodalq.domain_eig import lambda1
from nodalq.lattice import (GoodIndexCriteria, LatticeIndex, RectangleSpec, check_admissible,
                            select_good_indices)
from nodalq.nodal import nodal_domains, sign_field
from nodalq.perturbation import first_order_correction, theorem1_report
from nodalq.potentials import cosine_product, standard_bump, zero_potential
from nodalq.reconstruct import GridPolicy, galerkin_for, probe_points, reconstruct_index, sweep
from nodalq.serialize import write_json
from nodalq.spectral import GridField, assemble, eigensolve, match_eigenpair, uniform_grid

A = 2.0 ** 0.25
RESULTS: list[str] = []


def record(num: int, ok: bool, detail: str, seconds: float, limit: float) -> None:
    ok = ok and seconds <= limit
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail} [{seconds:.1f}s of {limit:.0f}s]"
    RESULTS.append(line)
    print(line)
    assert ok, line


def quartic_rect():
    return RectangleSpec(A)


def test_criterion_1_zero_potential_exact():
    t = time.perf_counter()
    rect = quartic_rect()
    pot = zero_potential(rect)
    al = LatticeIndex.make(rect, 2, 3)
    sys, dec = galerkin_for(rect, pot, al.norm)
    run = reconstruct_index(sys, dec, al, GridPolicy(per_cell=128))
    worst = max((abs(s.q_hat) for s in run.samples), default=math.inf)
    ok = len(run.samples) == 6 and not run.skipped and worst <= 1e-2
    record(1, ok, f"6 frames at 129 nodes per side, max |q_hat| = {worst:.2e} (<= 1e-2)",
           time.perf_counter() - t, 60)


def test_criterion_2_discrete_square_oracle():
    t = time.perf_counter()
    errs = []
    rel = None
    for n in (64, 128):
        h = math.pi / n
        lam = lambda1(np.ones((n - 1, n - 1), dtype=bool), h, h, tol=1e-13).lambda1
        if n == 64:
            want = 4 / h ** 2 * 2 * math.sin(h / 2) ** 2
            rel = abs(lam - want) / want
        errs.append(abs(lam - 2.0))
    ratio = errs[0] / errs[1]
    ok = rel <= 1e-10 and 3.5 <= ratio <= 4.5
    record(2, ok, f"relative error {rel:.1e} (<= 1e-10), halving ratio {ratio:.3f} (in [3.5, 4.5])",
           time.perf_counter() - t, 30)


def sine_1d(scale, terms, size):
    k = np.arange(1, size + 1)
    h = np.diag((scale * k) ** 2).astype(float)
    for c, p in terms:
        h += c * 0.5 * ((np.abs(k[:, None] - k[None, :]) == p).astype(float)
                        - ((k[:, None] + k[None, :]) == p).astype(float))
    return h


def dominant_eigs(h):
    # eigenvalue whose eigenvector is dominated by mode k, for k = 1..size
    w, v = np.linalg.eigh(h)
    out = np.empty(len(w))
    out[np.argmax(np.abs(v), axis=0)] = w
    return out


def test_criterion_3_separable_potential():
    t = time.perf_counter()
    rect = quartic_rect()
    fx = [[0.6, 2], [-0.25, 5]]
    gy = [[0.4, 1], [0.3, 4]]
    pot = cosine_product(rect, [[c, p, 0] for c, p in fx] + [[d, 0, r] for d, r in gy])
    nx, ny = 14, 16
    sys = assemble(rect, pot, box=(nx, ny))
    dec = eigensolve(sys)
    mu = dominant_eigs(sine_1d(rect.a, fx, nx))
    nu = dominant_eigs(sine_1d(1.0, gy, ny))
    worst = 0.0
    count = 0
    for b in sys.basis:
        if b.n > nx // 2 or b.m > ny // 2:
            continue
        pair = match_eigenpair(sys, dec, b)
        worst = max(worst, abs(pair.lam - (mu[b.n - 1] + nu[b.m - 1])))
        count += 1
    spectrum = np.max(np.abs(np.sort(dec.values) - np.sort((mu[:, None] + nu[None, :]).ravel())))
    ok = worst <= 1e-8 and spectrum <= 1e-8
    record(3, ok, f"{count} matched eigenvalues, max deviation {worst:.1e}; "
                  f"full spectrum {spectrum:.1e} (<= 1e-8)", time.perf_counter() - t, 60)


def test_criterion_4_first_order_shift():
    t = time.perf_counter()
    rect = quartic_rect()
    al = LatticeIndex.make(rect, 1, 1)
    res = []
    for eps in (4e-2, 2e-2, 1e-2):
        sys = assemble(rect, cosine_product(rect, [[eps, 2, 2]]), 12.0)
        pair = match_eigenpair(sys, eigensolve(sys), al)
        res.append(abs(pair.lam - al.norm_sq - eps / 4))
    ratios = [res[0] / res[1], res[1] / res[2]]
    ok = all(3 <= r <= 5 for r in ratios)
    record(4, ok, "residual ratios " + ", ".join(f"{r:.3f}" for r in ratios) + " (in [3, 5])",
           time.perf_counter() - t, 30)


def test_criterion_5_correction_efficacy():
    t = time.perf_counter()
    rect = quartic_rect()
    pot = standard_bump(rect, 0.2)
    sys, dec = galerkin_for(rect, pot, 12.0)
    worst = 0.0
    good = select_good_indices(rect, GoodIndexCriteria(max_norm=12.0))
    for g in good:
        pair = match_eigenpair(sys, dec, g.index)
        rep = theorem1_report(pair, first_order_correction(sys, g.index), rect)
        worst = max(worst, rep.residual_linf / rep.deviation_linf)
    ok = bool(good) and worst <= 0.3
    record(5, ok, f"{len(good)} good indices, worst residual/deviation {worst:.4f} (<= 0.3)",
           time.perf_counter() - t, 120)


SANDWICH_INDICES = ((1, 1), (2, 1), (1, 3), (2, 3), (3, 2), (4, 1), (3, 5), (5, 3), (4, 6), (7, 4))


def test_criterion_6_nodal_sandwich():
    t = time.perf_counter()
    rect = quartic_rect()
    pot = standard_bump(rect, 0.2)
    sys, dec = galerkin_for(rect, pot, 9.0)
    policy = GridPolicy(per_cell=32)
    problems = []
    domains = 0
    for n, m in SANDWICH_INDICES:
        al = LatticeIndex.make(rect, n, m)
        x, y = uniform_grid(rect, 16 * n, 16 * m)
        u0 = np.outer(np.sin(rect.a * n * x), np.sin(m * y))
        count = nodal_domains(sign_field(GridField(x, y, u0))).count
        if count != n * m:
            problems.append(f"{al}: {count} components")
        run = reconstruct_index(sys, dec, al, policy, keep_geometry=True)
        vals = run.grid_field.values
        for dom in run.domains:
            domains += 1
            i0, j0 = dom.offset
            win = vals[i0:i0 + dom.mask.shape[0], j0:j0 + dom.mask.shape[1]]
            if not np.all(dom.mask[dom.omega1_nodes]):
                problems.append(f"{al} frame {dom.frame.n1},{dom.frame.m1}: Omega_1 not inside")
            if np.any(dom.mask & ~dom.omega2_nodes):
                problems.append(f"{al} frame {dom.frame.n1},{dom.frame.m1}: leaves Omega_2")
            if not np.all(dom.component_sign * win[dom.mask] > 0):
                problems.append(f"{al} frame {dom.frame.n1},{dom.frame.m1}: sign change")
    ok = not problems and domains > 0
    record(6, ok, f"{len(SANDWICH_INDICES)} indices, {domains} domains checked"
                  + (f"; {problems[:3]}" if problems else ""), time.perf_counter() - t, 60)


def test_criterion_7_error_trend():
    t = time.perf_counter()
    rect = quartic_rect()
    pot = standard_bump(rect, 0.2)
    res = sweep(rect, pot, GoodIndexCriteria(max_norm=14.0),
                GridPolicy(per_cell=32, per_unit_norm=12.0), min_norm=4.0)
    idx = sorted({(s.index.n, s.index.m): s.index for s in res.samples}.values(),
                 key=LatticeIndex.sort_key)
    third = len(idx) // 3
    lo = {(a.n, a.m) for a in idx[:third]}
    hi = {(a.n, a.m) for a in idx[-third:]}
    e_lo = float(np.median([s.err_min_over_domain for s in res.samples if (s.index.n, s.index.m) in lo]))
    e_hi = float(np.median([s.err_min_over_domain for s in res.samples if (s.index.n, s.index.m) in hi]))
    ok = third > 0 and e_hi <= e_lo
    record(7, ok, f"{len(idx)} indices in [4, 14], median err_min top third {e_hi:.3e} "
                  f"vs bottom third {e_lo:.3e} (need top <= bottom); {len(res.skipped)} frames skipped",
           time.perf_counter() - t, 600)


def test_criterion_8_diophantine():
    t = time.perf_counter()
    rational = check_admissible("3/2", 10 ** 6).verdict
    root = check_admissible("sqrt(2)", 10 ** 6)
    liouville = check_admissible("1 + 10**-1 + 10**-2 + 10**-6 + 10**-24 + 10**-120", 10 ** 6).verdict
    ok = (rational == "exact-rational" and root.verdict == "accepted" and not root.violations
          and liouville == "rejected")
    record(8, ok, f"3/2 -> {rational}, sqrt(2) -> {root.verdict} with {len(root.violations)} "
                  f"violations, truncated Liouville -> {liouville}", time.perf_counter() - t, 30)


def test_criterion_9_density():
    t = time.perf_counter()
    rect = quartic_rect()
    pot = standard_bump(rect, 0.2)
    probes = probe_points(rect, 64)
    system = galerkin_for(rect, pot, 16.0)
    policy = GridPolicy(per_cell=16)
    full, sparse = [], []
    for top in (8.0, 12.0, 16.0):
        res = sweep(rect, pot, GoodIndexCriteria(max_norm=top), policy, system=system)
        full.append(res.coverage(probes))
        sparse.append(res.coverage(probes, res.sparse_indices()))
    dec = lambda v: all(b < a for a, b in zip(v, v[1:]))
    ok = dec(full) and dec(sparse)
    record(9, ok, "coverage " + " > ".join(f"{c:.4f}" for c in full)
                  + "; sparse " + " > ".join(f"{c:.4f}" for c in sparse), time.perf_counter() - t, 600)


def test_criterion_10_determinism(tmp_path):
    t = time.perf_counter()
    rect = quartic_rect()
    pot_file = tmp_path / "bump.json"
    write_json(pot_file, standard_bump(rect, 0.2).to_dict())
    blobs = []
    for threads in (1, 2, 8):
        out = tmp_path / f"samples_{threads}.csv"
        cov = tmp_path / f"coverage_{threads}.json"
        code = cli_main(["sweep", "--a", repr(A), "--potential", str(pot_file), "--max-norm", "8",
                         "--threads", str(threads), "--seed", "11", "--out", str(out),
                         "--coverage", str(cov)])
        blobs.append((code, out.read_bytes(), cov.read_bytes()))
    ok = all(b == blobs[0] for b in blobs) and blobs[0][0] == 0
    record(10, ok, f"threads 1, 2, 8 give {'identical' if ok else 'different'} CSV "
                   f"({len(blobs[0][1])} bytes) and JSON ({len(blobs[0][2])} bytes)",
           time.perf_counter() - t, 120)


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    tests.sort(key=lambda f: int(f.__name__.split("_")[2]))
    for fn in tests:
        try:
            if fn is test_criterion_10_determinism:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            pass
