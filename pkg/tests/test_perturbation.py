import math

import numpy as np
import pytest

from nodalq.lattice import LatticeIndex, RectangleSpec
from nodalq.nodal import margin
from nodalq.perturbation import (DegenerateDenominator, corner_nodes, first_order_correction,
                                 theorem1_report)
from nodalq.potentials import cosine_product, standard_bump, zero_potential
from nodalq.spectral import Eigenpair, assemble, eigensolve, match_eigenpair, uniform_grid


def trig(rect, eps):
    return cosine_product(rect, [[eps, 2, 2]])


def test_zero_potential_gives_zero_correction(rect):
    sys = assemble(rect, zero_potential(rect), 6.0)
    al = LatticeIndex.make(rect, 1, 2)
    assert np.all(first_order_correction(sys, al) == 0.0)
    pair = match_eigenpair(sys, eigensolve(sys), al)
    rep = theorem1_report(pair, first_order_correction(sys, al), rect)
    assert rep.residual_linf == 0.0
    assert rep.correction_linf == 0.0
    assert rep.corner_max == 0.0


def test_trig_entry_matches_closed_form(rect):
    eps = 0.03
    sys = assemble(rect, trig(rect, eps), 12.0)
    al = LatticeIndex.make(rect, 1, 1)
    corr = first_order_correction(sys, al)
    k = sys.position(LatticeIndex.make(rect, 3, 3))
    want = -(eps / 4) / (8 * math.sqrt(2) + 8)
    assert corr[k] == pytest.approx(want, rel=1e-9)
    assert corr[sys.position(al)] == 0.0


def test_correction_is_linear_in_q(rect):
    al = LatticeIndex.make(rect, 2, 3)
    pot = standard_bump(rect, 0.2)
    c1 = first_order_correction(assemble(rect, pot, 10.0), al)
    c2 = first_order_correction(assemble(rect, pot.scaled(2.0), 10.0), al)
    assert np.allclose(c2, 2 * c1, rtol=1e-12, atol=1e-15)


def test_degenerate_denominator_for_rational_a_sq():
    # a = 2: |(2,2)|^2 = 16 + 4 = |(1,4)|^2
    r2 = RectangleSpec(2.0)
    sys = assemble(r2, cosine_product(r2, [[0.1, 1, 1]]), 9.0)
    with pytest.raises(DegenerateDenominator):
        first_order_correction(sys, LatticeIndex.make(r2, 2, 2))


def test_residual_is_second_order(rect):
    al = LatticeIndex.make(rect, 1, 1)
    res = []
    for eps in (0.04, 0.02, 0.01):
        sys = assemble(rect, trig(rect, eps), 12.0)
        pair = match_eigenpair(sys, eigensolve(sys), al)
        res.append(theorem1_report(pair, first_order_correction(sys, al), rect).residual_linf)
    for big, small in zip(res, res[1:]):
        assert 3.0 <= big / small <= 5.0


def test_residual_invariant_under_joint_sign_flip(rect):
    al = LatticeIndex.make(rect, 2, 3)
    sys = assemble(rect, standard_bump(rect, 0.2), 10.0)
    pair = match_eigenpair(sys, eigensolve(sys), al)
    corr = first_order_correction(sys, al)
    a = theorem1_report(pair, corr, rect)
    flipped = Eigenpair(pair.index, pair.lam, -pair.coeffs, pair.overlap, pair.basis)
    b = theorem1_report(flipped, -corr, rect)
    assert b.residual_linf == a.residual_linf
    assert b.correction_linf == a.correction_linf
    assert b.deviation_linf == a.deviation_linf


def test_report_bounds_and_grid(rect):
    al = LatticeIndex.make(rect, 3, 2)
    sys = assemble(rect, standard_bump(rect, 0.2), 10.0)
    pair = match_eigenpair(sys, eigensolve(sys), al)
    rep = theorem1_report(pair, first_order_correction(sys, al), rect)
    assert rep.grid == (16 * 3, 16 * 2)
    assert rep.grid[0] >= 8 * al.n and rep.grid[1] >= 8 * al.m
    assert rep.bound_15_16 == pytest.approx(math.sqrt(rect.a) * al.norm ** (-15 / 16))
    assert rep.bound_15_8 == pytest.approx(math.sqrt(rect.a) * al.norm ** (-15 / 8))
    row = rep.row()
    assert row["nx"] == 48 and row["ny"] == 32
    assert all(row[k] >= 0 for k in ("correction_linf", "residual_linf", "deviation_linf"))


def test_corner_nodes_geometry(rect):
    al = LatticeIndex.make(rect, 1, 1)
    x, y = uniform_grid(rect, 32, 32)
    assert not corner_nodes(al, rect, x, y).any()
    al = LatticeIndex.make(rect, 2, 2)
    x, y = uniform_grid(rect, 64, 64)
    mask = corner_nodes(al, rect, x, y)
    # the single interior crossing sits at the centre of R and is a node
    assert mask[32, 32]
    assert mask.sum() >= 1
    d = margin(al)
    ii, jj = np.nonzero(mask)
    cx, cy = rect.center
    assert np.all(np.abs(x[ii] - cx) <= d / (rect.a * 2) + 1e-12)
    assert np.all(np.abs(y[jj] - cy) <= d / 2 + 1e-12)


def test_corner_max_obeys_product_bound(rect):
    al = LatticeIndex.make(rect, 3, 4)
    sys = assemble(rect, zero_potential(rect), 12.0)
    pair = match_eigenpair(sys, eigensolve(sys), al)
    rep = theorem1_report(pair, first_order_correction(sys, al), rect, per_cell=64)
    d = margin(al)
    d1, d2 = d / (rect.a * al.n), d / al.m
    bound = 2 * math.sqrt(rect.a) / math.pi * math.sin(rect.a * al.n * d1) * math.sin(al.m * d2)
    assert rep.corner_max <= bound + 1e-12
