#!/usr/bin/env python3
# Path shim + small shared builders for the tests

from __future__ import annotations
import sys
from pathlib import Path

import numpy as np

# Ensure project root import
ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from conesolver.grid import build_grid
from conesolver.models import Field, ProblemParams, WeightFamily
from conesolver.operators import assemble

BASE = ProblemParams(N=3, p=4.0, R0=1.0, R1=2.0)


def small_problem(nr: int = 17, ntheta: int = 17, params: ProblemParams = BASE, angular_sign: float = 1.0):
    """(grid, ops, a) on a coarse grid with the unit weight."""
    grid = build_grid(params, nr, ntheta)
    ops = assemble(grid, angular_sign=angular_sign)
    return grid, ops, Field(grid, np.ones(grid.shape))


def random_interior(ops, seed: int = 0) -> Field:
    """Random field vanishing on r = R0, R1 (not in the cone)."""
    rng = np.random.default_rng(seed)
    return Field(ops.grid, ops.from_unknowns(rng.standard_normal(ops.n_unknowns)))
