#!/usr/bin/env python3
"""Fit surrogate ground/excited Q and M tensors to published observables.

Quadrupole principal values follow from the zero-field doublet gaps; the
18 remaining parameters (three Euler triples for the tensor frames, two sets
of Zeeman principal values and angles) are least-squares fitted to:

  * theoretical branching table at (-30.8, 227.0, 0) mT (data/gamma_theory.csv)
  * RHS crossing-point lines at (-22.7, 249.2, 0) mT (data/rhs_crossing.csv)
  * |5e> - |6e> split of 2.36 MHz at 230 mT along D2
  * gamma(5g, 6e) = 0.764 at 231 mT along D2
  * trench offsets -5.9 MHz (6g-5e) and 34.1 MHz (3g-6e) at 230 mT along D2
  * subsite split slopes |65, 42, 40, 63| kHz/mT near (-22.4, 248.9, b) mT

Usage:
  surrogate_tensors.py [--starts N --seed S] [--out data/eu151_yso_site1_surrogate.json]

Without --starts the stored solution is polished and written.
"""
import argparse
import csv
import json
import pathlib

import numpy as np
from scipy.optimize import fsolve, least_squares

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"

I = 2.5
_m = np.arange(I, -I - 1, -1)
_Ip = np.zeros((6, 6), complex)
for _k in range(1, 6):
    _Ip[_k - 1, _k] = np.sqrt(I * (I + 1) - _m[_k] * (_m[_k] + 1))
_Im = _Ip.conj().T
SPIN = [(_Ip + _Im) / 2, (_Ip - _Im) / 2j, np.diag(_m).astype(complex)]
C2 = np.diag([-1.0, -1.0, 1.0])

GROUND_GAPS = (46.25, 34.54)  # lower, upper doublet gap (MHz)
EXCITED_GAPS = (75.03, 101.65)

# Solution found by the multi-start search (seed 7).
STORED = [279.06141028541884, 301.28544054682186, 180.9643978936324, -4.251111397820511,
          -17.140425559439766, 8.408555114082294, -9.141609279825092, 304.549733213027,
          284.98678036297053, 188.43703660199208, 115.05812635034854, 152.5544969174342,
          -9.7263895058572, 5.919413048922285, 4.5340309462820825, 214.67266914563578,
          316.1293425106753, 230.65225342286973]


def rot(a, b, c):
    def rz(t):
        t = np.radians(t)
        return np.array([[np.cos(t), -np.sin(t), 0], [np.sin(t), np.cos(t), 0], [0, 0, 1]])

    def ry(t):
        t = np.radians(t)
        return np.array([[np.cos(t), 0, np.sin(t)], [0, 1, 0], [-np.sin(t), 0, np.cos(t)]])

    return rz(a) @ ry(b) @ rz(c)


def tensor(principal, euler):
    r = rot(*euler)
    return r @ np.diag(principal) @ r.T


def quad(d, e):
    return np.diag([-d / 3 + e, -d / 3 - e, 2 * d / 3])


def levels(q, m, b_mT):
    b = np.asarray(b_mT) * 1e-3
    h = sum(q[a, c] * SPIN[a] @ SPIN[c] + b[a] * m[a, c] * SPIN[c] for a in range(3) for c in range(3))
    w, v = np.linalg.eigh(h)
    return w - w[0], v


def gamma(qg, mg, qe, me, b):
    _, vg = levels(qg, mg, b)
    _, ve = levels(qe, me, b)
    return np.abs(vg.conj().T @ ve) ** 2


def solve_de(gaps, guess):
    def f(x):
        e, _ = levels(quad(*x), np.zeros((3, 3)), [0, 0, 0])
        return [e[2] - e[0] - gaps[0], e[4] - e[2] - gaps[1]]

    return fsolve(f, guess, xtol=1e-13)


def read_theory():
    with open(DATA / "gamma_theory.csv") as fh:
        rows = [r for r in csv.DictReader(line for line in fh if not line.startswith("#"))]
    by = {r["ground"]: r for r in rows}
    return np.array([[float(by[f"{i}g"][f"{j}e_pct"]) for j in range(1, 7)] for i in range(1, 7)]) / 100


def read_rhs():
    with open(DATA / "rhs_crossing.csv") as fh:
        return np.array([float(r["freq_MHz"]) for r in csv.DictReader(fh)])


class Problem:
    def __init__(self):
        self.qg0 = quad(*solve_de(GROUND_GAPS, [-12.4, -2.7]))
        self.qe0 = quad(*solve_de(EXCITED_GAPS, [27.2, 5.9]))
        self.theory = read_theory()
        self.rhs = read_rhs()
        self.bs = np.linspace(-5, 5, 11)

    def unpack(self, x):
        r = rot(*x[0:3])
        qg = r @ self.qg0 @ r.T
        mg = tensor(x[3:6], x[6:9])
        r = rot(*x[9:12])
        qe = r @ self.qe0 @ r.T
        me = tensor(x[12:15], x[15:18])
        return qg, mg, qe, me

    @staticmethod
    def rhs_lines(qg, mg, b):
        g, _ = levels(qg, mg, b)
        return np.array([g[4] - g[3], g[4] - g[2], g[5] - g[3], g[5] - g[2]])

    def slopes(self, qg, mg, b0=(-22.4, 248.9)):
        qg2, mg2 = C2 @ qg @ C2, C2 @ mg @ C2
        d = [self.rhs_lines(qg, mg, [b0[0], b0[1], b]) - self.rhs_lines(qg2, mg2, [b0[0], b0[1], b]) for b in self.bs]
        return np.polyfit(self.bs, np.array(d), 1)[0] * 1000

    def residuals(self, x):
        qg, mg, qe, me = self.unpack(x)
        e, _ = levels(qe, me, [0, 230, 0])
        g, _ = levels(qg, mg, [0, 230, 0])
        return np.concatenate([
            (self.rhs_lines(qg, mg, [-22.7, 249.2, 0]) - self.rhs) / 0.012,
            (gamma(qg, mg, qe, me, [-30.8, 227.0, 0]) - self.theory).ravel() / 0.003,
            [(e[5] - e[4] - 2.36) / 0.01,
             (gamma(qg, mg, qe, me, [0, 231, 0])[4, 5] - 0.764) / 0.002,
             (e[4] - g[5] - (e[5] - g[4]) + 5.9) / 0.05,
             (g[4] - g[2] - 34.1) / 0.05],
            (np.abs(self.slopes(qg, mg)) - np.array([65, 42, 40, 63])) / 3.0,
        ])


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--starts", type=int, default=0, help="random restarts (0: polish the stored solution)")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=pathlib.Path, default=DATA / "eu151_yso_site1_surrogate.json")
    args = ap.parse_args()

    p = Problem()
    best = np.array(STORED)
    best_cost = np.sum(p.residuals(best) ** 2)
    rng = np.random.default_rng(args.seed)
    for k in range(args.starts):
        x0 = np.concatenate([rng.uniform(0, 360, 3), rng.uniform(-15, 15, 3), rng.uniform(0, 360, 3),
                             rng.uniform(0, 360, 3), rng.uniform(-15, 15, 3), rng.uniform(0, 360, 3)])
        try:
            r = least_squares(p.residuals, x0, method="lm", max_nfev=3000)
        except (ValueError, np.linalg.LinAlgError):
            continue
        cost = np.sum(r.fun ** 2)
        if cost < best_cost:
            best, best_cost = r.x, cost
            print(f"start {k}: cost {cost:.4g}", flush=True)

    r = least_squares(p.residuals, best, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    print(f"final cost {np.sum(r.fun ** 2):.6g}")

    def fmt(a):
        s = (a + a.T) / 2
        return [[float(f"{v:.9f}") for v in row] for row in s]

    qg, mg, qe, me = p.unpack(r.x)
    cfg = {
        "units": {"Q": "MHz", "M": "MHz_per_T", "B": "mT"},
        "ground": {"Q": {"matrix": fmt(qg)}, "M": {"matrix": fmt(mg)}},
        "excited": {"Q": {"matrix": fmt(qe)}, "M": {"matrix": fmt(me)}},
    }
    args.out.write_text(json.dumps(cfg, indent=2) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
