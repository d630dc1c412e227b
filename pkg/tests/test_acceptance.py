"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]`` or ``[FAIL]`` line naming the criterion
and, on failure, the checks that missed along with the observed values.
Tolerances are the stated ones, with no slack.
"""

import json
import math
import time

import numpy as np
import pytest

from tbpeval.bias import naive_metrics, pop1_bias, pop2_evaluation
from tbpeval.cli import main
from tbpeval.core import eta_per_record
from tbpeval.estimate import outcome_regression_tau
from tbpeval.io import population_config
from tbpeval.metrics import calibration_curve, cb_plug_in, gini_from_rcc, pairwise_maxlike_oracle, rcc
from tbpeval.populations import (
    X_POINTS,
    Pop2Spec,
    make_pop1_tbp,
    reference_pop1_spec,
    pop1_joint_table,
    pop1_metrics,
    pop1_tbp_predict,
    pop2_bias,
    pop2_calibration,
    pop2_metrics,
    simulate,
)

from oracles import Pop1Atoms

KINDS = ("h1", "h2", "h3")


class Checks:
    def __init__(self):
        self.items = []

    def close(self, label, got, want, tol):
        self.items.append((label, abs(got - want) <= tol, f"{label}: got {got!r}, want {want!r} +/- {tol:g}"))

    def true(self, label, ok, detail=""):
        self.items.append((label, bool(ok), f"{label}: {detail}" if detail else label))

    def finish(self, capsys, name, title):
        failed = [msg for _, ok, msg in self.items if not ok]
        status = "PASS" if not failed else "FAIL"
        line = f"[{status}] {name} {title}"
        if failed:
            line += " -- " + "; ".join(failed)
        with capsys.disabled():
            print("\n" + line)
        assert not failed, line


def test_ac1_pop2_closed_form(capsys):
    c = Checks()
    start = time.perf_counter()
    adj = pop2_metrics(adjusted=True)
    oracle = pop2_metrics(adjusted=True, predictor="tau_s")
    naive = pop2_metrics(adjusted=False)
    elapsed = time.perf_counter() - start
    c.true("tau* = 2/3 exactly", adj.tau_star == 2 / 3, repr(adj.tau_star))
    c.close("2E[B F_H(H)]", adj.maxlike, 4 * (3 / 80 + 19 / 120), 1e-15)
    c.close("C_b(h)", adj.cb, 0.1489362, 1e-6)
    c.close("C_b(tau_s)", oracle.cb, 1 / 6, 1e-9)
    c.close("2E[D F_H(H)]", naive.maxlike, 0.9031746, 1e-6)
    c.close("naive C_b", naive.cb, 0.07732865, 1e-6)
    c.true("runtime < 1 s", elapsed < 1, f"{elapsed:.3f} s")
    c.finish(capsys, "AC1", "population 2 closed-form oracle")


def test_ac2_pop2_calibration_forms(capsys):
    c = Checks()
    lo = np.linspace(0.01, 1.0, 100)
    hi = np.linspace(1.01, 1.99, 99)
    err_lo = np.max(np.abs(pop2_calibration(lo) - 3 * lo / 4))
    err_hi = np.max(np.abs(pop2_calibration(hi) - (1 - hi**2 / 4) / (2 - hi)))
    c.close("adjusted = 3h/4 on (0,1]", err_lo, 0.0, 1e-12)
    c.close("adjusted = (1-h^2/4)/(2-h) on (1,2)", err_hi, 0.0, 1e-12)
    dev_lo = pop2_calibration(lo, adjusted=False) - pop2_calibration(lo)
    dev_hi = pop2_calibration(hi, adjusted=False) - pop2_calibration(hi)
    c.close("naive-adjusted = 1/(6h) on (0,1] (max abs error)",
            float(np.max(np.abs(dev_lo - 1 / (6 * lo)))), 0.0, 1e-12)
    c.close("naive-adjusted = 1/(6(2-h)) on (1,2) (max abs error)",
            float(np.max(np.abs(dev_hi - 1 / (6 * (2 - hi))))), 0.0, 1e-12)
    # E[bias(X2)] with X2 ~ U(0,1), Gauss-Legendre is exact for the cubic
    nodes, weights = np.polynomial.legendre.leggauss(4)
    e_bias = float(np.sum(weights * pop2_bias((nodes + 1) / 2)) / 2)
    c.close("E[bias(X2)]", e_bias, 1 / 6, 1e-12)
    c.finish(capsys, "AC2", "population 2 calibration closed forms")


def test_ac3_pop1_bias_values(capsys):
    c = Checks()
    start = time.perf_counter()
    bt = pop1_bias(pop1_joint_table(reference_pop1_spec(beta1=0.7621)))
    elapsed = time.perf_counter() - start
    published = {(1, 1): 0.0640, (1, 0): 0.1298, (0, 1): 0.0581, (0, 0): 0.1090}
    for x in X_POINTS:
        c.close(f"bias{x}", bt.bias[x], published[x], 5e-5)
    c.true("runtime < 1 s", elapsed < 1, f"{elapsed:.3f} s")
    c.finish(capsys, "AC3", "population 1 bias values")


def test_ac4_pop1_structure(capsys):
    c = Checks()
    spec = reference_pop1_spec(beta1=0.7621)
    table = pop1_joint_table(spec)
    atoms = Pop1Atoms(spec.alpha0, spec.alpha1, spec.beta, spec.p)
    tbps = {k: make_pop1_tbp(k, table) for k in KINDS}
    for k in ("h2", "h3"):
        cal = atoms.calibration(lambda x1, x2, k=k: pop1_tbp_predict(tbps[k], x1, x2))
        c.close(f"{k} moderately calibrated (max |E[B|H]-H|)",
                max(abs(v - h) for h, v in cal.items()), 0.0, 1e-12)
    c.close("h3 = tau_s pointwise (max abs error)",
            max(abs(pop1_tbp_predict(tbps["h3"], *x) - table.tau_s[x]) for x in X_POINTS), 0.0, 1e-12)
    cb = {k: pop1_metrics(table, t).cb for k, t in tbps.items()}
    c.close("C_b(h1) = C_b(h2)", cb["h1"], cb["h2"], 1e-12)
    c.true("C_b(h3) >= C_b(h1)", cb["h3"] >= cb["h1"], f"{cb['h3']!r} vs {cb['h1']!r}")
    for k, t in tbps.items():
        ev = naive_metrics(table, t)
        c.true(f"naive C_b < C_b for {k}", ev.naive.cb < ev.adjusted.cb,
               f"{ev.naive.cb!r} vs {ev.adjusted.cb!r}")
        gap = ev.calibration_naive.y - ev.calibration.y
        c.true(f"naive calibration above adjusted for {k}", np.all(gap > 0), f"min gap {gap.min()!r}")
    c.finish(capsys, "AC4", "population 1 structural properties")


def test_ac5_null_confounding(capsys):
    c = Checks()
    table = pop1_joint_table(reference_pop1_spec(beta1=0.0))
    for k in KINDS:
        ev = naive_metrics(table, make_pop1_tbp(k, table))
        c.close(f"{k} C_b deviation", ev.deviation.cb_deviation, 0.0, 1e-12)
        c.close(f"{k} max calibration deviation",
                max(abs(v) for _, v in ev.deviation.calib_dev), 0.0, 1e-12)
        for field in ("tau_star", "maxlike", "cb", "gini_b"):
            c.close(f"{k} naive {field} = adjusted", getattr(ev.naive, field), getattr(ev.adjusted, field), 1e-12)
    c.finish(capsys, "AC5", "null confounding")


def test_ac6_pairwise_suite(capsys):
    c = Checks()
    rng = np.random.default_rng(20240814)
    worst = dict(pair=0.0, area=0.0, gini=0.0, univariate=0.0)
    done = 0
    while done < 1000:
        n = int(rng.integers(2, 51))
        h = rng.integers(0, int(rng.integers(1, 10)), n).astype(float)
        b = rng.uniform(-1, 2, n)
        if b.mean() < 0.05:
            continue
        done += 1
        f_eta = eta_per_record(h)  # 2F_H - f_H at each record
        formula = math.fsum(b * f_eta) / n
        oracle = pairwise_maxlike_oracle(b, h)
        worst["pair"] = max(worst["pair"], abs(oracle - formula))
        report = cb_plug_in(b, h)
        area = gini_from_rcc(rcc(b, h))
        worst["area"] = max(worst["area"], abs(area - (oracle - b.mean()) / b.mean()))
        worst["gini"] = max(worst["gini"], abs(report.cb - report.gini_b / (1 + report.gini_b)))
        # E[max(X1, X2)] for iid draws from the empirical law of b
        xs = b[:, None]
        e_max = np.maximum(xs, xs.T).mean()
        worst["univariate"] = max(worst["univariate"], abs(e_max - math.fsum(b * eta_per_record(b)) / n))
    c.close("pairwise oracle = 2E[BF]-E[Bf] (worst)", worst["pair"], 0.0, 1e-12)
    c.close("2A = (maxlike-E[B])/E[B] (worst)", worst["area"], 0.0, 1e-12)
    c.close("C_b = Gini/(1+Gini) (worst)", worst["gini"], 0.0, 1e-10)
    c.close("E[max] = 2E[XF]-E[Xf] (worst)", worst["univariate"], 0.0, 1e-12)
    c.finish(capsys, "AC6", "pairwise identities on 1000 random populations")


def test_ac7_deviation_cross_check(capsys):
    c = Checks()
    ev = pop2_evaluation(points=9)
    c.close("pop2 factored = direct", ev.deviation.cb_deviation, ev.naive.cb - ev.adjusted.cb, 1e-10)
    table = pop1_joint_table(reference_pop1_spec())
    for k in KINDS:
        ev = naive_metrics(table, make_pop1_tbp(k, table))
        c.close(f"pop1 {k} factored = direct", ev.deviation.cb_deviation, ev.naive.cb - ev.adjusted.cb, 1e-10)
    c.finish(capsys, "AC7", "factored deviation against direct difference")


@pytest.mark.slow
def test_ac8_monte_carlo(capsys):
    c = Checks()
    start = time.perf_counter()
    s = simulate(Pop2Spec(), 200_000, seed=7)
    tau = s.extra["tau"]
    c.close("pop2 C_b with true tau", cb_plug_in(tau, s.h).cb, 0.1489362, 0.01)
    binned = calibration_curve(tau, s.h, "equal_frequency", 20)
    closed = calibration_curve(pop2_calibration(s.h), s.h, "equal_frequency", 20)
    c.close("pop2 calibration bins (max abs error)", float(np.max(np.abs(binned.y - closed.y))), 0.0, 0.02)

    table = pop1_joint_table(reference_pop1_spec())
    s1 = simulate(reference_pop1_spec(), 1_000_000, seed=20240601)
    est = outcome_regression_tau(s1)
    for k in KINDS:
        tbp = make_pop1_tbp(k, table)
        h = pop1_tbp_predict(tbp, s1.x[:, 0], s1.x[:, 1])
        c.close(f"pop1 {k} OR plug-in C_b", cb_plug_in(est.tau_hat, h).cb, pop1_metrics(table, tbp).cb, 0.01)
    elapsed = time.perf_counter() - start
    c.true("runtime < 60 s", elapsed < 60, f"{elapsed:.1f} s")
    c.finish(capsys, "AC8", "Monte Carlo convergence")


def test_ac9_determinism(tmp_path, monkeypatch, capsys):
    c = Checks()
    spec = tmp_path / "pop1.json"
    spec.write_text(json.dumps(population_config(reference_pop1_spec())))
    outputs = {}
    for threads in ("1", "4"):
        monkeypatch.setenv("TBP_EVAL_THREADS", threads)
        d = tmp_path / threads
        d.mkdir()
        runs = [
            ["simulate", "--pop", "pop2", "--n", "140000", "--seed", "9", "--counterfactuals", "--emit-tau",
             "--out", str(d / "pop2.csv")],
            ["simulate", "--pop", str(spec), "--n", "140000", "--seed", "9", "--tbp", "h3",
             "--out", str(d / "pop1.csv")],
            ["oracle", "--pop", "pop2", "--out", str(d / "oracle2.json"), "--out-dir", str(d / "o2")],
            ["oracle", "--pop", "pop1", "--spec", str(spec), "--tbp", "h2", "--out", str(d / "oracle1.json"),
             "--out-dir", str(d / "o1")],
            ["evaluate", "--data", str(d / "pop1.csv"), "--out", str(d / "eval1.json"), "--out-dir", str(d / "e1")],
            ["evaluate", "--data", str(d / "pop2.csv"), "--method", "ipw", "--propensity-col", "z1",
             "--out", str(d / "eval2.json"), "--out-dir", str(d / "e2")],
            ["sweep", "--spec", str(spec), "--beta1-steps", "30", "--alpha13-steps", "30",
             "--out", str(d / "sweep.csv")],
        ]
        for argv in runs:
            c.true(f"{argv[0]} exit 0 with {threads} thread(s)", main(argv) == 0)
        outputs[threads] = {
            str(p.relative_to(d)).replace(str(d), ""): p.read_bytes()
            for p in sorted(d.rglob("*")) if p.is_file()
        }
    capsys.readouterr()
    c.true("same file set", outputs["1"].keys() == outputs["4"].keys())
    for name, blob in outputs["1"].items():
        other = outputs["4"].get(name, b"")
        # JSON reports embed their own curve paths; compare with those removed
        if name.endswith(".json"):
            blob, other = (b.replace(str(tmp_path).encode(), b"") for b in (blob, other))
            blob = blob.replace(b"/1/", b"/#/")
            other = other.replace(b"/4/", b"/#/")
        c.true(f"{name} byte-identical", blob == other)
    c.finish(capsys, "AC9", "determinism across runs and worker counts")
