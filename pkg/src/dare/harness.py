"""Experiment orchestration behind the command line.

Every ``run_*`` function takes a parameter dict (defaults merged with the
config file and flags), a global seed and a thread count, and returns
``(summary, rows)``: a JSON-ready summary with a ``pass`` flag and long-format
rows ``(grid_point, trial, metric, value)``.
"""
from __future__ import annotations

import json
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _kernels, io
from .envmodel import (EnvironmentSpec, EnvPrior, GroundTruth, example1_family, gen_environment,
                       gen_environments, random_spd)
from .matops import nullspace_projector, spectral_summary
from .seeding import map_trials, trial_int, trial_rng
from .solvers import (FitConfig, accuracy, closed_form_dare_linear, constraint_violation, dare_fit,
                      erm_fit, fit_whiteners, groupdro_fit, guess_test_whitener, mean_loss,
                      reweighted_erm_fit)
from .theory import (AdversarySpec, adversarial_sup_risk, adversary_search, classifier_alignment,
                     complexity_test_spec,
                     condition_measure, env_complexity_experiment, jituda_experiment, lemma1_check,
                     shrink_min_eigenvalue, unbounded_check, whitener_error)

log = logging.getLogger(__name__)

DEFAULTS: dict[str, dict] = {
    "gen": {"d1": 3, "d2": 3, "envs": 6, "n": 5000, "task": "classify", "mean_scale": 4.0,
            "cond": 4.0, "varying_weight": 0.5, "test_stretch": 4.0, "test_shift": 4.0,
            "residual_law": "standard-gaussian"},
    "fit": {"data": "", "method": "dare", "lam": 10.0, "shrinkage_weight": 0.1, "center": True,
            "max_iters": 10000, "grad_tol": 1e-8, "step_size": 0.01},
    "eval": {"model": "", "data": ""},
    "theorem1": {"d": 8, "envs": 3, "n": 100000, "lam": 100.0, "mean_scale": 2.0, "cond": 4.0},
    "theorem2": {"d": 8, "envs": 3, "instances": 20, "rho": 1.0, "B": 0.5, "search_trials": 2000,
                 "erm_n": 2000, "caps": [1e1, 1e2, 1e3, 1e4]},
    "theorem3": {"d": 100, "rank": 80, "E_grid": [8, 16, 32, 64], "trials": 50,
                 "item1_d": 20, "item1_rank": 5, "amplification": 2.0},
    "theorem4": {"d": 10, "n_grid": [500, 1000, 2000, 4000, 8000], "trials": 50,
                 "lambda_min": 0.25, "paired_n": 1000},
    "lemma1": {"d": 10, "n": 1000000, "scale": 0.6, "rademacher_d": 50, "rademacher_n": 200000},
    "diagnostics": {"d1": 3, "d2": 3, "envs": 5, "n": 5000, "log_spread": 3.0},
    "sweep-lambda": {"d1": 3, "d2": 3, "envs": 6, "n": 10000, "n_test": 20000,
                     "lambda_grid": [0.0, 1.0, 10.0, 100.0], "mean_scale": 4.0, "cond": 4.0,
                     "varying_weight": 0.5, "test_stretch": 4.0, "test_shift": 4.0},
}

# reduced sizes for smoke runs; pass flags are not expected to hold
QUICK: dict[str, dict] = {
    "gen": {"n": 500},
    "theorem1": {"n": 5000},
    "theorem2": {"instances": 3, "search_trials": 200, "caps": [1e1, 1e3]},
    "theorem3": {"d": 30, "rank": 20, "E_grid": [2, 4, 8, 16], "trials": 8},
    "theorem4": {"n_grid": [100, 200, 400, 800], "trials": 8, "paired_n": 200},
    "lemma1": {"n": 20000, "rademacher_d": 10, "rademacher_n": 20000},
    "diagnostics": {"n": 800},
    "sweep-lambda": {"n": 800, "n_test": 2000},
}

EXPERIMENTS = ("theorem1", "theorem2", "theorem3", "theorem4", "lemma1", "diagnostics",
               "sweep-lambda")


@dataclass
class ExperimentConfig:
    command: str
    params: dict
    seed: int = 0
    out: Path = Path("out")
    threads: int = 1
    quick: bool = False

    def __post_init__(self):
        self.out = Path(self.out)
        if self.threads < 1:
            raise ValueError("threads must be positive")
        for key, val in self.params.items():
            if key in ("n", "trials", "instances", "envs", "search_trials", "d") and int(val) < 1:
                raise ValueError(f"{key} must be positive")
            if key.endswith("grid") and (not val or list(val) != sorted(val)):
                raise ValueError(f"{key} must be non-empty and ascending")

    def as_dict(self) -> dict:
        return {"command": self.command, "params": self.params, "seed": self.seed,
                "quick": self.quick}


@dataclass
class RunManifest:
    config_hash: str
    versions: dict
    wall_clock: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    files: list = field(default_factory=list)


def resolve_params(command: str, file_cfg: dict | None = None, overrides: dict | None = None,
                   quick: bool = False) -> dict:
    params = dict(DEFAULTS.get(command, {}))
    if quick:
        params.update(QUICK.get(command, {}))
    if file_cfg:
        unknown = set(file_cfg) - set(params)
        if unknown:
            raise ValueError(f"unknown keys for [{command}]: {sorted(unknown)}")
        params.update(file_cfg)
    for key, val in (overrides or {}).items():
        if val is not None and key in params:
            params[key] = val
    return params


def versions() -> dict:
    return {"dare": __version__, "numpy": np.__version__, "python": platform.python_version(),
            "kernel_backend": _kernels.backend()}


# --------------------------------------------------------------------------- setups

def example1_setup(p: dict, seed: int, name: str):
    """Training and out-of-domain specs for the block family.

    Training domains come in pairs with opposite mean shifts and a shared
    varying-block covariance, so label base rates cancel across the pool.
    The shifts of the pairs are orthogonal and span the varying block. The
    test domain stretches that block anisotropically and moves its mean
    orthogonally to ``beta*``.
    """
    rng = trial_rng(seed, name, 0)
    d1, d2 = int(p["d1"]), int(p["d2"])
    pairs = int(p["envs"]) // 2
    if pairs < 1:
        raise ValueError("need at least two environments")
    covs = [random_spd(d2, rng, float(p["cond"])) for _ in range(pairs)]
    Q, _ = np.linalg.qr(rng.standard_normal((d2, d2)))
    shifts = float(p["mean_scale"]) * Q[:, np.arange(pairs) % d2].T
    bs = [np.r_[np.zeros(d1), s * b] for b in shifts for s in (1.0, -1.0)]
    specs = example1_family(d1, d2, np.eye(d1), [c for c in covs for _ in (0, 1)], bs)
    truth = GroundTruth(np.r_[np.full(d1, 2.0), np.full(d2, float(p["varying_weight"]))])
    stretch = np.ones(d2)
    shift = np.zeros(d2)
    st, sh = float(p["test_stretch"]), float(p["test_shift"])
    stretch[0] = st
    if d2 >= 2:
        stretch[1] = 1.0 / st
        shift[0], shift[1] = sh, -sh
    test = example1_family(d1, d2, np.eye(d1), [np.diag(stretch)], [np.r_[np.zeros(d1), shift]])[0]
    return specs, test, truth


def _theorem1_instance(p: dict, seed: int):
    rng = trial_rng(seed, "theorem1", 0)
    d, E = int(p["d"]), int(p["envs"])
    specs = [EnvironmentSpec(random_spd(d, rng, float(p["cond"])),
                             float(p["mean_scale"]) * rng.standard_normal(d)) for _ in range(E)]
    truth = GroundTruth(rng.standard_normal(d))
    return specs, truth


# --------------------------------------------------------------------------- experiments

def run_theorem1(p: dict, seed: int, threads: int = 1):
    specs, truth = _theorem1_instance(p, seed)
    Bm = np.array([s.b for s in specs]).T
    target = closed_form_dare_linear(truth.beta_star, Bm)
    nb = float(np.linalg.norm(truth.beta_star))
    cfg = FitConfig(lam=float(p["lam"]), shrinkage_weight=0.0)
    n = int(p["n"])
    out, rows = {}, []
    reg = dare_fit(gen_environments(specs, truth, n, "regress", seed=trial_int(seed, "theorem1", 1)), cfg)
    err = float(np.linalg.norm(reg.direction() - target))
    out["regress"] = {"abs_error": err, "rel_error": err / nb, "convergence": reg.convergence,
                      "pass": err <= 1e-2 * nb}
    cls = dare_fit(gen_environments(specs, truth, n, "classify", seed=trial_int(seed, "theorem1", 2)), cfg)
    w = cls.direction()
    cos = float(w @ target / (np.linalg.norm(w) * np.linalg.norm(target)))
    alpha = float(w @ target / (target @ target))
    out["classify"] = {"cosine": cos, "alpha": alpha, "convergence": cls.convergence,
                       "pass": cos >= 0.99 and 0.0 < alpha <= 1.05}
    rows += [("regress", 0, "rel_error", err / nb), ("classify", 0, "cosine", cos),
             ("classify", 0, "alpha", alpha)]
    out["pass"] = bool(out["regress"]["pass"] and out["classify"]["pass"])
    return out, rows


def _theorem2_instance(p: dict, seed: int, i: int):
    rng = trial_rng(seed, "theorem2", i)
    d, E = int(p["d"]), int(p["envs"])
    beta_star = rng.standard_normal(d)
    Bm = rng.standard_normal((d, E))
    P = nullspace_projector(Bm, d=d)
    truth = GroundTruth(beta_star)
    specs = [EnvironmentSpec(np.eye(d), Bm[:, e]) for e in range(E)]
    erm = erm_fit(gen_environments(specs, truth, int(p["erm_n"]), "regress",
                                   seed=trial_int(seed, "theorem2-erm", i)))
    alts = {"beta_star": beta_star, "half_beta_star": 0.5 * beta_star,
            "leaky": P @ beta_star + 0.3 * (beta_star - P @ beta_star), "erm": erm.direction()}
    return truth, P, alts


def run_theorem2(p: dict, seed: int, threads: int = 1):
    rho, B = float(p["rho"]), float(p["B"])
    trials = int(p["search_trials"])
    caps = [float(c) for c in p["caps"]]

    def one(i):
        truth, P, alts = _theorem2_instance(p, seed, i)
        s = trial_int(seed, "theorem2-search", i)
        budget = AdversarySpec(rho, B, P)
        sup = adversarial_sup_risk(truth.beta_star, P, rho, B)
        dare = P @ truth.beta_star
        dare_risk, witness = adversary_search(dare, budget, truth, trials, s)
        rec = {"sup": sup, "dare": dare_risk, "dare_ratio": dare_risk / sup,
               "witness_feasible": witness.feasible(dare, truth.beta_star)}
        flag, _ = unbounded_check(dare, budget, truth, caps, trials=max(trials // 5, 50), seed=s)
        rec["dare_unbounded"] = flag
        for name, b in alts.items():
            rec[name] = adversary_search(b, budget, truth, trials, s)[0]
            leak = np.linalg.norm(b - P @ b) > 1e-8 * np.linalg.norm(b)
            rec[name + "_leaks"] = bool(leak)
            rec[name + "_unbounded"] = unbounded_check(b, budget, truth, caps,
                                                       trials=max(trials // 5, 50), seed=s)[0]
        # zero predictor against the B = 0 budget, where its sup equals the DARE sup
        b0 = AdversarySpec(rho, 0.0, P)
        rec["zero_b0"] = adversary_search(np.zeros_like(dare), b0, truth, trials, s)[0]
        rec["dare_b0"] = adversary_search(dare, b0, truth, trials, s)[0]
        rec["zero"] = adversary_search(np.zeros_like(dare), budget, truth, trials, s)[0]
        return rec

    recs = map_trials(one, range(int(p["instances"])), threads)
    rows = []
    alt_names = ("beta_star", "half_beta_star", "leaky", "erm")
    ok_ratio = ok_dom = ok_unb = ok_zero = True
    for i, r in enumerate(recs):
        rows.append(("instance", i, "sup_formula", r["sup"]))
        rows.append(("instance", i, "dare_ratio", r["dare_ratio"]))
        for name in alt_names + ("zero", "zero_b0", "dare_b0"):
            rows.append(("instance", i, name, r[name]))
        ok_ratio &= 0.9 <= r["dare_ratio"] <= 1.000001 and r["witness_feasible"]
        ok_dom &= all(r[name] >= r["dare"] - 1e-6 for name in alt_names)
        ok_unb &= (not r["dare_unbounded"]) and all(
            r[name + "_unbounded"] for name in alt_names if r[name + "_leaks"])
        ok_zero &= r["zero_b0"] >= r["dare_b0"] - 1e-6 * r["sup"]
    summary = {
        "dare_ratio_min": min(r["dare_ratio"] for r in recs),
        "dare_ratio_max": max(r["dare_ratio"] for r in recs),
        "zero_ratio_at_B": [r["zero"] / r["sup"] for r in recs],
        "checks": {"tight_sup": bool(ok_ratio), "dominance": bool(ok_dom),
                   "unbounded_flags": bool(ok_unb), "zero_vs_dare_B0": bool(ok_zero)},
    }
    summary["pass"] = bool(ok_ratio and ok_dom and ok_unb)
    return summary, rows


def decaying_prior(d: int, rank: int, rng) -> EnvPrior:
    """``Sigma_b`` with eigenvalues ``1/i`` on a random ``rank``-dim subspace."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = np.zeros(d)
    lam[:rank] = 1.0 / np.arange(1, rank + 1)
    S = (Q * lam) @ Q.T
    return EnvPrior(0.5 * (S + S.T))


def run_theorem3(p: dict, seed: int, threads: int = 1):
    rows = []
    # item 1: as many environments as the rank of Sigma_b
    rng = trial_rng(seed, "theorem3-setup", 1)
    d1, r1 = int(p["item1_d"]), int(p["item1_rank"])
    prior1 = decaying_prior(d1, r1, rng)
    truth1 = GroundTruth(rng.standard_normal(d1))
    c1 = env_complexity_experiment(prior1, truth1, [1, r1], int(p["trials"]), seed,
                                   threads=threads)
    gaps_full, err_full = c1.per_trial[:, 1], c1.extra["subspace_error"][:, 1]
    item1 = {"max_subspace_error": float(err_full.max()), "max_gap": float(gaps_full.max()),
             "min_gap_E1": float(c1.per_trial[:, 0].min()),
             "pass": bool(np.all(err_full <= 1e-8) and np.all(gaps_full <= 1e-10))}
    for t in range(c1.per_trial.shape[0]):
        for j, E in enumerate(c1.grid):
            rows.append((f"item1_E={E}", t, "gap", c1.per_trial[t, j]))
            rows.append((f"item1_E={E}", t, "subspace_error", c1.extra["subspace_error"][t, j]))
    # item 2: rate in the number of environments
    rng = trial_rng(seed, "theorem3-setup", 2)
    d, rank = int(p["d"]), int(p["rank"])
    prior = decaying_prior(d, rank, rng)
    truth = GroundTruth(rng.standard_normal(d))
    c2 = env_complexity_experiment(prior, truth, p["E_grid"], int(p["trials"]), seed,
                                   test_spec=complexity_test_spec(prior, float(p["amplification"])),
                                   threads=threads)
    se = c2.extra["subspace_error"]
    fro = c2.extra["subspace_error_fro"]
    for t in range(c2.per_trial.shape[0]):
        for j, E in enumerate(c2.grid):
            rows.append((f"item2_E={E}", t, "gap", c2.per_trial[t, j]))
            rows.append((f"item2_E={E}", t, "subspace_error", se[t, j]))
            rows.append((f"item2_E={E}", t, "subspace_error_fro", fro[t, j]))
    positive = all(m > 0 for m in c2.mean)
    slope = c2.slope if positive else float("nan")
    mean_se = se.mean(axis=0)
    se_err = se.std(axis=0, ddof=1) / np.sqrt(se.shape[0])
    mono = bool(np.all(np.diff(mean_se) <= se_err[1:] + 1e-12))
    item2 = {"E_grid": c2.grid, "mean_gap": c2.mean, "stderr": c2.stderr, "slope": slope,
             "effective_rank": spectral_summary(prior.Sigma_b).effective_rank,
             "mean_subspace_error": mean_se.tolist(),
             "mean_subspace_error_fro": fro.mean(axis=0).tolist(),
             "subspace_error_monotone": mono,
             "pass": bool(positive and -0.8 <= slope <= -0.2)}
    return {"item1": item1, "item2": item2, "pass": item1["pass"] and item2["pass"]}, rows


def theorem4_setup(p: dict):
    d = int(p["d"])
    Sigma_T = np.eye(d)
    Sigma_T[-1, -1] = float(p["lambda_min"])
    beta = np.full(d, 0.3)
    beta[-1] = 1.0
    mu_T = np.zeros(d)
    mu_T[0] = 1.0
    return GroundTruth(beta), np.eye(d), Sigma_T, mu_T


def run_theorem4(p: dict, seed: int, threads: int = 1):
    truth, Sigma_S, Sigma_T, mu_T = theorem4_setup(p)
    trials = int(p["trials"])
    curve = jituda_experiment(truth, Sigma_S, Sigma_T, mu_T, p["n_grid"], trials, seed,
                              threads=threads)
    rows = [(f"n={n}", t, "excess", curve.per_trial[t, j])
            for t in range(trials) for j, n in enumerate(curve.grid)]
    Sigma_T2 = shrink_min_eigenvalue(Sigma_T)
    n_p = [int(p["paired_n"])]
    base = jituda_experiment(truth, Sigma_S, Sigma_T, mu_T, n_p, trials, seed, name="theorem4-paired",
                             threads=threads)
    worse = jituda_experiment(truth, Sigma_S, Sigma_T2, mu_T, n_p, trials, seed,
                              name="theorem4-paired", threads=threads)
    diff = worse.per_trial[:, 0] - base.per_trial[:, 0]
    for t in range(trials):
        rows.append(("paired", t, "excess_base", base.per_trial[t, 0]))
        rows.append(("paired", t, "excess_doubled_m", worse.per_trial[t, 0]))
    slope = curve.slope
    summary = {
        "n_grid": curve.grid, "mean_excess": curve.mean, "stderr": curve.stderr, "slope": slope,
        "slope_pass": bool(-1.3 <= slope <= -0.7),
        "m_base": condition_measure(Sigma_T), "m_doubled": condition_measure(Sigma_T2),
        "paired_mean_base": base.mean[0], "paired_mean_doubled": worse.mean[0],
        "paired_diff_mean": float(diff.mean()),
        "paired_diff_stderr": float(diff.std(ddof=1) / np.sqrt(diff.size)) if diff.size > 1 else 0.0,
        "paired_pass": bool(worse.mean[0] > base.mean[0]),
    }
    summary["pass"] = summary["slope_pass"] and summary["paired_pass"]
    return summary, rows


def run_lemma1(p: dict, seed: int, threads: int = 1):
    d, n = int(p["d"]), int(p["n"])
    beta = np.full(d, float(p["scale"]))
    half = list(range(d // 2))  # equal entries, so half the squared norm
    jobs = [("none", [], beta, n, "standard-gaussian"),
            ("half", half, beta, n, "standard-gaussian")]
    dr = int(p["rademacher_d"])
    beta_r = np.full(dr, float(p["scale"]) * np.sqrt(d / dr))
    jobs.append(("rademacher", list(range(dr // 2)), beta_r, int(p["rademacher_n"]), "rademacher"))

    def one(k):
        name, removed, b, nn, law = jobs[k]
        alpha, orth = lemma1_check(removed, b, nn, trial_int(seed, "lemma1", k), residual_law=law)
        bs = b.copy()
        bs[removed] = 0.0
        return name, alpha, orth, float(np.linalg.norm(bs))

    res = map_trials(one, range(len(jobs)), threads)
    out, rows = {}, []
    for name, alpha, orth, nbs in res:
        out[name] = {"alpha": alpha, "orth_norm": orth, "orth_rel": orth / nbs}
        rows += [(name, 0, "alpha", alpha), (name, 0, "orth_rel", orth / nbs)]
    out["none"]["pass"] = bool(abs(out["none"]["alpha"] - 1.0) <= 0.05)
    out["half"]["pass"] = bool(0.0 < out["half"]["alpha"] < 1.0 and out["half"]["orth_rel"] <= 0.02)
    out["rademacher"]["pass"] = bool(0.0 < out["rademacher"]["alpha"] <= 1.0)
    out["pass"] = out["none"]["pass"] and out["half"]["pass"]
    return out, rows


def run_diagnostics(p: dict, seed: int, threads: int = 1):
    rng = trial_rng(seed, "diagnostics", 0)
    d1, d2, E = int(p["d1"]), int(p["d2"]), int(p["envs"])
    spread = float(p["log_spread"])
    covs = [np.diag(np.exp(rng.uniform(-spread, spread, d2))) for _ in range(E)]
    specs = example1_family(d1, d2, np.eye(d1), covs)
    truth = GroundTruth(np.ones(d1 + d2))
    data = gen_environments(specs, truth, int(p["n"]), "classify", seed=trial_int(seed, "diagnostics", 1))
    adj = classifier_alignment(data, adjusted=True)
    raw = classifier_alignment(data, adjusted=False)
    whs = fit_whiteners(data, 0.1)
    loo = []
    for e in range(E):
        guess = guess_test_whitener([w for k, w in enumerate(whs) if k != e])
        loo.append(whitener_error(guess, whs[e].inv_sqrt))
    rows = [("alignment", 0, "adjusted", adj), ("alignment", 0, "unadjusted", raw)]
    rows += [("whitener_loo", e, "normalized_error", v) for e, v in enumerate(loo)]
    summary = {"alignment_adjusted": adj, "alignment_unadjusted": raw, "alignment_gap": adj - raw,
               "whitener_loo_error": loo, "pass": bool(adj - raw >= 0.05)}
    return summary, rows


def sweep_lambda(datasets, lambda_grid, test_sets=(), shrinkage_weight: float = 0.1,
                 threads: int = 1) -> list[dict]:
    """One DARE fit per penalty weight; accuracy/risk on each test set plus violation."""
    lambda_grid = [float(v) for v in lambda_grid]
    if any(v < 0 for v in lambda_grid):
        raise ValueError("lambda grid must be non-negative")
    whs = fit_whiteners(datasets, shrinkage_weight)

    def one(lam):
        model = dare_fit(datasets, FitConfig(lam=lam, shrinkage_weight=shrinkage_weight), whs)
        row = {"lambda": lam, "violation": float(constraint_violation(model, whs).max())}
        for i, ds in enumerate(test_sets):
            key = ds.env_id or str(i)
            if model.task == "classify":
                row[f"accuracy_{key}"] = accuracy(model, ds)
            else:
                row[f"risk_{key}"] = mean_loss(model, ds)
        return row

    return map_trials(one, lambda_grid, threads)


def run_sweep_lambda(p: dict, seed: int, threads: int = 1):
    specs, test, truth = example1_setup(p, seed, "sweep-lambda")
    n = int(p["n"])
    data = gen_environments(specs, truth, n, "classify", seed=trial_int(seed, "sweep-lambda", 1))
    ood = gen_environment(test, truth, int(p["n_test"]), "classify",
                          seed=trial_int(seed, "sweep-lambda", 2), env_id="ood")
    table = sweep_lambda(data, p["lambda_grid"], [ood], threads=threads)
    rows = []
    for r in table:
        rows += [(f"lambda={r['lambda']!r}", 0, "accuracy_ood", r["accuracy_ood"]),
                 (f"lambda={r['lambda']!r}", 0, "violation", r["violation"])]
    by = {r["lambda"]: r for r in table}
    robust = [by[v]["accuracy_ood"] for v in (1.0, 10.0, 100.0) if v in by]
    spread = max(robust) - min(robust) if robust else float("nan")
    viol = [r["violation"] for r in table]
    summary = {"table": table, "accuracy_spread": spread,
               "violation_monotone": bool(all(b <= a * (1 + 1e-6) + 1e-12
                                              for a, b in zip(viol, viol[1:])))}
    checks = {"spread": bool(spread < 0.01)}
    if 0.0 in by and 10.0 in by:
        checks["zero_violation_larger"] = by[0.0]["violation"] > by[10.0]["violation"]
        checks["zero_accuracy_lower"] = by[0.0]["accuracy_ood"] < by[10.0]["accuracy_ood"]
    summary["checks"] = checks
    summary["pass"] = bool(all(checks.values()))
    return summary, rows


RUNNERS = {
    "theorem1": run_theorem1, "theorem2": run_theorem2, "theorem3": run_theorem3,
    "theorem4": run_theorem4, "lemma1": run_lemma1, "diagnostics": run_diagnostics,
    "sweep-lambda": run_sweep_lambda,
}


# --------------------------------------------------------------------------- data commands

def run_gen(p: dict, seed: int, out_dir: Path):
    specs, test, truth = example1_setup(p, seed, "gen")
    specs = [EnvironmentSpec(s.A, s.b, p["residual_law"]) for s in specs]
    data = gen_environments(specs, truth, int(p["n"]), p["task"], seed=trial_int(seed, "gen", 1))
    test_ds = gen_environment(EnvironmentSpec(test.A, test.b, p["residual_law"]), truth, int(p["n"]),
                              p["task"], seed=trial_int(seed, "gen", 2), env_id="test")
    io.save_datasets(out_dir / "train.csv", data)
    io.save_datasets(out_dir / "test.csv", [test_ds])
    io.write_json(out_dir / "truth.json", {"beta_star": truth.beta_star,
                                           "noise_std": truth.noise_std})
    return {"train": "train.csv", "test": "test.csv", "envs": len(data), "pass": True}, []


FITTERS = {"dare": dare_fit, "erm": erm_fit, "reweighted_erm": reweighted_erm_fit,
           "groupdro": groupdro_fit}


def run_fit(p: dict, seed: int, out_dir: Path):
    if not p["data"]:
        raise ValueError("fit needs --data")
    if p["method"] not in FITTERS:
        raise ValueError(f"unknown method {p['method']!r}; choose from {sorted(FITTERS)}")
    data = io.load_datasets(p["data"])
    cfg = FitConfig(lam=float(p["lam"]), shrinkage_weight=float(p["shrinkage_weight"]),
                    center=bool(p["center"]), max_iters=int(p["max_iters"]),
                    grad_tol=float(p["grad_tol"]))
    if p["method"] == "groupdro":
        model = groupdro_fit(data, cfg, step_size=float(p["step_size"]))
    else:
        model = FITTERS[p["method"]](data, cfg)
    io.save_model(out_dir / "model.json", model)
    conv = model.convergence
    return {"model": "model.json", "method": model.method_tag, "iters": conv.get("iters"),
            "grad_norm": conv.get("grad_norm"), "pass": bool(conv.get("converged", True))}, []


def run_eval(p: dict, seed: int, out_dir: Path):
    if not p["model"] or not p["data"]:
        raise ValueError("eval needs --model and --data")
    model = io.load_model(p["model"])
    data = io.load_datasets(p["data"])
    rows, per_env = [], {}
    for ds in data:
        rec = {"loss": mean_loss(model, ds)}
        if model.task == "classify":
            rec["accuracy"] = accuracy(model, ds)
        per_env[ds.env_id] = rec
        rows += [(f"env={ds.env_id}", 0, k, v) for k, v in rec.items()]
    return {"per_env": per_env, "pass": True}, rows


# --------------------------------------------------------------------------- driver

def execute(cfg: ExperimentConfig) -> dict:
    """Run one command into ``cfg.out/<command>`` and refresh the root manifest."""
    sub = cfg.out / cfg.command
    sub.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if cfg.command == "gen":
        summary, rows = run_gen(cfg.params, cfg.seed, sub)
    elif cfg.command == "fit":
        summary, rows = run_fit(cfg.params, cfg.seed, sub)
    elif cfg.command == "eval":
        summary, rows = run_eval(cfg.params, cfg.seed, sub)
    else:
        summary, rows = RUNNERS[cfg.command](cfg.params, cfg.seed, cfg.threads)
    elapsed = time.perf_counter() - t0
    summary = {"command": cfg.command, "params": cfg.params, "seed": cfg.seed, **summary}
    io.write_json(sub / "summary.json", summary)
    if rows:
        io.write_long_csv(sub / "results.csv", rows)
    _record_timing(cfg.out, cfg.command, elapsed)
    log.info("%s finished in %.1fs (pass=%s)", cfg.command, elapsed, summary["pass"])
    return summary


def _record_timing(out: Path, command: str, seconds: float) -> None:
    path = out / io.TIMING
    data = json.loads(path.read_text()) if path.exists() else {}
    data[command] = seconds
    io.write_json(path, data)


def finalize(out: Path, configs: list[ExperimentConfig], results: dict) -> dict:
    merged = {"seed": configs[0].seed if configs else None,
              "runs": {c.command: c.as_dict() for c in configs}}
    prev = out / "summary.json"
    passes = json.loads(prev.read_text()) if prev.exists() else {}
    passes.update({k: bool(v["pass"]) for k, v in results.items()})
    io.write_json(prev, passes)
    return io.write_manifest(out, merged, versions(), passes)


def run_all(seed: int, out: Path, threads: int = 1, quick: bool = False,
            file_cfg: dict | None = None) -> dict:
    configs = [ExperimentConfig(name, resolve_params(name, (file_cfg or {}).get(name), quick=quick),
                                seed, out, threads, quick) for name in EXPERIMENTS]
    results = {c.command: execute(c) for c in configs}
    finalize(out, configs, results)
    return results
