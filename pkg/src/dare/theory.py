"""Risk formulas, the block-parameterized adversary and verification experiments.

Test-domain risk is measured for linear regression with a predictor
``f(x) = beta_hat^T Sigma_bar^{-1/2} x`` on an environment ``x = A eps``.
Writing ``Delta = Sigma_test^{1/2} Sigma_bar^{-1/2} - I`` and
``v = (Delta + I) beta_hat - beta*``, the excess squared risk over the
Bayes score ``beta*^T eps`` is ``||v||^2 + (v^T b)^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .envmodel import (EnvironmentSpec, EnvPrior, GroundTruth, gen_environment,
                       logistic_noise, sample_env_params, sample_latents, sample_residuals)
from .matops import inv_sqrt_psd, nullspace_projector, sqrt_psd, sym_eig
from .seeding import map_trials, trial_int, trial_rng
from .solvers import FitConfig, LinearObjective, _solve, fit_whiteners, jituda_fit_predict

FEASIBILITY_MARGIN = 1e-6


# --------------------------------------------------------------------------- risk

def delta_matrix(Sigma_test, Sigma_bar) -> np.ndarray:
    """``Sigma_test^{1/2} Sigma_bar^{-1/2} - I``."""
    Sigma_test = np.asarray(Sigma_test, dtype=float)
    Sigma_bar = np.asarray(Sigma_bar, dtype=float)
    if Sigma_test.shape != Sigma_bar.shape:
        raise ValueError(f"shape mismatch: {Sigma_test.shape} vs {Sigma_bar.shape}")
    if np.array_equal(Sigma_test, Sigma_bar):
        return np.zeros_like(Sigma_bar)
    return sqrt_psd(Sigma_test) @ inv_sqrt_psd(Sigma_bar) - np.eye(Sigma_bar.shape[0])


def projector_basis(pi_hat):
    """Orthonormal bases ``(U1, U2)`` of the range and kernel of a projector."""
    w, U = sym_eig(pi_hat)
    keep = w > 0.5
    return U[:, keep], U[:, ~keep]


def split_blocks(delta, pi_hat):
    """``(Delta_1, Delta_12, Delta_21, Delta_2)`` in the eigenbasis of ``pi_hat``.

    ``Delta_1 = U1^T Delta U1`` acts inside the range of ``pi_hat``,
    ``Delta_12 = U1^T Delta U2``, ``Delta_21 = U2^T Delta U1`` and
    ``Delta_2 = U2^T Delta U2``.
    """
    U1, U2 = projector_basis(pi_hat)
    return U1.T @ delta @ U1, U1.T @ delta @ U2, U2.T @ delta @ U1, U2.T @ delta @ U2


def join_blocks(blocks, pi_hat) -> np.ndarray:
    U1, U2 = projector_basis(pi_hat)
    D1, D12, D21, D2 = blocks
    return U1 @ D1 @ U1.T + U1 @ D12 @ U2.T + U2 @ D21 @ U1.T + U2 @ D2 @ U2.T


def excess_risk_from_delta(beta_hat, beta_star, delta, b_test) -> float:
    v = (delta + np.eye(delta.shape[0])) @ beta_hat - beta_star
    return float(v @ v + (v @ b_test) ** 2)


@dataclass
class RiskReport:
    analytic_excess: float
    mc_excess: float = math.nan
    mc_stderr: float = math.nan
    sup_formula: float = math.nan
    delta_norm: float = math.nan
    subspace_error: float = math.nan

    def mc_agrees(self, n_stderr: float = 4.0) -> bool:
        return abs(self.mc_excess - self.analytic_excess) <= n_stderr * self.mc_stderr


def excess_risk_linear(beta_hat, Sigma_bar, spec: EnvironmentSpec, truth: GroundTruth, *,
                       whitener=None, mc_samples: int = 0, seed=None, pi_hat=None, pi=None,
                       chunk: int = 200_000) -> RiskReport:
    """Excess squared risk of ``beta_hat^T Sigma_bar^{-1/2} x`` on ``spec``.

    ``whitener`` may replace ``Sigma_bar`` by a ready ``Sigma_bar^{-1/2}``.
    With ``mc_samples > 0`` the risk is also estimated from fresh draws.
    Supplying ``pi_hat`` fills ``sup_formula`` (with ``rho = ||b||`` and the
    realized cross-subspace ratio as ``B``); supplying ``pi`` as well fills
    ``subspace_error``.
    """
    beta_hat = np.asarray(beta_hat, dtype=float).reshape(-1)
    beta_star = truth.beta_star
    W = inv_sqrt_psd(Sigma_bar) if whitener is None else np.asarray(whitener, dtype=float)
    d = beta_star.size
    # the score is beta_hat^T W A eps, so (Delta + I) acts as A^T W
    M = spec.A.T @ W
    v = M @ beta_hat - beta_star
    rep = RiskReport(float(v @ v + (v @ spec.b) ** 2))
    delta = M - np.eye(d)
    rep.delta_norm = float(np.linalg.norm(delta, 2))
    if pi_hat is not None:
        a = pi_hat @ beta_star
        cross = np.linalg.norm((np.eye(d) - pi_hat) @ delta @ pi_hat @ beta_hat)
        na = np.linalg.norm(a)
        B = cross / na if na > 0 else 0.0
        rep.sup_formula = adversarial_sup_risk(beta_star, pi_hat, np.linalg.norm(spec.b), B)
        if pi is not None:
            rep.subspace_error = float(np.linalg.norm(pi - pi_hat, 2))
    if mc_samples > 0:
        rng = np.random.default_rng(seed)
        total = total_sq = 0.0
        done = 0
        w_pred = W @ beta_hat
        while done < mc_samples:
            m = min(chunk, mc_samples - done)
            eps = sample_latents(spec, m, rng)
            err = (eps @ spec.A.T) @ w_pred - eps @ beta_star
            e2 = err * err
            total += e2.sum()
            total_sq += (e2 * e2).sum()
            done += m
        mean = total / mc_samples
        var = max(total_sq / mc_samples - mean * mean, 0.0)
        rep.mc_excess = float(mean)
        rep.mc_stderr = float(math.sqrt(var / max(mc_samples - 1, 1)))
    return rep


def adversarial_sup_risk(beta_star, pi_hat, rho, B_bound) -> float:
    """``(1 + rho^2)(||beta*||^2 + 2 B ||pi_hat beta*|| ||(I - pi_hat) beta*||)``."""
    beta_star = np.asarray(beta_star, dtype=float).reshape(-1)
    a = pi_hat @ beta_star
    c = beta_star - a
    return float((1.0 + rho ** 2) * (beta_star @ beta_star
                                     + 2.0 * B_bound * np.linalg.norm(a) * np.linalg.norm(c)))


# --------------------------------------------------------------------------- adversary

@dataclass
class AdversarySpec:
    rho: float
    B_bound: float
    pi_hat: np.ndarray
    blocks: tuple | None = None
    free_bound: float = 100.0  # Frobenius cap on Delta; the free blocks are otherwise unbounded
    b_test: np.ndarray | None = None

    def __post_init__(self):
        if not (self.rho >= 0 and self.B_bound >= 0):
            raise ValueError("rho and B_bound must be non-negative")
        if not (self.free_bound > 0):
            raise ValueError("free_bound must be positive")
        self.pi_hat = np.asarray(self.pi_hat, dtype=float)

    def delta(self) -> np.ndarray:
        if self.blocks is None:
            return np.zeros_like(self.pi_hat)
        return join_blocks(self.blocks, self.pi_hat)

    def feasible(self, beta_hat, beta_star, tol: float = 1e-9) -> bool:
        D = self.delta()
        P = self.pi_hat
        Q = np.eye(P.shape[0]) - P
        a = P @ beta_star
        na = np.linalg.norm(a)
        ok2 = np.linalg.norm(Q @ D @ P @ beta_hat) <= self.B_bound * na * (1 + tol) + tol
        ok3 = np.linalg.norm(D @ a) <= (1 - FEASIBILITY_MARGIN) * na + tol * max(na, 1.0)
        ok4 = np.linalg.norm(D) <= self.free_bound * (1 + tol)
        return bool(ok2 and ok3 and ok4)


class _Problem:
    """Feasible set and objective of the adversary for one predictor."""

    def __init__(self, beta_hat, beta_star, budget: AdversarySpec):
        self.bh = np.asarray(beta_hat, dtype=float).reshape(-1)
        self.bs = np.asarray(beta_star, dtype=float).reshape(-1)
        self.d = self.bs.size
        self.P = budget.pi_hat
        self.Q = np.eye(self.d) - self.P
        self.a = self.P @ self.bs
        self.na = float(np.linalg.norm(self.a))
        self.Pbh = self.P @ self.bh
        self.lim2 = budget.B_bound * self.na
        self.lim3 = (1.0 - FEASIBILITY_MARGIN) * self.na
        self.cap = budget.free_bound
        self.r0 = self.bh - self.bs
        self.scale = 1.0 + budget.rho ** 2

    def max_scale(self, D) -> float:
        """Largest ``t`` with ``t D`` feasible."""
        t = self.cap / max(np.linalg.norm(D), 1e-300)
        q2 = np.linalg.norm(self.Q @ (D @ self.Pbh))
        if q2 > 1e-14 * max(np.linalg.norm(D), 1.0):
            t = min(t, self.lim2 / q2)
        q3 = np.linalg.norm(D @ self.a)
        if q3 > 1e-14 * max(np.linalg.norm(D), 1.0):
            t = min(t, self.lim3 / q3)
        return t

    def value(self, D) -> float:
        v = self.r0 + D @ self.bh
        return self.scale * float(v @ v)

    def to_boundary(self, D):
        """Scale ``D`` to the boundary along the better of the two signs."""
        t = self.max_scale(D)
        w = D @ self.bh
        sign = 1.0 if self.r0 @ w >= 0 else -1.0
        return sign * t * D

    def pull_in(self, D):
        t = self.max_scale(D)
        return D if t >= 1.0 else t * D


def _unit(v):
    n = np.linalg.norm(v)
    return v / n if n > 1e-14 else None


def _random_unit_perp(rng, d, *basis):
    g = rng.standard_normal(d)
    for b in basis:
        if b is not None:
            g -= (g @ b) * b
    return _unit(g)


def _constructions(prob: _Problem, rng, count: int, B_bound: float):
    """Rank-one candidates along the directions that drive the worst case."""
    d = prob.d
    a_hat = _unit(prob.a)
    c_hat = _unit(prob.bs - prob.a)
    rej = _unit(prob.Q @ prob.bh)
    p_hat = _unit(prob.Pbh)
    delta_hat = _unit(prob.Pbh - (prob.Pbh @ a_hat) * a_hat) if a_hat is not None else None
    theta_star = math.atan2(math.sqrt(max(1.0 - B_bound ** 2, 0.0)), min(B_bound, 1.0))
    fixed = []
    if rej is not None:
        fixed.append(np.outer(rej, rej))
    if delta_hat is not None:
        fixed.append(np.outer(delta_hat, delta_hat))
    fixed.extend([prob.P.copy(), -prob.P, np.eye(d)])
    outs = list(fixed)
    sources = [v for v in (a_hat, p_hat) if v is not None]
    while len(outs) < count:
        kind = rng.integers(3)
        if kind == 0 and sources:
            # Delta maps the retained direction onto -c_hat mixed with a unit
            # vector orthogonal to c_hat
            src = sources[rng.integers(len(sources))]
            perp = _random_unit_perp(rng, d, c_hat) if rng.random() < 0.5 else a_hat
            if perp is None:
                perp = _random_unit_perp(rng, d, c_hat)
            theta = theta_star if rng.random() < 0.5 else rng.uniform(0, math.pi)
            g = (-math.cos(theta)) * (c_hat if c_hat is not None else 0.0) + math.sin(theta) * perp
            outs.append(np.outer(g, src))
        elif kind == 1 and rej is not None:
            g = _random_unit_perp(rng, d)
            mix = rng.uniform(0.0, 1.0)
            outs.append(np.outer((1 - mix) * rej + mix * g, rej))
        else:
            u = _random_unit_perp(rng, d)
            src = sources[rng.integers(len(sources))] if sources and rng.random() < 0.5 else \
                _random_unit_perp(rng, d)
            outs.append(np.outer(u, src))
    return outs[:count]


def adversary_search(model, adv_budget: AdversarySpec, truth, trials: int = 2000, seed=0,
                     ascent_starts: int = 5, ascent_steps: int = 400):
    """Largest excess risk found over feasible block matrices.

    Half the ``trials`` are Gaussian block draws scaled to the boundary of
    the feasible set, half are rank-one constructions along the retained and
    rejected parts of the predictor; the best few are refined by coordinate
    ascent over the four blocks. The test mean shift is the worst one for
    the chosen ``Delta``, ``b = rho v / ||v||``.

    Returns ``(best_risk, witness)`` with the witness blocks and ``b_test``
    filled in.
    """
    beta_hat = _coef(model)
    beta_star = truth.beta_star if isinstance(truth, GroundTruth) else np.asarray(truth, float)
    if adv_budget.B_bound < 0:
        raise ValueError("B_bound must be non-negative")
    prob = _Problem(beta_hat, beta_star, adv_budget)
    rng = np.random.default_rng(seed)
    d = prob.d
    n_rand = trials // 2
    cands = [prob.to_boundary(rng.standard_normal((d, d))) for _ in range(n_rand)]
    cands += [prob.to_boundary(D) for D in _constructions(prob, rng, trials - n_rand,
                                                           adv_budget.B_bound)]
    cands.append(np.zeros((d, d)))
    vals = np.array([prob.value(D) for D in cands])
    order = np.argsort(-vals, kind="stable")[:ascent_starts]
    U1, U2 = projector_basis(adv_budget.pi_hat)
    bases = [(U1, U1), (U1, U2), (U2, U1), (U2, U2)]
    bases = [(L, R) for L, R in bases if L.shape[1] and R.shape[1]]
    best_D, best_v = cands[order[0]], vals[order[0]]
    for idx in order:
        D, val = cands[idx], vals[idx]
        step = 0.3 * max(np.linalg.norm(D), 0.1)
        for _ in range(ascent_steps):
            L, R = bases[rng.integers(len(bases))]
            N = L @ rng.standard_normal((L.shape[1], R.shape[1])) @ R.T
            N *= step / max(np.linalg.norm(N), 1e-300)
            trial = prob.pull_in(D + N)
            tv = prob.value(trial)
            if tv > val:
                D, val = trial, tv
                step *= 1.5
            else:
                step *= 0.7
                if step < 1e-10:
                    step = 0.3 * max(np.linalg.norm(D), 0.1)
        if val > best_v:
            best_D, best_v = D, val
    v = prob.r0 + best_D @ prob.bh
    nv = np.linalg.norm(v)
    b = adv_budget.rho * v / nv if nv > 0 else np.zeros(d)
    witness = replace(adv_budget, blocks=split_blocks(best_D, adv_budget.pi_hat), b_test=b)
    return float(best_v), witness


def unbounded_check(model, adv_budget: AdversarySpec, truth, caps=(1e1, 1e2, 1e3, 1e4),
                    trials: int = 400, seed=0, factor: float = 10.0):
    """Re-run the search with growing caps on ``||Delta||_F``.

    Flags the predictor when the risk found at the largest cap exceeds
    ``factor`` times the analytic sup. Returns ``(flag, risks)``.
    """
    beta_star = truth.beta_star if isinstance(truth, GroundTruth) else np.asarray(truth, float)
    sup = adversarial_sup_risk(beta_star, adv_budget.pi_hat, adv_budget.rho, adv_budget.B_bound)
    risks = []
    for cap in caps:
        r, _ = adversary_search(model, replace(adv_budget, free_bound=cap), truth, trials=trials,
                                seed=seed, ascent_steps=100)
        risks.append(r)
    return bool(risks[-1] > factor * sup), risks


def _coef(model) -> np.ndarray:
    if hasattr(model, "direction"):
        return model.direction()
    return np.asarray(model, dtype=float).reshape(-1)


# --------------------------------------------------------------------------- curves

def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points")
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))


def _mean_stderr(a):
    a = np.asarray(a, dtype=float)
    se = a.std(ddof=1) / math.sqrt(a.size) if a.size > 1 else 0.0
    return float(a.mean()), float(se)


@dataclass
class Curve:
    grid: list
    mean: list
    stderr: list
    per_trial: np.ndarray  # trials x grid
    extra: dict = field(default_factory=dict)

    @property
    def slope(self) -> float:
        return loglog_slope(self.grid, self.mean)


def complexity_test_spec(prior: EnvPrior, amplification: float = 2.0) -> EnvironmentSpec:
    """Test domain that stretches the varying directions by ``1 + amplification``."""
    d = prior.dim
    A = np.eye(d) + amplification * (np.eye(d) - prior.invariant_projector)
    return EnvironmentSpec(A, np.zeros(d))


def env_complexity_experiment(prior: EnvPrior, truth: GroundTruth, E_grid, trials: int, seed: int,
                              test_spec: EnvironmentSpec | None = None, Sigma_bar=None,
                              threads: int = 1) -> Curve:
    """Risk gap of ``pi_hat beta*`` over ``pi beta*`` as environments accumulate.

    For each trial a sequence of ``max(E_grid)`` mean shifts is drawn and the
    first ``E`` of them define ``pi_hat``. The gap is measured on
    ``test_spec`` with the fixed guess ``Sigma_bar`` (identity by default).
    The extra fields hold the spectral and Frobenius subspace errors.
    """
    E_grid = [int(e) for e in E_grid]
    if not E_grid or any(e < 1 for e in E_grid) or E_grid != sorted(E_grid):
        raise ValueError("E_grid must be non-empty, positive and ascending")
    d = prior.dim
    spec = test_spec if test_spec is not None else complexity_test_spec(prior)
    W = np.eye(d) if Sigma_bar is None else inv_sqrt_psd(Sigma_bar)
    pi = prior.invariant_projector
    base = excess_risk_linear(pi @ truth.beta_star, None, spec, truth, whitener=W).analytic_excess

    def one(t):
        envs = sample_env_params(prior, None, E_grid[-1], seed=trial_int(seed, "theorem3", t))
        Bm = np.array([e.b for e in envs]).T
        gaps, spec_err, fro_err = [], [], []
        for E in E_grid:
            pi_hat = nullspace_projector(Bm[:, :E], d=d)
            r = excess_risk_linear(pi_hat @ truth.beta_star, None, spec, truth, whitener=W)
            gaps.append(r.analytic_excess - base)
            spec_err.append(float(np.linalg.norm(pi - pi_hat, 2)))
            fro_err.append(float(np.linalg.norm(pi - pi_hat)))
        return gaps, spec_err, fro_err

    res = map_trials(one, range(trials), threads)
    G = np.array([r[0] for r in res])
    S = np.array([r[1] for r in res])
    F = np.array([r[2] for r in res])
    stats = [_mean_stderr(G[:, j]) for j in range(len(E_grid))]
    return Curve(E_grid, [s[0] for s in stats], [s[1] for s in stats], G,
                 extra={"subspace_error": S, "subspace_error_fro": F})


def jituda_experiment(truth: GroundTruth, Sigma_S, Sigma_T, mu_T, n_grid, trials: int, seed: int,
                      mu_S=None, cfg: FitConfig | None = None, threads: int = 1,
                      name: str = "theorem4") -> Curve:
    """Excess risk of just-in-time target whitening as ``n_S = n_T = n`` grows.

    ``mu_S`` and ``mu_T`` are latent mean shifts (``x = Sigma^{1/2} eps``).
    Two calls with the same ``seed`` and ``name`` draw the same latents, so
    curves for different covariances are paired trial by trial.
    """
    n_grid = [int(n) for n in n_grid]
    if not n_grid or n_grid != sorted(n_grid) or n_grid[0] < 4:
        raise ValueError("n_grid must be ascending with every n >= 4")
    cfg = cfg or FitConfig(shrinkage_weight=0.0)
    d = truth.dim
    src = EnvironmentSpec(sqrt_psd(Sigma_S), np.zeros(d) if mu_S is None else mu_S)
    tgt = EnvironmentSpec(sqrt_psd(Sigma_T), mu_T)

    def one(t):
        out = []
        for j, n in enumerate(n_grid):
            ds = gen_environment(src, truth, n, "regress", seed=trial_int(seed, name, t, j, 0))
            rng = trial_rng(seed, name, t, j, 1)
            Xt = sample_latents(tgt, n, rng) @ tgt.A.T
            model, _ = jituda_fit_predict(ds, Xt, cfg)
            r = excess_risk_linear(model.direction(), None, tgt, truth, whitener=model.test_whitener)
            out.append(r.analytic_excess)
        return out

    R = np.array(map_trials(one, range(trials), threads))
    stats = [_mean_stderr(R[:, j]) for j in range(len(n_grid))]
    return Curve(n_grid, [s[0] for s in stats], [s[1] for s in stats], R)


def condition_measure(Sigma) -> float:
    """``lambda_max / lambda_min^3``."""
    w = np.linalg.eigvalsh(Sigma)
    return float(w[-1] / w[0] ** 3)


def shrink_min_eigenvalue(Sigma, factor: float = 2.0 ** (1.0 / 3.0)) -> np.ndarray:
    """Divide the smallest eigenvalue by ``factor`` (doubles the measure for 2^(1/3))."""
    w, U = sym_eig(Sigma)
    w = w.copy()
    w[-1] /= factor
    S = (U * w) @ U.T
    return 0.5 * (S + S.T)


# --------------------------------------------------------------------------- logistic checks

def lemma1_check(removed_dims, beta_star, n: int, seed, residual_law: str = "standard-gaussian",
                 cfg: FitConfig | None = None):
    """Logistic regression restricted to the kept coordinates.

    Labels come from the full ``beta*`` with logistic noise. Returns
    ``(alpha, orth_norm)`` where ``alpha = <beta_hat, beta*_S> / ||beta*_S||^2``
    and ``orth_norm`` is the norm of the part of ``beta_hat`` orthogonal to
    ``beta*_S`` (``beta*_S`` is ``beta*`` with the removed coordinates zeroed).
    """
    beta_star = np.asarray(beta_star, dtype=float).reshape(-1)
    d = beta_star.size
    removed = sorted({int(i) for i in removed_dims})
    if any(i < 0 or i >= d for i in removed):
        raise ValueError("removed_dims out of range")
    kept = [i for i in range(d) if i not in removed]
    if not kept:
        raise ValueError("at least one dimension must be kept")
    rng = np.random.default_rng(seed)
    Z = sample_residuals(residual_law, n, d, rng)
    y = (Z @ beta_star + logistic_noise(n, rng) >= 0).astype(np.int64)
    cfg = cfg or FitConfig()
    obj = LinearObjective(Z[:, kept], y, np.full(n, 1.0 / n), "classify", 2, fit_intercept=False)
    beta, _, _, _ = _solve(obj, cfg)
    beta_hat = np.zeros(d)
    beta_hat[kept] = beta[:, 1] - beta[:, 0]
    bs = beta_star.copy()
    bs[removed] = 0.0
    alpha = float(beta_hat @ bs / (bs @ bs))
    orth = float(np.linalg.norm(beta_hat - alpha * bs))
    return alpha, orth


def _fit_domain_logistic(Z, y, k, cfg):
    obj = LinearObjective(Z, y, np.full(len(y), 1.0 / len(y)), "classify", k, fit_intercept=True)
    beta, _, _, _ = _solve(obj, cfg)
    return beta


def classifier_alignment(datasets, adjusted: bool, shrinkage_weight: float = 0.1,
                         cfg: FitConfig | None = None) -> float:
    """Mean pairwise cosine similarity of per-domain logistic coefficient vectors.

    Each domain gets its own logistic fit, on whitened and centered features
    when ``adjusted``; similarities are averaged over domain pairs and classes.
    """
    datasets = list(datasets)
    if len(datasets) < 2:
        raise ValueError("need at least two domains")
    k = max(ds.n_classes for ds in datasets)
    for ds in datasets:
        if np.unique(ds.y).size < 2:
            raise ValueError(f"domain {ds.env_id!r} contains a single class")
    cfg = cfg or FitConfig()
    whs = fit_whiteners(datasets, shrinkage_weight) if adjusted else [None] * len(datasets)
    coefs = []
    for ds, wh in zip(datasets, whs):
        Z = wh.transform(ds.X) if wh is not None else ds.X
        coefs.append(_fit_domain_logistic(Z, ds.y, k, cfg))
    sims = []
    for i in range(len(coefs)):
        for j in range(i + 1, len(coefs)):
            for c in range(k):
                u, v = coefs[i][:, c], coefs[j][:, c]
                nu, nv = np.linalg.norm(u), np.linalg.norm(v)
                sims.append(u @ v / (nu * nv) if nu > 0 and nv > 0 else 0.0)
    return float(np.mean(sims))


def whitener_error(W_hat, W) -> float:
    """``||W_hat - W||_F^2 / ||W||_F^2``."""
    W_hat = np.asarray(W_hat, dtype=float)
    W = np.asarray(W, dtype=float)
    if W_hat.shape != W.shape:
        raise ValueError(f"shape mismatch: {W_hat.shape} vs {W.shape}")
    den = float(np.sum(W * W))
    if den == 0.0:
        raise ValueError("W must be nonzero")
    return float(np.sum((W_hat - W) ** 2) / den)
