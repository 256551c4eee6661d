"""Ensemble statistics: empirical measures, exact optimal transport under the
truncated ground costs, dual Kantorovich lower bounds, and the experiment
drivers (mixing curves, inviscid curves, moment and tail experiments,
invariant-measure sampling) with least-squares rate fits.

Optimal transport is solved exactly on desk-scale inputs: the transport LP
between weighted empirical measures is handed to HiGHS and the returned
equality-constraint marginals give the dual potentials, so every evaluation
carries a primal-dual certificate gap.  Uniform equal-size problems can also
go through the assignment solver (same value, no certificate).  Beyond the
sample cap the estimate is an average over subsample replicates with the
replicate scatter reported, never silently.

Dual bounds use observable families with certified Lipschitz constants under
the chosen ground cost: distance caps u -> min(||u - v_j||_{H^k}, 1) around
reference points and clipped spectral coordinates, all 1-Lipschitz for d_k
(and 3^{-1/2}-Lipschitz for d_0^xi since 1 + e^x + e^y >= 3).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from . import functionals as fn
from .functionals import FunctionalConstants
from .models import IntegratorConfig, ModelParams, Stepper, simulate_ensemble
from .noise import EnsembleNoise, NoiseSpec, traces
from .spectral import eigenvalues

GROUND_COSTS = ("d0", "d1", "d0xi")


@dataclass
class EmpiricalMeasure:
    """Weighted finite sample of spectral fields."""

    samples: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.complex128))
        n = self.samples.shape[0]
        if self.weights is None:
            self.weights = np.full(n, 1.0 / n)
        else:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (n,):
                raise ValueError("one weight per sample required")
            if np.any(self.weights < 0):
                raise ValueError("weights must be nonnegative")
            if abs(self.weights.sum() - 1.0) > 1e-12:
                raise ValueError("weights must sum to 1 within 1e-12")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    def is_uniform(self) -> bool:
        return bool(np.allclose(self.weights, 1.0 / self.n, atol=1e-14))


# ---------------------------------------------------------------------------
# ground costs
# ---------------------------------------------------------------------------

def pairwise_hk(A: np.ndarray, B: np.ndarray, k: int) -> np.ndarray:
    """Matrix of ||a_i - b_j||_{H^k} via the weighted Gram expansion."""
    w = eigenvalues(A.shape[-1]) ** k if k else np.ones(A.shape[-1])
    na = np.sum(w * np.abs(A) ** 2, axis=-1)
    nb = np.sum(w * np.abs(B) ** 2, axis=-1)
    cross = np.real((A * w) @ np.conj(B).T)
    d2 = na[:, None] + nb[None, :] - 2.0 * cross
    return np.sqrt(np.maximum(d2, 0.0))


def cost_matrix(
    emp_a: EmpiricalMeasure,
    emp_b: EmpiricalMeasure,
    ground: str,
    xi: float | None = None,
) -> np.ndarray:
    if ground == "d0":
        return np.minimum(pairwise_hk(emp_a.samples, emp_b.samples, 0), 1.0)
    if ground == "d1":
        return np.minimum(pairwise_hk(emp_a.samples, emp_b.samples, 1), 1.0)
    if ground == "d0xi":
        if xi is None:
            raise ValueError("d0xi needs xi")
        d0 = np.minimum(pairwise_hk(emp_a.samples, emp_b.samples, 0), 1.0)
        ea, fa = fn.exp_xi_weight(emp_a.samples, xi)
        eb, fb = fn.exp_xi_weight(emp_b.samples, xi)
        if fa or fb:
            raise fn.ExponentialOverflowError("xi exponent capped inside cost matrix")
        return np.sqrt(d0 * (1.0 + ea[:, None] + eb[None, :]))
    raise ValueError(f"unknown ground cost {ground!r}; options {GROUND_COSTS}")


# ---------------------------------------------------------------------------
# exact optimal transport
# ---------------------------------------------------------------------------

@dataclass
class OTResult:
    value: float
    gap: float | None = None
    method: str = "lp"
    plan: np.ndarray | None = None
    subsampled: bool = False
    replicate_std: float = 0.0

    def __float__(self):
        return self.value


def _solve_lp(C: np.ndarray, wa: np.ndarray, wb: np.ndarray) -> OTResult:
    n, m = C.shape
    # equality rows: n row sums then m column sums, last column row dropped
    import scipy.sparse as sp

    data, ri, ci = [], [], []
    for i in range(n):
        for j in range(m):
            ri.append(i)
            ci.append(i * m + j)
            data.append(1.0)
    for j in range(m - 1):
        for i in range(n):
            ri.append(n + j)
            ci.append(i * m + j)
            data.append(1.0)
    A = sp.csr_matrix((data, (ri, ci)), shape=(n + m - 1, n * m))
    b = np.concatenate([wa, wb[:-1]])
    res = linprog(C.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    duals = np.asarray(res.eqlin.marginals)
    dual_value = float(duals[:n] @ wa + duals[n:] @ wb[:-1])
    plan = res.x.reshape(n, m)
    return OTResult(
        value=float(res.fun), gap=abs(float(res.fun) - dual_value), method="lp", plan=plan
    )


def wasserstein(
    emp_a: EmpiricalMeasure,
    emp_b: EmpiricalMeasure,
    ground: str = "d0",
    xi: float | None = None,
    cap: int = 512,
    method: str = "auto",
    rng: np.random.Generator | None = None,
    replicates: int = 8,
) -> OTResult:
    """Exact transport cost between two weighted empirical measures.

    Below the cap the LP is solved exactly with its dual certificate gap; a
    uniform equal-size pair may instead use the assignment solver.  Above
    the cap the value is the mean over weighted subsample replicates and
    the replicate standard deviation is declared in the result.
    """
    if max(emp_a.n, emp_b.n) > cap:
        rng = rng or np.random.default_rng(0)
        vals = []
        for _ in range(replicates):
            ia = rng.choice(emp_a.n, size=cap, p=emp_a.weights)
            ib = rng.choice(emp_b.n, size=cap, p=emp_b.weights)
            sub_a = EmpiricalMeasure(emp_a.samples[ia])
            sub_b = EmpiricalMeasure(emp_b.samples[ib])
            vals.append(wasserstein(sub_a, sub_b, ground, xi, cap, "assignment").value)
        return OTResult(
            value=float(np.mean(vals)),
            gap=None,
            method="subsampled-assignment",
            subsampled=True,
            replicate_std=float(np.std(vals)),
        )
    C = cost_matrix(emp_a, emp_b, ground, xi)
    uniform_square = emp_a.n == emp_b.n and emp_a.is_uniform() and emp_b.is_uniform()
    if method == "assignment" or (method == "auto" and uniform_square and emp_a.n > 64):
        if not uniform_square:
            raise ValueError("assignment route needs uniform equal-size measures")
        ri, cj = linear_sum_assignment(C)
        return OTResult(value=float(C[ri, cj].mean()), gap=None, method="assignment")
    return _solve_lp(C, emp_a.weights, emp_b.weights)


def wasserstein_bruteforce(
    emp_a: EmpiricalMeasure, emp_b: EmpiricalMeasure, ground: str = "d0",
    xi: float | None = None,
) -> float:
    """Enumeration oracle: exact OT by expanding to unit atoms and trying
    every assignment.  Weights must be integer multiples of a common 1/L
    with L <= 10; independent of the LP route.
    """
    def expand(emp: EmpiricalMeasure, denom: int):
        c = emp.weights * denom
        if not np.allclose(c, np.round(c), atol=1e-9):
            return None
        counts = np.round(c).astype(int)
        if counts.sum() != denom:
            return None
        return np.repeat(np.arange(emp.n), counts)

    ia = ib = None
    for denom in range(1, 11):
        ia, ib = expand(emp_a, denom), expand(emp_b, denom)
        if ia is not None and ib is not None:
            break
    if ia is None or ib is None:
        raise ValueError("weights are not small common rationals; cannot enumerate")
    C = cost_matrix(emp_a, emp_b, ground, xi)
    L = len(ia)
    best = np.inf
    for perm in itertools.permutations(range(L)):
        tot = sum(C[ia[i], ib[perm[i]]] for i in range(L))
        if tot < best:
            best = tot
    return float(best / L)


# ---------------------------------------------------------------------------
# dual lower bounds
# ---------------------------------------------------------------------------

def _default_observables(
    pooled: np.ndarray, ground: str, xi: float | None, max_refs: int = 48
):
    """(callable, certified Lipschitz constant) pairs for the dual bound."""
    hk = 1 if ground == "d1" else 0
    lip = 1.0 / np.sqrt(3.0) if ground == "d0xi" else 1.0
    refs = pooled[:: max(1, len(pooled) // max_refs)][:max_refs]
    obs = []
    for v in refs:
        obs.append((lambda u, v=v: np.minimum(pairwise_hk(u, v[None], hk)[:, 0], 1.0), lip))
    M = pooled.shape[-1]
    for k in range(min(M, 6)):
        obs.append((lambda u, k=k: np.clip(u[:, k].real, -0.5, 0.5), lip))
        obs.append((lambda u, k=k: np.clip(u[:, k].imag, -0.5, 0.5), lip))
    return obs


def dual_lower_bound(
    emp_a: EmpiricalMeasure,
    emp_b: EmpiricalMeasure,
    ground: str = "d0",
    xi: float | None = None,
    observables=None,
) -> float:
    """max_f |mean_A f - mean_B f| / Lip(f) over the certified family.

    Never exceeds the primal transport cost (one-sided Kantorovich bound;
    for the distance-like d_0^xi only this direction holds).
    """
    obs = observables or _default_observables(
        np.concatenate([emp_a.samples, emp_b.samples]), ground, xi
    )
    best = 0.0
    for f, lip in obs:
        da = float(f(emp_a.samples) @ emp_a.weights)
        db = float(f(emp_b.samples) @ emp_b.weights)
        best = max(best, abs(da - db) / lip)
    return best


# ---------------------------------------------------------------------------
# rate fits
# ---------------------------------------------------------------------------

@dataclass
class RateFit:
    """OLS fit on log-transformed data; the residual is always reported."""

    model: str  # 'power-t' | 'power-gamma' | 'exponential'
    exponent: float
    intercept: float
    residual: float      # rms residual in the transformed coordinates
    r_squared: float
    half_width: float    # ~95% half-width of the exponent

    def summary(self) -> str:
        return (
            f"{self.model}: exponent {self.exponent:+.4f} +- {self.half_width:.4f}, "
            f"R^2 {self.r_squared:.4f}, residual {self.residual:.3g}"
        )


def _ols(x: np.ndarray, y: np.ndarray, model: str) -> RateFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least 3 points for a rate fit")
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    dof = max(len(x) - 2, 1)
    sxx = float(np.sum((x - x.mean()) ** 2))
    se = np.sqrt(np.sum(resid**2) / dof / sxx) if sxx > 0 else np.inf
    return RateFit(model, float(coef[0]), float(coef[1]), rms, r2, 1.96 * float(se))


def fit_power_law(x: np.ndarray, y: np.ndarray, model: str = "power-gamma") -> RateFit:
    """Slope of log y against log x."""
    m = (np.asarray(x) > 0) & (np.asarray(y) > 0)
    return _ols(np.log(np.asarray(x)[m]), np.log(np.asarray(y)[m]), model)


def fit_exponential(t: np.ndarray, y: np.ndarray) -> RateFit:
    """log y = intercept - rate * t; exponent reported as the decay rate."""
    m = np.asarray(y) > 0
    f = _ols(np.asarray(t)[m], np.log(np.asarray(y)[m]), "exponential")
    return RateFit(
        f.model, -f.exponent, f.intercept, f.residual, f.r_squared, f.half_width
    )


# ---------------------------------------------------------------------------
# experiment drivers
# ---------------------------------------------------------------------------

@dataclass
class MixingCurve:
    t: np.ndarray
    upper_d1: np.ndarray           # synchronous-coupling E[d1]
    upper_d0: np.ndarray
    dual_t: np.ndarray
    dual_lower: np.ndarray
    fit: RateFit | None
    gamma: float
    ensemble: int


def mixing_curve(
    u1: np.ndarray,
    u2: np.ndarray,
    params: ModelParams,
    spec: NoiseSpec,
    t_grid: np.ndarray,
    ensemble_size: int,
    seed: int,
    integ: IntegratorConfig | None = None,
    consts: FunctionalConstants | None = None,
    dual_checkpoints: int = 4,
) -> MixingCurve:
    """Synchronous-coupling upper estimate of W_{d1}(P_t delta_u1, P_t delta_u2)
    together with the dual lower bound on the same marginal ensembles."""
    consts = consts or FunctionalConstants()
    integ = integ or IntegratorConfig(dt=5e-3)
    t_grid = np.asarray(t_grid, dtype=float)
    rec_steps = np.unique(np.round(t_grid / integ.dt).astype(int))
    stepper = Stepper(params, integ, spec)
    source = EnsembleNoise(seed, np.arange(ensemble_size), spec.N)
    s1 = np.broadcast_to(np.asarray(u1, complex), (ensemble_size, params.M)).copy()
    s2 = np.broadcast_to(np.asarray(u2, complex), (ensemble_size, params.M)).copy()

    up1 = [float(np.mean(fn.dist_d1(s1, s2)))]
    up0 = [float(np.mean(fn.dist_d0(s1, s2)))]
    times = [0.0]
    dual_ix = set(
        np.linspace(1, len(rec_steps) - 1, min(dual_checkpoints, len(rec_steps) - 1))
        .astype(int)
        .tolist()
    ) if len(rec_steps) > 1 else set()
    dual_t, dual_v = [], []

    done = 0
    for i_rec, target in enumerate(rec_steps):
        if target == 0:
            continue
        while done < target:
            m = min(256, target - done)
            zs = source.next_block(m)
            for s in range(m):
                s1 = stepper.step(s1, zs[:, s])
                s2 = stepper.step(s2, zs[:, s])
            done += m
        times.append(done * integ.dt)
        up1.append(float(np.mean(fn.dist_d1(s1, s2))))
        up0.append(float(np.mean(fn.dist_d0(s1, s2))))
        if i_rec in dual_ix:
            ea, eb = EmpiricalMeasure(s1.copy()), EmpiricalMeasure(s2.copy())
            dual_t.append(done * integ.dt)
            dual_v.append(dual_lower_bound(ea, eb, "d1"))

    times = np.asarray(times)
    up1 = np.asarray(up1)
    fit = None
    window = (up1 < 0.5) & (up1 > 1e-8)
    if window.sum() >= 3:
        fit = fit_exponential(times[window], up1[window])
    return MixingCurve(
        t=times, upper_d1=up1, upper_d0=np.asarray(up0),
        dual_t=np.asarray(dual_t), dual_lower=np.asarray(dual_v),
        fit=fit, gamma=params.gamma, ensemble=ensemble_size,
    )


@dataclass
class InviscidCurve:
    gammas: np.ndarray
    mean_sup_err: np.ndarray      # E sup_t ||u^gamma - u||_H
    mean_sup_err_sq: np.ndarray   # E sup_t ||.||_H^2 (the fitted quantity)
    se_sup_err_sq: np.ndarray
    excluded: np.ndarray
    fit: RateFit | None
    truncated: bool
    R: float | None


def inviscid_curve(
    u0: np.ndarray,
    gamma_list,
    T: float,
    ensemble_size: int,
    seed: int,
    alpha: float,
    M: int,
    spec: NoiseSpec,
    truncated: bool = False,
    R: float | None = None,
    dt: float = 5e-4,
    consts: FunctionalConstants | None = None,
) -> InviscidCurve:
    """Shared-noise comparison of u^gamma with the gamma = 0 dynamics.

    Both members of each pair are driven by the identical Wiener increments
    ("em" noise mode), so for gamma = 0 in the list the error is exactly 0.
    Fits log E[sup ||v||_H^2] against log gamma over the positive gammas.
    """
    gamma_list = np.asarray(sorted(gamma_list), dtype=float)
    trunc = R if truncated else None
    integ = IntegratorConfig(dt=dt, scheme="strang", noise_mode="em")
    p0 = ModelParams(gamma=0.0, alpha=alpha, M=M, truncation=trunc)
    mean_err = np.zeros(len(gamma_list))
    mean_sq = np.zeros(len(gamma_list))
    se_sq = np.zeros(len(gamma_list))
    excluded = np.zeros(len(gamma_list), dtype=int)
    n_steps = int(round(T / dt))
    guard = integ.blowup_guard**2

    for gi, g in enumerate(gamma_list):
        pg = ModelParams(gamma=g, alpha=alpha, M=M, truncation=trunc)
        st_g = Stepper(pg, integ, spec)
        st_0 = Stepper(p0, integ, spec)
        source = EnsembleNoise(seed, np.arange(ensemble_size), spec.N)
        a = np.broadcast_to(np.asarray(u0, complex), (ensemble_size, M)).copy()
        b = a.copy()
        sup = np.zeros(ensemble_size)
        bad = np.zeros(ensemble_size, dtype=bool)
        done = 0
        while done < n_steps:
            m = min(256, n_steps - done)
            zs = source.next_block(m)
            for s in range(m):
                a = st_g.step(a, zs[:, s])
                b = st_0.step(b, zs[:, s])
                sup = np.maximum(sup, fn.norm_h_sq(a - b))
                bad |= (fn.norm_hr_sq(a, 1.0) > guard) | (fn.norm_hr_sq(b, 1.0) > guard)
            done += m
        live = ~bad
        excluded[gi] = int(bad.sum())
        mean_err[gi] = float(np.mean(np.sqrt(sup[live])))
        mean_sq[gi] = float(np.mean(sup[live]))
        se_sq[gi] = float(np.std(sup[live]) / np.sqrt(max(live.sum(), 1)))

    fit = None
    pos = gamma_list > 0
    if pos.sum() >= 3:
        fit = fit_power_law(gamma_list[pos], mean_sq[pos], "power-gamma")
    return InviscidCurve(
        gammas=gamma_list, mean_sup_err=mean_err, mean_sup_err_sq=mean_sq,
        se_sup_err_sq=se_sq, excluded=excluded, fit=fit, truncated=truncated, R=R,
    )


@dataclass
class MomentReport:
    t: np.ndarray
    mean_h2n: dict
    mean_phin: dict
    mean_exp: np.ndarray
    se_exp: np.ndarray
    overflow_flags: int
    xi: float
    envelope_fits: dict
    lyapunov_chat: float


def moment_experiment(
    params: ModelParams,
    spec: NoiseSpec,
    u0: np.ndarray,
    T: float,
    n_list=(1, 2),
    xi: float | None = None,
    ensemble_size: int = 256,
    seed: int = 0,
    dt: float = 5e-3,
    record_every: int = 50,
    consts: FunctionalConstants | None = None,
) -> MomentReport:
    """Time series of E||u||_H^{2n}, E Phi^n and E e^{xi ||u||^2}.

    xi defaults to alpha/(4 Tr(QQ*)), half the admissible bound.  Capped
    exponential samples are counted, never dropped silently.
    """
    consts = consts or FunctionalConstants()
    tr = traces(spec).tr_qq
    if xi is None:
        xi = params.alpha / (4.0 * tr) if tr > 0 else 1.0
    if tr > 0 and not xi < params.alpha / (2.0 * tr):
        raise ValueError("xi violates xi < alpha/(2 Tr(QQ*))")
    integ = IntegratorConfig(dt=dt, record_every=record_every)
    rec = simulate_ensemble(
        u0, params, integ, spec, T, seed,
        traj_ids=np.arange(ensemble_size), consts=consts,
    )
    H = rec.energy.H          # (n_rec, B) of ||u||^2
    phv = rec.energy.phi
    mean_h2n = {n: np.mean(H**n, axis=1) for n in n_list}
    mean_phin = {n: np.mean(np.maximum(phv, 0.0) ** n, axis=1) for n in n_list}
    expo = xi * H
    flagged = int(np.sum(expo > fn.EXP_CAP))
    evals = np.exp(np.minimum(expo, fn.EXP_CAP))
    mean_exp = np.mean(evals, axis=1)
    se_exp = np.std(evals, axis=1) / np.sqrt(ensemble_size)

    fits = {}
    phi0 = float(fn.phi(np.asarray(u0, complex), consts))
    t = rec.times
    for n in n_list:
        y = mean_phin[n]
        tail = y[-max(3, len(y) // 4):].mean()
        dev = y - tail
        mask = dev > max(1e-12, 1e-3 * abs(tail))
        if mask.sum() >= 3 and phi0 > 0:
            fits[n] = fit_exponential(t[mask], dev[mask])
    chat = float(np.max(mean_phin[min(n_list)] - np.exp(-0.5 * params.alpha * t) * phi0))
    return MomentReport(
        t=t, mean_h2n=mean_h2n, mean_phin=mean_phin, mean_exp=mean_exp,
        se_exp=se_exp, overflow_flags=flagged, xi=xi, envelope_fits=fits,
        lyapunov_chat=chat,
    )


@dataclass
class MassIdentityReport:
    """Per-checkpoint residual of the integrated mean-energy identity."""

    t_left: np.ndarray
    t_right: np.ndarray
    mean_residual: np.ndarray
    se_residual: np.ndarray
    inside_3se: np.ndarray


def mass_identity_residuals(
    params: ModelParams,
    spec: NoiseSpec,
    u0: np.ndarray,
    T: float,
    n_checkpoints: int,
    ensemble_size: int,
    seed: int,
    dt: float = 5e-3,
    consts: FunctionalConstants | None = None,
) -> MassIdentityReport:
    """Checkpointed residuals of d E||u||^2 = -2 gamma E||u||_{H^1}^2
    - 2 alpha E||u||^2 + 2 Tr(QQ*), in integrated (martingale-mean-zero) form:

        r = Delta||u||^2 + int (2 gamma ||u||_{H^1}^2 + 2 alpha ||u||^2) ds
            - 2 Tr(QQ*) Delta t,

    which has mean zero exactly; the per-trajectory residuals give honest
    standard errors.
    """
    steps_per = int(round(T / dt)) // n_checkpoints
    integ = IntegratorConfig(dt=dt, record_every=steps_per)
    rec = simulate_ensemble(
        u0, params, integ, spec, T, seed,
        traj_ids=np.arange(ensemble_size), consts=consts,
        track_mass_integrals=True,
    )
    H = rec.energy.H
    t = rec.times
    ih = rec.mass_int_h
    ih1 = rec.mass_int_h1
    tr2 = 2.0 * traces(spec).tr_qq
    res = (
        (H[1:] - H[:-1])
        + 2.0 * params.gamma * (ih1[1:] - ih1[:-1])
        + 2.0 * params.alpha * (ih[1:] - ih[:-1])
        - tr2 * (t[1:] - t[:-1])[:, None]
    )
    mean = res.mean(axis=1)
    se = res.std(axis=1) / np.sqrt(res.shape[1])
    return MassIdentityReport(
        t_left=t[:-1], t_right=t[1:], mean_residual=mean, se_residual=se,
        inside_3se=np.abs(mean) <= 3.0 * se,
    )


@dataclass
class TailReport:
    rho: np.ndarray
    frequency: np.ndarray
    envelope_k: float
    p: float
    c_n_hat: float
    n: int


def tail_experiment(
    params: ModelParams,
    spec: NoiseSpec,
    u0: np.ndarray,
    n: int,
    p: float,
    rho_grid: np.ndarray,
    T: float,
    ensemble_size: int = 256,
    seed: int = 0,
    dt: float = 2e-3,
    record_every: int = 10,
    c_n_hat: float | None = None,
    consts: FunctionalConstants | None = None,
) -> TailReport:
    """Frequencies of sup_{[0,T]} (E_n(t) - (C_n - 1) t) >= Phi(u0)^n + rho sqrt(T)
    against rho, overlaid with the fitted K/rho^p envelope."""
    consts = consts or FunctionalConstants()
    integ = IntegratorConfig(dt=dt, record_every=record_every)
    rec = simulate_ensemble(
        u0, params, integ, spec, T, seed,
        traj_ids=np.arange(ensemble_size), consts=consts,
        track_phi_every_step=True,
    )
    t = rec.times
    en = fn.accumulate_en(np.maximum(rec.energy.phi, 0.0), dt * record_every, n, params.alpha)
    phi0 = float(fn.phi(np.asarray(u0, complex), consts))
    if c_n_hat is None:
        late = t >= max(1.0, t[1])
        c_n_hat = float(np.quantile((en[late] - phi0**n) / t[late][:, None], 0.99))
    sup_dev = np.max(en - (c_n_hat - 1.0) * t[:, None], axis=0) - phi0**n
    rho_grid = np.asarray(rho_grid, dtype=float)
    freq = np.array([np.mean(sup_dev >= r * np.sqrt(T)) for r in rho_grid])
    pos = freq > 0
    k_hat = float(np.max(freq[pos] * rho_grid[pos] ** p)) if pos.any() else 0.0
    return TailReport(rho=rho_grid, frequency=freq, envelope_k=k_hat, p=p,
                      c_n_hat=c_n_hat, n=n)


def invariant_measure_sample(
    params: ModelParams,
    spec: NoiseSpec,
    burn_in: float,
    n_samples: int,
    thinning: float,
    seed: int,
    dt: float = 5e-3,
    consts: FunctionalConstants | None = None,
    u0: np.ndarray | None = None,
) -> tuple[EmpiricalMeasure, dict]:
    """Approximate draws from the invariant measure by a thinned long run.

    Returns the empirical measure and a diagnostics dict with the two
    estimators of the Phi mean (thinned-sample vs full time-average).
    """
    if burn_in <= 0 or n_samples < 1 or thinning <= 0:
        raise ValueError("need burn_in > 0, n_samples >= 1, thinning > 0")
    consts = consts or FunctionalConstants()
    u0 = np.zeros(params.M, complex) if u0 is None else np.asarray(u0, complex)
    stride = max(1, int(round(thinning / dt)))
    T = burn_in + n_samples * stride * dt
    integ = IntegratorConfig(dt=dt, record_every=stride)
    rec = simulate_ensemble(
        u0, params, integ, spec, T, seed, traj_ids=np.array([0]),
        consts=consts, record_states=True,
    )
    mask = rec.times > burn_in
    states = rec.states[mask, 0]
    states = states[-n_samples:]
    phis = rec.energy.phi[mask, 0][-n_samples:]
    diag = {
        "phi_sample_mean": float(np.mean(phis)),
        "phi_time_average": float(np.mean(rec.energy.phi[rec.times > burn_in, 0])),
        "n_samples": int(states.shape[0]),
        "thinning": stride * dt,
    }
    return EmpiricalMeasure(states), diag
