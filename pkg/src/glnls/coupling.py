"""Executable coupling machinery: the Foias-Prodi pinned pair, the low-mode
Girsanov coupling on [0, t1], drift-corrected coupled segments with
decoupling bookkeeping, and stopping-time detection.

Pinning.  While a pair is coupled its second member stores only high modes;
the low modes are u1's by representation, so P_N u1 = P_N u2 holds exactly,
not to tolerance.  One pinned step advances u1 by the full dynamics and the
composite w2 = P_N u1 + Q_N u2 by the same one-step map with the same noise,
keeping only its high part.

Weights.  Where the construction distorts the second member's law (the
interpolation bridge on [0, t1], the pinned low modes over a segment), the
distortion is realized as a per-step mean shift of the driving Gaussian
increments, chosen so the low-mode identity holds exactly on the grid, and
accounted by the exact discrete Radon-Nikodym factor

    log w += -<m, dW>/dt - |m|^2/(2 dt)       (per forced real component),

whose continuum limit is -int <Q^{-1}F, dW> - 1/2 int ||Q^{-1}F||^2 dt with
F the drift mismatch (the bridge drift F1 on [0,t1], the nonlinearity
mismatch F2 while pinned).  Weighted averages over these paths are exactly
unbiased for the discrete dynamics; weight dispersion is the measurable
footprint of the total-variation cost.  Coupling runs therefore use the
exponential-Euler scheme with raw increments, where the noise enters
linearly.

A coupled pair decouples when either member's running
budget E_4 leaves theta + beta^4 + C4*(t - lT), or when the accumulated
Girsanov budget integral int (1 + Phi_1^4 + Phi_2^4)||u1-u2||_{H^1}^2 passes
rho2 e^{-alpha k T / 4}.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import functionals as fn
from .functionals import FunctionalConstants
from .models import IntegratorConfig, ModelParams, Stepper, decay_factors, nl_coeffs
from .noise import EnsembleNoise, NoiseSpec, increments_from_normals
from .spectral import project_high, project_low


@dataclass(frozen=True)
class CouplingConfig:
    """Parameters of the coupling construction.

    t1, r1 default to beta^10; rho1 to 8 K41 (r1^4 + 1); rho2 to sqrt(beta).
    c4_hat and k41_hat are pilot estimates of the tail-bound constants (the
    linear growth rate of the E_4 budget and the Markov envelope constant);
    neither is knowable in closed form, so both come from pilot ensembles.
    """

    N: int
    theta: float
    beta: float
    T: float
    c4_hat: float
    k41_hat: float = 1.0
    t1: float | None = None
    r1: float | None = None
    rho1: float | None = None
    rho2: float | None = None
    consts: FunctionalConstants = field(default_factory=FunctionalConstants)

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0,1)")
        if self.N < 1 or self.theta <= 0 or self.T <= 0:
            raise ValueError("need N >= 1, theta > 0, T > 0")
        if self.t1 is None:
            object.__setattr__(self, "t1", self.beta**10)
        if self.r1 is None:
            object.__setattr__(self, "r1", self.beta**10)
        if not (0 < self.t1 < 1 and 0 < self.r1 < 1):
            raise ValueError("t1 and r1 must lie in (0,1)")
        if self.rho1 is None:
            object.__setattr__(self, "rho1", 8.0 * self.k41_hat * (self.r1**4 + 1.0))
        if self.rho2 is None:
            object.__setattr__(self, "rho2", np.sqrt(self.beta))

    def e4_budget(self, elapsed: float | np.ndarray) -> float | np.ndarray:
        """theta + beta^4 + C4_hat * (t - lT) with elapsed measured from coupling."""
        return self.theta + self.beta**4 + self.c4_hat * elapsed


def _require_invertible(cfg_n: int, spec: NoiseSpec):
    if spec.N < cfg_n:
        raise ValueError(
            f"Q is not invertible on the first {cfg_n} modes: only {spec.N} "
            "are forced; coupling requires lambda_k > 0 for every pinned mode"
        )


UNCOUPLED = -1  # sentinel for ell = infinity (never / no longer coupled)


@dataclass
class CoupledState:
    """Batch of coupled pairs: u1 full, u2 as high modes (low pinned to u1).

    ``ell`` is the coupling epoch index of the decoupling bookkeeping
    (UNCOUPLED when the pair has decoupled), ``log_weight`` the running
    Girsanov log density, ``girsanov_cost`` the accumulated
    int ||Q^{-1}F||^2 dt.
    """

    u1: np.ndarray
    u2_high: np.ndarray
    ell: np.ndarray
    k: int = 0
    log_weight: np.ndarray | None = None
    girsanov_cost: np.ndarray | None = None
    phi_sum_at_coupling: np.ndarray | None = None
    e4_1: fn.EnAccumulator | None = None
    e4_2: fn.EnAccumulator | None = None
    coupling_time: float = 0.0
    e4_crossed: np.ndarray | None = None
    budget_crossed: np.ndarray | None = None
    budget_integral: np.ndarray | None = None

    def u2_composite(self, N: int) -> np.ndarray:
        """Reconstruct u2 = P_N u1 + stored high modes."""
        return project_low(self.u1, N) + self.u2_high


def make_coupled_state(
    u1: np.ndarray, u2: np.ndarray, cfg: CouplingConfig, consts: FunctionalConstants
) -> CoupledState:
    """Pair entering the coupled regime now: low modes of u2 snap to u1's."""
    u1 = np.atleast_2d(np.asarray(u1, dtype=np.complex128))
    u2 = np.atleast_2d(np.asarray(u2, dtype=np.complex128))
    B = u1.shape[0]
    high = project_high(u2, cfg.N)
    phi1 = fn.phi(u1, consts)
    w2 = project_low(u1, cfg.N) + high
    phi2 = fn.phi(w2, consts)
    e4_1 = fn.EnAccumulator(4, alpha=np.nan)  # alpha set by the evolver
    e4_2 = fn.EnAccumulator(4, alpha=np.nan)
    return CoupledState(
        u1=u1.copy(),
        u2_high=high,
        ell=np.zeros(B, dtype=int),
        log_weight=np.zeros(B),
        girsanov_cost=np.zeros(B),
        phi_sum_at_coupling=phi1 + phi2,
        e4_1=e4_1,
        e4_2=e4_2,
        e4_crossed=np.zeros(B, dtype=bool),
        budget_crossed=np.zeros(B, dtype=bool),
        budget_integral=np.zeros(B),
    )


# ---------------------------------------------------------------------------
# pinned evolution (Foias-Prodi dynamics, no weights)
# ---------------------------------------------------------------------------

class PinnedPair:
    """u1 by the full dynamics; u2's high modes slaved to u1's low modes."""

    def __init__(
        self,
        params: ModelParams,
        integ: IntegratorConfig,
        spec: NoiseSpec,
        N: int,
    ):
        self.params = params
        self.integ = integ
        self.spec = spec
        self.N = N
        self.stepper = Stepper(params, integ, spec)

    def step(self, u1: np.ndarray, u2_high: np.ndarray, z: np.ndarray):
        w2 = project_low(u1, self.N) + u2_high
        u1n = self.stepper.step(u1, z)
        w2n = self.stepper.step(w2, z)
        return u1n, project_high(w2n, self.N)


def pinned_step(
    state: CoupledState,
    params: ModelParams,
    integ: IntegratorConfig,
    spec: NoiseSpec,
    rng: np.random.Generator,
    N: int | None = None,
    consts: FunctionalConstants | None = None,
) -> tuple[CoupledState, np.ndarray]:
    """One pinned step; returns the new state and J(u1, u2)."""
    consts = consts or FunctionalConstants()
    N = N or spec.N
    pair = PinnedPair(params, integ, spec, N)
    z = rng.standard_normal(state.u1.shape[:-1] + (2, spec.N))
    u1n, highn = pair.step(state.u1, state.u2_high, z)
    h1 = fn.norm_hr(u1n, 1.0)
    if np.any(h1 > integ.blowup_guard):
        raise RuntimeError("pinned pair exceeded the blow-up guard")
    new = replace(state, u1=u1n, u2_high=highn)
    j = fn.j_functional(u1n, project_low(u1n, N) + highn, consts)
    return new, j


def pinned_contraction_run(
    u1_0: np.ndarray,
    u2_0: np.ndarray,
    params: ModelParams,
    integ: IntegratorConfig,
    spec: NoiseSpec,
    N: int,
    T: float,
    seed: int,
    n_pairs: int,
    consts: FunctionalConstants | None = None,
    record_every: int | None = None,
):
    """Ensemble of pinned pairs; returns (times, J values (n_rec, n_pairs)).

    u2_0's low modes are snapped to u1_0's on entry (exact pinning).
    """
    consts = consts or FunctionalConstants()
    pair = PinnedPair(params, integ, spec, N)
    stride = record_every or integ.record_every
    n_steps = int(round(T / integ.dt))
    rec_idx = list(range(0, n_steps + 1, stride))
    if rec_idx[-1] != n_steps:
        rec_idx.append(n_steps)
    u1 = np.broadcast_to(np.asarray(u1_0, complex), (n_pairs, params.M)).copy()
    high = np.broadcast_to(
        project_high(np.asarray(u2_0, complex), N), (n_pairs, params.M)
    ).copy()
    source = EnsembleNoise(seed, np.arange(n_pairs), spec.N)
    times = np.array(rec_idx, dtype=float) * integ.dt
    J = np.empty((len(rec_idx), n_pairs))
    J[0] = fn.j_functional(u1, project_low(u1, N) + high, consts)
    nxt, done = 1, 0
    while done < n_steps:
        m = min(256, n_steps - done)
        zs = source.next_block(m)
        for s in range(m):
            u1, high = pair.step(u1, high, zs[:, s])
            done += 1
            if nxt < len(rec_idx) and done == rec_idx[nxt]:
                if np.any(fn.norm_hr_sq(u1, 1.0) > integ.blowup_guard**2):
                    raise RuntimeError("pinned pair exceeded the blow-up guard")
                J[nxt] = fn.j_functional(u1, project_low(u1, N) + high, consts)
                nxt += 1
    return times, J


# ---------------------------------------------------------------------------
# discrete Girsanov machinery
# ---------------------------------------------------------------------------

def _shift_logweight(delta: np.ndarray, dw: np.ndarray, lam: np.ndarray, dt: float):
    """Log RN factor and cost for shifting lambda*dW by complex delta (low modes).

    The shift on dW itself is m = delta/lambda; each real component of dW is
    N(0, dt).  Returns (log-weight increment, ||Q^{-1}F||^2 dt increment).
    """
    m = delta / lam
    quad = np.sum(np.abs(m) ** 2, axis=-1)
    inner = np.sum(m.real * dw.real + m.imag * dw.imag, axis=-1)
    return -inner / dt - quad / (2.0 * dt), quad / dt


class _EulerPieces:
    """Shared per-step algebra for the weighted couplings (expeuler + em)."""

    def __init__(self, params: ModelParams, integ: IntegratorConfig, spec: NoiseSpec, N: int):
        if integ.scheme != "expeuler" or integ.noise_mode != "em":
            raise ValueError(
                "weighted coupling runs require scheme='expeuler', noise_mode='em'"
            )
        _require_invertible(N, spec)
        if spec.N != N:
            raise ValueError(
                "the pinned mode count must equal the number of forced modes "
                f"(got N={N}, forced={spec.N}); the coupling bookkeeping "
                "pins exactly the noise-carrying modes"
            )
        self.params = params
        self.integ = integ
        self.spec = spec
        self.N = N
        self.decay = decay_factors(params, integ.dt)
        self.lam_low = spec.lambdas[:N]
        self.lam_full = spec.lambdas_padded(params.M)

    def drift(self, u: np.ndarray) -> np.ndarray:
        return self.decay * (u + self.integ.dt * nl_coeffs(u, self.params))

    def noise(self, z: np.ndarray) -> np.ndarray:
        zpair = np.zeros(z.shape[:-2] + (2, self.params.M))
        zpair[..., : self.spec.N] = z
        return self.lam_full * increments_from_normals(zpair, self.integ.dt)


@dataclass
class GirsanovReport:
    state: CoupledState
    success: np.ndarray
    log_weight: np.ndarray
    cost: np.ndarray
    cost_bracket: float
    e4_final_1: np.ndarray
    e4_final_2: np.ndarray


def girsanov_attempt(
    u1: np.ndarray,
    u2: np.ndarray,
    cfg: CouplingConfig,
    params: ModelParams,
    integ: IntegratorConfig,
    spec: NoiseSpec,
    seed: int,
    n_attempts: int = 1,
    traj_ids: np.ndarray | None = None,
) -> GirsanovReport:
    """Low-mode coupling over [0, t1] via the interpolation bridge.

    The candidate second path follows X_hat(t) = P_N u1(t) + ((t1-t)/t1)
    P_N(u2-u1) exactly on the grid, its high modes slaved to X_hat, and the
    per-step Gaussian shift making that the true u2 dynamics is accumulated
    into the log weight.  Success = both running budgets E_4(t1) - C4 t1 <=
    Phi(u_i(0))^4 + rho1 sqrt(t1); the low modes agree at t1 by construction.
    """
    consts = cfg.consts
    pieces = _EulerPieces(params, integ, spec, cfg.N)
    dt = integ.dt
    n_steps = max(1, int(round(cfg.t1 / dt)))
    if abs(n_steps * dt - cfg.t1) > 1e-12 * max(1.0, cfg.t1):
        raise ValueError("dt must divide t1 for the bridge to close exactly")

    u1 = np.broadcast_to(np.asarray(u1, complex), (n_attempts, params.M)).copy()
    u2 = np.broadcast_to(np.asarray(u2, complex), (n_attempts, params.M)).copy()
    delta0 = project_low(u2 - u1, cfg.N)
    w = u2.copy()  # candidate composite path, starts at u2 exactly
    ids = traj_ids if traj_ids is not None else np.arange(n_attempts)
    source = EnsembleNoise(seed, ids, spec.N)

    phi1_0 = fn.phi(u1, consts)
    phi2_0 = fn.phi(u2, consts)
    e4_1 = fn.EnAccumulator(4, params.alpha)
    e4_2 = fn.EnAccumulator(4, params.alpha)
    e4_1.reset(phi1_0)
    e4_2.reset(phi2_0)

    logw = np.zeros(n_attempts)
    cost = np.zeros(n_attempts)
    zs = source.next_block(n_steps)
    for s in range(n_steps):
        zeta_next = (cfg.t1 - (s + 1) * dt) / cfg.t1
        dw = increments_from_normals(zs[:, s], dt)  # (B, N) complex
        lin1 = pieces.drift(u1)
        linw = pieces.drift(w)
        noise = pieces.noise(zs[:, s])
        u1n = lin1 + noise
        # exact-bridge shift: X_hat(next) = P_N u1(next) + zeta_next * delta0
        delta = project_low(lin1 - linw, cfg.N)[..., : cfg.N] + zeta_next * delta0[
            ..., : cfg.N
        ]
        dlw, dcost = _shift_logweight(delta, dw, pieces.lam_low, dt)
        logw += dlw
        cost += dcost
        wn = linw + noise
        wn[..., : cfg.N] = u1n[..., : cfg.N] + zeta_next * delta0[..., : cfg.N]
        u1, w = u1n, wn
        e4_1.push(fn.phi(u1, consts), dt)
        e4_2.push(fn.phi(w, consts), dt)

    e4f_1 = np.asarray(e4_1.value())
    e4f_2 = np.asarray(e4_2.value())
    allow_1 = phi1_0**4 + cfg.rho1 * np.sqrt(cfg.t1) + cfg.c4_hat * cfg.t1
    allow_2 = phi2_0**4 + cfg.rho1 * np.sqrt(cfg.t1) + cfg.c4_hat * cfg.t1
    success = (e4f_1 <= allow_1) & (e4f_2 <= allow_2)

    state = make_coupled_state(u1, w, cfg, consts)
    state.log_weight = logw
    state.girsanov_cost = cost
    bracket = (cfg.t1 + 1.0 / cfg.t1 + 1.0) * cfg.r1**4 + cfg.c4_hat * cfg.t1 + (
        cfg.rho1 * np.sqrt(cfg.t1)
    )
    return GirsanovReport(
        state=state,
        success=success,
        log_weight=logw,
        cost=cost,
        cost_bracket=float(bracket),
        e4_final_1=e4f_1,
        e4_final_2=e4f_2,
    )


@dataclass
class SegmentRecord:
    """Strided series recorded over one coupled segment (per pair)."""

    times: np.ndarray
    phi_sum: np.ndarray
    e4_1: np.ndarray
    e4_2: np.ndarray
    budget_integral: np.ndarray
    log_weight: np.ndarray
    j: np.ndarray


def coupled_segment(
    state: CoupledState,
    cfg: CouplingConfig,
    params: ModelParams,
    integ: IntegratorConfig,
    spec: NoiseSpec,
    seed: int,
    traj_ids: np.ndarray | None = None,
    record_every: int | None = None,
) -> tuple[CoupledState, SegmentRecord]:
    """Advance a coupled batch one segment of length T with the F2 correction.

    u2's low modes stay equal to u1's by representation; the per-step shift
    (the nonlinearity mismatch) accumulates into the log weight.  At the end
    the epoch conditions are evaluated: pairs whose E_4 left
    theta + beta^4 + C4(t - lT), or whose Girsanov budget integral passed
    rho2 e^{-alpha k T/4}, decouple (ell -> UNCOUPLED); the rest keep ell.
    """
    consts = cfg.consts
    pieces = _EulerPieces(params, integ, spec, cfg.N)
    dt = integ.dt
    n_steps = int(round(cfg.T / dt))
    B = state.u1.shape[0]
    ids = traj_ids if traj_ids is not None else np.arange(B)
    source = EnsembleNoise(seed, ids, spec.N)
    stride = record_every or max(1, n_steps // 64)
    rec_idx = list(range(0, n_steps + 1, stride))
    if rec_idx[-1] != n_steps:
        rec_idx.append(n_steps)

    u1 = state.u1.copy()
    high = state.u2_high.copy()
    logw = state.log_weight.copy()
    cost = state.girsanov_cost.copy()
    budget_int = state.budget_integral.copy()
    e4_1, e4_2 = state.e4_1, state.e4_2
    if e4_1._prev_phin is None:
        e4_1 = fn.EnAccumulator(4, params.alpha)
        e4_2 = fn.EnAccumulator(4, params.alpha)
        e4_1.reset(fn.phi(u1, consts))
        e4_2.reset(fn.phi(project_low(u1, cfg.N) + high, consts))
    e4_1.alpha = params.alpha
    e4_2.alpha = params.alpha

    elapsed0 = state.k * cfg.T - state.coupling_time
    budget_cap = cfg.rho2 * np.exp(-0.25 * params.alpha * state.k * cfg.T)
    e4_crossed = state.e4_crossed.copy()
    budget_crossed = state.budget_crossed.copy()

    n_rec = len(rec_idx)
    rec = SegmentRecord(
        times=state.k * cfg.T + np.array(rec_idx, dtype=float) * dt,
        phi_sum=np.empty((n_rec, B)),
        e4_1=np.empty((n_rec, B)),
        e4_2=np.empty((n_rec, B)),
        budget_integral=np.empty((n_rec, B)),
        log_weight=np.empty((n_rec, B)),
        j=np.empty((n_rec, B)),
    )

    def snap(i):
        w2 = project_low(u1, cfg.N) + high
        rec.phi_sum[i] = fn.phi(u1, consts) + fn.phi(w2, consts)
        rec.e4_1[i] = e4_1.value()
        rec.e4_2[i] = e4_2.value()
        rec.budget_integral[i] = budget_int
        rec.log_weight[i] = logw
        rec.j[i] = fn.j_functional(u1, w2, consts)

    snap(0)
    nxt, done = 1, 0
    while done < n_steps:
        m = min(256, n_steps - done)
        zs = source.next_block(m)
        for s in range(m):
            w2 = project_low(u1, cfg.N) + high
            dw = increments_from_normals(zs[:, s], dt)
            lin1 = pieces.drift(u1)
            linw = pieces.drift(w2)
            noise = pieces.noise(zs[:, s])
            delta = project_low(lin1 - linw, cfg.N)[..., : cfg.N]
            dlw, dcost = _shift_logweight(delta, dw, pieces.lam_low, dt)
            logw += dlw
            cost += dcost
            u1 = lin1 + noise
            high = project_high(linw, cfg.N)
            done += 1
            if np.any(fn.norm_hr_sq(u1, 1.0) > integ.blowup_guard**2):
                raise RuntimeError("coupled pair exceeded the blow-up guard")
            t_abs = state.k * cfg.T + done * dt
            ph1 = fn.phi(u1, consts)
            w2 = project_low(u1, cfg.N) + high
            ph2 = fn.phi(w2, consts)
            e4_1.push(ph1, dt)
            e4_2.push(ph2, dt)
            budget_int += (
                (1.0 + ph1**4 + ph2**4) * fn.norm_hr_sq(u1 - w2, 1.0) * dt
            )
            cap = cfg.e4_budget(elapsed0 + done * dt)
            e4_crossed |= (np.asarray(e4_1.value()) > cap) | (
                np.asarray(e4_2.value()) > cap
            )
            budget_crossed |= budget_int > budget_cap
            if nxt < n_rec and done == rec_idx[nxt]:
                snap(nxt)
                nxt += 1

    new_ell = state.ell.copy()
    decoupled = e4_crossed | budget_crossed
    new_ell[decoupled & (new_ell != UNCOUPLED)] = UNCOUPLED
    if np.any(logw < -30.0):
        warnings.warn(
            f"{int(np.sum(logw < -30.0))} pair(s) below log-weight -30; "
            "importance weights are collapsing",
            RuntimeWarning,
        )
    out = replace(
        state,
        u1=u1,
        u2_high=high,
        ell=new_ell,
        k=state.k + 1,
        log_weight=logw,
        girsanov_cost=cost,
        e4_1=e4_1,
        e4_2=e4_2,
        e4_crossed=e4_crossed,
        budget_crossed=budget_crossed,
        budget_integral=budget_int,
    )
    return out, rec


def recompute_decoupling(
    rec: SegmentRecord,
    cfg: CouplingConfig,
    alpha: float,
    segment_k: int,
    coupling_time: float = 0.0,
) -> np.ndarray:
    """Replay the decoupling decision from a saved record.

    With the record taken at full step resolution this reproduces the live
    flags exactly; the bookkeeping is a deterministic function of the
    trajectory.
    """
    elapsed = rec.times[1:] - coupling_time  # live checks run post-step only
    cap = cfg.e4_budget(elapsed)[:, None]
    e4_bad = np.any((rec.e4_1[1:] > cap) | (rec.e4_2[1:] > cap), axis=0)
    budget_cap = cfg.rho2 * np.exp(-0.25 * alpha * segment_k * cfg.T)
    bud_bad = np.any(rec.budget_integral[1:] > budget_cap, axis=0)
    return e4_bad | bud_bad


# ---------------------------------------------------------------------------
# stopping detection
# ---------------------------------------------------------------------------

def first_crossing(
    times: np.ndarray, values: np.ndarray, threshold: np.ndarray | float, above: bool = True
) -> float | None:
    """First grid time at which the event holds (conservative: first point past)."""
    values = np.asarray(values, dtype=float)
    thr = np.broadcast_to(np.asarray(threshold, dtype=float), values.shape)
    hit = values >= thr if above else values <= thr
    idx = np.argmax(hit)
    if not hit[idx]:
        return None
    return float(times[idx])


@dataclass
class StoppingReport:
    ball_entry: float | None
    e4_exceedance: float | None
    girsanov_budget_exceedance: float | None


def detect_stop(
    times: np.ndarray,
    cfg: CouplingConfig,
    alpha: float,
    phi_sum: np.ndarray | None = None,
    e4: np.ndarray | None = None,
    budget_integral: np.ndarray | None = None,
    ball_radius: float = np.inf,
    coupling_time: float = 0.0,
    segment_k: int = 0,
) -> StoppingReport:
    """First discrete times of the three configured stopping events."""
    ball = None
    if phi_sum is not None and np.isfinite(ball_radius):
        ball = first_crossing(times, phi_sum, ball_radius, above=False)
    e4_t = None
    if e4 is not None:
        cap = cfg.e4_budget(np.asarray(times) - coupling_time)
        e4_t = first_crossing(times, e4, cap, above=True)
    bud = None
    if budget_integral is not None:
        cap = cfg.rho2 * np.exp(-0.25 * alpha * segment_k * cfg.T)
        bud = first_crossing(times, budget_integral, cap, above=True)
    return StoppingReport(ball, e4_t, bud)


# ---------------------------------------------------------------------------
# pilot estimation of C4 and K41
# ---------------------------------------------------------------------------

@dataclass
class PilotConstants:
    c4_hat: float
    k41_hat: float
    n_traj: int
    T: float


def estimate_pilot_constants(
    params: ModelParams,
    spec: NoiseSpec,
    consts: FunctionalConstants,
    seed: int,
    u0: np.ndarray | None = None,
    n_traj: int = 200,
    T: float = 20.0,
    dt: float = 2e-3,
    record_every: int = 25,
    rho_grid: np.ndarray | None = None,
) -> PilotConstants:
    """Pilot ensemble estimates of the tail-bound constants.

    C4_hat is the 99th percentile over trajectories and t in [1, T] of
    (E_4(t) - Phi(u0)^4)/t; K41_hat the smallest K making
    P(sup (E_4 - (C4-1)t) >= Phi(u0)^4 + rho sqrt(T)) <= K (Phi(u0)^4+1)/rho
    hold on a rho grid.
    """
    from .models import simulate_ensemble  # local to avoid cycle at import

    u0 = np.zeros(params.M, complex) if u0 is None else np.asarray(u0, complex)
    integ = IntegratorConfig(dt=dt, scheme="expeuler", noise_mode="em",
                             record_every=record_every)
    rec = simulate_ensemble(
        u0, params, integ, spec, T, seed,
        traj_ids=np.arange(n_traj), consts=consts, track_phi_every_step=True,
    )
    t = rec.times
    e4 = rec.energy.E4  # (n_rec, B)
    phi0 = float(fn.phi(u0, consts))
    late = t >= 1.0
    ratios = (e4[late] - phi0**4) / t[late][:, None]
    c4 = float(np.quantile(ratios, 0.99))
    sup_dev = np.max(e4 - (c4 - 1.0) * t[:, None], axis=0) - phi0**4
    if rho_grid is None:
        pos = sup_dev[sup_dev > 0]
        hi = np.quantile(pos, 0.999) if pos.size else 1.0
        rho_grid = np.geomspace(max(hi * 1e-3, 1e-12), max(hi, 1e-9), 12) / np.sqrt(T)
    freq = np.array([np.mean(sup_dev >= r * np.sqrt(T)) for r in rho_grid])
    k41 = float(np.max(freq * rho_grid / (phi0**4 + 1.0))) if np.any(freq > 0) else 1.0
    return PilotConstants(c4_hat=c4, k41_hat=max(k41, 1e-6), n_traj=n_traj, T=T)
