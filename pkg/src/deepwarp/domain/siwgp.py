"""Maximum-Likelihood-Fit des raeumlich input-verzerrten GP (SIWGP).

Integrierte Likelihood
======================

Mit A = phi(f(S))' (N x r), Gewichten w ~ Gau(0, Sigma_tau) und Messfehler
sigma^2_eps gilt Z ~ Gau(0, A Sigma_tau A' + sigma^2_eps I). Ausgewertet wird
ueber die Woodbury-Identitaet in O(N r^2 + r^3). Mit Sigma_tau = L L' und
B = A L ist

    M = I + B'B / sigma^2_eps,
    log|A Sigma A' + sigma^2_eps I| = N log sigma^2_eps + log|M|,

was ohne explizite Inverse von Sigma_tau auskommt.

Optimierung
===========

Parametervektor theta = [Warping-Parameter | log sigma^2, log l | log sigma^2_eps].
Adam in drei Phasen (nur Warping, nur Top-Layer + Rauschen, alle), der beste
Iterand wird zurueckgegeben. Gradienten sind exakt (Kettenregel durch
Bisquare-Matrix, Reskalierung und alle Warping-Einheiten).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cho_solve, solve_triangular
from scipy.stats import norm

from deepwarp.domain.core import (
    Dataset,
    InvalidParameterError,
    InvalidPartitionError,
    LocationSet,
    PredictiveSummary,
    RngStream,
)
from deepwarp.domain.toplayer import (
    ProcessLayer,
    bisquare_matrix,
    bisquare_vjp,
    jittered_weight_cov,
    safe_cholesky,
    weight_cov_log_grads,
)
from deepwarp.domain.warp import MobiusLayer, WarpStack, warp_forward, warp_gradient

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Konfiguration
# ---------------------------------------------------------------------------

WARP_LR: float = 0.01
"""Adam-Lernrate fuer Warping-Parameter."""

TOP_LR: float = 0.05
"""Adam-Lernrate fuer log sigma^2, log l und log sigma^2_eps."""

VARIANCE_FLOOR: float = 1e-6
"""Untergrenze fuer momentbasierte Startwerte bei (fast) konstanten Daten."""

MAX_RETRIES: int = 5
"""Maximale Halbierungen der Lernrate je Schritt (retry_on_decrease)."""

LOG_2PI: float = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Integrierte Likelihood
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class LowRankPosterior:
    """Zwischenergebnisse der Woodbury-Auswertung.

    Attributes:
        chol_sigma: Untere Cholesky-Zerlegung von Sigma_tau.
        m_inv: M^{-1} mit M = I + B'B / sigma^2_eps.
        nu: M^{-1} L' A'Z / sigma^2_eps (gewhitete Posterior-Erwartung).
        mu: Posterior-Erwartung der Gewichte L nu.
        alpha: (A Sigma A' + sigma^2_eps I)^{-1} Z.
        loglik: Log-Dichte von Z.
    """

    chol_sigma: NDArray[np.float64]
    m_inv: NDArray[np.float64]
    nu: NDArray[np.float64]
    mu: NDArray[np.float64]
    alpha: NDArray[np.float64]
    loglik: float
    noise_var: float

    def predict(
        self, a_star: NDArray[np.float64]
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Mittelwert A* mu und Varianz diag(A* P A*') mit P = L M^{-1} L'."""
        mean = a_star @ self.mu
        b_star = a_star @ self.chol_sigma
        var = np.einsum("ij,jk,ik->i", b_star, self.m_inv, b_star)
        return mean, np.clip(var, 0.0, None)


def low_rank_posterior(
    a: NDArray[np.float64],
    z: NDArray[np.float64],
    sigma: NDArray[np.float64],
    noise_var: float,
) -> LowRankPosterior:
    """Woodbury-Auswertung der integrierten Likelihood und der Gewichts-Posterior."""
    if noise_var <= 0:
        msg = f"sigma^2_eps muss positiv sein, erhalten: {noise_var}"
        raise InvalidParameterError(msg)
    n, r = a.shape
    chol = safe_cholesky(sigma, "Gewichtskovarianz")
    b = a @ chol
    m = np.eye(r) + (b.T @ b) / noise_var
    m_chol = safe_cholesky(m, "Woodbury-Matrix")
    m_inv = cho_solve((m_chol, True), np.eye(r))
    nu = cho_solve((m_chol, True), b.T @ z / noise_var)
    mu = chol @ nu
    alpha = (z - a @ mu) / noise_var
    logdet_m = 2.0 * float(np.sum(np.log(np.diag(m_chol))))
    loglik = -0.5 * (n * LOG_2PI + n * math.log(noise_var) + logdet_m + float(z @ alpha))
    return LowRankPosterior(
        chol_sigma=chol, m_inv=m_inv, nu=nu, mu=mu, alpha=alpha, loglik=loglik,
        noise_var=noise_var,
    )


def marginal_loglik(
    a: NDArray[np.float64],
    z: NDArray[np.float64],
    sigma: NDArray[np.float64],
    noise_var: float,
) -> float:
    """log Gau(Z; 0, A Sigma_tau A' + sigma^2_eps I) in O(N r^2 + r^3)."""
    return low_rank_posterior(a, z, sigma, noise_var).loglik


# ---------------------------------------------------------------------------
# Problem und Gradient
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class SiwgpProblem:
    """Daten, Warping-Stack und Prozess-Layer mit flachem Parametervektor."""

    data: Dataset
    stack: WarpStack
    process: ProcessLayer
    noise_var: float

    @property
    def n_warp(self) -> int:
        return self.stack.n_params

    @property
    def n_params(self) -> int:
        return self.n_warp + 3

    @property
    def warp_slice(self) -> slice:
        return slice(0, self.n_warp)

    @property
    def top_slice(self) -> slice:
        return slice(self.n_warp, self.n_params)

    def initial_params(self) -> NDArray[np.float64]:
        return np.concatenate(
            [self.stack.params(), self.process.log_params(), [math.log(self.noise_var)]]
        )

    def unpack(self, theta: NDArray[np.float64]) -> SiwgpProblem:
        return replace(
            self,
            stack=self.stack.with_params(theta[self.warp_slice]),
            process=self.process.with_log_params(theta[self.n_warp : self.n_warp + 2]),
            noise_var=float(math.exp(theta[-1])),
        )


def loglik_and_gradient(
    problem: SiwgpProblem, theta: NDArray[np.float64], *, with_warp: bool = True
) -> tuple[float, NDArray[np.float64]]:
    """Integrierte Log-Likelihood und ihr exakter Gradient nach theta."""
    p = problem.unpack(theta)
    locations = p.data.locations
    z = p.data.z
    f_n, _ = warp_forward(p.stack, locations)
    a = bisquare_matrix(p.process, f_n)
    post = low_rank_posterior(a, z, jittered_weight_cov(p.process), p.noise_var)

    n, r = a.shape
    s2 = p.noise_var
    grad = np.zeros_like(theta)

    # Top-Layer: dL/dSigma = 1/2 L^{-T} (nu nu' + M^{-1} - I) L^{-1}
    k = np.outer(post.nu, post.nu) + post.m_inv - np.eye(r)
    w_inv = solve_triangular(post.chol_sigma, np.eye(r), lower=True)
    g_sigma = 0.5 * w_inv.T @ k @ w_inv
    _, d_log_l = weight_cov_log_grads(p.process)
    grad[problem.n_warp] = 0.5 * float(np.trace(k))
    grad[problem.n_warp + 1] = float(np.sum(g_sigma * d_log_l))
    grad[-1] = 0.5 * (
        s2 * float(post.alpha @ post.alpha) - n + r - float(np.trace(post.m_inv))
    )

    if with_warp and problem.n_warp > 0:
        # dL/dA = alpha mu' - A P / sigma^2_eps mit A P = B M^{-1} L'
        b = a @ post.chol_sigma
        g_a = np.outer(post.alpha, post.mu) - (b @ post.m_inv @ post.chol_sigma.T) / s2
        g_f = bisquare_vjp(p.process, f_n, g_a)
        grad[problem.warp_slice] = warp_gradient(p.stack, locations, g_f)
    return post.loglik, grad


def objective_gradient(
    problem: SiwgpProblem, theta: NDArray[np.float64]
) -> tuple[float, NDArray[np.float64]]:
    """Negative integrierte Log-Likelihood und deren Gradient."""
    value, grad = loglik_and_gradient(problem, theta)
    return -value, -grad


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class AdamState:
    """Momente, Schrittzaehler und Hyperparameter des Adam-Verfahrens.

    ``lr`` darf ein Vektor sein (je Parameter eine Rate).
    """

    m: NDArray[np.float64]
    v: NDArray[np.float64]
    lr: NDArray[np.float64]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def initial(
        cls,
        n: int,
        lr: float | NDArray[np.float64] = 1e-3,
        *,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> AdamState:
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            msg = f"Ungueltige Adam-Betas: {beta1}, {beta2}"
            raise InvalidParameterError(msg)
        return cls(
            m=np.zeros(n), v=np.zeros(n), lr=np.broadcast_to(np.asarray(lr, float), (n,)).copy(),
            beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(
    state: AdamState, grad: NDArray[np.float64], params: NDArray[np.float64]
) -> tuple[NDArray[np.float64], AdamState]:
    """Ein Adam-Abstiegsschritt mit Bias-Korrektur.

    Returns:
        (neue Parameter, neuer Zustand)
    """
    if grad.shape != params.shape or grad.shape != state.m.shape:
        msg = f"Formen passen nicht: grad {grad.shape}, params {params.shape}"
        raise InvalidParameterError(msg)
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**step)
    v_hat = v / (1.0 - state.beta2**step)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, step=step)


def guard_mobius(
    stack: WarpStack, old: NDArray[np.float64], new: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Moebius-Bloecke, deren Pol ins Eingabequadrat wandert, zuruecksetzen."""
    result = np.array(new)
    for layer, sl in zip(stack.layers, stack.layer_slices(), strict=True):
        if isinstance(layer, MobiusLayer) and layer.with_params(new[sl]).pole_violated():
            logger.warning("Moebius-Schritt verletzt Polbedingung - Block zurueckgesetzt")
            result[sl] = old[sl]
    return result


# ---------------------------------------------------------------------------
# Fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class SiwgpFit:
    """Geschaetzte Warping-Parameter, tau und sigma^2_eps samt Zielfunktionsverlauf.

    Attributes:
        stack: Stack mit geschaetzten Parametern (Lambda-Dach).
        process: Prozess-Layer mit tau-Dach.
        noise_var: sigma^2_eps-Dach.
        trace: Log-Likelihood je Schritt (Index 0 = Startwert).
        data: Trainingsdaten (fuer Vorhersagen).
    """

    stack: WarpStack
    process: ProcessLayer
    noise_var: float
    trace: list[float] = field(default_factory=list)
    data: Dataset | None = None

    @property
    def loglik(self) -> float:
        return max(self.trace) if self.trace else float("nan")


def moment_start(data: Dataset, process: ProcessLayer) -> tuple[ProcessLayer, float]:
    """Startwerte sigma^2 = Var(Z), sigma^2_eps = 0.1 Var(Z) (mit Untergrenze)."""
    var_z = float(np.var(data.z))
    if var_z < VARIANCE_FLOOR:
        logger.warning("Datenvarianz %.3g unter Untergrenze - verwende %.0e", var_z, VARIANCE_FLOOR)
        var_z = VARIANCE_FLOOR
    return replace(process, sigma2=var_z), 0.1 * var_z


def _stage_masks(problem: SiwgpProblem, warp_mask: NDArray[np.bool_]) -> list[NDArray[np.bool_]]:
    other = ~warp_mask
    return [warp_mask, other, np.ones(problem.n_params, dtype=bool)]


def retry_step(
    problem: SiwgpProblem,
    state: AdamState,
    direction: NDArray[np.float64],
    theta: NDArray[np.float64],
    value: float,
    *,
    retry_on_decrease: bool = False,
) -> tuple[NDArray[np.float64], float, NDArray[np.float64], AdamState]:
    """Adam-Schritt mit bis zu MAX_RETRIES Halbierungen der Lernrate.

    Halbiert wird bei nicht-endlicher Likelihood und, mit ``retry_on_decrease``,
    bei einem Abfall unter ``value``. Die Halbierung gilt nur fuer diesen
    Schritt: der zurueckgegebene Zustand traegt wieder die Lernrate von ``state``.

    Returns:
        (neue Parameter, Log-Likelihood, Gradient, neuer Adam-Zustand)
    """
    trial = state
    new_theta, new_state = adam_step(trial, direction, theta)
    new_theta = guard_mobius(problem.stack, theta, new_theta)
    new_value, new_grad = loglik_and_gradient(problem, new_theta)

    retries = 0
    while (not math.isfinite(new_value) or (retry_on_decrease and new_value < value)) \
            and retries < MAX_RETRIES:
        retries += 1
        trial = replace(trial, lr=trial.lr / 2.0)
        new_theta, new_state = adam_step(trial, direction, theta)
        new_theta = guard_mobius(problem.stack, theta, new_theta)
        new_value, new_grad = loglik_and_gradient(problem, new_theta)
    if retries:
        logger.debug("Schritt nach %d Halbierungen der Lernrate", retries)
    return new_theta, new_value, new_grad, replace(new_state, lr=state.lr)


def fit_siwgp(
    data: Dataset,
    stack: WarpStack,
    process: ProcessLayer,
    schedule: tuple[int, int, int] = (100, 100, 100),
    *,
    moment_init: bool = True,
    warp_lr: float = WARP_LR,
    top_lr: float = TOP_LR,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    retry_on_decrease: bool = False,
) -> SiwgpFit:
    """SIWGP per Adam in drei Phasen fitten.

    Phase 1 optimiert nur die Warping-Parameter, Phase 2 nur (tau, sigma^2_eps),
    Phase 3 alle gemeinsam. Zurueckgegeben wird der beste Iterand, daher ist die
    End-Likelihood nie kleiner als die Start-Likelihood.

    Raises:
        DegenerateWarpError: Layer mit kollabierenden Knotenbildern (mit Layer-Index).
    """
    if moment_init:
        process, noise_var = moment_start(data, process)
    else:
        noise_var = data.noise_var
    problem = SiwgpProblem(data=data, stack=stack, process=process, noise_var=noise_var)
    theta = problem.initial_params()
    value, grad = loglik_and_gradient(problem, theta)
    trace = [value]
    best_value, best_theta = value, theta

    warp_mask = np.zeros(problem.n_params, dtype=bool)
    warp_mask[problem.warp_slice] = True
    lr = np.where(warp_mask, warp_lr, top_lr)

    for stage, (n_steps, mask) in enumerate(
        zip(schedule, _stage_masks(problem, warp_mask), strict=True), start=1
    ):
        if n_steps <= 0 or not np.any(mask):
            continue
        logger.info("SIWGP Phase %d: %d Schritte, %d Parameter", stage, n_steps, int(mask.sum()))
        state = AdamState.initial(problem.n_params, lr, beta1=beta1, beta2=beta2, eps=eps)
        for _ in range(n_steps):
            direction = np.where(mask, -grad, 0.0)
            new_theta, new_value, new_grad, new_state = retry_step(
                problem, state, direction, theta, value, retry_on_decrease=retry_on_decrease
            )
            if not math.isfinite(new_value):
                logger.warning("Nicht-endliche Likelihood - Schritt verworfen")
                trace.append(value)
                continue

            theta, value, grad, state = new_theta, new_value, new_grad, new_state
            trace.append(value)
            if value > best_value:
                best_value, best_theta = value, theta
        logger.debug("SIWGP Phase %d beendet: log L = %.4f", stage, value)

    best = problem.unpack(best_theta)
    logger.info("SIWGP fertig: log L %.4f -> %.4f", trace[0], best_value)
    return SiwgpFit(
        stack=best.stack, process=best.process, noise_var=best.noise_var, trace=trace, data=data
    )


# ---------------------------------------------------------------------------
# Vorhersage
# ---------------------------------------------------------------------------


def component_moments(
    stack: WarpStack,
    process: ProcessLayer,
    noise_var: float,
    data: Dataset,
    targets: LocationSet,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Gauss-Momente von Y(S*) gegeben Z fuer feste Warping-Parameter."""
    f_n, _ = warp_forward(stack, data.locations)
    f_star, _ = warp_forward(stack, targets)
    a = bisquare_matrix(process, f_n)
    a_star = bisquare_matrix(process, f_star)
    post = low_rank_posterior(a, data.z, jittered_weight_cov(process), noise_var)
    return post.predict(a_star)


def predict_siwgp(
    fit: SiwgpFit, targets: LocationSet, *, include_noise: bool = False
) -> PredictiveSummary:
    """Kriging-Vorhersage fuer Y (bzw. Z mit ``include_noise``) an S*."""
    if fit.data is None:
        msg = "Fit enthaelt keine Trainingsdaten"
        raise InvalidParameterError(msg)
    mean, var = component_moments(fit.stack, fit.process, fit.noise_var, fit.data, targets)
    if include_noise:
        var = var + fit.noise_var
    return PredictiveSummary.from_moments(mean, var)


# ---------------------------------------------------------------------------
# Minibatch-Schaetzer
# ---------------------------------------------------------------------------


def partition_batches(n: int, n_batches: int, rng: RngStream) -> list[NDArray[np.intp]]:
    """Zufaellige Zerlegung von {0..N-1} in N_b gleich grosse Minibatches."""
    if n_batches < 1 or n % n_batches != 0:
        msg = f"N={n} laesst sich nicht in {n_batches} gleich grosse Batches zerlegen"
        raise InvalidPartitionError(msg)
    return list(np.split(rng.permutation(n), n_batches))


def conditional_loglik(
    a: NDArray[np.float64], z: NDArray[np.float64], weights: NDArray[np.float64], noise_var: float
) -> float:
    """Sum_j log Gau(Z_j; a_j' w, sigma^2_eps) (nicht-integrierte Likelihood)."""
    return float(np.sum(norm.logpdf(z, loc=a @ weights, scale=math.sqrt(noise_var))))


def full_conditional_loglik(
    data: Dataset,
    weights: NDArray[np.float64],
    stack: WarpStack,
    process: ProcessLayer,
    noise_var: float,
) -> float:
    """Nicht-integrierte Log-Likelihood aller Daten bei gegebenen Top-Layer-Gewichten."""
    f_n, _ = warp_forward(stack, data.locations)
    return conditional_loglik(bisquare_matrix(process, f_n), data.z, weights, noise_var)


def minibatch_loglik_estimate(
    data: Dataset,
    batch: NDArray[np.intp],
    weights: NDArray[np.float64],
    stack: WarpStack,
    process: ProcessLayer,
    noise_var: float,
) -> float:
    """Erwartungstreuer Schaetzer N_b * log p(Z^m | w, Lambda, sigma^2_eps).

    Raises:
        InvalidPartitionError: leere Batches oder N nicht durch die Batchgroesse teilbar.
    """
    m_b = len(batch)
    if m_b == 0 or data.n % m_b != 0:
        msg = f"Batchgroesse {m_b} zerlegt N={data.n} nicht in gleich grosse Teile"
        raise InvalidPartitionError(msg)
    n_batches = data.n // m_b
    f_batch, _ = warp_forward(stack, LocationSet(data.locations.coords[batch]))
    a = bisquare_matrix(process, f_batch)
    return n_batches * conditional_loglik(a, data.z[batch], weights, noise_var)
