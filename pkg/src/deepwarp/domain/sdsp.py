"""Variationelle Inferenz fuer den raeumlichen tiefen stochastischen Prozess (SDSP).

Die transformierten Gewichte jeder AWU-/RBF-Einheit sind zufaellig mit
Gauss-Prior Gau(mu_i, sigma^2_i I). Die Variationsverteilung je Einheit ist
Gau(m, L L'), wobei L ueber eta parametrisiert wird (Diagonale als Logarithmus,
striktes unteres Dreieck frei). Moebius-Parameter, tau und sigma^2_eps werden
punktgeschaetzt.

ELBO = E1 - E2 mit
- E1: Monte-Carlo-Mittel der integrierten Log-Likelihood unter Gewichtsziehungen
  m + L e (Reparametrisierung), Orte und Knoten werden deterministisch
  propagiert;
- E2: Summe der analytischen KL-Divergenzen zu den Priors.

Vorhersagen sind Gauss-Mischungen: je Gewichtsziehung eine Kriging-Komponente,
aus der ``per_component`` Werte gezogen und gepoolt werden.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from deepwarp.domain.core import (
    Dataset,
    InvalidParameterError,
    LocationSet,
    PredictiveSummary,
    RngStream,
)
from deepwarp.domain.siwgp import (
    TOP_LR,
    WARP_LR,
    AdamState,
    SiwgpProblem,
    adam_step,
    component_moments,
    guard_mobius,
    loglik_and_gradient,
    moment_start,
)
from deepwarp.domain.toplayer import ProcessLayer
from deepwarp.domain.warp import (
    AwuLayer,
    RbfLayer,
    WarpStack,
)

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Konfiguration
# ---------------------------------------------------------------------------

PRIOR_VAR: float = 10.0
"""Grosse Prior-Varianz der transformierten Gewichte."""

AWU_LINEAR_PRIOR: float = 0.0
AWU_SIGMOID_PRIOR: float = -4.0
RBF_PRIOR: float = -0.8

INIT_SD: float = 0.01
"""Start-Standardabweichung der Variationsverteilung."""

DEFAULT_N_MC: int = 10
DEFAULT_PER_COMPONENT: int = 100


# ---------------------------------------------------------------------------
# Priors und Variationsfamilie
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class WeightPrior:
    """Diagonaler Gauss-Prior Gau(mean, var I) fuer die Gewichte einer Einheit."""

    mean: NDArray[np.float64]
    var: float

    def __post_init__(self) -> None:
        if not self.var > 0:
            msg = f"Prior-Varianz muss positiv sein, erhalten: {self.var}"
            raise InvalidParameterError(msg)


def default_priors(stack: WarpStack, var: float = PRIOR_VAR) -> tuple[WeightPrior, ...]:
    """Priors mit (nahezu) identischem Warping als Erwartung."""
    priors: list[WeightPrior] = []
    for layer in stack.layers:
        if isinstance(layer, AwuLayer):
            mean = np.full(layer.r, AWU_SIGMOID_PRIOR)
            mean[0] = AWU_LINEAR_PRIOR
            priors.append(WeightPrior(mean=mean, var=var))
        elif isinstance(layer, RbfLayer):
            priors.append(WeightPrior(mean=np.array([RBF_PRIOR]), var=var))
    return tuple(priors)


@dataclass(frozen=True, slots=True, eq=False)
class VariationalBlock:
    """Variationsparameter einer Einheit.

    Attributes:
        mean: Erwartung m (Laenge k).
        eta: k x k untere Dreiecksmatrix; Diagonale = log diag(L).
        full: Volle Cholesky-Faktoren statt Diagonale.
    """

    mean: NDArray[np.float64]
    eta: NDArray[np.float64]
    full: bool = False

    @property
    def k(self) -> int:
        return int(self.mean.shape[0])

    @property
    def n_free(self) -> int:
        k = self.k
        return 2 * k + (k * (k - 1) // 2 if self.full else 0)

    def chol(self) -> NDArray[np.float64]:
        lower = np.tril(self.eta, -1) if self.full else np.zeros((self.k, self.k))
        return lower + np.diag(np.exp(np.diag(self.eta)))

    def free_params(self) -> NDArray[np.float64]:
        parts = [self.mean, np.diag(self.eta)]
        if self.full:
            parts.append(self.eta[np.tril_indices(self.k, -1)])
        return np.concatenate(parts)

    def with_free_params(self, values: NDArray[np.float64]) -> VariationalBlock:
        k = self.k
        eta = np.diag(values[k : 2 * k])
        if self.full:
            eta[np.tril_indices(k, -1)] = values[2 * k :]
        return replace(self, mean=np.array(values[:k]), eta=eta)


@dataclass(frozen=True, slots=True, eq=False)
class VariationalState:
    """Variationsbloecke in Stack-Reihenfolge (nur AWU/RBF)."""

    blocks: tuple[VariationalBlock, ...]

    @classmethod
    def initial(
        cls, stack: WarpStack, *, init_sd: float = INIT_SD, full: bool = False
    ) -> VariationalState:
        """Erwartungen = aktuelle Stack-Gewichte, Standardabweichung init_sd."""
        blocks = []
        for layer in stack.layers:
            if layer.random:
                k = layer.n_params
                blocks.append(
                    VariationalBlock(
                        mean=layer.params(), eta=np.diag(np.full(k, math.log(init_sd))), full=full
                    )
                )
        return cls(blocks=tuple(blocks))

    @property
    def n_weights(self) -> int:
        return sum(b.k for b in self.blocks)

    @property
    def n_free(self) -> int:
        return sum(b.n_free for b in self.blocks)

    def free_params(self) -> NDArray[np.float64]:
        if not self.blocks:
            return np.empty(0)
        return np.concatenate([b.free_params() for b in self.blocks])

    def with_free_params(self, values: NDArray[np.float64]) -> VariationalState:
        blocks = []
        start = 0
        for b in self.blocks:
            blocks.append(b.with_free_params(values[start : start + b.n_free]))
            start += b.n_free
        return VariationalState(blocks=tuple(blocks))

    def mean_mask(self) -> NDArray[np.bool_]:
        """True an den Positionen der Erwartungen m im freien Vektor."""
        mask = np.zeros(self.n_free, dtype=bool)
        start = 0
        for b in self.blocks:
            mask[start : start + b.k] = True
            start += b.n_free
        return mask

    def means(self) -> NDArray[np.float64]:
        if not self.blocks:
            return np.empty(0)
        return np.concatenate([b.mean for b in self.blocks])


def kl_gaussian(
    q_mean: NDArray[np.float64],
    q_chol: NDArray[np.float64],
    p_mean: NDArray[np.float64],
    p_var: float,
) -> float:
    """KL(Gau(m, L L') || Gau(mu, sigma^2_p I)) analytisch."""
    if p_var <= 0:
        msg = f"Prior-Varianz muss positiv sein, erhalten: {p_var}"
        raise InvalidParameterError(msg)
    k = q_mean.shape[0]
    if q_chol.shape != (k, k) or p_mean.shape[0] != k:
        msg = f"Dimensionen passen nicht: m {q_mean.shape}, L {q_chol.shape}, mu {p_mean.shape}"
        raise InvalidParameterError(msg)
    diff = q_mean - p_mean
    trace_v = float(np.sum(q_chol * q_chol))
    logdet_v = 2.0 * float(np.sum(np.log(np.abs(np.diag(q_chol)))))
    return 0.5 * (
        trace_v / p_var + float(diff @ diff) / p_var - k + k * math.log(p_var) - logdet_v
    )


def sample_weights(vs: VariationalState, rng: RngStream) -> list[NDArray[np.float64]]:
    """Reparametrisierte Ziehung m + L e je Block (transformierte Gewichte)."""
    return [b.mean + b.chol() @ rng.normal(b.k) for b in vs.blocks]


# ---------------------------------------------------------------------------
# Problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class SdspProblem:
    """Parameterraum des SDSP: [Variation | Moebius | log sigma^2, log l | log sigma^2_eps]."""

    data: Dataset
    stack: WarpStack
    process: ProcessLayer
    noise_var: float
    priors: tuple[WeightPrior, ...]
    vs: VariationalState

    def __post_init__(self) -> None:
        if len(self.priors) != len(self.vs.blocks):
            msg = f"{len(self.priors)} Priors fuer {len(self.vs.blocks)} Variationsbloecke"
            raise InvalidParameterError(msg)

    @property
    def random_mask(self) -> NDArray[np.bool_]:
        return self.stack.random_mask()

    @property
    def n_var(self) -> int:
        return self.vs.n_free

    @property
    def n_fixed(self) -> int:
        return int(np.sum(~self.random_mask))

    @property
    def n_params(self) -> int:
        return self.n_var + self.n_fixed + 3

    def initial_params(self) -> NDArray[np.float64]:
        fixed = self.stack.params()[~self.random_mask]
        return np.concatenate([
            self.vs.free_params(), fixed, self.process.log_params(), [math.log(self.noise_var)],
        ])

    def unpack(self, phi: NDArray[np.float64]) -> SdspProblem:
        vs = self.vs.with_free_params(phi[: self.n_var])
        stack_params = self.stack.params()
        stack_params[~self.random_mask] = phi[self.n_var : self.n_var + self.n_fixed]
        stack_params[self.random_mask] = vs.means()
        top = self.n_var + self.n_fixed
        return replace(
            self,
            vs=vs,
            stack=self.stack.with_params(stack_params),
            process=self.process.with_log_params(phi[top : top + 2]),
            noise_var=float(math.exp(phi[-1])),
        )

    def siwgp_problem(self) -> SiwgpProblem:
        return SiwgpProblem(
            data=self.data, stack=self.stack, process=self.process, noise_var=self.noise_var
        )

    def stack_params(self, weights: Sequence[NDArray[np.float64]]) -> NDArray[np.float64]:
        """Stack-Parametervektor mit gezogenen Gewichten und festen Moebius-Parametern."""
        values = self.stack.params()
        if weights:
            values[self.random_mask] = np.concatenate(list(weights))
        return values

    def mean_stack(self) -> WarpStack:
        """Stack mit Gewichten = Variationserwartung (Posterior-Mittel des Warpings)."""
        return self.stack.with_params(self.stack_params([b.mean for b in self.vs.blocks]))


# ---------------------------------------------------------------------------
# ELBO
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ElboEstimate:
    """Monte-Carlo-Schaetzung der unteren Schranke.

    Attributes:
        e1: Mittel der integrierten Log-Likelihoods.
        e2: Summe der KL-Divergenzen.
        value: e1 - e2.
        mc_se: Monte-Carlo-Standardfehler von e1.
        per_sample: Log-Likelihood je Ziehung.
    """

    e1: float
    e2: float
    value: float
    mc_se: float
    per_sample: tuple[float, ...] = field(default=())


def _kl_total(problem: SdspProblem) -> float:
    return sum(
        kl_gaussian(b.mean, b.chol(), p.mean, p.var)
        for b, p in zip(problem.vs.blocks, problem.priors, strict=True)
    )


def _split_noise(vs: VariationalState, e: NDArray[np.float64]) -> list[NDArray[np.float64]]:
    parts = []
    start = 0
    for b in vs.blocks:
        parts.append(e[start : start + b.k])
        start += b.k
    return parts


def _sample_term(
    problem: SdspProblem, e: NDArray[np.float64], with_grad: bool
) -> tuple[float, NDArray[np.float64]]:
    """Log-Likelihood und Gradient fuer eine Ziehung (freier Parametervektor)."""
    noise = _split_noise(problem.vs, e)
    weights = [b.mean + b.chol() @ eb for b, eb in zip(problem.vs.blocks, noise, strict=True)]
    base = problem.siwgp_problem()
    theta = np.concatenate([problem.stack_params(weights), base.initial_params()[base.n_warp :]])
    value, g_theta = loglik_and_gradient(base, theta, with_warp=with_grad)
    grad = np.zeros(problem.n_params)
    if not with_grad:
        return value, grad

    g_stack = g_theta[: base.n_warp]
    g_random = g_stack[problem.random_mask]
    start_w = 0
    start_f = 0
    for b, eb in zip(problem.vs.blocks, noise, strict=True):
        gb = g_random[start_w : start_w + b.k]
        k = b.k
        grad[start_f : start_f + k] = gb
        grad[start_f + k : start_f + 2 * k] = gb * eb * np.exp(np.diag(b.eta))
        if b.full:
            grad[start_f + 2 * k : start_f + b.n_free] = np.outer(gb, eb)[np.tril_indices(k, -1)]
        start_w += k
        start_f += b.n_free
    grad[problem.n_var : problem.n_var + problem.n_fixed] = g_stack[~problem.random_mask]
    grad[problem.n_var + problem.n_fixed :] = g_theta[base.n_warp :]
    return value, grad


def _kl_gradient(problem: SdspProblem) -> NDArray[np.float64]:
    grad = np.zeros(problem.n_params)
    start = 0
    for b, p in zip(problem.vs.blocks, problem.priors, strict=True):
        k = b.k
        chol = b.chol()
        grad[start : start + k] = (b.mean - p.mean) / p.var
        grad[start + k : start + 2 * k] = np.diag(chol) ** 2 / p.var - 1.0
        if b.full:
            grad[start + 2 * k : start + b.n_free] = chol[np.tril_indices(k, -1)] / p.var
        start += b.n_free
    return grad


def elbo_and_gradient(
    problem: SdspProblem,
    noise: NDArray[np.float64],
    *,
    with_grad: bool = True,
    workers: int = 1,
) -> tuple[ElboEstimate, NDArray[np.float64]]:
    """ELBO-Schaetzung und Reparametrisierungs-Gradient fuer feste Ziehungen e.

    Args:
        problem: Aktueller Parameterzustand.
        noise: N_MC x (Anzahl Gewichte) Standardnormal-Ziehungen.
        with_grad: Gradient berechnen.
        workers: >1 wertet die Ziehungen in einem ThreadPool aus; summiert wird
            immer in fester Reihenfolge.
    """
    n_mc = noise.shape[0]
    if n_mc < 1:
        msg = "Mindestens eine Monte-Carlo-Ziehung noetig"
        raise InvalidParameterError(msg)

    def _run(e: NDArray[np.float64]) -> tuple[float, NDArray[np.float64]]:
        return _sample_term(problem, e, with_grad)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run, list(noise)))
    else:
        results = [_run(e) for e in noise]

    values = np.array([v for v, _ in results])
    grad = np.zeros(problem.n_params)
    for _, g in results:
        grad += g
    grad /= n_mc
    e1 = float(np.mean(values))
    e2 = _kl_total(problem)
    if with_grad:
        grad -= _kl_gradient(problem)
    mc_se = float(np.std(values, ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else 0.0
    estimate = ElboEstimate(
        e1=e1, e2=e2, value=e1 - e2, mc_se=mc_se, per_sample=tuple(float(v) for v in values)
    )
    return estimate, grad


def elbo_mc(
    data: Dataset,
    stack: WarpStack,
    process: ProcessLayer,
    vs: VariationalState,
    priors: tuple[WeightPrior, ...],
    n_mc: int,
    rng: RngStream,
    *,
    workers: int = 1,
) -> ElboEstimate:
    """Monte-Carlo-ELBO E1 - E2 (sigma^2_eps = data.noise_var)."""
    if n_mc < 1:
        msg = f"N_MC muss >= 1 sein, erhalten: {n_mc}"
        raise InvalidParameterError(msg)
    problem = SdspProblem(
        data=data, stack=stack, process=process, noise_var=data.noise_var, priors=priors, vs=vs
    )
    noise = rng.normal((n_mc, vs.n_weights))
    estimate, _ = elbo_and_gradient(problem, noise, with_grad=False, workers=workers)
    return estimate


# ---------------------------------------------------------------------------
# Fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class SdspFit:
    """Variationszustand, Punktschaetzer und ELBO-Verlauf.

    Attributes:
        stack: Stack mit geschaetzten Moebius-Parametern; AWU/RBF-Gewichte = m.
        vs: Variationsverteilung der transformierten Gewichte.
        priors: Verwendete Priors.
        process: Prozess-Layer mit tau-Dach.
        noise_var: sigma^2_eps-Dach.
        trace: ELBO-Schaetzung je Schritt.
        seed: Master-Seed.
        data: Trainingsdaten.
    """

    stack: WarpStack
    vs: VariationalState
    priors: tuple[WeightPrior, ...]
    process: ProcessLayer
    noise_var: float
    trace: list[float]
    seed: int
    data: Dataset

    def problem(self) -> SdspProblem:
        return SdspProblem(
            data=self.data, stack=self.stack, process=self.process, noise_var=self.noise_var,
            priors=self.priors, vs=self.vs,
        )

    def mean_stack(self) -> WarpStack:
        return self.problem().mean_stack()


def fit_sdsp(
    data: Dataset,
    stack: WarpStack,
    process: ProcessLayer,
    priors: tuple[WeightPrior, ...] | None = None,
    n_mc: int = DEFAULT_N_MC,
    schedule: tuple[int, int, int] = (100, 100, 100),
    *,
    seed: int = 0,
    full_cov: bool = False,
    init_sd: float = INIT_SD,
    moment_init: bool = True,
    warp_lr: float = WARP_LR,
    top_lr: float = TOP_LR,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    workers: int = 1,
) -> SdspFit:
    """SDSP per stochastischem Adam-Anstieg auf der ELBO fitten.

    Phase 1: nur Variationserwartungen m; Phase 2: alle anderen Parameter;
    Phase 3: alle gemeinsam. Je Schritt werden frische Ziehungen e gezogen
    und fuer alle Parameter gemeinsam verwendet.
    """
    if n_mc < 1:
        msg = f"N_MC muss >= 1 sein, erhalten: {n_mc}"
        raise InvalidParameterError(msg)
    if priors is None:
        priors = default_priors(stack)
    if moment_init:
        process, noise_var = moment_start(data, process)
    else:
        noise_var = data.noise_var
    vs = VariationalState.initial(stack, init_sd=init_sd, full=full_cov)
    problem = SdspProblem(
        data=data, stack=stack, process=process, noise_var=noise_var, priors=priors, vs=vs
    )
    phi = problem.initial_params()
    rng = RngStream(seed)

    mean_mask = np.zeros(problem.n_params, dtype=bool)
    mean_mask[: problem.n_var] = vs.mean_mask()
    top_mask = np.zeros(problem.n_params, dtype=bool)
    top_mask[problem.n_var + problem.n_fixed :] = True
    lr = np.where(top_mask, top_lr, warp_lr)
    masks = [mean_mask, ~mean_mask, np.ones(problem.n_params, dtype=bool)]
    mobius_slice = slice(problem.n_var, problem.n_var + problem.n_fixed)

    trace: list[float] = []
    for stage, (n_steps, mask) in enumerate(zip(schedule, masks, strict=True), start=1):
        if n_steps <= 0 or not np.any(mask):
            continue
        logger.info("SDSP Phase %d: %d Schritte, N_MC=%d", stage, n_steps, n_mc)
        state = AdamState.initial(problem.n_params, lr, beta1=beta1, beta2=beta2, eps=eps)
        for _ in range(n_steps):
            current = problem.unpack(phi)
            noise = rng.normal((n_mc, vs.n_weights))
            estimate, grad = elbo_and_gradient(current, noise, workers=workers)
            trace.append(estimate.value)
            if not np.all(np.isfinite(grad)):
                logger.warning("Nicht-endlicher ELBO-Gradient - Schritt uebersprungen")
                continue
            new_phi, state = adam_step(state, np.where(mask, -grad, 0.0), phi)
            if problem.n_fixed:
                full_old = current.stack.params()
                full_new = np.array(full_old)
                full_new[~problem.random_mask] = new_phi[mobius_slice]
                guarded = guard_mobius(current.stack, full_old, full_new)
                new_phi[mobius_slice] = guarded[~problem.random_mask]
            phi = new_phi
        logger.debug("SDSP Phase %d beendet: ELBO ~ %.4f", stage, trace[-1] if trace else 0.0)

    final = problem.unpack(phi)
    logger.info("SDSP fertig nach %d Schritten", len(trace))
    return SdspFit(
        stack=final.stack, vs=final.vs, priors=priors, process=final.process,
        noise_var=final.noise_var, trace=trace, seed=seed, data=data,
    )


# ---------------------------------------------------------------------------
# Vorhersage
# ---------------------------------------------------------------------------


def pool_mixture(
    means: Sequence[NDArray[np.float64]],
    variances: Sequence[NDArray[np.float64]],
    per_component: int,
    rng: RngStream,
) -> NDArray[np.float64]:
    """Je Komponente ``per_component`` Werte ziehen und poolen (Orte x Ziehungen)."""
    if per_component < 1:
        msg = f"per_component muss >= 1 sein, erhalten: {per_component}"
        raise InvalidParameterError(msg)
    draws = [
        mean[:, None] + np.sqrt(var)[:, None] * rng.normal((mean.shape[0], per_component))
        for mean, var in zip(means, variances, strict=True)
    ]
    return np.concatenate(draws, axis=1)


def predict_sdsp(
    fit: SdspFit,
    targets: LocationSet,
    n_mc: int = DEFAULT_N_MC,
    per_component: int = DEFAULT_PER_COMPONENT,
    *,
    rng: RngStream | None = None,
    include_noise: bool = False,
) -> PredictiveSummary:
    """Gauss-Mischungs-Vorhersage mit gepoolten Ziehungen.

    Je Gewichtsziehung werden Daten, Zielorte und Knoten gemeinsam propagiert;
    die Komponente ist die Kriging-Verteilung unter diesem Warping.
    """
    if n_mc < 1:
        msg = f"N_MC muss >= 1 sein, erhalten: {n_mc}"
        raise InvalidParameterError(msg)
    rng = rng or RngStream(fit.seed).substream(1)
    problem = fit.problem()
    means: list[NDArray[np.float64]] = []
    variances: list[NDArray[np.float64]] = []
    for _ in range(n_mc):
        weights = sample_weights(fit.vs, rng)
        stack = fit.stack.with_params(problem.stack_params(weights))
        mean, var = component_moments(stack, fit.process, fit.noise_var, fit.data, targets)
        if include_noise:
            var = var + fit.noise_var
        means.append(mean)
        variances.append(var)
    samples = pool_mixture(means, variances, per_component, rng)
    return PredictiveSummary.from_samples(samples)

