"""Injektive Warping-Einheiten und die komponierte Abbildung f = f_n o ... o f_1.

Drei Einheitstypen:
- AWU (axiale Warping-Einheit): monoton in einer Achse, lineare Komponente plus
  Sigmoide mit positiven Gewichten w = exp(w~).
- RBF-Einheit: radiale Streckung/Stauchung s + w * (s - gamma) * exp(-a ||s - gamma||^2)
  mit beschraenktem Gewicht w = (1 + e^{3/2}/2) * logistic(w~) - 1.
- Moebius-Einheit: (a1 z + a2) / (a3 z + a4) auf z = s1 + i s2.

Nach jedem Layer wird affin auf [c1, c1 + 1]^d reskaliert, wobei Minimum und
Maximum aus dem Bild der Knoten stammen. Gradienten werden exakt per
Kettenregel rueckwaerts berechnet; Minimum/Maximum erhalten Subgradienten
ueber den erreichenden Knoten (niedrigster Index bei Gleichstand).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray
from scipy.special import expit

from deepwarp.domain.core import (
    C1,
    DegenerateWarpError,
    Domain,
    InvalidParameterError,
    KnotSet,
    LocationSet,
)

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Konstanten
# ---------------------------------------------------------------------------

DEFAULT_STEEPNESS: float = 200.0
"""Steilheit theta_1 der AWU-Sigmoide."""

SCENE_STEEPNESS: float = 20.0
"""Flachere Sigmoide fuer gerasterte Szenen."""

RBF_WEIGHT_SCALE: float = 1.0 + math.exp(1.5) / 2.0
"""Spannweite des zulaessigen RBF-Gewichtsintervalls (-1, e^{3/2}/2)."""

RBF_IDENTITY_TWEIGHT: float = math.log(2.0) - 1.5
"""Transformiertes RBF-Gewicht mit w = 0 (ca. -0.8069)."""

AWU_LINEAR_INIT: float = 0.0
"""log(1): lineares AWU-Gewicht zu Beginn."""

AWU_SIGMOID_INIT: float = math.log(0.01)
"""Sigmoid-Gewichte zu Beginn (fast keine Verzerrung)."""

DEGENERACY_FLOOR: float = 1e-12
"""Minimale Spannweite max - min der Knotenbilder."""

MOBIUS_IDENTITY: tuple[float, ...] = (1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
"""Re/Im von (a1, a2, a3, a4) = (1, 0, 0, 1)."""


# ---------------------------------------------------------------------------
# Einzelfunktionen
# ---------------------------------------------------------------------------


def sigmoid(
    s: float | NDArray[np.float64], steepness: float, center: float | NDArray[np.float64]
) -> float | NDArray[np.float64]:
    """1 / (1 + exp(-theta_1 (s - theta_2))), numerisch saturierend."""
    if steepness <= 0:
        msg = f"Steilheit muss positiv sein, erhalten: {steepness}"
        raise InvalidParameterError(msg)
    result = expit(steepness * (np.asarray(s, dtype=np.float64) - center))
    if np.ndim(result) == 0:
        return float(result)
    return result  # type: ignore[no-any-return]


def rbf_weight(tweight: float) -> float:
    """Rueckt-Transformation w~ -> w im Intervall (-1, e^{3/2}/2)."""
    return float(RBF_WEIGHT_SCALE * expit(tweight) - 1.0)


# ---------------------------------------------------------------------------
# Layer-Typen
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class AwuLayer:
    """Axiale Warping-Einheit.

    Attributes:
        axis: Index der verzerrten Achse.
        dim: Dimension von Ein- und Ausgabe.
        steepness: Gemeinsame Steilheit theta_1 aller Sigmoide.
        centers: Wendepunkte theta_2 (r - 1 Stueck, streng steigend).
        tweights: Transformierte Gewichte (r Stueck, linearer Term zuerst).
    """

    axis: int
    dim: int
    steepness: float
    centers: NDArray[np.float64]
    tweights: NDArray[np.float64]

    random = True

    def __post_init__(self) -> None:
        if not 0 <= self.axis < self.dim:
            msg = f"AWU-Achse {self.axis} ausserhalb der Dimension {self.dim}"
            raise InvalidParameterError(msg)
        if self.tweights.shape[0] != self.centers.shape[0] + 1:
            msg = "AWU braucht genau ein Gewicht mehr als Sigmoide"
            raise InvalidParameterError(msg)
        if np.any(np.diff(self.centers) <= 0):
            msg = "AWU-Wendepunkte muessen streng steigen"
            raise InvalidParameterError(msg)

    @property
    def r(self) -> int:
        return int(self.tweights.shape[0])

    @property
    def n_params(self) -> int:
        return self.r

    @property
    def weights(self) -> NDArray[np.float64]:
        return np.exp(self.tweights)

    def params(self) -> NDArray[np.float64]:
        return np.array(self.tweights, dtype=np.float64)

    def with_params(self, values: NDArray[np.float64]) -> AwuLayer:
        return replace(self, tweights=np.array(values, dtype=np.float64))

    def basis(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """N x r Basismatrix [x, sigma(x; theta_2j) ...]."""
        sig = expit(self.steepness * (x[:, None] - self.centers[None, :]))
        return np.column_stack([x, sig])

    def forward(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        out = np.array(x, dtype=np.float64)
        out[:, self.axis] = self.basis(x[:, self.axis]) @ self.weights
        return out

    def vjp(
        self, x: NDArray[np.float64], g_out: NDArray[np.float64]
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        w = self.weights
        phi = self.basis(x[:, self.axis])
        g = g_out[:, self.axis]
        g_params = w * (phi.T @ g)
        sig = phi[:, 1:]
        slope = w[0] + (sig * (1.0 - sig)) @ (w[1:] * self.steepness)
        g_in = np.array(g_out, dtype=np.float64)
        g_in[:, self.axis] = g * slope
        return g_params, g_in


@dataclass(frozen=True, slots=True, eq=False)
class RbfLayer:
    """Radiale Basisfunktions-Einheit (nur 2D).

    ``forced_weight`` setzt w direkt und umgeht die Transformation; nur fuer
    Tests faltender Abbildungen gedacht.
    """

    centroid: NDArray[np.float64]
    scale: float
    tweight: float
    forced_weight: float | None = None

    random = True
    dim = 2

    @property
    def n_params(self) -> int:
        return 1

    @property
    def weight(self) -> float:
        if self.forced_weight is not None:
            return self.forced_weight
        return rbf_weight(self.tweight)

    def params(self) -> NDArray[np.float64]:
        return np.array([self.tweight], dtype=np.float64)

    def with_params(self, values: NDArray[np.float64]) -> RbfLayer:
        return replace(self, tweight=float(values[0]))

    def _radial(self, x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        d = x - self.centroid[None, :]
        e = np.exp(-self.scale * np.sum(d * d, axis=1))
        return d, e

    def forward(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        d, e = self._radial(x)
        result: NDArray[np.float64] = x + self.weight * d * e[:, None]
        return result

    def vjp(
        self, x: NDArray[np.float64], g_out: NDArray[np.float64]
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        w = self.weight
        d, e = self._radial(x)
        gd = np.sum(g_out * d, axis=1)
        if self.forced_weight is None:
            p = float(expit(self.tweight))
            g_params = np.array([np.sum(e * gd) * RBF_WEIGHT_SCALE * p * (1.0 - p)])
        else:
            g_params = np.zeros(1)
        g_in = g_out * (1.0 + w * e)[:, None] - 2.0 * self.scale * w * (e * gd)[:, None] * d
        return g_params, g_in


@dataclass(frozen=True, slots=True, eq=False)
class MobiusLayer:
    """Moebius-Transformation (a1 z + a2) / (a3 z + a4) auf z = s1 + i s2.

    Attributes:
        a: Re/Im-Teile von a1..a4 als 8 reelle Zahlen.
        lower: Untere Ecke des Eingabequadrats (fuer die Polbedingung).
        upper: Obere Ecke des Eingabequadrats.
    """

    a: NDArray[np.float64]
    lower: tuple[float, float] = (C1, C1)
    upper: tuple[float, float] = (C1 + 1.0, C1 + 1.0)

    random = False
    dim = 2

    @property
    def n_params(self) -> int:
        return 8

    @property
    def coefficients(self) -> NDArray[np.complex128]:
        return self.a[0::2] + 1j * self.a[1::2]

    def params(self) -> NDArray[np.float64]:
        return np.array(self.a, dtype=np.float64)

    def with_params(self, values: NDArray[np.float64]) -> MobiusLayer:
        return replace(self, a=np.array(values, dtype=np.float64))

    def pole_violated(self) -> bool:
        """True, wenn -a4/a3 im (abgeschlossenen) Eingabequadrat liegt."""
        a1, a2, a3, a4 = self.coefficients
        if a3 == 0:
            return bool(a4 == 0)
        pole = -a4 / a3
        return bool(
            self.lower[0] <= pole.real <= self.upper[0]
            and self.lower[1] <= pole.imag <= self.upper[1]
        )

    def check_pole(self) -> None:
        if self.pole_violated():
            msg = f"Moebius-Pol liegt im Eingabequadrat: a = {self.coefficients.tolist()}"
            raise InvalidParameterError(msg)

    def _evaluate(
        self, x: NDArray[np.float64]
    ) -> tuple[NDArray[np.complex128], NDArray[np.complex128], NDArray[np.complex128]]:
        a1, a2, a3, a4 = self.coefficients
        z = x[:, 0] + 1j * x[:, 1]
        den = a3 * z + a4
        return z, den, (a1 * z + a2) / den

    def forward(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        self.check_pole()
        _, _, phi = self._evaluate(x)
        return np.column_stack([phi.real, phi.imag])

    def vjp(
        self, x: NDArray[np.float64], g_out: NDArray[np.float64]
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        a1, a2, a3, a4 = self.coefficients
        z, den, phi = self._evaluate(x)
        cg = g_out[:, 0] - 1j * g_out[:, 1]
        g_params = np.empty(8)
        for k, deriv in enumerate((z / den, 1.0 / den, -phi * z / den, -phi / den)):
            total = np.sum(cg * deriv)
            g_params[2 * k] = total.real
            g_params[2 * k + 1] = -total.imag
        gz = cg * (a1 * a4 - a2 * a3) / den**2
        return g_params, np.column_stack([gz.real, -gz.imag])


WarpLayer = AwuLayer | RbfLayer | MobiusLayer


# ---------------------------------------------------------------------------
# Layer-Fabriken
# ---------------------------------------------------------------------------


def make_awu(
    axis: int, r: int, domain: Domain, *, steepness: float = DEFAULT_STEEPNESS
) -> AwuLayer:
    """AWU mit r Basisfunktionen, Wendepunkte gleichmaessig ueber das Eingabeintervall."""
    if r < 1:
        msg = f"AWU braucht r >= 1, erhalten: {r}"
        raise InvalidParameterError(msg)
    if not 0 <= axis < domain.dim:
        msg = f"AWU-Achse {axis} ausserhalb der Dimension {domain.dim}"
        raise InvalidParameterError(msg)
    centers = np.linspace(domain.lower[axis], domain.upper[axis], r - 1) if r > 1 else np.empty(0)
    tweights = np.full(r, AWU_SIGMOID_INIT)
    tweights[0] = AWU_LINEAR_INIT
    return AwuLayer(
        axis=axis, dim=domain.dim, steepness=steepness, centers=centers, tweights=tweights
    )


def build_sr_rbf(resolution: int, input_domain: Domain | None = None) -> list[RbfLayer]:
    """SR-RBF(l): 3^l x 3^l RBF-Layer, zeilenweise ueber das Zentrumsgitter.

    Auf dem Einheitsquadrat gilt a = 2 (3^l - 1)^2; fuer andere Gebiete wird a
    mit dem Quadrat der (geometrisch gemittelten) Seitenlaenge skaliert.
    """
    if resolution < 1:
        msg = f"SR-RBF braucht l >= 1, erhalten: {resolution}"
        raise InvalidParameterError(msg)
    domain = input_domain or Domain.unit(2)
    if domain.dim != 2:
        msg = "SR-RBF ist nur in 2D definiert"
        raise InvalidParameterError(msg)
    n = 3**resolution
    side_sq = float(np.prod(domain.sides))
    scale = 2.0 * (n - 1) ** 2 / side_sq
    xs = np.linspace(domain.lower[0], domain.upper[0], n)
    ys = np.linspace(domain.lower[1], domain.upper[1], n)
    return [
        RbfLayer(centroid=np.array([x, y]), scale=scale, tweight=RBF_IDENTITY_TWEIGHT)
        for y in ys
        for x in xs
    ]


def make_mobius(domain: Domain | None = None, a: Sequence[float] = MOBIUS_IDENTITY) -> MobiusLayer:
    domain = domain or Domain.unit(2)
    return MobiusLayer(
        a=np.array(a, dtype=np.float64),
        lower=(domain.lower[0], domain.lower[1]),
        upper=(domain.upper[0], domain.upper[1]),
    )


def compose_mobius(first: MobiusLayer, second: MobiusLayer) -> MobiusLayer:
    """Einzelne Moebius-Einheit fuer second o first (Matrixprodukt der Koeffizienten)."""
    p1, p2, p3, p4 = first.coefficients
    q1, q2, q3, q4 = second.coefficients
    product = np.array(
        [q1 * p1 + q2 * p3, q1 * p2 + q2 * p4, q3 * p1 + q4 * p3, q3 * p2 + q4 * p4]
    )
    a = np.column_stack([product.real, product.imag]).ravel()
    return MobiusLayer(a=a, lower=first.lower, upper=first.upper)


# ---------------------------------------------------------------------------
# Stack und Reskalierung
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class ScalingRecord:
    """Minimum und Maximum der unskalierten Knotenbilder je Ausgabedimension."""

    lower: NDArray[np.float64]
    upper: NDArray[np.float64]
    offset: float = C1

    @classmethod
    def from_knot_image(
        cls, knots: NDArray[np.float64], layer_index: int | None = None
    ) -> ScalingRecord:
        lower = knots.min(axis=0)
        upper = knots.max(axis=0)
        if np.any(upper - lower <= DEGENERACY_FLOOR):
            msg = f"Layer {layer_index}: Knotenbilder kollabieren (max - min <= 1e-12)"
            raise DegenerateWarpError(msg, layer_index=layer_index)
        return cls(lower=lower, upper=upper)


def rescale(unscaled: LocationSet, record: ScalingRecord) -> LocationSet:
    """(x - min) / (max - min) + c1 je Dimension."""
    span = record.upper - record.lower
    if np.any(span <= DEGENERACY_FLOOR):
        msg = "Spannweite der Reskalierung ist degeneriert"
        raise DegenerateWarpError(msg)
    return LocationSet((unscaled.coords - record.lower) / span + record.offset)


@dataclass(frozen=True, slots=True, eq=False)
class WarpStack:
    """Geordnete Liste injektiver Layer plus Knoten und geografisches Gebiet G."""

    layers: tuple[WarpLayer, ...]
    knots: KnotSet
    domain: Domain

    def __post_init__(self) -> None:
        for i, layer in enumerate(self.layers):
            if layer.dim != self.domain.dim:
                msg = f"Layer {i} erwartet {layer.dim}D, Gebiet ist {self.domain.dim}D"
                raise InvalidParameterError(msg)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers)

    def layer_slices(self) -> list[slice]:
        slices: list[slice] = []
        start = 0
        for layer in self.layers:
            slices.append(slice(start, start + layer.n_params))
            start += layer.n_params
        return slices

    def random_mask(self) -> NDArray[np.bool_]:
        """True fuer Gewichte von AWU/RBF (zufaellig im SDSP), False fuer Moebius."""
        mask = np.zeros(self.n_params, dtype=bool)
        for layer, sl in zip(self.layers, self.layer_slices(), strict=True):
            mask[sl] = layer.random
        return mask

    def params(self) -> NDArray[np.float64]:
        if not self.layers:
            return np.empty(0)
        return np.concatenate([layer.params() for layer in self.layers])

    def with_params(self, values: NDArray[np.float64]) -> WarpStack:
        layers = tuple(
            layer.with_params(values[sl])
            for layer, sl in zip(self.layers, self.layer_slices(), strict=True)
        )
        return replace(self, layers=layers)


@dataclass(frozen=True, slots=True, eq=False)
class _LayerPass:
    x_in: NDArray[np.float64]
    k_in: NDArray[np.float64]
    u: NDArray[np.float64]
    ku: NDArray[np.float64]
    record: ScalingRecord


def _propagate(
    stack: WarpStack, x: NDArray[np.float64]
) -> tuple[NDArray[np.float64], list[NDArray[np.float64]], list[_LayerPass]]:
    k = np.array(stack.knots.coords, dtype=np.float64)
    knot_images: list[NDArray[np.float64]] = []
    passes: list[_LayerPass] = []
    for i, layer in enumerate(stack.layers):
        u = layer.forward(x)
        ku = layer.forward(k)
        record = ScalingRecord.from_knot_image(ku, layer_index=i)
        span = record.upper - record.lower
        passes.append(_LayerPass(x_in=x, k_in=k, u=u, ku=ku, record=record))
        x = (u - record.lower) / span + record.offset
        k = (ku - record.lower) / span + record.offset
        knot_images.append(k)
    return x, knot_images, passes


def warp_forward(
    stack: WarpStack, locations: LocationSet
) -> tuple[LocationSet, list[LocationSet]]:
    """Orte und Knoten gemeinsam durch alle Layer propagieren.

    Returns:
        (F_n, Knotenbilder F_i^alpha je Layer nach Reskalierung)
    """
    out, knot_images, _ = _propagate(stack, locations.coords)
    return LocationSet(out), [LocationSet(k) for k in knot_images]


def warp_gradient(
    stack: WarpStack, locations: LocationSet, seed_cotangent: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Gradient von <seed_cotangent, F_n> nach allen Layer-Parametern.

    Die Kotangente der letzten Knotenbilder ist null (sie gehen nur ueber die
    Reskalierung in F_n ein).
    """
    _, _, passes = _propagate(stack, locations.coords)
    g_x = np.array(seed_cotangent, dtype=np.float64)
    g_k = np.zeros_like(passes[-1].ku) if passes else np.empty(0)
    grads: list[NDArray[np.float64]] = [np.empty(0)] * len(passes)
    for i in range(len(passes) - 1, -1, -1):
        p = passes[i]
        g_u, g_ku = _rescale_vjp(p, g_x, g_k)
        layer = stack.layers[i]
        gp_x, g_x = layer.vjp(p.x_in, g_u)
        gp_k, g_k = layer.vjp(p.k_in, g_ku)
        grads[i] = gp_x + gp_k
    if not grads:
        return np.empty(0)
    return np.concatenate(grads)


def _rescale_vjp(
    p: _LayerPass, g_x: NDArray[np.float64], g_k: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    lo, hi = p.record.lower, p.record.upper
    span = hi - lo
    g_u = g_x / span
    g_ku = g_k / span
    g_lo = (np.sum(g_x * (p.u - hi), axis=0) + np.sum(g_k * (p.ku - hi), axis=0)) / span**2
    g_hi = -(np.sum(g_x * (p.u - lo), axis=0) + np.sum(g_k * (p.ku - lo), axis=0)) / span**2
    cols = np.arange(p.ku.shape[1])
    # np.argmin/argmax liefern den niedrigsten Index bei Gleichstand
    np.add.at(g_ku, (np.argmin(p.ku, axis=0), cols), g_lo)
    np.add.at(g_ku, (np.argmax(p.ku, axis=0), cols), g_hi)
    return g_u, g_ku


# ---------------------------------------------------------------------------
# Injektivitaet
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class InjectivityReport:
    """Ergebnis der numerischen Injektivitaetspruefung.

    Attributes:
        passed: Streng monoton (1D) bzw. vorzeichenkonstante Jacobi-Determinante (2D).
        statistic: Minimale Steigung (1D) bzw. minimales |det J| (2D).
    """

    passed: bool
    statistic: float


def injectivity_check(stack: WarpStack, grid_per_dim: int = 64) -> InjectivityReport:
    """Injektivitaet der komponierten Abbildung auf einem regulaeren Gitter pruefen."""
    if grid_per_dim < 16:
        msg = f"Gitter braucht mindestens 16 Punkte je Dimension, erhalten: {grid_per_dim}"
        raise InvalidParameterError(msg)
    dom = stack.domain
    axes = [np.linspace(lo, hi, grid_per_dim) for lo, hi in zip(dom.lower, dom.upper, strict=True)]

    if dom.dim == 1:
        f, _ = warp_forward(stack, LocationSet(axes[0]))
        slopes = np.diff(f.coords[:, 0]) / np.diff(axes[0])
        passed = bool(np.all(slopes > 0) or np.all(slopes < 0))
        return InjectivityReport(passed=passed, statistic=float(np.min(np.abs(slopes))))

    gx, gy = np.meshgrid(axes[0], axes[1])
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    h = 1e-6 * float(np.max(dom.sides))
    cols = []
    for k in range(2):
        step = np.zeros(2)
        step[k] = h
        plus, _ = warp_forward(stack, LocationSet(pts + step))
        minus, _ = warp_forward(stack, LocationSet(pts - step))
        cols.append((plus.coords - minus.coords) / (2.0 * h))
    det = cols[0][:, 0] * cols[1][:, 1] - cols[0][:, 1] * cols[1][:, 0]
    passed = bool(np.all(det > 0) or np.all(det < 0))
    if not passed:
        logger.warning("Injektivitaet verletzt: %d von %d Gitterpunkten mit Vorzeichenwechsel",
                       int(min(np.sum(det <= 0), np.sum(det >= 0))), det.shape[0])
    return InjectivityReport(passed=passed, statistic=float(np.min(np.abs(det))))


def awu_forward(layer: AwuLayer, locations: LocationSet) -> LocationSet:
    """Unskalierte AWU-Ausgabe."""
    return LocationSet(layer.forward(locations.coords))


def rbf_forward(layer: RbfLayer, locations: LocationSet) -> LocationSet:
    """Unskalierte RBF-Ausgabe."""
    if locations.dim != 2:
        msg = "RBF-Einheiten sind nur in 2D definiert"
        raise InvalidParameterError(msg)
    return LocationSet(layer.forward(locations.coords))


def mobius_forward(layer: MobiusLayer, locations: LocationSet) -> LocationSet:
    """Unskalierte Moebius-Ausgabe (Re, Im)."""
    if locations.dim != 2:
        msg = "Moebius-Einheiten sind nur in 2D definiert"
        raise InvalidParameterError(msg)
    return LocationSet(layer.forward(locations.coords))
