"""Gemeinsame Domain-Typen: Gebiete, Ortsmengen, Datensaetze, Knoten, Zufallsstroeme.

Alle Typen sind nach der Konstruktion unveraenderlich und koennen zwischen
Threads geteilt werden. Numerische Arrays werden beim Erzeugen kopiert und
schreibgeschuetzt gesetzt.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Konstanten
# ---------------------------------------------------------------------------

C1: float = 0.0
"""Untere Ecke der internen Warping-Gebiete [c1, c1 + 1]^d."""

DEFAULT_KNOT_CAP: int = 2000
"""Maximale Knotenzahl (Speicherschranke fuer Knotenbilder)."""


# ---------------------------------------------------------------------------
# Fehler
# ---------------------------------------------------------------------------


class DeepwarpError(ValueError):
    """Basisklasse aller fachlichen Fehler."""


class DegenerateDataError(DeepwarpError):
    """Zu wenige (eindeutige) Orte fuer ein Modell."""


class DegenerateWarpError(DeepwarpError):
    """Ein Layer bildet die Knoten auf eine (fast) konstante Koordinate ab."""

    def __init__(self, message: str, layer_index: int | None = None) -> None:
        super().__init__(message)
        self.layer_index = layer_index


class InvalidParameterError(DeepwarpError):
    """Parameter ausserhalb des zulaessigen Bereichs (z.B. Moebius-Pol)."""


class IllConditionedCovarianceError(DeepwarpError):
    """Cholesky-Zerlegung trotz Jitter fehlgeschlagen."""


class InvalidPartitionError(DeepwarpError):
    """Minibatches bilden keine Zerlegung in gleich grosse Teile."""


# ---------------------------------------------------------------------------
# Typen
# ---------------------------------------------------------------------------


def _frozen_array(values: NDArray[np.float64]) -> NDArray[np.float64]:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, slots=True)
class Domain:
    """Achsenparalleles Rechteck-Gebiet in 1 oder 2 Dimensionen."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper) or len(self.lower) not in (1, 2):
            msg = f"Domain braucht 1 oder 2 Dimensionen, erhalten: {self.lower}, {self.upper}"
            raise InvalidParameterError(msg)
        for lo, hi in zip(self.lower, self.upper, strict=True):
            if not lo < hi:
                msg = f"Domain-Grenzen verletzt: lower={lo} >= upper={hi}"
                raise InvalidParameterError(msg)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def sides(self) -> NDArray[np.float64]:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @classmethod
    def unit(cls, dim: int, offset: float = C1) -> Domain:
        """Einheitswuerfel [c1, c1 + 1]^d."""
        return cls(lower=(offset,) * dim, upper=(offset + 1.0,) * dim)

    @classmethod
    def bounding_box(cls, coords: NDArray[np.float64]) -> Domain:
        """Kleinstes Rechteck um alle Punkte."""
        return cls(
            lower=tuple(float(v) for v in coords.min(axis=0)),
            upper=tuple(float(v) for v in coords.max(axis=0)),
        )

    def contains(self, point: NDArray[np.float64]) -> bool:
        """Abgeschlossenes Rechteck: Rand zaehlt dazu."""
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        inside = np.all(point >= lo) and np.all(point <= hi)
        return bool(inside)


@dataclass(frozen=True, slots=True, eq=False)
class LocationSet:
    """N x d Koordinatenmatrix (eine Spalte je Raumdimension)."""

    coords: NDArray[np.float64]

    def __post_init__(self) -> None:
        arr = np.array(self.coords, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] not in (1, 2):
            msg = f"LocationSet braucht Form (N>=1, d in {{1,2}}), erhalten: {arr.shape}"
            raise DegenerateDataError(msg)
        if not np.all(np.isfinite(arr)):
            msg = "LocationSet enthaelt nicht-endliche Koordinaten"
            raise DegenerateDataError(msg)
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    @property
    def dim(self) -> int:
        return int(self.coords.shape[1])


@dataclass(frozen=True, slots=True, eq=False)
class Dataset:
    """Beobachtungen Z an Orten S mit Messfehlervarianz sigma^2_eps.

    Attributes:
        locations: Beobachtungsorte S.
        z: Beobachtungen (Laenge N).
        noise_var: Startwert bzw. bekannter Wert von sigma^2_eps.
        seed: Seed fuer deterministische Teilstichproben (Knoten, Minibatches).
    """

    locations: LocationSet
    z: NDArray[np.float64]
    noise_var: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        z = _frozen_array(np.ravel(self.z))
        if z.shape[0] != self.locations.n:
            msg = f"Laenge von z ({z.shape[0]}) passt nicht zu N={self.locations.n}"
            raise DegenerateDataError(msg)
        if not np.all(np.isfinite(z)):
            msg = "Beobachtungen enthalten nicht-endliche Werte"
            raise DegenerateDataError(msg)
        if not self.noise_var > 0:
            msg = f"noise_var muss positiv sein, erhalten: {self.noise_var}"
            raise InvalidParameterError(msg)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.locations.n

    @property
    def dim(self) -> int:
        return self.locations.dim

    def subset(self, index: NDArray[np.intp]) -> Dataset:
        """Teildatensatz mit denselben Metadaten."""
        return Dataset(
            locations=LocationSet(self.locations.coords[index]),
            z=self.z[index],
            noise_var=self.noise_var,
            seed=self.seed,
        )


@dataclass(frozen=True, slots=True, eq=False)
class KnotSet:
    """Referenzpunkte S^alpha fuer die Reskalierung der Layer."""

    coords: NDArray[np.float64]

    def __post_init__(self) -> None:
        arr = np.array(self.coords, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.shape[0] < 2:
            msg = f"Mindestens 2 Knoten noetig, erhalten: {arr.shape[0]}"
            raise DegenerateDataError(msg)
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def m(self) -> int:
        return int(self.coords.shape[0])


@dataclass(eq=False)
class RngStream:
    """Reproduzierbarer Zufallsstrom (PCG64) mit Zaehler gezogener Werte.

    Gleicher Seed ergibt dieselbe Folge. Unabhaengige Teilstroeme werden
    ueber ``substream(index)`` aus dem Master-Seed abgeleitet.
    """

    seed: int
    spawn_key: tuple[int, ...] = ()
    draws: int = 0
    _generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        self._generator = np.random.Generator(np.random.PCG64(seq))

    def substream(self, index: int) -> RngStream:
        """Unabhaengiger, deterministisch abgeleiteter Teilstrom."""
        return RngStream(seed=self.seed, spawn_key=(*self.spawn_key, index))

    def normal(self, size: int | tuple[int, ...]) -> NDArray[np.float64]:
        values = self._generator.standard_normal(size)
        self.draws += int(np.size(values))
        return values

    def uniform(
        self, low: float | NDArray[np.float64], high: float | NDArray[np.float64],
        size: int | tuple[int, ...],
    ) -> NDArray[np.float64]:
        values = self._generator.uniform(low, high, size)
        self.draws += int(np.size(values))
        return values

    def choice(self, n: int, size: int) -> NDArray[np.intp]:
        """Ziehen ohne Zuruecklegen aus range(n)."""
        values = self._generator.choice(n, size=size, replace=False)
        self.draws += size
        return values

    def permutation(self, n: int) -> NDArray[np.intp]:
        values = self._generator.permutation(n)
        self.draws += n
        return values


# ---------------------------------------------------------------------------
# Operationen
# ---------------------------------------------------------------------------


def make_knots(data: Dataset, cap: int = DEFAULT_KNOT_CAP) -> KnotSet:
    """Knoten aus den eindeutigen Beobachtungsorten bilden.

    Liegen mehr als ``cap`` eindeutige Orte vor, wird eine gleichverteilte
    Teilstichprobe der Groesse ``cap`` mit dem Seed des Datensatzes gezogen.

    Raises:
        InvalidParameterError: cap < 2.
        DegenerateDataError: weniger als 2 eindeutige Orte.
    """
    if cap < 2:
        msg = f"Knoten-Obergrenze muss >= 2 sein, erhalten: {cap}"
        raise InvalidParameterError(msg)
    unique = np.unique(data.locations.coords, axis=0)
    if unique.shape[0] < 2:
        msg = f"Nur {unique.shape[0]} eindeutige Orte - Modell nicht bestimmbar"
        raise DegenerateDataError(msg)
    if unique.shape[0] > cap:
        idx = np.sort(RngStream(data.seed).choice(unique.shape[0], cap))
        logger.info("Knoten-Teilstichprobe: %d von %d Orten", cap, unique.shape[0])
        unique = unique[idx]
    return KnotSet(unique)


Z95: float = 1.959964
"""Normal-Quantil fuer zentrale 95%-Intervalle."""


@dataclass(frozen=True, slots=True, eq=False)
class PredictiveSummary:
    """Praediktive Zusammenfassung je Ort.

    Attributes:
        mean: Praediktiver Mittelwert.
        sd: Praediktive Standardabweichung.
        lower: Untere Grenze des 95%-Intervalls.
        upper: Obere Grenze des 95%-Intervalls.
        samples: Gepoolte Ziehungen (Orte x Ziehungen), nur bei Mischverteilungen.
    """

    mean: NDArray[np.float64]
    sd: NDArray[np.float64]
    lower: NDArray[np.float64]
    upper: NDArray[np.float64]
    samples: NDArray[np.float64] | None = None

    @classmethod
    def from_moments(
        cls, mean: NDArray[np.float64], var: NDArray[np.float64]
    ) -> PredictiveSummary:
        """Gauss-Intervall mean +- 1.959964 sd."""
        sd = np.sqrt(np.clip(var, 0.0, None))
        return cls(mean=mean, sd=sd, lower=mean - Z95 * sd, upper=mean + Z95 * sd)

    @classmethod
    def from_samples(cls, samples: NDArray[np.float64]) -> PredictiveSummary:
        """Empirischer Mittelwert, Standardabweichung und 2.5/97.5-Perzentile.

        Bei genau einer Ziehung ist die Standardabweichung 0 (ddof=0).
        """
        lower, upper = np.percentile(samples, [2.5, 97.5], axis=1)
        ddof = 1 if samples.shape[1] > 1 else 0
        return cls(
            mean=samples.mean(axis=1),
            sd=samples.std(axis=1, ddof=ddof),
            lower=lower,
            upper=upper,
            samples=samples,
        )

    def shifted(self, offset: float) -> PredictiveSummary:
        """Alle Lagegroessen um einen konstanten Mittelwert verschieben."""
        return PredictiveSummary(
            mean=self.mean + offset,
            sd=self.sd,
            lower=self.lower + offset,
            upper=self.upper + offset,
            samples=None if self.samples is None else self.samples + offset,
        )
