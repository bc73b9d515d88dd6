"""SRBM primitives, model validation and the tandem-queue family.

Index sets are 1-based throughout the public API so that ``{1, ..., d}``
reads the same in code, JSON files and reports.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import SingularMatrixError, StructuralError

SPD_RTOL = 1e-10
COND_MAX = 1e12
SYMMETRY_RTOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SrbmData:
    """Modeling primitives ``(sigma, mu, r)`` of a d-dimensional SRBM.

    Construction only checks structure (shapes, finiteness, symmetry of
    ``sigma``). Whether ``sigma`` is positive definite and ``r`` is
    completely-S is a verdict of :func:`validate_srbm`, since several
    analyses are meaningful on data that fails those checks.
    """

    sigma: np.ndarray
    mu: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        try:
            sigma = np.asarray(self.sigma, dtype=float)
            mu = np.asarray(self.mu, dtype=float)
            r = np.asarray(self.r, dtype=float)
        except (TypeError, ValueError) as exc:
            raise StructuralError(f"primitives must be numeric arrays: {exc}") from None
        if mu.ndim != 1 or mu.size == 0:
            raise StructuralError(f"mu must be a non-empty vector, got shape {mu.shape}")
        d = mu.size
        if sigma.shape != (d, d):
            raise StructuralError(f"sigma must be {d}x{d}, got shape {sigma.shape}")
        if r.shape != (d, d):
            raise StructuralError(f"r must be {d}x{d}, got shape {r.shape}")
        for name, a in (("sigma", sigma), ("mu", mu), ("r", r)):
            if not np.all(np.isfinite(a)):
                raise StructuralError(f"{name} contains non-finite entries")
        scale = max(1.0, float(np.max(np.abs(sigma))))
        asym = float(np.max(np.abs(sigma - sigma.T)))
        if asym > SYMMETRY_RTOL * scale:
            raise StructuralError(f"sigma is not symmetric (max |sigma - sigma^T| = {asym:.3g})")
        object.__setattr__(self, "sigma", _frozen(sigma))
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "r", _frozen(r))

    @property
    def d(self) -> int:
        return self.mu.size

    @cached_property
    def q(self) -> np.ndarray:
        """``R^-1``; raises :class:`SingularMatrixError` when R is ill-conditioned."""
        return _frozen(inverse(self.r, "reflection matrix R"))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "sigma": self.sigma.tolist(),
            "mu": self.mu.tolist(),
            "r": self.r.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SrbmData":
        if not isinstance(obj, dict):
            raise StructuralError("model must be a JSON object")
        missing = [k for k in ("d", "sigma", "mu", "r") if k not in obj]
        if missing:
            raise StructuralError(f"model is missing field(s): {', '.join(missing)}")
        d = obj["d"]
        if not isinstance(d, int) or isinstance(d, bool) or d < 1:
            raise StructuralError(f"field 'd' must be a positive integer, got {d!r}")
        data = cls(sigma=_matrix(obj["sigma"], "sigma"), mu=_vector(obj["mu"], "mu"), r=_matrix(obj["r"], "r"))
        if data.d != d:
            raise StructuralError(f"field 'd' = {d} but mu has length {data.d}")
        return data

    def __eq__(self, other):
        if not isinstance(other, SrbmData):
            return NotImplemented
        return (
            np.array_equal(self.sigma, other.sigma)
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.r, other.r)
        )

    def __hash__(self):
        return hash((self.sigma.tobytes(), self.mu.tobytes(), self.r.tobytes()))

    def model_hash(self) -> str:
        """SHA-256 of the canonical JSON encoding; identifies the model in reports."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _vector(value, name):
    if not isinstance(value, list) or not all(_is_number(x) for x in value):
        raise StructuralError(f"field '{name}' must be an array of numbers")
    return np.array(value, dtype=float)


def _matrix(value, name):
    if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
        raise StructuralError(f"field '{name}' must be an array of arrays")
    widths = {len(row) for row in value}
    if len(widths) > 1:
        raise StructuralError(f"field '{name}' has ragged rows (lengths {sorted(widths)})")
    for i, row in enumerate(value):
        if not all(_is_number(x) for x in row):
            raise StructuralError(f"field '{name}' row {i} contains a non-numeric entry")
    return np.array(value, dtype=float)


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


@dataclass(frozen=True)
class TandemSpec:
    """Station rates ``beta`` (beta_0 is the arrival rate) and CVs ``cv``."""

    d: int
    beta: tuple
    cv: tuple

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise StructuralError(f"d must be a positive integer, got {self.d!r}")
        beta = tuple(float(b) for b in self.beta)
        cv = tuple(float(c) for c in self.cv)
        if len(beta) != self.d + 1 or len(cv) != self.d + 1:
            raise StructuralError(
                f"beta and cv must have length d+1 = {self.d + 1}, got {len(beta)} and {len(cv)}"
            )
        if min(beta) <= 0:
            raise StructuralError("all beta entries must be > 0")
        if min(cv) < 0:
            raise StructuralError("all cv entries must be >= 0")
        for i in range(1, self.d + 1):
            if cv[i - 1] == 0 and cv[i] == 0:
                raise StructuralError(
                    f"cv[{i - 1}] and cv[{i}] are both zero; the covariance matrix would be singular"
                )
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "cv", cv)

    def to_dict(self) -> dict:
        return {"d": self.d, "beta": list(self.beta), "cv": list(self.cv)}

    @classmethod
    def from_dict(cls, obj: dict) -> "TandemSpec":
        missing = [k for k in ("d", "beta", "cv") if k not in obj]
        if missing:
            raise StructuralError(f"tandem file is missing field(s): {', '.join(missing)}")
        d = obj["d"]
        if not isinstance(d, int) or isinstance(d, bool):
            raise StructuralError(f"field 'd' must be an integer, got {d!r}")
        return cls(d=d, beta=tuple(_vector(obj["beta"], "beta")), cv=tuple(_vector(obj["cv"], "cv")))


@dataclass(frozen=True)
class Partition:
    """Ordered split ``(K, L)`` of ``{1, ..., d}``; both sets sorted ascending."""

    k_set: tuple
    l_set: tuple

    def __post_init__(self):
        k = tuple(sorted(int(i) for i in self.k_set))
        l = tuple(sorted(int(i) for i in self.l_set))
        if not k or not l:
            raise StructuralError("both K and L must be non-empty")
        if set(k) & set(l):
            raise StructuralError(f"K and L overlap in {sorted(set(k) & set(l))}")
        full = k + l
        if len(set(full)) != len(full):
            raise StructuralError("index sets contain duplicates")
        if sorted(full) != list(range(1, len(full) + 1)):
            raise StructuralError(f"K and L must cover {{1, ..., {len(full)}}} exactly")
        object.__setattr__(self, "k_set", k)
        object.__setattr__(self, "l_set", l)

    @classmethod
    def from_k(cls, k_set: Iterable[int], d: int) -> "Partition":
        k = set(k_set)
        return cls(tuple(k), tuple(i for i in range(1, d + 1) if i not in k))

    @classmethod
    def parse(cls, text: str) -> "Partition":
        """Parse ``"1,2/3"`` into ``K={1,2}``, ``L={3}``."""
        try:
            left, right = text.split("/")
            return cls(parse_index_set(left), parse_index_set(right))
        except ValueError as exc:
            raise StructuralError(f"cannot parse partition {text!r}: expected e.g. '1,2/3'") from exc

    @property
    def d(self) -> int:
        return len(self.k_set) + len(self.l_set)

    @property
    def k_idx(self) -> np.ndarray:
        return np.array(self.k_set, dtype=int) - 1

    @property
    def l_idx(self) -> np.ndarray:
        return np.array(self.l_set, dtype=int) - 1

    def swapped(self) -> "Partition":
        return Partition(self.l_set, self.k_set)

    def __str__(self):
        return ",".join(map(str, self.k_set)) + "/" + ",".join(map(str, self.l_set))


def parse_index_set(text: str) -> tuple:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise StructuralError(f"empty index set in {text!r}")
    try:
        return tuple(int(s) for s in items)
    except ValueError:
        raise StructuralError(f"index set {text!r} must be comma-separated integers") from None


def index_array(u: Iterable[int], d: int) -> np.ndarray:
    """Validate a 1-based index subset and return sorted 0-based indices."""
    idx = sorted({int(i) for i in u})
    if not idx:
        raise StructuralError("index subset must be non-empty")
    if idx[0] < 1 or idx[-1] > d:
        raise StructuralError(f"index subset {idx} is not contained in {{1, ..., {d}}}")
    return np.array(idx, dtype=int) - 1


@dataclass(frozen=True)
class ValidationReport:
    sigma_spd: bool
    sigma_min_eigenvalue: float
    r_completely_s: bool | None
    r_failing_subset: tuple | None
    stable: bool
    notes: tuple = field(default=())

    @property
    def ok(self) -> bool:
        return self.sigma_spd and bool(self.r_completely_s) and self.stable

    def to_dict(self) -> dict:
        return {
            "sigma_spd": self.sigma_spd,
            "sigma_min_eigenvalue": self.sigma_min_eigenvalue,
            "r_completely_s": self.r_completely_s,
            "r_failing_subset": list(self.r_failing_subset) if self.r_failing_subset else None,
            "stable": self.stable,
            "notes": list(self.notes),
        }


def spd_check(sigma: np.ndarray) -> tuple[bool, float]:
    """Return (is SPD, smallest eigenvalue); tolerance is relative to the largest one."""
    eig = np.linalg.eigvalsh(np.asarray(sigma, dtype=float))
    top = float(np.max(np.abs(eig)))
    return bool(eig[0] > SPD_RTOL * top and top > 0), float(eig[0])


def inverse(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Invert via LU with partial pivoting, refusing ill-conditioned input."""
    a = np.asarray(a, dtype=float)
    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond >= COND_MAX:
        raise SingularMatrixError(f"{what} is singular (condition number {cond:.3g})", cond)
    return np.linalg.inv(a)


def drift_stable(r, mu) -> bool:
    """``r`` nonsingular and ``r^-1 mu < 0`` entrywise."""
    try:
        q = inverse(r, "R")
    except SingularMatrixError:
        return False
    return bool(np.all(q @ mu < 0))


def is_stable(data: SrbmData) -> bool:
    """R nonsingular and R^{-1} mu < 0 entrywise."""
    try:
        return bool(np.all(data.q @ data.mu < 0))
    except SingularMatrixError:
        return False


def validate_srbm(data: SrbmData) -> ValidationReport:
    """Independent verdicts on positive definiteness, completely-S and stability."""
    from .matclass import MAX_ENUM_DIM, is_completely_s

    spd, min_eig = spd_check(data.sigma)
    notes = []
    if data.d <= MAX_ENUM_DIM:
        ok, failing = is_completely_s(data.r)
    else:
        ok, failing = None, None
        notes.append(f"completely-S check skipped: d = {data.d} exceeds {MAX_ENUM_DIM}")
    return ValidationReport(
        sigma_spd=spd,
        sigma_min_eigenvalue=min_eig,
        r_completely_s=ok,
        r_failing_subset=failing,
        stable=is_stable(data),
        notes=tuple(notes),
    )


def build_tandem(spec: TandemSpec) -> SrbmData:
    """Heavy-traffic SRBM of a d-station tandem queue.

    R is unit lower-bidiagonal, Sigma tridiagonal with
    ``Sigma_ii = beta_0 (c_{i-1}^2 + c_i^2)``, ``Sigma_{i,i+1} = -beta_0 c_i^2``,
    and ``mu_i = beta_{i-1} - beta_i``.
    """
    d = spec.d
    b0 = spec.beta[0]
    c2 = np.square(spec.cv)
    r = np.eye(d) - np.eye(d, k=-1)
    sigma = np.zeros((d, d))
    for i in range(d):
        sigma[i, i] = b0 * (c2[i] + c2[i + 1])
        if i + 1 < d:
            sigma[i, i + 1] = sigma[i + 1, i] = -b0 * c2[i + 1]
    mu = np.array([spec.beta[i] - spec.beta[i + 1] for i in range(d)])
    spd, min_eig = spd_check(sigma)
    if not spd:
        raise StructuralError(f"tandem covariance is singular (min eigenvalue {min_eig:.3g})")
    return SrbmData(sigma=sigma, mu=mu, r=r)


def load_json_model(obj: dict) -> SrbmData | TandemSpec:
    """Dispatch on keys: ``beta``/``cv`` means a tandem file."""
    if not isinstance(obj, dict):
        raise StructuralError("model file must contain a JSON object")
    if "beta" in obj or "cv" in obj:
        return TandemSpec.from_dict(obj)
    return SrbmData.from_dict(obj)


def as_matrix(a: Sequence) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise StructuralError(f"expected a non-empty square matrix, got shape {a.shape}")
    return a
