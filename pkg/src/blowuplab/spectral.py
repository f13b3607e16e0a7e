"""Diagonalization of the system matrix and its eigen-projection calculus.

A diagonalizable ``A`` with positive spectrum is written as
``A = S^{-1} A0 S`` with ``A0 = diag(L_1 <= ... <= L_n)``.  For every distinct
eigenvalue ``lam`` the projection ``R_lam = S^{-1} Rhat_lam S`` is materialized
once, where ``Rhat_lam`` is the 0/1 diagonal selector of the coordinates whose
eigenvalue equals ``lam``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    NonDiagonalizable,
    NonPositiveSpectrum,
    UnknownEigenvalue,
)

CLUSTER_REL_GAP = 1e-8
IMAG_REL_TOL = 1e-10
DEFAULT_COND_CAP = 1e8


@dataclass(frozen=True)
class SpectralData:
    matrix: np.ndarray
    eigenvalues: np.ndarray  # with multiplicity, ascending
    distinct_eigenvalues: np.ndarray
    conjugator: np.ndarray  # S
    conjugator_inverse: np.ndarray  # S^{-1}
    diagonal: np.ndarray  # A0
    projections: tuple[np.ndarray, ...]  # aligned with distinct_eigenvalues
    multiplicities: tuple[int, ...]
    is_symmetric: bool
    norm_S: float
    norm_S_inv: float
    tol_spec: float
    residuals: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def condition(self) -> float:
        return self.norm_S * self.norm_S_inv

    @property
    def lowest(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def highest(self) -> float:
        return float(self.eigenvalues[-1])

    def index_of(self, lam: float) -> int:
        """Index into ``distinct_eigenvalues`` of the eigenvalue matching ``lam``."""
        scale = CLUSTER_REL_GAP * max(abs(self.highest), 1.0) * 10
        gaps = np.abs(self.distinct_eigenvalues - lam)
        j = int(np.argmin(gaps))
        if gaps[j] > scale:
            raise UnknownEigenvalue(f"{lam!r} is not an eigenvalue; spectrum is {self.distinct_eigenvalues.tolist()}")
        return j

    def projection(self, lam: float) -> np.ndarray:
        return self.projections[self.index_of(lam)]

    def hat_projection(self, lam: float) -> np.ndarray:
        """Diagonal selector acting in conjugated coordinates."""
        j = self.index_of(lam)
        sel = np.isclose(self.eigenvalues, self.distinct_eigenvalues[j], rtol=0.0, atol=0.0)
        return np.diag(sel.astype(float))

    def gap(self, lam: float) -> float:
        """Distance from ``lam`` to the nearest other distinct eigenvalue (inf if none)."""
        j = self.index_of(lam)
        others = np.delete(self.distinct_eigenvalues, j)
        if others.size == 0:
            return float("inf")
        return float(np.min(np.abs(others - self.distinct_eigenvalues[j])))

    def position(self, lam: float) -> str:
        """'single', 'lowest' or 'interior' placement of ``lam`` in the spectrum."""
        j = self.index_of(lam)
        if len(self.distinct_eigenvalues) == 1:
            return "single"
        return "lowest" if j == 0 else "interior"

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "matrix": self.matrix.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "distinct_eigenvalues": self.distinct_eigenvalues.tolist(),
            "multiplicities": list(self.multiplicities),
            "conjugator": self.conjugator.tolist(),
            "conjugator_inverse": self.conjugator_inverse.tolist(),
            "is_symmetric": self.is_symmetric,
            "norm_S": self.norm_S,
            "norm_S_inv": self.norm_S_inv,
            "condition": self.condition,
            "residuals": dict(self.residuals),
        }


def _cluster(values: np.ndarray) -> list[list[int]]:
    scale = CLUSTER_REL_GAP * float(np.max(np.abs(values)))
    groups = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[groups[-1][-1]] <= scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def decompose(A, tol_spec: float = 1e-8, cond_cap: float = DEFAULT_COND_CAP) -> SpectralData:
    """Diagonalize ``A`` and build the eigen-projections.

    Raises NonDiagonalizable for complex spectra, defective or too
    ill-conditioned eigenbases, and NonPositiveSpectrum if some eigenvalue
    is not positive.
    """
    A = np.array(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonDiagonalizable("matrix has non-finite entries")
    n = A.shape[0]
    normA = float(np.linalg.norm(A, 2))
    if normA == 0.0:
        raise NonPositiveSpectrum("zero matrix")

    symmetric = bool(np.linalg.norm(A - A.T, 2) <= 1e-12 * normA)
    if symmetric:
        w, Q = np.linalg.eigh(0.5 * (A + A.T))
        V = Q
    else:
        w, V = np.linalg.eig(A)
        if np.max(np.abs(w.imag)) > IMAG_REL_TOL * normA:
            raise NonDiagonalizable(f"complex eigenvalues {w.tolist()}")
        w = w.real
        V = np.real_if_close(V, tol=1e6)
        if np.iscomplexobj(V):
            V = V.real
        order = np.argsort(w)
        w, V = w[order], V[:, order]

    # largest-magnitude entry of each eigenvector becomes +1 (unit 2-norm kept if symmetric)
    pivots = V[np.argmax(np.abs(V), axis=0), np.arange(n)]
    if symmetric:
        V = V * np.sign(pivots)
        Q = V
    else:
        V = V / pivots

    if np.any(w <= 0.0):
        raise NonPositiveSpectrum(f"eigenvalues must be positive, got {w.tolist()}")

    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > cond_cap:
        raise NonDiagonalizable(f"eigenvector matrix condition {cond:.3g} exceeds cap {cond_cap:.3g}")

    if symmetric:
        S, S_inv = Q.T.copy(), Q.copy()
    else:
        S_inv = V
        S = np.linalg.inv(V)

    groups = _cluster(w)
    distinct = np.array([float(np.mean(w[g])) for g in groups])
    snapped = np.empty_like(w)
    projections = []
    for lam, g in zip(distinct, groups):
        snapped[g] = lam
        projections.append(S_inv[:, g] @ S[g, :])
    A0 = np.diag(snapped)

    eye = np.eye(n)
    res_diag = float(np.linalg.norm(S @ A @ S_inv - A0, 2)) / normA
    res_sum = float(np.linalg.norm(sum(projections) - eye, 2))
    res_idem = 0.0
    for i, Ri in enumerate(projections):
        for j, Rj in enumerate(projections):
            target = Rj if i == j else 0.0
            res_idem = max(res_idem, float(np.linalg.norm(Ri @ Rj - target, 2)))
    res_comm = max(
        max(float(np.linalg.norm(A @ R - lam * R, 2)), float(np.linalg.norm(R @ A - lam * R, 2)))
        for lam, R in zip(distinct, projections)
    ) / normA
    residuals = {"diagonalization": res_diag, "sum": res_sum, "idempotence": res_idem, "commutation": res_comm}
    worst = max(residuals.values())
    if worst > tol_spec * max(cond, 1.0):
        raise NonDiagonalizable(f"projection identities fail: {residuals}")

    for arr in (A, snapped, distinct, S, S_inv, A0, *projections):
        arr.setflags(write=False)
    return SpectralData(
        matrix=A,
        eigenvalues=snapped,
        distinct_eigenvalues=distinct,
        conjugator=S,
        conjugator_inverse=S_inv,
        diagonal=A0,
        projections=tuple(projections),
        multiplicities=tuple(len(g) for g in groups),
        is_symmetric=symmetric,
        norm_S=float(np.linalg.norm(S, 2)),
        norm_S_inv=float(np.linalg.norm(S_inv, 2)),
        tol_spec=tol_spec,
        residuals=residuals,
    )


def project(sd: SpectralData, lam: float, x) -> np.ndarray:
    """Return ``R_lam x``."""
    x = _vector(sd, x)
    return sd.projection(lam) @ x


def to_conjugate(sd: SpectralData, x) -> np.ndarray:
    """``S x``: coordinates in which ``A`` acts diagonally."""
    return sd.conjugator @ _vector(sd, x)


def from_conjugate(sd: SpectralData, z) -> np.ndarray:
    """``S^{-1} z``."""
    return sd.conjugator_inverse @ _vector(sd, z)


def _vector(sd: SpectralData, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != sd.dim:
        raise DimensionMismatch(f"vector of length {x.shape[-1]} for a {sd.dim}x{sd.dim} system")
    return x
