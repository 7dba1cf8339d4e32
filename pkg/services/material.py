"""
Compressible Neo-Hookean material.

    Psi = kappa/4 (I3 - 1 - ln I3) + mu/2 (I3^(-1/3) I1 - 3)

with I1 = tr C and I3 = det C. Two-dimensional states are plane strain: the
2x2 right Cauchy-Green tensor is embedded with C33 = 1, so I1 = tr C + 1 and
I3 = det C. Every operation accepts a leading batch axis.
"""
from dataclasses import dataclass

import numpy as np

from utils.constants import NU_LIMIT_MARGIN
from utils.errors import IncompressibleLimit, InvertedElement, MaterialError


@dataclass(frozen=True)
class Kinematics:
    """Deformation measures derived from F (single or batched)."""
    F: np.ndarray
    C: np.ndarray
    J: np.ndarray
    I1: np.ndarray
    I3: np.ndarray


def _invariants(C: np.ndarray):
    d = C.shape[-1]
    trace = np.trace(C, axis1=-2, axis2=-1)
    I1 = trace + 1.0 if d == 2 else trace
    I3 = np.linalg.det(C)
    return I1, I3


def _check_det(det: np.ndarray, what: str) -> None:
    bad = np.flatnonzero(np.atleast_1d(det) <= 0.0)
    if bad.size:
        raise InvertedElement(f"{what} <= 0 at state {int(bad[0])}")


def kinematics(F) -> Kinematics:
    """
    Right Cauchy-Green tensor and invariants of a deformation gradient.

    Raises:
        InvertedElement: det F <= 0
    """
    F = np.asarray(F, dtype=float)
    J = np.linalg.det(F)
    _check_det(J, "det F")
    C = np.einsum("...kA,...kB->...AB", F, F)
    I1, I3 = _invariants(C)
    return Kinematics(F, C, J, I1, I3)


@dataclass(frozen=True)
class NeoHookean:
    """Bulk modulus kappa (MPa), shear modulus mu (MPa), density rho (tonne/mm^3)."""
    kappa: float
    mu: float
    rho: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0 or self.mu <= 0:
            raise MaterialError(f"kappa and mu must be positive, got kappa={self.kappa}, mu={self.mu}")
        if self.rho < 0:
            raise MaterialError(f"rho must be non-negative, got {self.rho}")

    @classmethod
    def from_engineering(cls, E: float, nu: float, rho: float = 0.0) -> "NeoHookean":
        """
        Build from Young's modulus and Poisson ratio.

        kappa = E / (3 (1 - 2 nu)), mu = E / (2 (1 + nu))

        Raises:
            IncompressibleLimit: nu >= 0.5 - 1e-9
            MaterialError: E <= 0 or nu <= -1
        """
        if E <= 0:
            raise MaterialError(f"E must be positive, got {E}")
        if nu >= 0.5 - NU_LIMIT_MARGIN:
            raise IncompressibleLimit(f"Poisson ratio {nu} at or above the incompressible limit")
        if nu <= -1.0:
            raise MaterialError(f"Poisson ratio must exceed -1, got {nu}")
        return cls(kappa=E / (3.0 * (1.0 - 2.0 * nu)), mu=E / (2.0 * (1.0 + nu)), rho=rho)

    @property
    def lame_lambda(self) -> float:
        """Small-strain Lame constant."""
        return self.kappa - 2.0 * self.mu / 3.0

    @property
    def youngs_modulus(self) -> float:
        return 9.0 * self.kappa * self.mu / (3.0 * self.kappa + self.mu)

    @property
    def poisson_ratio(self) -> float:
        return (3.0 * self.kappa - 2.0 * self.mu) / (2.0 * (3.0 * self.kappa + self.mu))

    def energy(self, C) -> np.ndarray:
        """Strain energy density Psi(C)."""
        C = np.asarray(C, dtype=float)
        I1, I3 = _invariants(C)
        _check_det(I3, "det C")
        return (0.25 * self.kappa * (I3 - 1.0 - np.log(I3))
                + 0.5 * self.mu * (I3 ** (-1.0 / 3.0) * I1 - 3.0))

    def pk2_stress(self, C) -> np.ndarray:
        """
        Second Piola-Kirchhoff stress S = 2 dPsi/dC.

        S = kappa/2 (I3 - 1) C^-1 + mu I3^(-1/3) (Id - I1/3 C^-1)
        """
        C = np.asarray(C, dtype=float)
        I1, I3 = _invariants(C)
        _check_det(I3, "det C")
        Ci = np.linalg.inv(C)
        eye = np.eye(C.shape[-1])
        a = (0.5 * self.kappa * (I3 - 1.0))[..., None, None]
        b = (self.mu * I3 ** (-1.0 / 3.0))[..., None, None]
        return a * Ci + b * (eye - (I1 / 3.0)[..., None, None] * Ci)

    def material_tangent(self, C) -> np.ndarray:
        """
        Fourth-order tangent 2 dS/dC = 4 d2Psi/dCdC, indices [A, B, C, D].

        kappa I3 Ci(x)Ci - kappa (I3 - 1) II
        + 2 mu I3^(-1/3) [ -1/3 (Id(x)Ci + Ci(x)Id) + I1/9 Ci(x)Ci + I1/3 II ]
        with II_ABCD = (Ci_AC Ci_BD + Ci_AD Ci_BC) / 2.
        """
        C = np.asarray(C, dtype=float)
        I1, I3 = _invariants(C)
        _check_det(I3, "det C")
        Ci = np.linalg.inv(C)
        eye = np.broadcast_to(np.eye(C.shape[-1]), C.shape)
        ci_ci = np.einsum("...AB,...CD->...ABCD", Ci, Ci)
        sym = 0.5 * (np.einsum("...AC,...BD->...ABCD", Ci, Ci) + np.einsum("...AD,...BC->...ABCD", Ci, Ci))
        id_ci = np.einsum("...AB,...CD->...ABCD", eye, Ci)
        ci_id = np.einsum("...AB,...CD->...ABCD", Ci, eye)

        def expand(x):
            return np.asarray(x)[..., None, None, None, None]

        vol = expand(self.kappa * I3) * ci_ci - expand(self.kappa * (I3 - 1.0)) * sym
        iso = expand(2.0 * self.mu * I3 ** (-1.0 / 3.0)) * (
            -(id_ci + ci_id) / 3.0 + expand(I1 / 9.0) * ci_ci + expand(I1 / 3.0) * sym
        )
        return vol + iso

    def first_piola(self, F) -> np.ndarray:
        """First Piola-Kirchhoff stress P = F S."""
        kin = kinematics(F)
        return np.einsum("...iA,...AJ->...iJ", kin.F, self.pk2_stress(kin.C))

    def first_elasticity(self, F) -> np.ndarray:
        """
        dP/dF with indices [i, J, k, L]:
        A_iJkL = delta_ik S_JL + F_iA F_kD T_AJLD
        """
        kin = kinematics(F)
        S = self.pk2_stress(kin.C)
        T = self.material_tangent(kin.C)
        eye = np.eye(kin.F.shape[-1])
        geometric = np.einsum("ik,...JL->...iJkL", eye, S)
        material = np.einsum("...iA,...kD,...AJLD->...iJkL", kin.F, kin.F, T)
        return geometric + material

    def stress_and_tangent(self, F):
        """Energy density, P and dP/dF in one pass (element kernels)."""
        kin = kinematics(F)
        S = self.pk2_stress(kin.C)
        T = self.material_tangent(kin.C)
        eye = np.eye(kin.F.shape[-1])
        P = np.einsum("...iA,...AJ->...iJ", kin.F, S)
        A = np.einsum("ik,...JL->...iJkL", eye, S) + np.einsum("...iA,...kD,...AJLD->...iJkL", kin.F, kin.F, T)
        return self.energy(kin.C), P, A
