"""Quasifree open-system models and their two coefficient parameterizations.

A model is specified either microscopically, by Lindblad operators

    L_j = alpha_j . x + beta_j . grad + gamma_j,

together with the Hamiltonian H = -Laplace/2 + |x|^2/2 + V1 - i*mu*[x, grad]_+,
or macroscopically by quantum-Fokker-Planck diffusion coefficients
(Dpp, Dqq, Dpq, eta) plus residual drift vectors.  Expanding the dissipator
on integral kernels rho(x, y) and matching against the kernel template

    -eta (x-y).(grad_x - grad_y) rho + Dqq |grad_x + grad_y|^2 rho
    - Dpp |x-y|^2 rho + 2 i Dpq (x-y).(grad_x + grad_y) rho
    + i drift_x . (x-y) rho + drift_p . (grad_x + grad_y) rho

gives the closed-form map

    Dpp = 1/2 sum_j Re(alpha_j alpha_j^H)     (d x d, PSD)
    Dqq = 1/2 sum_j Re(beta_j  beta_j^H)
    Dpq = 1/2 sum_j Im(alpha_{j,k} conj(beta_{j,l}))
    eta =       sum_j Re(alpha_j . conj(beta_j)) / d   (isotropic part)
    drift_x_k = sum_j Im(alpha_{j,k} conj(gamma_j))
    drift_p_k = sum_j Re(beta_{j,k} conj(gamma_j))

The expansion also produces a dilation term Re(alpha.conj(beta)) (x.grad_x +
y.grad_y + d) which cancels against the -i*mu*[x, grad]_+ Hamiltonian
adjustment exactly when mu = 1/2 sum_j Re(alpha_j . conj(beta_j)).  The map is
frozen by a finite-difference kernel oracle in the test suite.

A diffusion form is realizable as a (quasifree) Lindblad dissipator iff

    Dpp*Dqq - Dpq^2 >= eta^2/4  and  Dpp, Dqq >= 0.

Caldeira-Leggett coefficients (Dqq = Dpq = 0, eta > 0) violate this, which is
why the classical Fokker-Planck friction operator is not of Lindblad form.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LindbladModel",
    "DiffusionForm",
    "ValidityReport",
    "InvalidDiffusionError",
    "check_lindblad_condition",
    "lindblad_to_diffusion",
    "diffusion_to_lindblad",
    "required_mu",
    "V1Spec",
]

_ISO_TOL = 1e-12


@dataclass(frozen=True)
class V1Spec:
    """Named analytic bounded perturbation of the confinement potential.

    Forms:
      "cosine":   amplitude * cos(wavenumber * x_1)
      "gaussian": amplitude * exp(-|x|^2 / (2 width^2))
    """

    form: str
    amplitude: float = 0.0
    wavenumber: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.form not in ("cosine", "gaussian"):
            raise ValueError(f"unknown v1 form {self.form!r}")

    def evaluate(self, *coords: np.ndarray) -> np.ndarray:
        if self.form == "cosine":
            return self.amplitude * np.cos(self.wavenumber * coords[0])
        r2 = sum(np.asarray(c) ** 2 for c in coords)
        return self.amplitude * np.exp(-r2 / (2.0 * self.width**2))


@dataclass
class LindbladModel:
    """Microscopic model: dimension, Lindblad coefficient triples, Hamiltonian data.

    coeffs holds m triples (alpha_j, beta_j, gamma_j) with alpha_j, beta_j
    complex d-vectors and gamma_j a complex scalar.  Natural units hbar=m=e=1.
    """

    d: int
    coeffs: list[tuple[np.ndarray, np.ndarray, complex]] = field(default_factory=list)
    mu: float = 0.0
    confinement: bool = True
    v1: V1Spec | None = None
    hartree: bool = False
    hartree_sign: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        normalized = []
        for j, triple in enumerate(self.coeffs):
            alpha, beta, gamma = triple
            alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
            beta = np.atleast_1d(np.asarray(beta, dtype=complex))
            if alpha.shape != (self.d,) or beta.shape != (self.d,):
                raise ValueError(
                    f"operator {j}: alpha/beta must have exactly {self.d} components"
                )
            gamma = complex(gamma)
            if not (
                np.all(np.isfinite(alpha.view(float)))
                and np.all(np.isfinite(beta.view(float)))
                and np.isfinite(gamma.real)
                and np.isfinite(gamma.imag)
            ):
                raise ValueError(f"operator {j}: non-finite coefficient")
            normalized.append((alpha, beta, gamma))
        self.coeffs = normalized
        if not np.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if self.hartree and self.hartree_sign <= 0:
            raise ValueError("attractive Hartree coupling is not supported")

    @property
    def m(self) -> int:
        return len(self.coeffs)


@dataclass
class DiffusionForm:
    """Macroscopic QFP coefficients.  Scalars denote isotropic d x d matrices.

    eta is the (scalar) friction constant; drift_x and drift_p are the residual
    first-order coefficients produced by gamma_j cross terms: drift_x enters
    the kernel equation as i*drift_x.(x-y)*rho (a velocity-space drift of the
    Wigner function) and drift_p as drift_p.(grad_x+grad_y)*rho (a position
    drift).
    """

    dpp: float | np.ndarray
    dqq: float | np.ndarray
    dpq: float | np.ndarray = 0.0
    eta: float = 0.0
    d: int = 1
    drift_x: np.ndarray | None = None
    drift_p: np.ndarray | None = None

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        self.eta = float(self.eta)
        for name in ("dpp", "dqq", "dpq"):
            val = getattr(self, name)
            if np.ndim(val) == 0:
                setattr(self, name, float(val))
            else:
                arr = np.asarray(val, dtype=float)
                if arr.shape != (self.d, self.d):
                    raise ValueError(f"{name} matrix must be {self.d}x{self.d}")
                setattr(self, name, arr)
        for name in ("drift_x", "drift_p"):
            val = getattr(self, name)
            if val is None:
                setattr(self, name, np.zeros(self.d))
            else:
                arr = np.atleast_1d(np.asarray(val, dtype=float))
                if arr.shape != (self.d,):
                    raise ValueError(f"{name} must have {self.d} components")
                setattr(self, name, arr)

    @property
    def is_isotropic(self) -> bool:
        return all(np.ndim(getattr(self, n)) == 0 for n in ("dpp", "dqq", "dpq"))

    def _as_matrix(self, name: str) -> np.ndarray:
        val = getattr(self, name)
        return val * np.eye(self.d) if np.ndim(val) == 0 else val

    def scalars(self) -> tuple[float, float, float, float]:
        """(dpp, dqq, dpq, eta) for isotropic forms; error otherwise."""
        if not self.is_isotropic:
            raise ValueError("diffusion form is anisotropic; no scalar reduction")
        return float(self.dpp), float(self.dqq), float(self.dpq), self.eta


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    margin: float
    messages: tuple[str, ...] = ()


class InvalidDiffusionError(ValueError):
    """Raised when a diffusion form fails the Lindblad realizability condition."""

    def __init__(self, report: ValidityReport):
        self.report = report
        super().__init__(
            "diffusion coefficients are not of Lindblad form: "
            + "; ".join(report.messages)
        )


def check_lindblad_condition(form: DiffusionForm) -> ValidityReport:
    """Test Dpp*Dqq - Dpq^2 >= eta^2/4 together with Dpp, Dqq >= 0.

    Scalar coefficients are checked with the margin evaluated in the exact
    arithmetic order dpp*dqq - dpq*dpq - eta*eta/4.  Matrix coefficients use
    the conservative proxy: the margin is the minimum eigenvalue of the
    symmetrized Dpp.Dqq - Dpq^2 minus eta^2/4, and positivity is checked
    eigenvalue-wise.
    """
    messages = []
    values = [form.eta]
    for name in ("dpp", "dqq", "dpq"):
        values.append(np.ravel(form._as_matrix(name)))
    flat = np.concatenate([np.atleast_1d(np.asarray(v, float)) for v in values])
    if not np.all(np.isfinite(flat)):
        raise ValueError("diffusion coefficients must be finite")

    if form.is_isotropic:
        dpp, dqq, dpq, eta = form.scalars()
        margin = dpp * dqq - dpq * dpq - eta * eta / 4.0
        pos_ok = dpp >= 0 and dqq >= 0
        if dpp < 0:
            messages.append(f"Dpp = {dpp} is negative")
        if dqq < 0:
            messages.append(f"Dqq = {dqq} is negative")
    else:
        mpp, mqq, mpq = (form._as_matrix(n) for n in ("dpp", "dqq", "dpq"))
        prod = mpp @ mqq - mpq @ mpq
        prod = 0.5 * (prod + prod.T)
        margin = float(np.linalg.eigvalsh(prod)[0]) - form.eta**2 / 4.0
        pos_ok = True
        for name, mat in (("Dpp", mpp), ("Dqq", mqq)):
            lo = float(np.linalg.eigvalsh(0.5 * (mat + mat.T))[0])
            if lo < 0:
                pos_ok = False
                messages.append(f"{name} has negative eigenvalue {lo}")
    if margin < 0:
        messages.append(
            f"Dpp*Dqq - Dpq^2 - eta^2/4 = {margin} < 0 "
            "(uniform ellipticity condition violated)"
        )
    valid = bool(margin >= 0 and pos_ok)
    return ValidityReport(valid=valid, margin=float(margin), messages=tuple(messages))


def required_mu(model: LindbladModel) -> float:
    """Hamiltonian adjustment that cancels the dissipator's dilation terms."""
    total = 0.0
    for alpha, beta, _ in model.coeffs:
        total += float(np.real(np.dot(alpha, np.conj(beta))).sum()) / model.d
    return 0.5 * total


def lindblad_to_diffusion(model: LindbladModel, warn_mu_mismatch: bool = True) -> DiffusionForm:
    """Expand the dissipator on kernels and read off the QFP coefficients.

    Emits a warning (not an error) when the model's mu does not match the
    value required for the dilation terms to cancel; the matrix friction part
    must be isotropic, which every model with scalar eta satisfies.
    """
    d = model.d
    mpp = np.zeros((d, d))
    mqq = np.zeros((d, d))
    mpq = np.zeros((d, d))
    fric = np.zeros((d, d))
    drift_x = np.zeros(d)
    drift_p = np.zeros(d)
    for alpha, beta, gamma in model.coeffs:
        mpp += 0.5 * np.real(np.outer(alpha, np.conj(alpha)))
        mqq += 0.5 * np.real(np.outer(beta, np.conj(beta)))
        mpq += 0.5 * np.imag(np.outer(alpha, np.conj(beta)))
        fric += np.real(np.outer(alpha, np.conj(beta)))
        drift_x += np.imag(alpha * np.conj(gamma))
        drift_p += np.real(beta * np.conj(gamma))

    eta = float(np.trace(fric)) / d
    off = fric - eta * np.eye(d)
    if np.max(np.abs(off)) > _ISO_TOL * max(1.0, abs(eta)):
        raise ValueError(
            "anisotropic friction matrix Re(alpha beta^H) is outside the "
            "scalar-eta model class"
        )

    def collapse(mat: np.ndarray) -> float | np.ndarray:
        iso = float(np.trace(mat)) / d
        if np.max(np.abs(mat - iso * np.eye(d))) <= _ISO_TOL * max(1.0, abs(iso)):
            return iso
        return mat

    mu_needed = 0.5 * eta
    if warn_mu_mismatch and abs(model.mu - mu_needed) > 1e-12 * max(1.0, abs(mu_needed)):
        warnings.warn(
            f"model mu = {model.mu} does not cancel the dissipator dilation "
            f"terms (required mu = {mu_needed}); the kernel equation then "
            "carries a residual dilation",
            stacklevel=2,
        )
    return DiffusionForm(
        dpp=collapse(mpp),
        dqq=collapse(mqq),
        dpq=collapse(mpq),
        eta=eta,
        d=d,
        drift_x=drift_x,
        drift_p=drift_p,
    )


def diffusion_to_lindblad(form: DiffusionForm) -> LindbladModel:
    """Construct <= 2 Lindblad operators per axis realizing a valid diffusion form.

    Per axis: L1 = a*x + b*grad with a = sqrt(2 Dpp) and
    b = (eta - 2i Dpq)/a absorbs the friction and cross coefficients; the
    remaining position diffusion goes into L2 = c*grad with
    c = sqrt(2 Dqq - |b|^2) (nonnegative exactly when the realizability
    condition holds).  Dpp = 0 forces eta = Dpq = 0 and the construction
    mirrors to a single grad operator.  Drift targets are met by gamma terms,
    which require a nonzero x (resp. grad) coefficient to represent drift_x
    (resp. drift_p).  The model's mu is set to the consistent value eta/2.
    """
    report = check_lindblad_condition(form)
    if not report.valid:
        raise InvalidDiffusionError(report)
    if not form.is_isotropic:
        raise ValueError("operator construction implemented for isotropic forms only")
    dpp, dqq, dpq, eta = form.scalars()
    d = form.d

    coeffs: list[tuple[np.ndarray, np.ndarray, complex]] = []
    for axis in range(d):
        e = np.zeros(d)
        e[axis] = 1.0
        dx = form.drift_x[axis]
        dp = form.drift_p[axis]
        if dpp > 0:
            a = np.sqrt(2.0 * dpp)
            b = (eta - 2.0j * dpq) / a
            # gamma1 fixes drift_x through Im(a*conj(g)); its Re(b*conj(g))
            # leakage into drift_p is compensated below.
            g1 = complex(0.0, -dx / a)
            coeffs.append((a * e, b * e, g1))
            slack = 2.0 * dqq - abs(b) ** 2
            slack = max(slack, 0.0)  # margin >= 0 guarantees this up to roundoff
            residual_p = dp - float(np.real(b * np.conj(g1)))
            if slack > _ISO_TOL:
                c = np.sqrt(slack)
                coeffs.append((0.0 * e, c * e, complex(residual_p / c, 0.0)))
            elif abs(residual_p) > 1e-12 * max(1.0, abs(dp)):
                if abs(b) > 0:
                    # rotate the drift into gamma1's real part instead
                    g1 = g1 + residual_p / np.real(b) if np.real(b) != 0 else None
                    if g1 is None:
                        raise ValueError(
                            "drift_p cannot be represented: no real grad coefficient"
                        )
                    coeffs[-1] = (a * e, b * e, g1)
                else:
                    raise ValueError(
                        "drift_p requires position diffusion Dqq > 0 or friction"
                    )
        else:
            # margin >= 0 with Dpp = 0 forces Dpq = eta = 0
            if abs(dx) > 0:
                raise ValueError("drift_x requires momentum diffusion Dpp > 0")
            if dqq > 0:
                c = np.sqrt(2.0 * dqq)
                coeffs.append((0.0 * e, c * e, complex(dp / c, 0.0)))
            elif abs(dp) > 0:
                raise ValueError("drift_p requires position diffusion Dqq > 0")
    return LindbladModel(d=d, coeffs=coeffs, mu=0.5 * eta)
