"""Closed-form few-atom, few-cycle results for the simplified model.

Stage one carries only the Rabi and detuning terms, stage two the detuning and
interaction.  Starting from |g...g>, P(2) and P(3) for two atoms and P(2) for
three atoms are written as polynomials in the single-atom rotation factors
X+, X-, X = sqrt(X+ X-), Y and the phases phi1, theta3.  The expressions below
are transcribed term by term from their published factored form; they are
not re-derived here, so comparing them with exact evolution checks the
transcription and the published algebra together.

Two conventions for the factors are available:

``"printed"``
    Omega_e = sqrt(Omega^2 + Delta^2), X+- = cos(Omega_e T1) +- i (Delta/Omega_e)
    sin(Omega_e T1), phi1 = 2 theta1 + theta2.  These are the published
    definitions.
``"hamiltonian"``
    The factors that make the two-atom stage-one matrix agree with
    exp(-i H1 T1) for H1 = sum_j [Omega (s_j^+ + s_j^-) + Delta n_j]:
    Omega_e = sqrt(Omega^2 + Delta^2/4), X+- use Delta/(2 Omega_e), and the
    single-atom phase Delta T1/2 is global, so phi1 = theta2.

Only the second convention describes the Hamiltonian used by the exact
engine; ``compare_with_exact`` uses it by default.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .model import ModelParams, Variant

CONVENTIONS = ("hamiltonian", "printed")
IMAG_LIMIT = 1e-9


@dataclass(frozen=True)
class OracleFactors:
    x_plus: complex
    x_minus: complex
    x: float
    y: float
    theta1: float
    theta2: float
    theta3: float
    phi1: float
    omega_e: float
    convention: str = "hamiltonian"

    def mirrored_identity_residual(self) -> float:
        """|X+ X- + Y^2 - 1|, zero for a unitary single-atom rotation."""
        return abs(self.x_plus * self.x_minus + self.y**2 - 1.0)


def factors(params: ModelParams, convention: str = "hamiltonian") -> OracleFactors:
    """Rotation factors and phases for the simplified model.

    Interaction in stage one is ignored whatever ``params.variant`` says.
    """
    if convention not in CONVENTIONS:
        raise ConfigError(f"unknown factor convention {convention!r}; use one of {CONVENTIONS}")
    omega, delta, t1 = params.omega, params.delta, params.t1
    eff_delta = delta if convention == "printed" else 0.5 * delta
    omega_e = math.hypot(omega, eff_delta)
    c = math.cos(omega_e * t1)
    s = math.sin(omega_e * t1)
    if omega_e == 0:
        ratio_d, ratio_o = 0.0, 0.0
    else:
        ratio_d, ratio_o = eff_delta / omega_e, omega / omega_e
    x_plus = complex(c, ratio_d * s)
    x_minus = complex(c, -ratio_d * s)
    theta1 = 0.5 * delta * t1
    theta2 = delta * params.t2
    theta3 = params.v * params.t2
    phi1 = 2.0 * theta1 + theta2 if convention == "printed" else theta2
    return OracleFactors(
        x_plus=x_plus,
        x_minus=x_minus,
        x=math.sqrt((x_plus * x_minus).real),
        y=ratio_o * s,
        theta1=theta1,
        theta2=theta2,
        theta3=theta3,
        phi1=phi1,
        omega_e=omega_e,
        convention=convention,
    )


def two_atom_u1(f: OracleFactors) -> np.ndarray:
    """Stage-one matrix in the ordered basis (gg, gr, rg, rr), as published."""
    xp, xm, x, y = f.x_plus, f.x_minus, f.x, f.y
    ep = cmath.exp(2j * f.theta1)
    em = cmath.exp(-2j * f.theta1)
    return np.array(
        [
            [xp**2 * ep, 1j * xp * y * ep, 1j * xp * y * ep, -(y**2) * ep],
            [1j * xp * y, x**2, -(y**2), 1j * xm * y],
            [1j * xp * y, -(y**2), x**2, 1j * xm * y],
            [-(y**2) * em, 1j * xm * y * em, 1j * xm * y * em, xm**2 * em],
        ],
        dtype=complex,
    )


def two_atom_u2(f: OracleFactors) -> np.ndarray:
    return np.diag(
        [
            1.0,
            cmath.exp(-1j * f.theta2),
            cmath.exp(-1j * f.theta2),
            cmath.exp(-1j * (2 * f.theta2 + f.theta3)),
        ]
    )


def _real(value: complex) -> float:
    if abs(value.imag) > IMAG_LIMIT:
        raise NumericalError(f"closed form has imaginary part {value.imag:.3e}")
    return value.real


def _cc(term: complex) -> float:
    """term + c.c."""
    return 2.0 * term.real


def two_atom_p2(f: OracleFactors) -> float:
    xp, x, y = f.x_plus, f.x, f.y
    e = lambda a: cmath.exp(1j * a)  # noqa: E731
    x2, y2 = x * x, y * y
    base = -(x**8) + 2 * x**4 * y**4 - y**8
    bracket = (
        2 * xp**2 * y**4 * (y2 + x2) * e(f.phi1 + f.theta3)
        + 2 * xp**2 * x2 * y2 * (y2 + x2) * e(f.phi1)
    )
    return _real(complex(base + _cc(bracket)))


def two_atom_p3(f: OracleFactors) -> float:
    xp, x, y = f.x_plus, f.x, f.y
    p, t = f.phi1, f.theta3
    e = lambda a: cmath.exp(1j * a)  # noqa: E731
    x2, y2 = x * x, y * y
    base = -(x**12) - 5 * x**8 * y**4 - 16 * x**6 * y**6 - 11 * x**4 * y**8 + y**12
    bracket = (
        2 * xp**6 * y**4 * (x2 + y2) * e(3 * p + 2 * t)
        + 2 * xp**4 * y**4 * (x**4 - y**4) * e(2 * p + 2 * t)
        - 2 * xp**6 * y**4 * (x2 + y2) * e(3 * p + t)
        + 4 * xp**4 * y**4 * (x**4 + 2 * x2 * y2 + y**4) * e(2 * p + t)
        + 2 * xp**2 * y**4 * (4 * x**6 - 6 * x**4 * y2 + 9 * x2 * y**4 - y**6) * e(p + t)
        + 2 * xp**4 * x2 * y2 * (x**4 - y**4) * e(2 * p)
        + 2
        * xp**2
        * y2
        * (2 * x**8 + 8 * x**6 * y2 - 10 * x**4 * y**4 + 7 * x2 * y**6 - y**10)
        * e(p)
        + 2 * x2 * y**4 * (x**6 + x**4 * y2 - x2 * y**4 - y**6) * e(t)
    )
    return _real(complex(base + _cc(bracket)))


def three_atom_p2(f: OracleFactors) -> float:
    xp, x, y = f.x_plus, f.x, f.y
    p, t = f.phi1, f.theta3
    e = lambda a: cmath.exp(1j * a)  # noqa: E731
    x2, y2 = x * x, y * y
    base = -((x2 - y2) ** 2) * (y2 + x2) ** 4
    bracket = (
        2 * xp**4 * y**6 * (2 * x2 - y2) * e(2 * p + 3 * t)
        + 2 * xp**2 * y**6 * (y2 + x2) ** 2 * e(p + 2 * t)
        + 4 * xp**2 * x2 * y**4 * (y2 + x2) * e(p + t)
        + 2 * xp**2 * x**4 * y2 * (y2 + x2) ** 2 * e(p)
    )
    return _real(complex(base + _cc(bracket)))


def phase_combination_count(L: int, n: int) -> int:
    """Number of distinct interference phase combinations, 2^(L-1) 4^(n-2)."""
    if L < 2 or n < 2:
        raise ConfigError(f"defined for L >= 2 and n >= 2, got L={L}, n={n}")
    return 2 ** (L - 1) * 4 ** (n - 2)


# (L, n) -> closed form
CLOSED_FORMS = {
    (2, 2): two_atom_p2,
    (2, 3): two_atom_p3,
    (3, 2): three_atom_p2,
}


def exact_population(params: ModelParams, n: int) -> float:
    """P(n) from exact stroboscopic evolution of the simplified model."""
    from .floquet import compile_cycle, evolve

    params = params.replace(variant=Variant.SIMPLIFIED)
    return float(evolve(compile_cycle(params), n).p[n])


@dataclass(frozen=True)
class OracleComparison:
    L: int
    n: int
    closed_form: float
    exact: float

    @property
    def error(self) -> float:
        return abs(self.closed_form - self.exact)


def compare_with_exact(
    params: ModelParams, L: int, n: int, convention: str = "hamiltonian"
) -> OracleComparison:
    if (L, n) not in CLOSED_FORMS:
        raise ConfigError(f"no closed form for L={L}, n={n}; have {sorted(CLOSED_FORMS)}")
    p = params.replace(L=L, variant=Variant.SIMPLIFIED)
    closed = CLOSED_FORMS[(L, n)](factors(p, convention))
    return OracleComparison(L, n, closed, exact_population(p, n))


def random_draw(rng: np.random.Generator, t1: float = 1.0) -> ModelParams:
    """epsilon, delta in [-1, 1], v in [-0.3, 0.3], t2 in [1, 20]."""
    eps, delta = rng.uniform(-1.0, 1.0, size=2)
    v = rng.uniform(-0.3, 0.3)
    t2 = rng.uniform(1.0, 20.0)
    return ModelParams(
        L=2, epsilon=eps, delta=delta, v=v, t1=t1, t2=t2, variant=Variant.SIMPLIFIED
    )
