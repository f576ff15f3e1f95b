"""Instance-dependent lower bounds on the expected stopping time."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .divergence import binary_kl, row_kl
from .errors import DomainError
from .markov import stationary_distribution, validate_kernel
from .nullsets import DEFAULT_TOL, NullSet, d_m_inf
from .poisson import sensitivity_constant

D_INF_ZERO = 1e-12


@dataclass
class BoundReport:
    d_inf: float
    c_q: float
    pi_star: float
    alpha: float
    leading_term: float
    correction: float
    bound: float
    beta: float | None = None
    iid_reduced: bool = False
    bound_general: float = float("nan")
    flags: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _is_iid(rows: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.abs(rows - rows[0]).max() <= tol)


def _assemble(numerator, Q, S, alpha, beta, k_max, tol):
    Q = validate_kernel(Q)
    Q.require_ergodic()
    proj = d_m_inf(Q, S, tol)
    d_inf = float(proj.value)
    pi = stationary_distribution(Q)
    pi_star = float(pi.min())
    c_q = sensitivity_constant(Q, k_max).c_p
    flags = []
    if d_inf <= D_INF_ZERO:
        flags.append("DInfZero")
        leading = 0.0 if numerator == 0 else math.inf
    else:
        leading = numerator / d_inf
    correction = 2.0 * c_q / pi_star
    general = max(leading - correction, 0.0)
    # C_Q may be taken 0 when the per-state divergence vector is constant,
    # which is the case for identical-row Q against identical-row members.
    iid = False
    if _is_iid(Q.rows) and np.isfinite(d_inf):
        f = row_kl(Q.rows, np.asarray(proj.argmin.rows))
        iid = bool(np.ptp(f) <= 1e-9 * max(1.0, float(np.abs(f).max())))
    if iid:
        flags.append("iid")
        c_used = 0.0
    else:
        c_used = c_q
    correction_used = 2.0 * c_used / pi_star
    bound = max(leading - correction_used, 0.0)
    return BoundReport(
        d_inf=d_inf,
        c_q=c_used,
        pi_star=pi_star,
        alpha=alpha,
        leading_term=leading,
        correction=correction_used,
        bound=bound,
        beta=beta,
        iid_reduced=iid,
        bound_general=general,
        flags=flags,
    )


def one_sided_lower_bound(Q, S: NullSet, alpha: float, k_max: int | None = None, tol: float = DEFAULT_TOL) -> BoundReport:
    """``(log(1/alpha) / D_inf(Q, S) - 2 C_Q / pi_*)^+``.

    ``bound_general`` always carries the value with the spectral ``C_Q``;
    ``bound`` uses ``C_Q = 0`` when the reduction to i.i.d. sampling applies.
    A zero divergence (``Q`` in ``S``) gives an infinite leading term and
    the ``DInfZero`` flag instead of an exception.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha = {alpha} must lie in (0, 1]")
    return _assemble(-math.log(alpha), Q, S, alpha, None, k_max, tol)


def two_sided_lower_bounds(Q, P, set_P: NullSet, set_Q: NullSet, alpha: float, beta: float, k_max: int | None = None, tol: float = DEFAULT_TOL):
    """Bounds for a level-(alpha, beta) two-sided test.

    Returns ``(under_Q, under_P)``: the bound on the expected stopping time
    when the data come from ``Q`` (numerator ``d(beta, 1-alpha)``, divergence
    to ``set_P``) and when they come from ``P`` (numerator ``d(alpha, 1-beta)``,
    divergence to ``set_Q``).
    """
    for name, v in (("alpha", alpha), ("beta", beta)):
        if not 0.0 < v < 0.5:
            raise DomainError(f"{name} = {v} must lie in (0, 0.5)")
    under_Q = _assemble(binary_kl(beta, 1.0 - alpha), Q, set_P, alpha, beta, k_max, tol)
    under_P = _assemble(binary_kl(alpha, 1.0 - beta), P, set_Q, alpha, beta, k_max, tol)
    return under_Q, under_P
