"""Rigorous two-sided control of the principal (and m-th) eigenvalue.

Everything here evaluates an exact inequality on the sampled grid:

* comparison of Schrodinger forms: the eigenvalue difference of -lap + q and
  -lap + q~ is sandwiched by inf(q - q~) and sup(q - q~),
* the quadratic envelope lambda_domain - (p/2) sup(div a) + (p^2/4) inf|a|^2
  <= lambda_1(p) <= lambda_domain - (p/2) inf(div a) + (p^2/4) sup|a|^2,
* the no-decay certificate: inf q(., p0) >= 0 forces lambda_1 nondecreasing
  on [p0/2, inf) and rules out exponential decay,
* potential-well upper bounds from the plateau test function
  u_hat = clip(dist(x, region boundary)/eps, 0, 1): the explicit constant
  C = eps^-2 |{b <= min+beta}|^-1 |collar| gives lambda_1(p) <= C e^{-omega p},
  and the direct weighted Rayleigh quotient of the same u_hat is a sharper
  bound computed in the log domain (valid for any p, no underflow).

Grid measures are cell counts times cell volume (O(h) measure error,
documented); distances are multi-source breadth-first hop counts times h.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .potential import Field2D, Potential1D, Well, liouville_q


class CollarError(ValueError):
    """Collar condition violated on the grid or beta/omega infeasible."""


@dataclass(frozen=True)
class BoundReport:
    p: float
    lower: float
    log_upper: float
    provenance: tuple
    certified: bool


@dataclass(frozen=True)
class WellUpperBound:
    """Both upper bounds from one well: the explicit-constant bound
    C e^{-omega p} and the direct quotient of the plateau test function."""

    p: float
    beta: float
    omega: float
    epsilon: float
    log_C: float
    log_upper_explicit: float
    log_upper_quotient: float


@dataclass(frozen=True)
class MultiwellBound:
    p: float
    omega_min_depth: float
    log_upper_explicit: float
    log_upper_quotient: float
    per_well: tuple


@dataclass(frozen=True)
class NoDecayCertificate:
    holds: bool
    p0: float
    min_q: float
    witness: tuple | int | None
    message: str


# --------------------------------------------------------------------------

def comparison_bounds(q1: np.ndarray, q2: np.ndarray, lam2: float) -> tuple[float, float]:
    """Interval for the principal eigenvalue of -lap + q1 given the one of
    -lap + q2: [lam2 + min(q1-q2), lam2 + max(q1-q2)]."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    if q1.shape != q2.shape:
        raise ValueError(f"grid mismatch: {q1.shape} vs {q2.shape}")
    d = q1 - q2
    return lam2 + float(d.min()), lam2 + float(d.max())


def dirichlet_laplacian_eigenvalue(pot_or_field) -> float:
    """Principal Dirichlet Laplacian eigenvalue of the box domain."""
    if isinstance(pot_or_field, Potential1D):
        return float(np.pi**2 / (4.0 * pot_or_field.grid.l**2))
    g = pot_or_field.grid
    return float(np.pi**2 / 4.0 * (1.0 / g.lx**2 + 1.0 / g.ly**2))


def p2_envelope(pot, p: float, lam_domain: float | None = None) -> BoundReport:
    """Quadratic-in-p envelope from comparing the Schrodinger-form potential
    against the plain Laplacian; exact for constant fields."""
    if lam_domain is None:
        lam_domain = dirichlet_laplacian_eigenvalue(pot)
    diva = pot.divergence()
    if isinstance(pot, Potential1D):
        a_sq = pot.a**2
    else:
        a_sq = pot.a[:, :, 0] ** 2 + pot.a[:, :, 1] ** 2
    lower = lam_domain - 0.5 * p * float(diva.max()) + 0.25 * p * p * float(a_sq.min())
    upper = lam_domain - 0.5 * p * float(diva.min()) + 0.25 * p * p * float(a_sq.max())
    return BoundReport(
        p=p,
        lower=lower,
        log_upper=float(np.log(upper)),
        provenance=("laplacian-shift lower envelope", "laplacian-shift upper envelope"),
        certified=True,
    )


def no_decay_certificate(pot, p0: float) -> NoDecayCertificate:
    """If min q(., p0) >= 0 then lambda_1 is nondecreasing for p >= p0/2 and
    no potential well exists, so the eigenvalue cannot decay exponentially."""
    if p0 <= 0:
        raise ValueError("p0 must be positive")
    q = liouville_q(pot, p0)
    flat_idx = int(np.argmin(q))
    min_q = float(q.ravel()[flat_idx])
    witness = (np.unravel_index(flat_idx, q.shape) if q.ndim > 1 else flat_idx)
    holds = min_q >= 0.0
    if holds:
        msg = (f"min q(., {p0:g}) = {min_q:.6g} >= 0: lambda_1 is nondecreasing "
               f"on [{p0 / 2:g}, inf); no potential well exists")
        witness_out = None
    else:
        msg = (f"q(., {p0:g}) = {min_q:.6g} < 0 at node {witness}: "
               "certificate fails (a well may exist)")
        witness_out = witness if q.ndim > 1 else int(flat_idx)
    return NoDecayCertificate(holds=holds, p0=p0, min_q=min_q,
                              witness=witness_out, message=msg)


# --------------------------------------------------------------------------
# well-based upper bounds
# --------------------------------------------------------------------------

def _bfs_hops(region: np.ndarray) -> np.ndarray:
    """Hop distance from the complement (multi-source BFS, 2-neighbor in 1D,
    4-neighbor in 2D).  Region nodes adjacent to the outside get 1."""
    hops = np.zeros(region.shape, dtype=np.int64)
    reached = ~region
    k = 0
    while not reached.all():
        k += 1
        grown = reached.copy()
        if region.ndim == 1:
            grown[1:] |= reached[:-1]
            grown[:-1] |= reached[1:]
        else:
            grown[1:, :] |= reached[:-1, :]
            grown[:-1, :] |= reached[1:, :]
            grown[:, 1:] |= reached[:, :-1]
            grown[:, :-1] |= reached[:, 1:]
        newly = grown & region & ~reached
        if not newly.any():
            break
        hops[newly] = k
        reached |= newly
    return hops


def _log_quotient_1d(pot: Potential1D, p: float, u_hat: np.ndarray) -> float:
    """log of the exp(-p b)-weighted Rayleigh quotient of nodal u_hat
    (length n+2, zero at both endpoints).  Uses the same midpoint-weight
    convention as the eigensolver pencil."""
    b = pot.b
    h = pot.grid.h
    bref = float(b.min())
    if pot.b_mid is not None:
        log_w = -p * (pot.b_mid - bref)
    else:
        log_w = -p * (0.5 * (b[:-1] + b[1:]) - bref)
    du = np.diff(u_hat)
    mask = du != 0.0
    log_num = logsumexp(log_w[mask] + 2.0 * np.log(np.abs(du[mask]))) - np.log(h)
    un = u_hat[1:-1]
    nz = un != 0.0
    log_den = logsumexp(-p * (b[1:-1][nz] - bref) + 2.0 * np.log(un[nz])) + np.log(h)
    return float(log_num - log_den)


def _log_quotient_2d(field: Field2D, p: float, u_hat: np.ndarray) -> float:
    b = field.b
    hx, hy = field.grid.hx, field.grid.hy
    bref = float(b.min())
    terms = []
    dux = np.diff(u_hat, axis=0)
    mx = dux != 0.0
    if mx.any():
        log_wx = -p * (0.5 * (b[:-1, :] + b[1:, :]) - bref)
        terms.append(logsumexp(log_wx[mx] + 2.0 * np.log(np.abs(dux[mx])))
                     + np.log(hy / hx))
    duy = np.diff(u_hat, axis=1)
    my = duy != 0.0
    if my.any():
        log_wy = -p * (0.5 * (b[:, :-1] + b[:, 1:]) - bref)
        terms.append(logsumexp(log_wy[my] + 2.0 * np.log(np.abs(duy[my])))
                     + np.log(hx / hy))
    log_num = logsumexp(terms)
    nz = u_hat != 0.0
    log_den = logsumexp(-p * (b[nz] - bref) + 2.0 * np.log(u_hat[nz])) + np.log(hx * hy)
    return float(log_num - log_den)


def well_upper_bound(pot, well: Well, p: float, epsilon: float | None = None,
                     beta: float | None = None, omega: float | None = None) -> WellUpperBound:
    """Upper bounds on lambda_1(p) from one potential well.

    Defaults: beta = 0.25 * depth, omega = 0.5 * depth, epsilon = widest
    collar (in grid cells) on which b >= min + beta + omega still holds.
    """
    depth = well.depth
    if beta is None:
        beta = 0.25 * depth
    if omega is None:
        omega = 0.5 * depth
    if not (0.0 < beta and beta + omega < depth):
        raise CollarError(
            f"need 0 < beta and beta + omega < depth; got beta={beta:.6g}, "
            f"omega={omega:.6g}, depth={depth:.6g}")
    threshold = well.min_value + beta + omega

    if isinstance(pot, Potential1D):
        h_dist = pot.grid.h
        cell_vol = pot.grid.h
        b = pot.b
    else:
        h_dist = min(pot.grid.hx, pot.grid.hy)
        cell_vol = pot.grid.hx * pot.grid.hy
        b = pot.b

    region = well.region
    hops = _bfs_hops(region)
    in_region = region
    violating = in_region & (b < threshold)
    max_hops = int(hops[in_region].max())
    if violating.any():
        k_cap = int(hops[violating].min()) - 1
    else:
        k_cap = max_hops
    if epsilon is not None:
        k = int(np.floor(epsilon / h_dist))
        if k < 1:
            raise CollarError(f"epsilon={epsilon:.6g} is below one grid cell")
        if k > k_cap:
            raise CollarError(
                f"collar of {k} cells reaches below b = min + beta + omega "
                f"(largest admissible: {k_cap} cells)")
    else:
        k = min(k_cap, max_hops)
        if k < 1:
            raise CollarError(
                "no admissible collar: b < min + beta + omega already at the "
                "region rim; reduce beta or omega")
    eps_len = k * h_dist

    u_hat = np.where(in_region, np.minimum(hops / k, 1.0), 0.0)

    sub_count = int(np.count_nonzero(in_region & (b <= well.min_value + beta)))
    collar_count = int(np.count_nonzero(in_region & (hops >= 1) & (hops <= k)))
    if sub_count == 0:
        raise CollarError("sublevel set {b <= min + beta} is empty on the grid")
    log_C = (-2.0 * np.log(eps_len)
             + np.log(collar_count * cell_vol)
             - np.log(sub_count * cell_vol))
    log_explicit = float(log_C - omega * p)

    if isinstance(pot, Potential1D):
        log_quot = _log_quotient_1d(pot, p, u_hat)
    else:
        log_quot = _log_quotient_2d(pot, p, u_hat)

    return WellUpperBound(
        p=p, beta=beta, omega=omega, epsilon=eps_len, log_C=float(log_C),
        log_upper_explicit=log_explicit, log_upper_quotient=log_quot,
    )


def multiwell_upper_bound(pot, wells, p: float, epsilon: float | None = None,
                          beta=None) -> MultiwellBound:
    """Upper bound on lambda_m(p) from m pairwise disjoint wells: the max
    over wells of the plateau-test-function quotient."""
    wells = list(wells)
    for i in range(len(wells)):
        for j in range(i + 1, len(wells)):
            if np.any(wells[i].region & wells[j].region):
                raise CollarError(f"well regions {i} and {j} overlap")
    betas = beta if isinstance(beta, (list, tuple)) else [beta] * len(wells)
    per = tuple(well_upper_bound(pot, w, p, epsilon=epsilon, beta=bt)
                for w, bt in zip(wells, betas))
    return MultiwellBound(
        p=p,
        omega_min_depth=min(w.depth for w in wells),
        log_upper_explicit=max(u.log_upper_explicit for u in per),
        log_upper_quotient=max(u.log_upper_quotient for u in per),
        per_well=per,
    )
