"""Equal-occupancy binning of a conditioning scalar, with transform
interpolation between neighbouring bins.

Per-bin 1D transforms are combined at evaluation time: a conditional value
m between two bin centers gets the convex combination of the two bins'
transform OUTPUTS (and derivatives), which keeps the fitted conditional
density continuous in m.  Below the first center / above the last one the
edge bin applies unweighted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FitError, InputError

# safeguarded-Newton settings for inverting an interpolated transform pair
_INVERT_RTOL = 1e-12
_INVERT_MAX_ITER = 200


@dataclass
class ConditionalBinning:
    """Bin edges (n_bins + 1) and centers (n_bins) over the conditional."""

    edges: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        self.edges = np.ascontiguousarray(self.edges, dtype=float)
        self.centers = np.ascontiguousarray(self.centers, dtype=float)
        if self.edges.ndim != 1 or self.edges.size < 3:
            raise ConfigError("need at least 2 bins (3 edges)")
        if self.centers.size != self.edges.size - 1:
            raise ConfigError("centers must have one entry per bin")
        if np.any(np.diff(self.edges) <= 0):
            raise InputError("bin edges must be strictly increasing")
        if np.any(self.centers <= self.edges[:-1]) or np.any(self.centers >= self.edges[1:]):
            raise InputError("bin centers must lie strictly inside their bins")

    @property
    def n_bins(self) -> int:
        return self.centers.size

    def assign(self, m):
        """Bin index for each conditional value (values clamped to range)."""
        m = np.asarray(m, dtype=float)
        return np.clip(np.searchsorted(self.edges, m, side="right") - 1, 0, self.n_bins - 1)

    def clamp(self, m):
        """Clamp conditionals to the trained range; returns (values, flag)."""
        m = np.asarray(m, dtype=float)
        clamped = np.clip(m, self.edges[0], self.edges[-1])
        return clamped, (m < self.edges[0]) | (m > self.edges[-1])

    def interp_weights(self, m):
        """Interpolation structure for conditionals: (lo, hi, t, clamped).

        The effective transform at m is (1 - t) * bin[lo] + t * bin[hi];
        t is exactly 0.0 at bin centers and outside the center range.
        """
        mc, clamped = self.clamp(m)
        c = self.centers
        lo = np.clip(np.searchsorted(c, mc, side="right") - 1, 0, self.n_bins - 1)
        hi = np.minimum(lo + 1, self.n_bins - 1)
        span = c[hi] - c[lo]
        safe = np.where(span > 0, span, 1.0)
        t = np.clip(np.where(span > 0, (mc - c[lo]) / safe, 0.0), 0.0, 1.0)
        return lo, hi, t, clamped


def build_binning(m_values, n_bins: int, min_occupancy: int = 2) -> ConditionalBinning:
    """Equal-occupancy bins over the conditional values.

    Interior edges sit midway between the order statistics that the cut
    separates, so training occupancies differ by at most one when the
    values are distinct.
    """
    m = np.asarray(m_values, dtype=float).ravel()
    if not np.all(np.isfinite(m)):
        raise InputError("conditional values must be finite")
    if n_bins < 2:
        raise ConfigError("n_bins must be at least 2")
    if m.size // n_bins < min_occupancy:
        raise FitError(f"{n_bins} bins over {m.size} samples leaves bins below "
                       f"the minimum occupancy of {min_occupancy}")
    if np.ptp(m) == 0.0:
        raise FitError("conditional values are all equal; cannot bin")

    s = np.sort(m)
    cuts = (np.arange(1, n_bins) * m.size) // n_bins
    interior = 0.5 * (s[cuts - 1] + s[cuts])
    # assign() puts a value equal to an edge in the upper bin, so an edge
    # must sit strictly above the last value of the bin below it.  The
    # midpoint of two adjacent floats can round down onto the lower one;
    # push such an edge up to the upper order statistic instead.
    interior = np.where(interior > s[cuts - 1], interior, s[cuts])
    edges = np.concatenate(([s[0]], interior, [s[-1]]))
    if np.any(np.diff(edges) <= 0):
        raise FitError("too many tied conditional values for the requested bin count")
    centers = 0.5 * (edges[:-1] + edges[1:])
    return ConditionalBinning(edges=edges, centers=centers)


# -- grouped evaluation helpers (shared with the flow) -----------------------

def eval_binned(transforms, bin_idx, y):
    """Evaluate transforms[bin_idx[i]] at y[i]; returns (psi, deriv)."""
    psi = np.empty_like(y)
    deriv = np.empty_like(y)
    for b in np.unique(bin_idx):
        mask = bin_idx == b
        psi[mask], deriv[mask] = transforms[b].transform(y[mask])
    return psi, deriv


def invert_binned(transforms, bin_idx, z):
    """Invert transforms[bin_idx[i]] at z[i]."""
    y = np.empty_like(z)
    for b in np.unique(bin_idx):
        mask = bin_idx == b
        y[mask] = transforms[b].inverse(z[mask])
    return y


def interpolated_transform(transforms, lo, hi, t, y):
    """Forward map through the bin-interpolated transform, elementwise.

    Returns (psi, deriv); derivatives are already clamped per transform,
    and a convex combination keeps the clamp.
    """
    psi, deriv = eval_binned(transforms, lo, y)
    mixed = t > 0
    if np.any(mixed):
        psi_hi, d_hi = eval_binned(transforms, hi[mixed], y[mixed])
        tm = t[mixed]
        psi[mixed] = (1.0 - tm) * psi[mixed] + tm * psi_hi
        deriv[mixed] = (1.0 - tm) * deriv[mixed] + tm * d_hi
    return psi, deriv


def interpolated_inverse(transforms, lo, hi, t, z):
    """Invert the bin-interpolated transform elementwise.

    The root of (1-t)*T_lo(y) + t*T_hi(y) = z is bracketed by the two
    single-bin inverses, then polished with safeguarded Newton.
    """
    y = invert_binned(transforms, lo, z)
    mixed = t > 0
    if not np.any(mixed):
        return y

    zm = z[mixed]
    tm = t[mixed]
    lom = lo[mixed]
    him = hi[mixed]
    y_lo = y[mixed]
    y_hi = invert_binned(transforms, him, zm)
    bracket_lo = np.minimum(y_lo, y_hi)
    bracket_hi = np.maximum(y_lo, y_hi)
    v = (1.0 - tm) * y_lo + tm * y_hi
    tol = _INVERT_RTOL * np.maximum(1.0, np.abs(zm))
    for _ in range(_INVERT_MAX_ITER):
        p, dp = interpolated_transform(transforms, lom, him, tm, v)
        f = p - zm
        if np.all(np.abs(f) <= tol):
            break
        bracket_hi = np.where(f > 0, np.minimum(bracket_hi, v), bracket_hi)
        bracket_lo = np.where(f < 0, np.maximum(bracket_lo, v), bracket_lo)
        step = v - f / dp
        mid = 0.5 * (bracket_lo + bracket_hi)
        inside = (step > bracket_lo) & (step < bracket_hi)
        v = np.where(inside, step, mid)
    y[mixed] = v
    return y


def interpolated_apply(transforms, binning: ConditionalBinning, y, m):
    """Public op: apply the per-bin transform family at conditional m.

    y may be scalar or array; m is broadcast against it.  Returns
    (psi, log_derivative).
    """
    if len(transforms) != binning.n_bins:
        raise InputError("need exactly one transform per bin")
    y_arr, m_arr = np.broadcast_arrays(np.asarray(y, dtype=float),
                                       np.asarray(m, dtype=float))
    shape = y_arr.shape
    y_flat = np.ascontiguousarray(y_arr, dtype=float).ravel()
    lo, hi, t, _ = binning.interp_weights(np.ravel(m_arr))
    psi, deriv = interpolated_transform(transforms, lo, hi, t, y_flat)
    log_deriv = np.log(deriv)
    if shape == ():
        return float(psi[0]), float(log_deriv[0])
    return psi.reshape(shape), log_deriv.reshape(shape)
