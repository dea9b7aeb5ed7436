"""Sampling streams, chi-squared quantiles, and adaptive-run constants."""

import math
import zlib

import numpy as np

from .errors import DomainError

_MAX_TERMS = 1000


def _gammainc_lower(a, x):
    """Regularized lower incomplete gamma P(a, x), vectorized.

    Series representation for x < a + 1, continued fraction (modified Lentz)
    otherwise; the usual split from the numerical-recipes tradition.
    """
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    a, x = np.broadcast_arrays(a, x)
    out = np.zeros(a.shape)
    lg = np.vectorize(math.lgamma)(a) if a.size else np.zeros(a.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        prefactor = np.exp(-x + a * np.log(x) - lg)
    prefactor = np.where(x > 0, prefactor, 0.0)

    series = (x < a + 1.0) & (x > 0)
    if np.any(series):
        aa, xx = a[series], x[series]
        term = 1.0 / aa
        total = term.copy()
        ap = aa.copy()
        active = np.ones(aa.shape, dtype=bool)
        for _ in range(_MAX_TERMS):
            ap += 1.0
            term = term * xx / ap
            total = np.where(active, total + term, total)
            active &= np.abs(term) >= np.abs(total) * 1e-17
            if not active.any():
                break
        out[series] = total * prefactor[series]

    cf = (x >= a + 1.0) & (x > 0)
    if np.any(cf):
        aa, xx = a[cf], x[cf]
        tiny = 1e-300
        b = xx + 1.0 - aa
        c = np.full(aa.shape, 1.0 / tiny)
        d = 1.0 / np.where(np.abs(b) < tiny, tiny, b)
        h = d.copy()
        active = np.ones(aa.shape, dtype=bool)
        for i in range(1, _MAX_TERMS + 1):
            an = -i * (i - aa)
            b = b + 2.0
            d = an * d + b
            d = np.where(np.abs(d) < tiny, tiny, d)
            c = b + an / c
            c = np.where(np.abs(c) < tiny, tiny, c)
            d = 1.0 / d
            delta = d * c
            h = np.where(active, h * delta, h)
            active &= np.abs(delta - 1.0) >= 1e-17
            if not active.any():
                break
        out[cf] = 1.0 - prefactor[cf] * h

    return np.clip(out, 0.0, 1.0)


def chi2_cdf(k, x):
    """CDF of a chi-squared variable with k degrees of freedom."""
    return _gammainc_lower(np.asarray(k, dtype=np.float64) / 2.0,
                           np.asarray(x, dtype=np.float64) / 2.0)


def _ndtri(p):
    """Acklam's rational approximation to the standard normal quantile."""
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    p = np.asarray(p, dtype=np.float64)
    out = np.empty(p.shape)
    lo = p < 0.02425
    hi = p > 1 - 0.02425
    mid = ~(lo | hi)
    if lo.any():
        q = np.sqrt(-2 * np.log(p[lo]))
        out[lo] = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    if hi.any():
        q = np.sqrt(-2 * np.log(1 - p[hi]))
        out[hi] = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        out[mid] = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)
    return out


def chi2_inv_cdf(k, p):
    """Quantile of the chi-squared distribution with k degrees of freedom.

    Bracketed Newton iteration on the regularized lower incomplete gamma,
    started at the Wilson-Hilferty approximation; bisection on the bracket
    whenever a Newton step leaves it. Accepts scalars or arrays.
    """
    k_arr = np.atleast_1d(np.asarray(k, dtype=np.float64))
    p_arr = np.atleast_1d(np.asarray(p, dtype=np.float64))
    k_arr, p_arr = np.broadcast_arrays(k_arr.copy(), p_arr.copy())
    if np.any(k_arr < 1):
        raise DomainError("degrees of freedom must be >= 1")
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)):
        raise DomainError("probability must lie strictly inside (0, 1)")

    a = k_arr / 2.0
    lgam = np.vectorize(math.lgamma)(a)
    z = _ndtri(p_arr)
    wh = k_arr * (1.0 - 2.0 / (9.0 * k_arr) + z * np.sqrt(2.0 / (9.0 * k_arr))) ** 3
    # leading-order inversion of the series head, exact as p -> 0; rescues
    # the cases where the Wilson-Hilferty cube goes nonpositive
    head = 2.0 * np.exp((np.log(p_arr) + np.log(a) + lgam) / a)
    x = np.where(wh > 0.01 * k_arr, wh, np.minimum(head, k_arr))
    x = np.maximum(x, 1e-300)

    lo = np.zeros_like(x)
    hi = np.maximum(2.0 * x, k_arr + 10.0)
    for _ in range(200):
        need = chi2_cdf(k_arr, hi) < p_arr
        if not need.any():
            break
        hi = np.where(need, hi * 2.0, hi)

    for _ in range(60):
        f = chi2_cdf(k_arr, x) - p_arr
        lo = np.where(f < 0, x, lo)
        hi = np.where(f > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            logpdf = (a - 1.0) * np.log(x / 2.0) - x / 2.0 - lgam - math.log(2.0)
            step = f / np.exp(logpdf)
        cand = x - step
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        if np.all(np.abs(cand - x) <= 1e-14 * np.maximum(1.0, np.abs(x))):
            x = cand
            break
        x = cand

    # bisection cleanup for any stragglers Newton left behind
    miss = np.abs(chi2_cdf(k_arr, x) - p_arr) > 1e-11
    if miss.any():
        klo, kp = k_arr[miss], p_arr[miss]
        blo, bhi = lo[miss], hi[miss]
        for _ in range(200):
            mid = 0.5 * (blo + bhi)
            below = chi2_cdf(klo, mid) < kp
            blo = np.where(below, mid, blo)
            bhi = np.where(below, bhi, mid)
            if np.all((bhi - blo) <= 1e-12 * np.maximum(1.0, bhi)):
                break
        x[miss] = 0.5 * (blo + bhi)
    return float(x[0]) if np.isscalar(k) and np.isscalar(p) else x


def alpha_k(k, delta):
    """Underestimation factor for the running Frobenius-norm estimate.

    alpha_k = F^{-1}(delta) / k for the chi-squared CDF with k degrees of
    freedom; strictly increasing in k and converging to 1.
    """
    q = chi2_inv_cdf(k, delta)
    return q / np.asarray(k, dtype=np.float64) if not np.isscalar(k) else q / float(k)


def c_eps_delta(eps, delta):
    """Sample-count constant 4 * eps^-2 * ln(2/delta) for (eps, delta) runs."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    return 4.0 * eps ** (-2.0) * math.log(2.0 / delta)


def percentile(values, p):
    """Nearest-rank percentile: the ceil(p/100 * n)-th order statistic."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("percentile of an empty list")
    if not 0 <= p <= 100:
        raise ValueError("percentile rank must lie in [0, 100]")
    rank = max(1, math.ceil(p / 100.0 * values.size))
    return float(np.sort(values)[rank - 1])


def _spawn_key(tags):
    key = []
    for t in tags:
        if isinstance(t, (int, np.integer)):
            key.append(int(t) & 0xFFFFFFFF)
        else:
            key.append(zlib.crc32(str(t).encode()))
    return tuple(key)


_TILE = 256


class SampleStream:
    """Reproducible random blocks keyed by (seed, purpose path, index).

    Built on the counter-based Philox generator: the block at a given index
    is the same whether blocks are drawn sequentially or in parallel batches,
    and child streams (via `child`) are independent of their siblings.
    Per-sample columns are cut from fixed-width tiles, so batching never
    changes the values a sample index receives.
    """

    def __init__(self, seed, dist="gaussian", _path=()):
        if dist not in ("gaussian", "rademacher"):
            raise ValueError(f"unknown distribution {dist!r}")
        self.seed = int(seed)
        self.dist = dist
        self._path = tuple(_path)
        self._counter = 0
        self._tile_cache = None  # (index, rows, array) of the last tile cut

    def child(self, *tags):
        return SampleStream(self.seed, self.dist, self._path + tags)

    def generator(self, index=0):
        """A free-running Generator for this stream position."""
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=_spawn_key(self._path + (index,)))
        return np.random.Generator(np.random.Philox(ss))

    def block(self, index, rows, cols=1):
        """The deterministic rows x cols block at the given index."""
        gen = self.generator(index)
        if self.dist == "gaussian":
            return gen.standard_normal((rows, cols))
        return gen.integers(0, 2, size=(rows, cols)).astype(np.float64) * 2.0 - 1.0

    def vector(self, index, rows):
        return self.block(index, rows, 1)[:, 0]

    def columns(self, rows, start, count):
        """Columns start..start+count-1 of the per-sample stream.

        Column i always comes from tile i // 256, column i % 256, whatever
        the batching, so parallel and sequential consumption agree.
        """
        pieces = []
        first_tile = start // _TILE
        last_tile = (start + count - 1) // _TILE
        for t in range(first_tile, last_tile + 1):
            if self._tile_cache and self._tile_cache[:2] == (t, rows):
                tile = self._tile_cache[2]
            else:
                tile = self.block(t, rows, _TILE)
                self._tile_cache = (t, rows, tile)
            lo = max(start, t * _TILE) - t * _TILE
            hi = min(start + count, (t + 1) * _TILE) - t * _TILE
            pieces.append(tile[:, lo:hi])
        return np.concatenate(pieces, axis=1)

    def draw(self, rows, cols=1):
        """Sequential API: draw the next block, advancing the counter."""
        out = self.block(self._counter, rows, cols)
        self._counter += 1
        return out
