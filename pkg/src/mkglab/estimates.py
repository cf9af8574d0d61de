"""Monte-Carlo oracles for the quantitative estimates: the null-form symbol
bound, the spatial commutator bound, Sobolev product laws, the smoothing
operator's norm loss, the diamagnetic inequality, and the lack-of-smoothing
integral over the two-ball frequency configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, _crop_hat, _pad_hat, transform
from .norms import sobolev_norm
from .symbols import i_symbol_values


def _bracket(x):
    """Japanese bracket <x> = sqrt(1 + x^2)."""
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


@dataclass(frozen=True)
class FrequencyTriple:
    """Three spatial/temporal frequency pairs with vanishing spatial sum."""

    xi0: np.ndarray
    tau0: float
    xi1: np.ndarray
    tau1: float
    xi2: np.ndarray
    tau2: float

    def __post_init__(self):
        total = np.asarray(self.xi0) + np.asarray(self.xi1) + np.asarray(self.xi2)
        scale = max(
            np.linalg.norm(self.xi0), np.linalg.norm(self.xi1), np.linalg.norm(self.xi2), 1.0
        )
        if np.linalg.norm(total) > 1e-9 * scale:
            raise ValueError("spatial frequencies must sum to zero")

    @property
    def magnitudes(self):
        return tuple(
            float(np.linalg.norm(x)) for x in (self.xi0, self.xi1, self.xi2)
        )

    @property
    def cone_distances(self):
        """lambda_j = <|xi_j| - |tau_j|>, each at least 1."""
        mags = self.magnitudes
        taus = (self.tau0, self.tau1, self.tau2)
        return tuple(float(_bracket(m - abs(t))) for m, t in zip(mags, taus))


@dataclass
class EstimateReport:
    """Empirical constant for one estimate: max and quantiles of the ratios."""

    name: str
    samples: int
    max_ratio: float
    p50: float
    p99: float
    params: dict
    seed: int

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "samples": self.samples,
            "max_ratio": self.max_ratio,
            "p50": self.p50,
            "p99": self.p99,
            "params": self.params,
            "seed": self.seed,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def symbol_bound_ratio(triple: FrequencyTriple) -> float:
    """Null-form symbol against its bound:

        |xi1 ^ xi2| / (N0 N1 N2)^(1/2) (<tau0+tau1+tau2> + l0 + l1 + l2)^(1/2)

    with N_j = |xi_j| and l_j the cone distances.
    """
    wedge = float(np.linalg.norm(np.cross(triple.xi1, triple.xi2)))
    n0, n1, n2 = triple.magnitudes
    l0, l1, l2 = triple.cone_distances
    tau_sum = _bracket(triple.tau0 + triple.tau1 + triple.tau2)
    denom = np.sqrt(n0 * n1 * n2) * np.sqrt(float(tau_sum) + l0 + l1 + l2)
    if denom == 0.0:
        return 0.0
    return wedge / denom


def _ratio_report(name, ratios, params, seed) -> EstimateReport:
    ratios = np.asarray(ratios, dtype=float)
    return EstimateReport(
        name=name,
        samples=int(ratios.size),
        max_ratio=float(ratios.max()),
        p50=float(np.percentile(ratios, 50)),
        p99=float(np.percentile(ratios, 99)),
        params=params,
        seed=seed,
    )


def sample_symbol_bound(samples: int = 100_000, seed: int = 0) -> EstimateReport:
    """Max of symbol_bound_ratio over random triples.

    Magnitudes are log-uniform over dyadic decades; temporal frequencies sit
    near the characteristic cone, tau = +-|xi| + Cauchy(1), where the bound
    is tightest.
    """
    rng = np.random.default_rng(seed)
    mags = 2.0 ** rng.uniform(0.0, 10.0, size=(samples, 2))
    dirs = rng.standard_normal((samples, 2, 3))
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    xi1 = mags[:, 0, None] * dirs[:, 0]
    xi2 = mags[:, 1, None] * dirs[:, 1]
    xi0 = -(xi1 + xi2)
    n0 = np.linalg.norm(xi0, axis=1)
    n1 = mags[:, 0]
    n2 = mags[:, 1]
    signs = rng.choice([-1.0, 1.0], size=(samples, 3))
    noise = rng.standard_cauchy((samples, 3))
    taus = signs * np.stack([n0, n1, n2], axis=1) + noise
    lam = _bracket(np.stack([n0, n1, n2], axis=1) - np.abs(taus))
    wedge = np.linalg.norm(np.cross(xi1, xi2), axis=1)
    denom = np.sqrt(n0 * n1 * n2) * np.sqrt(
        _bracket(taus.sum(axis=1)) + lam.sum(axis=1)
    )
    ratios = np.where(denom > 0, wedge / denom, 0.0)
    return _ratio_report("symbol_bound", ratios, {}, seed)


def commutator_l2_ratio(
    v: ScalarField, w: ScalarField, s: float, N: float, M: float, R: float = 2.0
) -> float:
    """L2 size of I(vw) - v Iw against M^-1 m(M) |v|_inf |w|_L2.

    v must be band-limited to |k| <= R, w to M/2 <= |k| <= 2M with M >= N.
    The product is evaluated alias-free on the doubled grid, where the
    symbol is applied at the true wavenumbers.
    """
    grid = v.grid
    kabs = grid.kabs
    tol = 1e-10 * grid.dk
    vh, wh = v.hat, w.hat
    if np.max(np.abs(vh[kabs > R + tol])) > 1e-12 * max(np.max(np.abs(vh)), 1e-300):
        raise ValueError(f"v has content beyond |k| <= R = {R}")
    w_off = (kabs < M / 2 - tol) | (kabs > 2 * M + tol)
    if np.max(np.abs(wh[w_off])) > 1e-12 * max(np.max(np.abs(wh)), 1e-300):
        raise ValueError(f"w has content outside M/2 <= |k| <= 2M, M = {M}")
    if M < N:
        raise ValueError(f"dyadic band M = {M} must be at least the threshold N = {N}")

    n = grid.n
    fine = Grid(2 * n, grid.L)
    m_fine = i_symbol_values(fine.kabs, s, N)
    v_f = transform(_pad_hat(vh, n), "inv")
    w_f = transform(_pad_hat(wh, n), "inv")
    vw_hat = transform(v_f * w_f, "fwd")
    Iw_f = transform(m_fine * transform(w_f, "fwd"), "inv")
    diff_hat = m_fine * vw_hat - transform(v_f * Iw_f, "fwd")
    num = float(np.sqrt(grid.volume * np.sum(np.abs(diff_hat) ** 2)))
    m_at_M = float(i_symbol_values(np.array([float(M)]), s, N)[0])
    denom = (m_at_M / M) * float(np.max(np.abs(v.values))) * w.l2()
    return num / denom


def _random_shell_field(grid: Grid, k_lo: float, k_hi: float, rng, amplitude=1.0) -> ScalarField:
    """Gaussian field with flat spectrum on the shell k_lo <= |k| <= k_hi."""
    mask = (grid.kabs >= k_lo) & (grid.kabs <= k_hi)
    hat = np.zeros((grid.n,) * 3, dtype=np.complex128)
    cnt = int(mask.sum())
    if cnt == 0:
        raise ValueError(f"empty shell [{k_lo}, {k_hi}] on grid n={grid.n}")
    hat[mask] = amplitude * (rng.standard_normal(cnt) + 1j * rng.standard_normal(cnt))
    return ScalarField.from_hat(grid, hat)


def sample_commutator(
    grid: Grid,
    s: float,
    N: float,
    M_values=(1, 2, 4),
    samples: int = 20,
    seed: int = 0,
    R: float = 2.0,
) -> dict:
    """Empirical commutator constants per dyadic band: {M: EstimateReport}."""
    out = {}
    for mult in M_values:
        M = float(N * mult)
        rng = np.random.default_rng(seed)
        ratios = []
        for _ in range(samples):
            v = _random_shell_field(grid, 0.0, R, rng)
            w = _random_shell_field(grid, M / 2, min(2 * M, grid.k_resolved), rng)
            ratios.append(commutator_l2_ratio(v, w, s, N, M, R=R))
        out[M] = _ratio_report(
            "commutator_l2", ratios, {"s": s, "N": N, "M": M, "R": R}, seed
        )
    return out


def product_norm_ratio(
    f: ScalarField, g: ScalarField, s: float, s1: float, s2: float,
    homogeneous: bool = False,
) -> float:
    """|fg|_{H^s} / (|f|_{H^s1} |g|_{H^s2}) with the product alias-free.

    Exponents must satisfy s1 + s2 >= 0, s <= min(s1, s2), s < s1 + s2 - 3/2.
    Norms use the inhomogeneous weight <k> by default; homogeneous negative
    orders are only defined for mean-free products on a periodic box.
    """
    if s1 + s2 < 0:
        raise ValueError(f"need s1 + s2 >= 0, got {s1} + {s2}")
    if s > min(s1, s2):
        raise ValueError(f"need s <= min(s1, s2), got s={s}, s1={s1}, s2={s2}")
    if not s < s1 + s2 - 1.5:
        raise ValueError(f"need s < s1 + s2 - 3/2, got s={s}, s1={s1}, s2={s2}")
    grid = f.grid
    fine = Grid(2 * grid.n, grid.L)
    f_fine = transform(_pad_hat(f.hat, grid.n), "inv")
    g_fine = transform(_pad_hat(g.hat, grid.n), "inv")
    prod = ScalarField(fine, f_fine * g_fine)
    num = sobolev_norm(prod, s, homogeneous=homogeneous)
    den = sobolev_norm(f, s1) * sobolev_norm(g, s2)
    if den == 0.0:
        raise ValueError("zero factor")
    return num / den


def sample_product_norm(
    grid: Grid, s: float, s1: float, s2: float, samples: int = 200, seed: int = 0,
    k_hi: float | None = None,
) -> EstimateReport:
    """Max product-law ratio over random pairs with spectrum up to k_hi.

    k_hi defaults to the resolved band; pass a fixed value to compare the
    constant across grid resolutions.
    """
    rng = np.random.default_rng(seed)
    if k_hi is None:
        k_hi = grid.k_resolved
    if k_hi > grid.k_resolved:
        raise ValueError(f"k_hi={k_hi} exceeds the resolved band {grid.k_resolved:.4g}")
    ratios = []
    for _ in range(samples):
        f = _random_shell_field(grid, 0.0, k_hi, rng)
        g = _random_shell_field(grid, 0.0, k_hi, rng)
        ratios.append(product_norm_ratio(f, g, s, s1, s2))
    return _ratio_report(
        "product_norm", ratios, {"s": s, "s1": s1, "s2": s2, "n": grid.n, "k_hi": k_hi}, seed
    )


def i_loss_ratio(u: ScalarField, s: float, N: float) -> float:
    """|Iu|_{H^1} / |u|_{H^s}: between a constant and a constant times N^(1-s)."""
    den = sobolev_norm(u, s)
    if den == 0.0:
        raise ValueError("zero field")
    grid = u.grid
    m = i_symbol_values(grid.kabs, s, N)
    Iu = ScalarField.from_hat(grid, m * u.hat)
    return sobolev_norm(Iu, 1.0) / den


def sample_i_loss(
    grid: Grid, s: float, N: float, samples: int = 200, seed: int = 0
) -> EstimateReport:
    """Max of i_loss_ratio / N^(1-s) over random fields up to the resolved band."""
    rng = np.random.default_rng(seed)
    scale = float(N) ** (1.0 - s)
    ratios = [
        i_loss_ratio(_random_shell_field(grid, 0.0, grid.k_resolved, rng), s, N) / scale
        for _ in range(samples)
    ]
    return _ratio_report("i_loss", ratios, {"s": s, "N": N, "n": grid.n}, seed)


def diamagnetic_gap(phi: ScalarField, A, floor: float = 1e-6) -> float:
    """Pointwise margin min_j,x (|D_j phi| - |d_j |phi||), away from zeros of phi.

    The derivative of |phi| is evaluated through d_j|phi| = Re(conj(phi) d_j phi)/|phi|,
    exact wherever phi does not vanish; points with |phi| < floor are skipped.
    """
    grid = phi.grid
    kx, ky, kz = grid.k
    ph = phi.hat
    grads = transform(np.stack([1j * kx * ph, 1j * ky * ph, 1j * kz * ph]), "inv")
    absphi = np.abs(phi.values)
    mask = absphi >= floor
    if not mask.any():
        raise ValueError("phi vanishes (below floor) on the whole grid")
    gap = np.inf
    a_vals = A.values if hasattr(A, "values") else np.asarray(A)
    for j in range(3):
        cov = np.abs(grads[j] + 1j * a_vals[j].real * phi.values)
        dabs = np.abs((np.conj(phi.values) * grads[j]).real) / np.where(mask, absphi, 1.0)
        gap = min(gap, float(np.min((cov - dabs)[mask])))
    return gap


@dataclass(frozen=True)
class NoSmoothingResult:
    value: float
    stderr: float
    samples: int
    N: float
    eps: float
    s: float


def _time_cos_quadrature(a, b, c, nodes, weights):
    """Integral over [0,1] of cos(a t) cos(b t) cos(c t), Gauss-Legendre."""
    t = nodes[:, None]
    vals = np.cos(a[None, :] * t) * np.cos(b[None, :] * t) * np.cos(c[None, :] * t)
    return weights @ vals


def nosmoothing_integral(
    N: float,
    eps: float,
    s: float,
    samples: int = 1_000_000,
    seed: int = 0,
    f_center_shift=None,
    time_nodes: int = 256,
) -> NoSmoothingResult:
    """Monte-Carlo value of the trilinear interaction integral

        int_0^1 int int cos(t|eta|) cos(t|xi|) cos(t|xi+eta|)
                 [xi . A(eta)] phi(xi) f(-xi-eta) dxi deta dt

    over xi in the unit ball at N e1 and eta in the 1/100-ball at e2/10, with
    phi = eps N^(-s), f = eps N^(s-1) on their balls and A = (1, -eta1/eta2, 0)
    on its ball. The time integral uses Gauss-Legendre quadrature (>= 64
    nodes). f_center_shift displaces f's ball (a disjoint-support control).
    """
    if N < 50:
        raise ValueError(f"N must be at least 50, got {N}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0,1), got {eps}")
    if samples < 100_000:
        raise ValueError(f"need at least 1e5 samples for a stable estimate, got {samples}")
    if time_nodes < 64:
        raise ValueError(f"need at least 64 time quadrature nodes, got {time_nodes}")

    rng = np.random.default_rng(seed)
    nodes, weights = np.polynomial.legendre.leggauss(time_nodes)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights

    xi_center = np.array([N, 0.0, 0.0])
    eta_center = np.array([0.0, 0.1, 0.0])
    f_center = -xi_center if f_center_shift is None else -xi_center + np.asarray(f_center_shift)
    vol = (4.0 * np.pi / 3.0) * (4.0 * np.pi / 3.0) * (0.01) ** 3
    phi_amp = eps * N ** (-s)
    f_amp = eps * N ** (s - 1.0)

    def ball(rng, count, center, radius):
        u = rng.standard_normal((count, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = radius * rng.random(count) ** (1.0 / 3.0)
        return center[None, :] + u * r[:, None]

    total = 0.0
    total_sq = 0.0
    done = 0
    chunk = 65536
    while done < samples:
        count = min(chunk, samples - done)
        xi = ball(rng, count, xi_center, 1.0)
        eta = ball(rng, count, eta_center, 0.01)
        inside = np.linalg.norm(xi + eta + f_center, axis=1) <= 1.0
        vals = np.zeros(count)
        if inside.any():
            xs, es = xi[inside], eta[inside]
            a = np.linalg.norm(es, axis=1)
            b = np.linalg.norm(xs, axis=1)
            c = np.linalg.norm(xs + es, axis=1)
            tint = _time_cos_quadrature(a, b, c, nodes, weights)
            coupling = xs[:, 0] - xs[:, 1] * (es[:, 0] / es[:, 1])
            vals[inside] = tint * coupling * phi_amp * f_amp
        total += float(vals.sum())
        total_sq += float((vals**2).sum())
        done += count

    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return NoSmoothingResult(
        value=mean * vol,
        stderr=float(np.sqrt(var / samples) * vol),
        samples=samples,
        N=float(N),
        eps=float(eps),
        s=float(s),
    )
