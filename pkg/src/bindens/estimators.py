"""Probability estimators over the {-1,+1}^n hypercube.

Every estimator family here has the same shape: a symmetric kernel
matrix Q whose entry (i, j) depends only on the XOR of the zero-based
cell indexes, applied to the empirical cell weights. The families are

* linear: Q = (1/2^n) W diag(b) W for a shrinkage vector b with b_1 = 1
  and entries in [0, 1];
* transformed: f applied elementwise to W diag(b) W, renormalized;
* waak: the weighted product-form kernel with per-coordinate weights w
  and base gamma, evaluated in log space so it works at n in the tens of
  thousands;
* aa_classic: the classic single-parameter categorical kernel, expressed
  as a waak with unit weights and gamma = sqrt(lam / (1 - lam));
* mixture: a convex combination of any of the above.

Element access is O(#nonzero(b)) or O(n) without ever touching a 2^n
buffer; dense materialization is a separate, capacity-guarded path.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .backend import xor_dot
from .errors import (
    CapacityError,
    ConfigError,
    DataError,
    DegenerateNormalizerError,
    NumericError,
)
from .shrinkage import DENSE, SINGLE_INTERACTION, ShrinkageSpec
from .transforms import (
    CLOSED_FORM_EXPONENTIAL,
    LINEAR_TRIVIAL,
    NormalizerResult,
    Transform,
    apply,
    normalizer,
)
from .walsh import MAX_DENSE_N, as_point, fwht, index_of_point

__all__ = [
    "MAX_FULL_N",
    "VARIANTS",
    "CountsVector",
    "DensityEstimate",
    "EstimatorConfig",
    "clamp_and_renormalize",
    "counts_from_observations",
    "element_linear",
    "element_mixture",
    "element_transformed",
    "element_waak",
    "estimate_at",
    "estimate_full",
    "matrix_element",
    "shrinkage_optimal",
    "squared_element_general",
    "squared_element_linear",
    "squared_element_waak",
    "squared_matrix_element",
]

VARIANTS = ("linear", "transformed", "waak", "aa_classic", "mixture")

# Largest n for which the full 2^n estimate vector may be materialized.
MAX_FULL_N = 20

_LOG2 = math.log(2.0)


# ---------------------------------------------------------------------------
# observation counts


@dataclass(frozen=True, eq=False)
class CountsVector:
    """Empirical cell counts stored sparsely in ascending index order."""

    n: int
    total: int
    cells: tuple

    @classmethod
    def from_cells(cls, n, mapping):
        """Build from {cell index: positive count}; indexes may be huge."""
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise DataError(f"dimension must be a positive integer, got {n!r}")
        n = int(n)
        if not mapping:
            raise DataError("counts must cover at least one cell")
        limit = 1 << n
        cleaned = []
        for idx, cnt in mapping.items():
            idx = int(idx)
            if idx < 1 or idx > limit:
                raise DataError(f"cell index {idx} out of range [1, 2^{n}]")
            if not isinstance(cnt, (int, np.integer)) or cnt < 1:
                raise DataError(f"count for cell {idx} must be a positive integer, got {cnt!r}")
            cleaned.append((idx, int(cnt)))
        cleaned.sort()
        total = sum(cnt for _, cnt in cleaned)
        return cls(n=n, total=total, cells=tuple(cleaned))

    @cached_property
    def observations(self):
        """Cell index of each observation in canonical (ascending) order."""
        out = []
        for idx, cnt in self.cells:
            out.extend([idx] * cnt)
        return tuple(out)

    def count_of(self, cell):
        return self._lookup.get(int(cell), 0)

    @cached_property
    def _lookup(self):
        return dict(self.cells)

    def to_dense(self):
        """Full empirical weight vector p with p[j-1] = count_j / total."""
        if self.n > MAX_DENSE_N:
            raise CapacityError(
                f"cannot materialize 2^{self.n} cell weights (limit n={MAX_DENSE_N})"
            )
        out = np.zeros(1 << self.n)
        for idx, cnt in self.cells:
            out[idx - 1] = cnt / self.total
        return out


def counts_from_observations(points):
    """Aggregate raw {-1,+1} observation rows into a CountsVector."""
    rows = list(points)
    if not rows:
        raise DataError("no observations provided")
    counter = {}
    n = None
    for r, row in enumerate(rows):
        try:
            arr = as_point(row)
        except ValueError as exc:
            raise DataError(f"observation {r}: {exc}") from exc
        if n is None:
            n = arr.size
        elif arr.size != n:
            raise DataError(f"observation {r} has {arr.size} coordinates, expected {n}")
        idx = index_of_point(arr)
        counter[idx] = counter.get(idx, 0) + 1
    return CountsVector.from_cells(n, counter)


def shrinkage_optimal(q, N):
    """Risk-minimizing scalar shrinkage toward the uniform baseline.

    For a single spectral coefficient q in [-1, 1] estimated from N
    samples, the squared-error optimum is N q^2 / ((N-1) q^2 + 1),
    which always lands in [0, 1] and is 1 exactly at |q| = 1.
    """
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ValueError(f"sample count must be a positive integer, got {N!r}")
    q = float(q)
    if not -1.0 <= q <= 1.0:
        raise ValueError(f"coefficient must lie in [-1, 1], got {q}")
    return float(N * q * q / ((N - 1) * q * q + 1.0))


# ---------------------------------------------------------------------------
# estimator configurations


def _as_weight_vector(w):
    try:
        return ShrinkageSpec.single_interaction(w)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _validate_linear_shrinkage(shrinkage):
    if not isinstance(shrinkage, ShrinkageSpec):
        raise ConfigError("linear estimator needs a ShrinkageSpec")
    if shrinkage.form == SINGLE_INTERACTION:
        raise ConfigError(
            "single-interaction shrinkage has leading coefficient 0; the linear estimator requires it to be 1"
        )
    if shrinkage.first_coefficient() != 1.0:
        raise ConfigError("linear estimator requires the leading shrinkage coefficient to equal 1")
    for idx, val in shrinkage.nonzero_items():
        if not 0.0 <= val <= 1.0:
            raise ConfigError(
                f"linear shrinkage coefficient {val} at index {idx} lies outside [0, 1]"
            )


def _validate_components(components):
    comps = []
    for item in components:
        try:
            weight, cfg = item
        except (TypeError, ValueError) as exc:
            raise ConfigError("mixture components must be (weight, config) pairs") from exc
        weight = float(weight)
        if not isinstance(cfg, EstimatorConfig):
            raise ConfigError("mixture components must wrap EstimatorConfig instances")
        if cfg.variant == "mixture":
            raise ConfigError("mixtures cannot nest")
        if not weight > 0.0:
            raise ConfigError(f"mixture weights must be positive, got {weight}")
        comps.append((weight, cfg))
    if not comps:
        raise ConfigError("mixture needs at least one component")
    total = math.fsum(weight for weight, _ in comps)
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"mixture weights must sum to 1, got {total!r}")
    dims = {cfg.n for _, cfg in comps}
    if len(dims) > 1:
        raise ConfigError(f"mixture components disagree on dimension: {sorted(dims)}")
    return tuple(comps)


@dataclass(frozen=True, eq=False)
class EstimatorConfig:
    """One fully specified estimator; build through the classmethods.

    Instances are immutable and carry a private cache so repeated element
    evaluation against the same configuration reuses precomputed state.
    """

    variant: str
    shrinkage: ShrinkageSpec = None
    transform: Transform = None
    gamma: float = None
    lam: float = None
    components: tuple = None
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def linear(cls, shrinkage):
        _validate_linear_shrinkage(shrinkage)
        return cls(variant="linear", shrinkage=shrinkage)

    @classmethod
    def transformed(cls, shrinkage, transform):
        if not isinstance(shrinkage, ShrinkageSpec):
            raise ConfigError("transformed estimator needs a ShrinkageSpec")
        if not isinstance(transform, Transform):
            raise ConfigError("transformed estimator needs a Transform")
        return cls(variant="transformed", shrinkage=shrinkage, transform=transform)

    @classmethod
    def waak(cls, w, gamma):
        gamma = float(gamma)
        if not math.isfinite(gamma) or gamma < 1.0:
            raise ConfigError(f"weighted kernel base must satisfy gamma >= 1, got {gamma}")
        return cls(variant="waak", shrinkage=_as_weight_vector(w), gamma=gamma)

    @classmethod
    def aa_classic(cls, n, lam):
        lam = float(lam)
        if not 0.5 <= lam < 1.0:
            raise ConfigError(f"classic kernel smoothing must satisfy 0.5 <= lam < 1, got {lam}")
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ConfigError(f"dimension must be a positive integer, got {n!r}")
        gamma = math.sqrt(lam / (1.0 - lam))
        return cls(
            variant="aa_classic",
            shrinkage=ShrinkageSpec.single_interaction(np.ones(int(n))),
            gamma=gamma,
            lam=lam,
        )

    @classmethod
    def mixture(cls, components):
        return cls(variant="mixture", components=_validate_components(components))

    @property
    def n(self):
        if self.shrinkage is not None:
            return self.shrinkage.n
        return self.components[0][1].n


# ---------------------------------------------------------------------------
# evaluation states (internal)


class _SignedSumState:
    """Nonzero shrinkage entries packed into 64-bit words.

    Element evaluation reduces to sum_k b_k * (-1)^popcount(key_k & mask)
    where mask is the XOR of the zero-based cell indexes; packing keys
    into a (count, words) table keeps that a handful of vectorized ops
    whose cost barely moves with n. Single-interaction shrinkage gets a
    coordinate-aligned route: its keys are one-hot, so the parities are
    just the mask bits.
    """

    def __init__(self, shrinkage):
        self.n = shrinkage.n
        self.limit = 1 << self.n
        self.single = shrinkage.form == SINGLE_INTERACTION
        if self.single:
            self.nbytes = (self.n + 7) // 8
            self.values = shrinkage.w.copy()
            self.squared_values = self.values * self.values
            self.keys = None
            return
        self.words = max(1, (self.n + 63) // 64)
        items = shrinkage.nonzero_items()
        self.values = np.array([val for _, val in items], dtype=np.float64)
        self.squared_values = self.values * self.values
        self.keys = np.empty((len(items), self.words), dtype=np.uint64)
        for r, (idx, _) in enumerate(items):
            self.keys[r] = np.frombuffer(
                int(idx - 1).to_bytes(self.words * 8, "little"), dtype=np.uint64
            )

    def signed_sum(self, mask, values):
        if self.single:
            raw = np.frombuffer(int(mask).to_bytes(self.nbytes, "little"), dtype=np.uint8)
            bits = np.unpackbits(raw, bitorder="little")[: self.n].view(np.bool_)
            return float(values.sum() - 2.0 * values[bits].sum())
        mask_words = np.frombuffer(
            int(mask).to_bytes(self.words * 8, "little"), dtype=np.uint64
        )
        parity = np.bitwise_count(self.keys & mask_words).sum(axis=1) & 1
        return float(np.dot(values, 1.0 - 2.0 * parity))


class _WaakState:
    """Log-space product-form kernel state for weights w and base gamma."""

    def __init__(self, w, gamma):
        arr = np.asarray(w, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("kernel weights must form a nonempty 1-d vector")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("kernel weights must lie in [0, 1]")
        gamma = float(gamma)
        if not math.isfinite(gamma) or gamma < 1.0:
            raise ValueError(f"kernel base must satisfy gamma >= 1, got {gamma}")
        self.w = arr.copy()
        self.gamma = gamma
        self.n = int(arr.size)
        self.limit = 1 << self.n
        self.nbytes = (self.n + 7) // 8
        t = self.w * math.log(gamma)
        self.t = t
        self.t_total = float(t.sum())
        # log(gamma^w + gamma^-w) per coordinate; their sum is log Z
        self.log_z = float(np.logaddexp(t, -t).sum())
        t2 = 2.0 * t
        self.log_sq_factors = np.logaddexp(t2, -t2)
        self.log_sq_base = float(self.log_sq_factors.sum())

    def disagreement_bits(self, i, j):
        mask = (int(i) - 1) ^ (int(j) - 1)
        raw = np.frombuffer(mask.to_bytes(self.nbytes, "little"), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[: self.n].view(np.bool_)

    def element(self, i, j):
        bits = self.disagreement_bits(i, j)
        exponent = self.t_total - 2.0 * float(self.t[bits].sum())
        return math.exp(exponent - self.log_z)

    def squared(self, i, j):
        bits = self.disagreement_bits(i, j)
        swapped = float(np.sum(_LOG2 - self.log_sq_factors[bits]))
        return math.exp(self.log_sq_base + swapped - 2.0 * self.log_z)

    def normalizer_result(self):
        value = math.exp(self.log_z) if self.log_z < 700.0 else math.inf
        return NormalizerResult(value=value, method=CLOSED_FORM_EXPONENTIAL, log_value=self.log_z)


@lru_cache(maxsize=256)
def _signed_state(shrinkage):
    return _SignedSumState(shrinkage)


@lru_cache(maxsize=256)
def _normalizer_cached(transform, shrinkage):
    return normalizer(transform, shrinkage)


@lru_cache(maxsize=256)
def _waak_state_cached(w_bytes, size, gamma):
    w = np.frombuffer(w_bytes, dtype=np.float64, count=size)
    return _WaakState(w, gamma)


def _waak_state(w, gamma):
    arr = np.ascontiguousarray(np.asarray(w, dtype=np.float64))
    return _waak_state_cached(arr.tobytes(), int(arr.size), float(gamma))


def _check_normalizer(norm):
    if not norm.value > 0:
        raise DegenerateNormalizerError(
            f"normalization constant {norm.value} is not positive"
        )


def _check_cell(idx, limit, n):
    if not isinstance(idx, (int, np.integer)) or isinstance(idx, bool):
        raise ValueError(f"cell index must be an integer, got {type(idx).__name__}")
    if idx < 1 or idx > limit:
        raise ValueError(f"cell index {idx} out of range [1, 2^{n}]")


@lru_cache(maxsize=64)
def _linear_profile(shrinkage):
    """fwht(b) / 2^n; Q[i, j] is this vector at the XOR of the indexes."""
    return fwht(shrinkage.to_dense()) * math.ldexp(1.0, -shrinkage.n)


@lru_cache(maxsize=64)
def _squared_linear_profile(shrinkage):
    dense = shrinkage.to_dense()
    return fwht(dense * dense) * math.ldexp(1.0, -shrinkage.n)


@lru_cache(maxsize=64)
def _transformed_profile(shrinkage, transform):
    """f(fwht(b)) / Z as a dense row; capacity-guarded by to_dense."""
    raw = fwht(shrinkage.to_dense())
    values = apply(transform, raw)
    norm = _normalizer_cached(transform, shrinkage)
    _check_normalizer(norm)
    if math.isfinite(norm.value):
        return values / norm.value
    # Z overflowed float64 (closed-form exponential at extreme gamma);
    # positive entries survive in log space, the rest collapse to 0.
    out = np.zeros_like(values)
    pos = values > 0
    out[pos] = np.exp(np.log(values[pos]) - norm.log_value)
    return out


@lru_cache(maxsize=64)
def _waak_profile_cached(w_bytes, size, gamma):
    state = _waak_state_cached(w_bytes, size, gamma)
    spec = ShrinkageSpec.single_interaction(np.frombuffer(w_bytes, dtype=np.float64, count=size))
    raw = fwht(spec.to_dense())
    return np.exp(raw * math.log(state.gamma) - state.log_z)


def _waak_profile(w, gamma):
    arr = np.ascontiguousarray(np.asarray(w, dtype=np.float64))
    return _waak_profile_cached(arr.tobytes(), int(arr.size), float(gamma))


# ---------------------------------------------------------------------------
# element-level evaluation


def element_linear(i, j, shrinkage):
    """Entry (i, j) of (1/2^n) W diag(b) W in O(#nonzero(b)).

    With b = e_1 this is the uniform estimator (constant 1/2^n); with
    b = 1 it is the identity, i.e. the raw frequency estimator.
    """
    _validate_linear_shrinkage(shrinkage)
    state = _signed_state(shrinkage)
    _check_cell(i, state.limit, state.n)
    _check_cell(j, state.limit, state.n)
    if shrinkage.form == DENSE:
        g = _linear_profile(shrinkage)
        return float(g[(int(i) - 1) ^ (int(j) - 1)])
    mask = (int(i) - 1) ^ (int(j) - 1)
    return math.ldexp(state.signed_sum(mask, state.values), -state.n)


def squared_element_linear(i, j, shrinkage):
    """Entry (i, j) of the squared linear kernel: shares b's support,
    with each coefficient squared."""
    _validate_linear_shrinkage(shrinkage)
    state = _signed_state(shrinkage)
    _check_cell(i, state.limit, state.n)
    _check_cell(j, state.limit, state.n)
    if shrinkage.form == DENSE:
        g = _squared_linear_profile(shrinkage)
        return float(g[(int(i) - 1) ^ (int(j) - 1)])
    mask = (int(i) - 1) ^ (int(j) - 1)
    return math.ldexp(state.signed_sum(mask, state.squared_values), -state.n)


def element_transformed(i, j, shrinkage, transform):
    """Entry (i, j) of f(W diag(b) W) / Z.

    The numerator costs O(#nonzero(b)); the normalization constant is
    resolved once per (transform, shrinkage) pair through the cheapest
    available dispatch route.
    """
    if not isinstance(shrinkage, ShrinkageSpec):
        raise ConfigError("transformed element needs a ShrinkageSpec")
    if not isinstance(transform, Transform):
        raise ConfigError("transformed element needs a Transform")
    state = _signed_state(shrinkage)
    _check_cell(i, state.limit, state.n)
    _check_cell(j, state.limit, state.n)
    norm = _normalizer_cached(transform, shrinkage)
    _check_normalizer(norm)
    if shrinkage.form == DENSE:
        g = _transformed_profile(shrinkage, transform)
        return float(g[(int(i) - 1) ^ (int(j) - 1)])
    mask = (int(i) - 1) ^ (int(j) - 1)
    raw = apply(transform, state.signed_sum(mask, state.values))
    if math.isfinite(norm.value):
        return raw / norm.value
    if raw > 0:
        return math.exp(math.log(raw) - norm.log_value)
    if raw == 0:
        return 0.0
    return -math.exp(math.log(-raw) - norm.log_value)


def element_waak(i, j, w, gamma):
    """Weighted product-form kernel entry in O(n), log-space stable.

    Equals gamma^(sum of +-w_d) / prod_d (gamma^w_d + gamma^-w_d), the
    sign positive exactly on coordinates where cells i and j agree. At
    w = 1 and gamma = sqrt(lam/(1-lam)) this reproduces the classic
    categorical kernel lam^(n-d) (1-lam)^d at Hamming distance d.
    """
    state = _waak_state(w, gamma)
    _check_cell(i, state.limit, state.n)
    _check_cell(j, state.limit, state.n)
    return state.element(i, j)


def squared_element_waak(i, j, w, gamma):
    """Entry (i, j) of the squared weighted kernel, O(n) in log space.

    Coordinate factors become gamma^2w_d + gamma^-2w_d on agreement and
    2 on disagreement, over the squared normalizer.
    """
    state = _waak_state(w, gamma)
    _check_cell(i, state.limit, state.n)
    _check_cell(j, state.limit, state.n)
    return state.squared(i, j)


def squared_element_general(i, j, shrinkage, transform):
    """Entry (i, j) of the squared transformed kernel via one dense pass.

    Precomputes g = f(fwht(b))/Z once per configuration, then each entry
    is sum_m g[m] g[m ^ x] with x the XOR of the zero-based indexes:
    O(2^n) per element after an O(n 2^n) setup, dense-capacity guarded.
    """
    if not isinstance(shrinkage, ShrinkageSpec):
        raise ConfigError("general squared element needs a ShrinkageSpec")
    if not isinstance(transform, Transform):
        raise ConfigError("general squared element needs a Transform")
    if shrinkage.n > MAX_DENSE_N:
        raise CapacityError(
            f"general squared element requires a 2^{shrinkage.n} buffer (limit n={MAX_DENSE_N})"
        )
    g = _transformed_profile(shrinkage, transform)
    limit = g.shape[0]
    _check_cell(i, limit, shrinkage.n)
    _check_cell(j, limit, shrinkage.n)
    return float(xor_dot(g, (int(i) - 1) ^ (int(j) - 1)))


@lru_cache(maxsize=64)
def _mixture_config(components):
    return EstimatorConfig.mixture(components)


def element_mixture(i, j, components):
    """Convex combination of component kernel entries."""
    comps = tuple((float(c), cfg) for c, cfg in components)
    return matrix_element(i, j, _mixture_config(comps))


# ---------------------------------------------------------------------------
# per-config dispatch


class _ConfigState:
    """Resolved evaluation strategy for one EstimatorConfig."""

    def __init__(self, config):
        self.config = config
        self.n = config.n
        self.limit = 1 << self.n
        variant = config.variant
        if variant in ("waak", "aa_classic"):
            self._waak = _waak_state(config.shrinkage.w, config.gamma)
        elif variant == "mixture":
            self._children = [(c, _config_state(cfg)) for c, cfg in config.components]
        elif variant == "transformed":
            norm = _normalizer_cached(config.transform, config.shrinkage)
            _check_normalizer(norm)

    def element(self, i, j):
        cfg = self.config
        variant = cfg.variant
        if variant == "linear":
            return element_linear(i, j, cfg.shrinkage)
        if variant in ("waak", "aa_classic"):
            _check_cell(i, self.limit, self.n)
            _check_cell(j, self.limit, self.n)
            return self._waak.element(i, j)
        if variant == "transformed":
            return element_transformed(i, j, cfg.shrinkage, cfg.transform)
        _check_cell(i, self.limit, self.n)
        _check_cell(j, self.limit, self.n)
        return math.fsum(c * child.element(i, j) for c, child in self._children)

    def squared(self, i, j):
        cfg = self.config
        variant = cfg.variant
        if variant == "linear":
            return squared_element_linear(i, j, cfg.shrinkage)
        if variant in ("waak", "aa_classic"):
            _check_cell(i, self.limit, self.n)
            _check_cell(j, self.limit, self.n)
            return self._waak.squared(i, j)
        if variant == "transformed":
            return squared_element_general(i, j, cfg.shrinkage, cfg.transform)
        # mixture: squares mix across components, so go through the
        # combined dense profile.
        g = self.profile()
        _check_cell(i, self.limit, self.n)
        _check_cell(j, self.limit, self.n)
        return float(xor_dot(g, (int(i) - 1) ^ (int(j) - 1)))

    def profile(self):
        """Dense kernel row g with Q[i, j] = g[(i-1) XOR (j-1)]."""
        cached = self.config._cache.get("profile")
        if cached is not None:
            return cached
        cfg = self.config
        if self.n > MAX_DENSE_N:
            raise CapacityError(
                f"dense kernel row needs a 2^{self.n} buffer (limit n={MAX_DENSE_N})"
            )
        if cfg.variant == "linear":
            g = _linear_profile(cfg.shrinkage)
        elif cfg.variant in ("waak", "aa_classic"):
            g = _waak_profile(cfg.shrinkage.w, cfg.gamma)
        elif cfg.variant == "transformed":
            g = _transformed_profile(cfg.shrinkage, cfg.transform)
        else:
            g = np.zeros(self.limit)
            for c, child in self._children:
                g = g + c * child.profile()
        cfg._cache["profile"] = g
        return g

    def normalizers(self):
        cfg = self.config
        if cfg.variant == "linear":
            value = float(2**self.n) if self.n <= 1023 else math.inf
            return (NormalizerResult(value=value, method=LINEAR_TRIVIAL, log_value=self.n * _LOG2),)
        if cfg.variant in ("waak", "aa_classic"):
            return (self._waak.normalizer_result(),)
        if cfg.variant == "transformed":
            return (_normalizer_cached(cfg.transform, cfg.shrinkage),)
        out = []
        for _, child in self._children:
            out.extend(child.normalizers())
        return tuple(out)


def _config_state(config):
    if not isinstance(config, EstimatorConfig):
        raise ConfigError("expected an EstimatorConfig")
    state = config._cache.get("state")
    if state is None:
        state = _ConfigState(config)
        config._cache["state"] = state
    return state


def matrix_element(i, j, config):
    """Kernel matrix entry Q[i, j] for any estimator configuration."""
    return _config_state(config).element(i, j)


def squared_matrix_element(i, j, config):
    """Entry (i, j) of Q @ Q for any estimator configuration."""
    return _config_state(config).squared(i, j)


# ---------------------------------------------------------------------------
# estimates


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    """Estimated probabilities at queried cells.

    cells is None when values covers the full index range 1..2^n in
    order. negativity flags any negative entry, which only
    sign-indefinite transforms or inadmissible shrinkage can produce;
    values are reported exactly as computed, never clipped silently.
    """

    n: int
    cells: tuple
    values: np.ndarray
    normalizers: tuple
    negativity: bool


def _match_dimensions(config, counts):
    if not isinstance(counts, CountsVector):
        raise DataError("expected a CountsVector")
    if config.n != counts.n:
        raise ConfigError(
            f"estimator dimension {config.n} does not match data dimension {counts.n}"
        )


def estimate_at(cells, config, counts):
    """Estimated probability of each queried cell, sparse in n.

    Cost is O(#cells * #support) element evaluations; support iteration
    order is fixed (ascending cell index), so results are deterministic.
    """
    _match_dimensions(config, counts)
    state = _config_state(config)
    cell_list = list(cells)
    if not cell_list:
        raise ValueError("at least one query cell is required")
    values = np.empty(len(cell_list))
    for pos, cell in enumerate(cell_list):
        _check_cell(cell, state.limit, state.n)
        acc = 0.0
        for support_cell, cnt in counts.cells:
            acc += cnt * state.element(cell, support_cell)
        values[pos] = acc / counts.total
    return DensityEstimate(
        n=state.n,
        cells=tuple(int(c) for c in cell_list),
        values=values,
        normalizers=state.normalizers(),
        negativity=bool(np.any(values < 0.0)),
    )


def estimate_full(config, counts):
    """Full 2^n estimate vector (n <= 20).

    Linear configurations run through the double transform
    (1/2^n) fwht(b * fwht(p)); everything else gathers the dense kernel
    row at XOR-shifted positions per support cell.
    """
    _match_dimensions(config, counts)
    n = config.n
    if n > MAX_FULL_N:
        raise CapacityError(f"full estimate limited to n <= {MAX_FULL_N}, got n={n}")
    state = _config_state(config)
    size = 1 << n
    if config.variant == "linear":
        spectrum = fwht(counts.to_dense()) * config.shrinkage.to_dense()
        values = fwht(spectrum) * math.ldexp(1.0, -n)
    else:
        g = state.profile()
        idx = np.arange(size, dtype=np.int64)
        values = np.zeros(size)
        for cell, cnt in counts.cells:
            values += (cnt / counts.total) * g[idx ^ (cell - 1)]
    return DensityEstimate(
        n=n,
        cells=None,
        values=values,
        normalizers=state.normalizers(),
        negativity=bool(np.any(values < 0.0)),
    )


def clamp_and_renormalize(estimate):
    """Clip negative entries to zero and rescale the full vector to sum 1.

    Reporting convenience only: the output is no longer the raw kernel
    estimate and the family's normalization guarantee does not apply to
    it. Requires a full estimate vector.
    """
    if not isinstance(estimate, DensityEstimate) or estimate.cells is not None:
        raise ValueError("clamping requires a full estimate vector (cells=None)")
    clipped = np.maximum(estimate.values, 0.0)
    total = float(clipped.sum())
    if total <= 0.0:
        raise NumericError("clamped estimate sums to zero; nothing to renormalize")
    return DensityEstimate(
        n=estimate.n,
        cells=None,
        values=clipped / total,
        normalizers=estimate.normalizers,
        negativity=False,
    )
