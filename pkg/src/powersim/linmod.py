"""Linear models: design matrices, OLS inference, stratified ANOVA, binomial GLM.

Designs are built from :class:`Factor` and numeric covariates with R-style
term specifications (``"A"``, ``"A:B"``); factors default to treatment coding
with the first level as baseline. Random-effects and repeated-measures ANOVA go
through :func:`anova_strata`, which handles balanced layouts only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy import linalg

from .exceptions import DesignError, ParameterError
from .probkit import ChiSquared, FisherF
from .testkit import TestResult, _t_two_sided, invalid

RANK_TOL = 1e-10
# Residual sum of squares below this share of |y|^2 counts as an exact fit.
ZERO_RSS = 1e-24


# ---------------------------------------------------------------------------
# Factors and design matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Factor:
    """Categorical variable: integer ``codes`` into ``levels``.

    ``contrasts`` is either ``"treatment"`` or a levels x (levels - 1) matrix
    whose columns each sum to zero.
    """

    name: str
    codes: np.ndarray
    levels: tuple
    contrasts: Union[str, np.ndarray] = "treatment"

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.intp)
        levels = tuple(self.levels)
        if len(levels) < 2:
            raise DesignError(f"factor {self.name!r} needs at least two levels")
        if codes.size and (codes.min() < 0 or codes.max() >= len(levels)):
            raise DesignError(f"factor {self.name!r} has codes outside its levels")
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "levels", levels)
        if not isinstance(self.contrasts, str):
            c = np.asarray(self.contrasts, dtype=float)
            if c.shape != (len(levels), len(levels) - 1):
                raise DesignError(f"contrast matrix for {self.name!r} must be {len(levels)} x {len(levels) - 1}")
            if np.any(np.abs(c.sum(axis=0)) > 1e-12):
                raise DesignError(f"contrast columns for {self.name!r} must sum to zero")
            object.__setattr__(self, "contrasts", c)
        elif self.contrasts != "treatment":
            raise DesignError(f"unknown coding {self.contrasts!r}")

    @classmethod
    def from_values(cls, name: str, values, levels: Optional[Sequence] = None, contrasts="treatment") -> "Factor":
        values = list(values)
        if levels is None:
            levels = sorted(set(values))
        index = {lev: i for i, lev in enumerate(levels)}
        return cls(name, np.array([index[v] for v in values]), tuple(levels), contrasts)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def coding_matrix(self) -> np.ndarray:
        if isinstance(self.contrasts, str):
            return np.eye(self.n_levels)[:, 1:]
        return self.contrasts

    def coded_columns(self) -> tuple[np.ndarray, list[str]]:
        cm = self.coding_matrix()
        if isinstance(self.contrasts, str):
            names = [f"{self.name}{lev}" for lev in self.levels[1:]]
        else:
            names = [f"{self.name}{j + 1}" for j in range(cm.shape[1])]
        return cm[self.codes], names

    def indicators(self) -> np.ndarray:
        """Full 0/1 dummy matrix (no level dropped)."""
        return np.eye(self.n_levels)[self.codes]


def contrasts_orthogonal(contrasts) -> bool:
    """True when every pair of contrast columns has zero inner product."""
    c = np.asarray(contrasts, dtype=float)
    gram = c.T @ c
    return bool(np.all(np.abs(gram - np.diag(np.diag(gram))) <= 1e-12))


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    matrix: np.ndarray
    columns: tuple
    term_spans: Mapping[str, slice]
    rank: int

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    def term_columns(self, term: str) -> np.ndarray:
        return self.matrix[:, self.term_spans[term]]


Variable = Union[Factor, np.ndarray, Sequence[float]]


def _parse_term(term) -> tuple:
    if isinstance(term, str):
        return tuple(t.strip() for t in term.split(":"))
    return tuple(term)


def _pivoted_rank(x: np.ndarray) -> tuple[int, np.ndarray]:
    if x.shape[1] == 0:
        return 0, np.arange(0)
    _, r, piv = linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = np.max(np.linalg.norm(x, axis=0))
    rank = int(np.sum(diag > RANK_TOL * scale)) if scale > 0 else 0
    return rank, piv


def build_design(variables: Mapping[str, Variable], terms: Sequence, intercept: bool = True) -> DesignMatrix:
    """Model matrix for ``terms`` (main effects and ``"A:B"`` interactions).

    Interaction columns are element-wise products of the coded columns of
    their components. Raises :class:`DesignError` naming aliased columns when
    the result is rank deficient.
    """
    n = None
    for v in variables.values():
        size = v.codes.size if isinstance(v, Factor) else np.asarray(v).size
        if n is not None and size != n:
            raise DesignError("variables differ in length")
        n = size
    if n is None:
        raise DesignError("no variables supplied")

    blocks, names, spans = [], [], {}
    col = 0
    if intercept:
        blocks.append(np.ones((n, 1)))
        names.append("(Intercept)")
        spans["(Intercept)"] = slice(0, 1)
        col = 1
    for term in terms:
        parts = _parse_term(term)
        mats, labels = [], []
        for part in parts:
            if part not in variables:
                raise DesignError(f"unknown variable {part!r} in term {term!r}")
            v = variables[part]
            if isinstance(v, Factor):
                m, lab = v.coded_columns()
            else:
                m, lab = np.asarray(v, dtype=float).reshape(n, 1), [part]
            mats.append(m)
            labels.append(lab)
        block = mats[0]
        block_names = labels[0]
        for m, lab in zip(mats[1:], labels[1:]):
            block = (block[:, :, None] * m[:, None, :]).reshape(n, -1)
            block_names = [f"{a}:{b}" for a in block_names for b in lab]
        key = ":".join(parts)
        blocks.append(block)
        names.extend(block_names)
        spans[key] = slice(col, col + block.shape[1])
        col += block.shape[1]
    matrix = np.hstack(blocks)
    rank, piv = _pivoted_rank(matrix)
    if rank < matrix.shape[1]:
        aliased = [names[i] for i in piv[rank:]]
        raise DesignError(f"design is rank deficient; aliased columns: {', '.join(aliased)}")
    matrix.setflags(write=False)
    return DesignMatrix(matrix=matrix, columns=tuple(names), term_spans=spans, rank=rank)


# ---------------------------------------------------------------------------
# Ordinary least squares
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OlsFit:
    coefficients: Mapping[str, float]
    rss: float
    df_resid: int
    sigma: float
    cov_unscaled: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    response: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    columns: tuple = ()

    @property
    def rank(self) -> int:
        return self.q.shape[1]

    def coef_vector(self) -> np.ndarray:
        return np.array([self.coefficients[c] for c in self.columns])

    def std_errors(self) -> dict:
        se = self.sigma * np.sqrt(np.diag(self.cov_unscaled))
        return dict(zip(self.columns, se))


def ols_fit(design: Union[DesignMatrix, np.ndarray], y) -> OlsFit:
    """Least squares by Householder QR of the design."""
    if isinstance(design, DesignMatrix):
        x, columns = design.matrix, design.columns
    else:
        x = np.asarray(design, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        columns = tuple(f"x{i}" for i in range(x.shape[1]))
    y = np.asarray(y, dtype=float)
    n, p = x.shape
    if y.shape != (n,):
        raise DesignError(f"response has shape {y.shape}, design has {n} rows")
    if n <= p:
        raise DesignError(f"need more observations ({n}) than coefficients ({p})")
    q, r = np.linalg.qr(x, mode="reduced")
    diag = np.abs(np.diag(r))
    if np.any(diag <= RANK_TOL * max(np.max(np.linalg.norm(x, axis=0)), 1e-300)):
        rank, piv = _pivoted_rank(x)
        raise DesignError("design is rank deficient; aliased columns: " + ", ".join(columns[i] for i in piv[rank:]))
    qty = q.T @ y
    beta = linalg.solve_triangular(r, qty)
    fitted = q @ qty
    resid = y - fitted
    rss = float(resid @ resid)
    df = n - p
    rinv = linalg.solve_triangular(r, np.eye(p))
    return OlsFit(
        coefficients=dict(zip(columns, beta)),
        rss=rss,
        df_resid=df,
        sigma=math.sqrt(rss / df),
        cov_unscaled=rinv @ rinv.T,
        fitted=fitted,
        residuals=resid,
        response=y,
        q=q,
        columns=tuple(columns),
    )


def wald_coef_test(fit: OlsFit, coef_name: str) -> TestResult:
    if coef_name not in fit.coefficients:
        raise ParameterError(f"no coefficient named {coef_name!r}; have {list(fit.columns)}")
    if fit.df_resid < 1:
        return invalid("no residual degrees of freedom")
    if not fit.rss > ZERO_RSS * float(fit.response @ fit.response):
        return invalid("zero residual variance")
    i = fit.columns.index(coef_name)
    se = fit.sigma * math.sqrt(fit.cov_unscaled[i, i])
    t = fit.coefficients[coef_name] / se
    df = float(fit.df_resid)
    return TestResult(statistic=float(t), p_value=_t_two_sided(t, df), df=df)


def _f_result(ss_num: float, df_num: float, ss_den: float, df_den: float) -> TestResult:
    df = (float(df_num), float(df_den))
    if not ss_den > 0:
        return invalid("zero error sum of squares", df=df)
    f = max(ss_num, 0.0) / df_num / (ss_den / df_den)
    return TestResult(statistic=float(f), p_value=float(FisherF(*df).sf(f)), df=df)


def nested_f_test(fit_null: OlsFit, fit_full: OlsFit) -> TestResult:
    """F test comparing a model with a larger model that contains it."""
    if not np.array_equal(fit_null.response, fit_full.response):
        raise DesignError("models were fitted to different responses")
    ddf = fit_null.df_resid - fit_full.df_resid
    if ddf <= 0:
        raise DesignError("full model must have more parameters than the null model")
    q0, q1 = fit_null.q, fit_full.q
    leftover = q0 - q1 @ (q1.T @ q0)
    if np.max(np.abs(leftover)) > 1e-8:
        raise DesignError("null model is not nested in the full model")
    return _f_result(fit_null.rss - fit_full.rss, ddf, fit_full.rss, fit_full.df_resid)


# ---------------------------------------------------------------------------
# One-way ANOVA with optional contrasts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OnewayResult:
    omnibus: TestResult
    ss_between: float
    ss_within: float
    df_between: int
    df_within: int
    contrasts: Mapping[str, TestResult] = field(default_factory=dict)
    contrast_ss: Mapping[str, float] = field(default_factory=dict)


def anova_oneway(groups, y, contrasts: Optional[Mapping[str, Sequence[float]]] = None) -> OnewayResult:
    """Between/within F test; each named contrast gets its own 1-df F test."""
    codes = groups.codes if isinstance(groups, Factor) else np.asarray(groups)
    y = np.asarray(y, dtype=float)
    labels, codes = np.unique(codes, return_inverse=True)
    k = labels.size
    if k < 2:
        raise DesignError("one-way ANOVA needs at least two groups")
    counts = np.bincount(codes, minlength=k).astype(float)
    means = np.bincount(codes, weights=y, minlength=k) / counts
    grand = y.mean()
    ss_between = float(np.sum(counts * (means - grand) ** 2))
    ss_within = float(np.sum((y - means[codes]) ** 2))
    df_b, df_w = k - 1, y.size - k
    if df_w < 1:
        raise DesignError("no within-group degrees of freedom")
    omnibus = _f_result(ss_between, df_b, ss_within, df_w)
    tests, sums = {}, {}
    for name, c in (contrasts or {}).items():
        c = np.asarray(c, dtype=float)
        if c.shape != (k,):
            raise DesignError(f"contrast {name!r} needs {k} coefficients")
        ss = float((c @ means) ** 2 / np.sum(c * c / counts))
        sums[name] = ss
        tests[name] = _f_result(ss, 1, ss_within, df_w)
    return OnewayResult(omnibus, ss_between, ss_within, df_b, df_w, tests, sums)


# ---------------------------------------------------------------------------
# Error strata (balanced designs)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrataLayout:
    """Error strata of a balanced design, in the order they are fitted.

    ``error_terms`` lists the Error() terms (e.g. ``["subj", "subj:A"]``);
    an implicit ``Within`` stratum takes everything left over. ``fixed_terms``
    are tested against the residual of the stratum they fall into.
    """

    error_terms: tuple = ()
    fixed_terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "error_terms", tuple(_parse_term(t) for t in self.error_terms))
        object.__setattr__(self, "fixed_terms", tuple(_parse_term(t) for t in self.fixed_terms))


@dataclass(frozen=True)
class StratumRow:
    term: str
    df: int
    ss: float

    @property
    def ms(self) -> float:
        return self.ss / self.df if self.df > 0 else math.nan


@dataclass(frozen=True)
class Stratum:
    name: str
    rows: tuple  # fixed-term rows followed by the "Residuals" row (if df > 0)

    def row(self, term: str) -> StratumRow:
        for r in self.rows:
            if r.term == term:
                return r
        raise KeyError(term)

    @property
    def residual(self) -> Optional[StratumRow]:
        for r in self.rows:
            if r.term == "Residuals":
                return r
        return None

    @property
    def df(self) -> int:
        return sum(r.df for r in self.rows)

    @property
    def ss(self) -> float:
        return sum(r.ss for r in self.rows)


@dataclass(frozen=True)
class StrataTable:
    strata: Mapping[str, Stratum]
    n: int
    grand_mean: float

    def __getitem__(self, name: str) -> Stratum:
        return self.strata[name]

    def residual_ms(self, stratum: str) -> float:
        res = self.strata[stratum].residual
        if res is None:
            raise KeyError(f"stratum {stratum!r} has no residual row")
        return res.ms

    def f_test(self, term: str) -> TestResult:
        """F test of a fixed term against its own stratum's residual."""
        for s in self.strata.values():
            for r in s.rows:
                if r.term == term:
                    res = s.residual
                    if res is None or res.df == 0:
                        return invalid(f"no residual in stratum {s.name}")
                    return _f_result(r.ss, r.df, res.ss, res.df)
        raise KeyError(term)

    def ratio_test(self, numerator: str, denominator: str) -> TestResult:
        """F = residual MS of one stratum over residual MS of another."""
        num = self.strata[numerator].residual
        den = self.strata[denominator].residual
        if num is None or den is None:
            raise KeyError("both strata need a residual row")
        return _f_result(num.ss, num.df, den.ss, den.df)


def _check_balanced(codes: Sequence[np.ndarray], sizes: Sequence[int]) -> int:
    cell = np.ravel_multi_index(tuple(codes), tuple(sizes))
    counts = np.bincount(cell, minlength=int(np.prod(sizes)))
    if counts.min() == 0 or counts.min() != counts.max():
        raise DesignError("stratified ANOVA requires a balanced design with every cell filled equally")
    return int(counts[0])


def anova_strata(layout: StrataLayout, factors: Mapping[str, Factor], y) -> StrataTable:
    """Decompose ``y`` into error strata of a balanced crossed design.

    Sums of squares come from the orthogonal effect decomposition of cell
    means (inclusion-exclusion over factor subsets), which coincides with the
    sequential fit for balanced data.
    """
    y = np.asarray(y, dtype=float)
    names = list(factors)
    for t in layout.error_terms + layout.fixed_terms:
        for part in t:
            if part not in factors:
                raise DesignError(f"layout refers to unknown factor {part!r}")
    codes = [factors[f].codes for f in names]
    sizes = [factors[f].n_levels for f in names]
    if any(c.size != y.size for c in codes):
        raise DesignError("factors and response differ in length")
    _check_balanced(codes, sizes)

    n = y.size
    grand = float(y.mean())
    means = {(): np.full(n, grand)}
    effects, dfs = {}, {}
    for k in range(1, len(names) + 1):
        for subset in itertools.combinations(range(len(names)), k):
            cell = np.ravel_multi_index(tuple(codes[i] for i in subset), tuple(sizes[i] for i in subset))
            m = np.bincount(cell, weights=y) / np.bincount(cell)
            means[subset] = m[cell]
            eff = np.zeros(n)
            for j in range(0, k + 1):
                for sub in itertools.combinations(subset, j):
                    eff += (-1) ** (k - j) * means[sub]
            key = frozenset(names[i] for i in subset)
            effects[key] = float(eff @ eff)
            dfs[key] = int(np.prod([sizes[i] - 1 for i in subset]))
    full = tuple(range(len(names)))
    resid = y - means[full]
    resid_ss = float(resid @ resid)
    resid_df = n - int(np.prod(sizes))

    fixed = {frozenset(t): ":".join(t) for t in layout.fixed_terms}
    stratum_names = [":".join(t) for t in layout.error_terms] + ["Within"]
    contents: dict[str, list] = {s: [] for s in stratum_names}
    for key in effects:
        home = "Within"
        for t in layout.error_terms:
            if key <= frozenset(t):
                home = ":".join(t)
                break
        contents[home].append(key)
    strata = {}
    for s in stratum_names:
        rows, res_ss, res_df = [], 0.0, 0
        for key in sorted(contents[s], key=lambda k: (len(k), sorted(k))):
            if key in fixed:
                rows.append(StratumRow(fixed[key], dfs[key], effects[key]))
            else:
                res_ss += effects[key]
                res_df += dfs[key]
        if s == "Within":
            res_ss += resid_ss
            res_df += resid_df
        # fixed rows in layout order
        order = {name: i for i, name in enumerate(fixed.values())}
        rows.sort(key=lambda r: order[r.term])
        if res_df > 0:
            rows.append(StratumRow("Residuals", res_df, res_ss))
        strata[s] = Stratum(s, tuple(rows))
    table = StrataTable(strata=strata, n=n, grand_mean=grand)
    return table


@dataclass(frozen=True)
class VarianceComponent:
    estimate: float
    raw_variance: float
    truncated: bool


def _component(raw_variance: float) -> VarianceComponent:
    if raw_variance < 0:
        return VarianceComponent(0.0, raw_variance, True)
    return VarianceComponent(math.sqrt(raw_variance), raw_variance, False)


def variance_components(table: StrataTable, design: str, **counts) -> dict:
    """Method-of-moments standard deviations for the supported balanced layouts.

    ``design`` is one of:

    ``"oneway"``
        strata ``item``/``Within``; needs ``per_level`` (observations per item).
    ``"twoway"``
        strata ``A``, ``B``, ``A:B``, ``Within``; needs ``a_levels``,
        ``b_levels`` and ``replicates`` per cell. Stratum names are taken from
        the keyword ``names=(a, b)`` (default ``("A", "B")``).
    ``"rm1"``
        strata ``subj``/``Within`` with ``levels`` repeated measures.
    ``"rm2"``
        strata ``subj``, ``subj:A``, ``subj:B``, ``Within`` with two 2-level
        within factors (names via ``names=(a, b)``).

    Negative moment estimates are truncated to zero; the raw variance is kept.
    """
    ms = table.residual_ms
    if design == "oneway":
        item = counts.get("name", "item")
        w = ms("Within")
        return {
            "sa": _component((ms(item) - w) / counts["per_level"]),
            "s": _component(w),
        }
    if design == "twoway":
        a, b = counts.get("names", ("A", "B"))
        k = counts["replicates"]
        ab = ms(f"{a}:{b}")
        w = ms("Within")
        return {
            "sa": _component((ms(a) - ab) / (counts["b_levels"] * k)),
            "sb": _component((ms(b) - ab) / (counts["a_levels"] * k)),
            "sab": _component((ab - w) / k),
            "s": _component(w),
        }
    if design == "rm1":
        w = ms("Within")
        return {
            "sp": _component((ms("subj") - w) / counts["levels"]),
            "s": _component(w),
        }
    if design == "rm2":
        a, b = counts.get("names", ("A", "B"))
        w = ms("Within")
        pa = ms(f"subj:{a}")
        pb = ms(f"subj:{b}")
        return {
            "sp": _component((ms("subj") - pa - pb + w) / 4.0),
            "spa": _component((pa - w) / 2.0),
            "spb": _component((pb - w) / 2.0),
            "s": _component(w),
        }
    raise ParameterError(f"unknown design {design!r}")


# ---------------------------------------------------------------------------
# Binomial GLM
# ---------------------------------------------------------------------------

GLM_TOL = 1e-8
GLM_MAX_ITER = 50
# A fitted logit beyond this bound means the data are separated. Checking the
# linear predictor rather than the coefficients keeps the rule independent of
# where the covariates are centred.
SEPARATION_BOUND = 30.0


@dataclass(frozen=True, eq=False)
class GlmFit:
    coefficients: np.ndarray
    deviance: float
    df_resid: int
    converged: bool
    iterations: int
    deviance_trace: tuple = ()
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.converged and not self.note


def _binomial_deviance(y: np.ndarray, trials: np.ndarray, mu: np.ndarray) -> float:
    fitted = trials * mu
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(y > 0, y * np.log(y / fitted), 0.0)
        b = np.where(trials - y > 0, (trials - y) * np.log((trials - y) / (trials - fitted)), 0.0)
    return float(2.0 * np.sum(a + b))


def glm_binomial_fit(x, successes, trials) -> GlmFit:
    """Logistic regression by iteratively reweighted least squares."""
    x = np.asarray(x.matrix if isinstance(x, DesignMatrix) else x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(successes, dtype=float)
    m = np.broadcast_to(np.asarray(trials, dtype=float), y.shape)
    if np.any(m < 1) or np.any(y < 0) or np.any(y > m):
        raise ParameterError("need trials >= 1 and 0 <= successes <= trials")
    rank, _ = _pivoted_rank(x)
    if rank < x.shape[1]:
        raise DesignError("GLM design is rank deficient")
    mu = (y + 0.5) / (m + 1.0)
    eta = np.log(mu / (1 - mu))
    beta = np.zeros(x.shape[1])
    trace = []
    converged = False
    it = 0
    for it in range(1, GLM_MAX_ITER + 1):
        w = m * mu * (1 - mu)
        z = eta + (y - m * mu) / w
        sw = np.sqrt(w)
        new_beta, *_ = np.linalg.lstsq(x * sw[:, None], z * sw, rcond=None)
        eta = x @ new_beta
        diverged = np.max(np.abs(eta)) > SEPARATION_BOUND
        mu = 1.0 / (1.0 + np.exp(-eta))
        mu = np.clip(mu, 1e-15, 1 - 1e-15)
        trace.append(_binomial_deviance(y, m, mu))
        step = np.max(np.abs(new_beta - beta))
        beta = new_beta
        if diverged:
            return GlmFit(beta, trace[-1], y.size - x.shape[1], False, it, tuple(trace), "separation")
        if step < GLM_TOL:
            converged = True
            break
    note = "" if converged else "did not converge"
    return GlmFit(beta, trace[-1], y.size - x.shape[1], converged, it, tuple(trace), note)


def glm_lrt(null_fit: GlmFit, full_fit: GlmFit) -> TestResult:
    """Likelihood-ratio (deviance difference) test between nested GLMs."""
    if not null_fit.ok or not full_fit.ok:
        return invalid(null_fit.note or full_fit.note or "fit failed")
    ddf = null_fit.df_resid - full_fit.df_resid
    if ddf < 0:
        raise DesignError("full model must contain the null model")
    stat = max(null_fit.deviance - full_fit.deviance, 0.0)
    if ddf == 0:
        return TestResult(statistic=stat, p_value=1.0, df=0.0)
    return TestResult(statistic=stat, p_value=float(ChiSquared(ddf).sf(stat)), df=float(ddf))
