"""Least-squares fits of coherence curves.

Model forms (t in ns, f in MHz)::

    exp_cosine      c + A exp(-t/tau) cos(2 pi f t 1e-3 + phi)
    gaussian_decay  c + A exp(-(t/tau)^2)
    exp_decay       c + A exp(-t/tau)
    stretched_exp   c + A exp(-(t/tau)^p),   0.5 <= p <= 4

``tau`` is always the 1/e time of the envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .signals import Signal, fmt

MODEL_PARAMS = {
    "exp_cosine": ("A", "c", "tau", "f", "phi"),
    "gaussian_decay": ("A", "c", "tau"),
    "exp_decay": ("A", "c", "tau"),
    "stretched_exp": ("A", "c", "tau", "p"),
}
P_BOUNDS = (0.5, 4.0)
_CYC = 2 * math.pi * 1e-3


@dataclass(frozen=True)
class DecayModel:
    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in MODEL_PARAMS:
            raise InputError(f"unknown model kind {self.kind!r}")
        names = MODEL_PARAMS[self.kind]
        if set(self.params) != set(names):
            raise InputError(f"{self.kind} takes parameters {names}")
        object.__setattr__(self, "params", {k: float(self.params[k]) for k in names})
        if not self.params["tau"] > 0:
            raise InputError("tau must be > 0")
        if not math.isfinite(self.params["A"]):
            raise InputError("amplitude must be finite")
        if self.kind == "stretched_exp" and not P_BOUNDS[0] <= self.params["p"] <= P_BOUNDS[1]:
            raise InputError("stretch exponent must lie in [0.5, 4]")

    @property
    def names(self):
        return MODEL_PARAMS[self.kind]

    def vector(self) -> np.ndarray:
        return np.array([self.params[k] for k in self.names])

    @classmethod
    def from_vector(cls, kind, v):
        return cls(kind, dict(zip(MODEL_PARAMS[kind], map(float, v))))

    def exponent(self) -> float:
        return {"gaussian_decay": 2.0, "exp_decay": 1.0}.get(self.kind, self.params.get("p", 1.0))


def eval_model(model: DecayModel, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    P = model.params
    if model.kind == "exp_cosine":
        return P["c"] + P["A"] * np.exp(-t / P["tau"]) * np.cos(_CYC * P["f"] * t + P["phi"])
    return P["c"] + P["A"] * np.exp(-((t / P["tau"]) ** model.exponent()))


def jacobian(model: DecayModel, t) -> np.ndarray:
    """Analytic derivatives, one column per parameter in ``model.names`` order."""
    t = np.asarray(t, dtype=float)
    P = model.params
    A, tau = P["A"], P["tau"]
    if model.kind == "exp_cosine":
        E = np.exp(-t / tau)
        arg = _CYC * P["f"] * t + P["phi"]
        C, S = np.cos(arg), np.sin(arg)
        return np.column_stack([
            E * C,
            np.ones_like(t),
            A * E * C * t / tau**2,
            -A * E * S * _CYC * t,
            -A * E * S,
        ])
    p = model.exponent()
    u = (t / tau) ** p
    E = np.exp(-u)
    cols = [E, np.ones_like(t), A * E * u * p / tau]
    if model.kind == "stretched_exp":
        with np.errstate(divide="ignore", invalid="ignore"):
            log = np.where(t > 0, np.log(np.where(t > 0, t, 1.0) / tau), 0.0)
        cols.append(-A * E * u * log)
    return np.column_stack(cols)


@dataclass
class FitResult:
    model: DecayModel
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def uncertainties(self) -> dict:
        err = np.sqrt(np.clip(np.diag(self.covariance), 0, None))
        return dict(zip(self.model.names, err))

    @property
    def decay_time(self) -> float:
        return self.model.params["tau"]

    def to_text(self) -> str:
        lines = [f"model={self.model.kind}", f"converged={fmt(self.converged)}",
                 f"iterations={self.iterations}", f"residual_norm={fmt(self.residual_norm)}"]
        unc = self.uncertainties
        for k, v in self.model.params.items():
            lines.append(f"{k}={fmt(v)}")
            lines.append(f"{k}_err={fmt(unc[k])}")
        if self.message:
            lines.append(f"message={self.message}")
        return "\n".join(lines) + "\n"

    def csv_columns(self) -> tuple[list[str], list[str]]:
        names, values = ["model"], [self.model.kind]
        unc = self.uncertainties
        for k, v in self.model.params.items():
            names += [k, f"{k}_err"]
            values += [fmt(v), fmt(unc[k])]
        names += ["residual_norm", "converged"]
        values += [fmt(self.residual_norm), fmt(self.converged)]
        return names, values


# -- initial guesses ------------------------------------------------------

def _first_crossing(t, env, level):
    below = np.nonzero(env <= level)[0]
    if len(below) == 0:
        return None
    i = below[0]
    if i == 0:
        return t[0]
    t0, t1, e0, e1 = t[i - 1], t[i], env[i - 1], env[i]
    return t0 + (level - e0) * (t1 - t0) / (e1 - e0) if e1 != e0 else t1


def _guess_decay(t, y, kind):
    n_tail = max(1, len(y) // 10)
    c = float(np.mean(y[-n_tail:]))
    A = float(y[0] - c)
    if A == 0:
        A = float(np.ptp(y)) or 1.0
    env = (y - c) / A
    span = float(t[-1] - t[0]) or 1.0
    tau = _first_crossing(t, env, math.exp(-1))
    if tau is None or tau <= 0:
        tau = 2 * span
    guess = {"A": A, "c": c, "tau": float(tau)}
    if kind == "stretched_exp":
        t_q = _first_crossing(t, env, math.exp(-0.25))
        p = 2.0
        if t_q and t_q > 0 and tau > t_q:
            p = math.log(4.0) / math.log(tau / t_q)
        guess["p"] = float(np.clip(p, *P_BOUNDS))
    return guess


def _dominant_frequency(t, y):
    n = len(t)
    tu = np.linspace(t[0], t[-1], n)
    yu = np.interp(tu, t, y) - np.mean(y)
    dt = tu[1] - tu[0]
    pad = 8 * n
    spec = np.abs(np.fft.rfft(yu * np.hanning(n), pad))
    freqs = np.fft.rfftfreq(pad, dt)  # cycles per ns
    k = int(np.argmax(spec[1:])) + 1
    if 1 <= k < len(spec) - 1:
        a, b, c = spec[k - 1], spec[k], spec[k + 1]
        den = a - 2 * b + c
        shift = 0.5 * (a - c) / den if den != 0 else 0.0
    else:
        shift = 0.0
    return (freqs[k] + shift * (freqs[1] - freqs[0])) * 1e3  # MHz


def _guess_exp_cosine(t, y):
    span = float(t[-1] - t[0]) or 1.0
    f0 = _dominant_frequency(t, y)
    df = 1e3 / span
    best = None
    for f in f0 + df * np.array([-0.5, -0.25, 0.0, 0.25, 0.5]):
        if f <= 0:
            continue
        w = _CYC * f * t
        for tau in np.geomspace(span / 20, span * 20, 41):
            E = np.exp(-t / tau)
            X = np.column_stack([np.ones_like(t), E * np.cos(w), E * np.sin(w)])
            coef, *_ = np.linalg.lstsq(X, y, rcond=None)
            rss = float(np.sum((X @ coef - y) ** 2))
            if best is None or rss < best[0]:
                best = (rss, f, tau, coef)
    _, f, tau, (c, a, b) = best
    return {"A": float(math.hypot(a, b)), "c": float(c), "tau": float(tau), "f": float(f),
            "phi": float(math.atan2(-b, a))}


def auto_guess(t, y, kind: str) -> dict:
    t, y = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
    if kind == "exp_cosine":
        return _guess_exp_cosine(t, y)
    return _guess_decay(t, y, kind)


# -- Levenberg-Marquardt --------------------------------------------------

def _project(kind, names, v, previous):
    v = v.copy()
    i = names.index("tau") if "tau" in names else None
    if i is not None and not v[i] > 0:
        v[i] = previous[i] / 10
    if kind == "stretched_exp" and "p" in names:
        j = names.index("p")
        v[j] = np.clip(v[j], *P_BOUNDS)
    return v


def _canonical(model: DecayModel) -> DecayModel:
    if model.kind != "exp_cosine":
        return model
    P = dict(model.params)
    if P["A"] < 0:
        P["A"], P["phi"] = -P["A"], P["phi"] + math.pi
    if P["f"] < 0:
        P["f"], P["phi"] = -P["f"], -P["phi"]
    P["phi"] = math.remainder(P["phi"], 2 * math.pi)
    return DecayModel("exp_cosine", P)


def fit(signal: Signal, model_kind: str, initial_guess: dict | None = None, *,
        weights=None, fixed: dict | None = None, max_iter: int = 500) -> FitResult:
    """Fit ``signal`` with a damped Gauss-Newton (Levenberg-Marquardt) iteration.

    Stops when the scaled parameter step falls below 1e-8, the relative
    decrease of the residual falls below 1e-10, or the residual reaches
    round-off level. Constant data returns ``converged=False``.
    ``fixed`` pins named parameters at the given values.
    """
    if model_kind not in MODEL_PARAMS:
        raise InputError(f"unknown model kind {model_kind!r}")
    names = MODEL_PARAMS[model_kind]
    t, y = signal.x, signal.y
    if len(t) < 2 + len(names):
        raise InputError(f"{model_kind} needs at least {2 + len(names)} points")
    if weights is None:
        weights = signal.extras.get("weight")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != y.shape or np.any(w < 0):
        raise InputError("weights must be non-negative, one per point")
    sw = np.sqrt(w)
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(names)
    if unknown:
        raise InputError(f"cannot fix unknown parameters {sorted(unknown)}")

    guess = auto_guess(t, y, model_kind)
    guess.update(initial_guess or {})
    guess.update(fixed)
    scale_y = float(np.ptp(y))
    level = max(1.0, float(np.max(np.abs(y))))

    if scale_y <= 1e-12 * level:
        guess["A"] = 0.0 if "A" not in fixed else guess["A"]
        model = DecayModel(model_kind, guess)
        rss = float(np.sum(w * (y - eval_model(model, t)) ** 2))
        return FitResult(model, np.zeros((len(names), len(names))), math.sqrt(rss), False, 0,
                         "degenerate data: y is constant")

    free = [i for i, k in enumerate(names) if k not in fixed]
    theta = DecayModel(model_kind, guess).vector()
    typ = np.array([{"A": scale_y, "c": scale_y, "phi": 1.0, "p": 1.0}.get(k, 0.0) for k in names])

    def residuals(v):
        return sw * (y - eval_model(DecayModel.from_vector(model_kind, v), t))

    r = residuals(theta)
    rss = float(r @ r)
    history = [rss]
    lam = 1e-3
    converged, message, it = False, "iteration limit reached", 0
    floor = (1e-15 * level) ** 2 * len(y)
    for it in range(1, max_iter + 1):
        if rss <= floor:
            converged, message = True, "zero residual"
            break
        J = sw[:, None] * jacobian(DecayModel.from_vector(model_kind, theta), t)[:, free]
        JTJ = J.T @ J
        g = J.T @ r
        diag = np.diag(JTJ).copy()
        diag[diag <= 0] = 1e-30
        accepted = False
        while lam <= 1e16:
            try:
                step = np.linalg.solve(JTJ + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = theta.copy()
            trial[free] += step
            trial = _project(model_kind, names, trial, theta)
            r_new = residuals(trial)
            rss_new = float(r_new @ r_new)
            if np.isfinite(rss_new) and rss_new < rss:
                accepted = True
                break
            lam *= 10
        if not accepted:
            gscale = np.abs(g) * np.maximum(np.abs(theta[free]), typ[free])
            converged = bool(np.max(gscale) <= 1e-6 * max(rss, floor))
            message = "no further decrease possible" + ("" if converged else " (not stationary)")
            break
        delta = trial - theta
        rel_step = np.max(np.abs(delta[free]) / np.maximum(np.abs(theta[free]), typ[free] + 1e-300))
        rel_drop = (rss - rss_new) / rss
        theta, r, rss = trial, r_new, rss_new
        history.append(rss)
        lam = max(lam / 10, 1e-12)
        if rel_step < 1e-8:
            converged, message = True, "parameter step below tolerance"
            break
        if rel_drop < 1e-10:
            converged, message = True, "residual change below tolerance"
            break

    model = _canonical(DecayModel.from_vector(model_kind, theta))
    J = sw[:, None] * jacobian(model, t)
    dof = max(len(y) - len(free), 1)
    cov = np.zeros((len(names), len(names)))
    sub = np.linalg.pinv(J[:, free].T @ J[:, free]) * (rss / dof)
    cov[np.ix_(free, free)] = (sub + sub.T) / 2
    return FitResult(model, cov, math.sqrt(rss), converged, it, message, history)

