"""Viterbo ratios, the dimension inequality for the explicit orbits, and
report assembly from configuration documents.

A configuration is a YAML (or JSON) mapping such as::

    family: l2-sum
    dimension: 2
    level: 1
    parameters:
      norm: ell-infinity

``family`` is one of ``quadratic``, ``split-T-V``, ``l2-sum``,
``direct-sum``.  A document may also hold a list of such mappings under
``bodies``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import yaml

from . import pl_flow
from .action_profiles import OneDofSystem, from_function, harmonic, minimal_critical_action
from .bodies import (
    ConvexHamiltonian,
    L2SumSpec,
    NormDescriptor,
    Volume,
    direct_sum_hamiltonian,
    l2_sum_volume,
    monte_carlo_volume,
    norm_power,
    quadratic_hamiltonian,
)
from .quadratic import (
    QuadraticForm,
    ellipsoid_capacity,
    ellipsoid_volume,
    verify_theorem_even_2hom,
    verify_theorem_sandwich,
)

FAMILIES = ("quadratic", "split-T-V", "l2-sum", "direct-sum")


class ConfigError(ValueError):
    """The configuration document is malformed or names something unknown."""


# --------------------------------------------------------------------------
# ratios and the dimension inequality


def viterbo_ratio(volume: float, capacity: float, n: int) -> float:
    """``volume * n! / capacity^n``; at least 1 if the conjecture holds."""
    if volume <= 0 or capacity <= 0 or n < 1:
        raise ValueError("volume, capacity and n must be positive")
    return math.exp(math.log(volume) + math.lgamma(n + 1) - n * math.log(capacity))


def l2sum_capacity_upper_bound(n: int) -> float:
    """``4 (((n/2)!)^2 / n!)^{1/n}``: the action at which the volume of the
    ``l1/l_inf`` body would make the ratio exactly 1 (a stated bound, not
    derived here)."""
    if n < 1:
        raise ValueError("n must be positive")
    return 4.0 * math.exp((2 * math.lgamma(n / 2 + 1) - math.lgamma(n + 1)) / n)


def stirling_predicate(n: int) -> bool:
    """``n! / ((n/2)!)^2 <= 2^n / sqrt(pi n / 2)``."""
    lhs = math.lgamma(n + 1) - 2 * math.lgamma(n / 2 + 1)
    rhs = n * math.log(2.0) - 0.5 * math.log(math.pi * n / 2)
    return lhs <= rhs + 1e-12


def cubic_sine_predicate(x: float) -> bool:
    """``sin x >= x - x^3/6`` for ``x >= 0``."""
    return math.sin(x) >= x - x**3 / 6 - 1e-15


def log_step_predicate(x: float) -> bool:
    """The last step of the chain, meant for ``x = 2n >= 10``:
    ``ln x - ln(4/pi) >= 1 + (2/3) (pi/4)^{3/x} x^{3/x} / x``."""
    lhs = math.log(x) - math.log(4 / math.pi)
    rhs = 1 + (2 / 3) * (math.pi / 4) ** (3 / x) * x ** (3 / x) / x
    return lhs >= rhs


def sufficient_chain(n: int) -> bool:
    """The reduced inequality ``(pi n/2)^{1/2n} - (pi n/2)^{3/2n} / (6 n^2) >= 1 + 1/(2n)``."""
    c = (math.pi * n / 2) ** (1 / (2 * n))
    return c - c**3 / (6 * n * n) >= 1 + 1 / (2 * n)


@dataclass(frozen=True)
class IneqCheck:
    n: int
    lhs: float
    rhs: float
    holds: bool
    equality: bool
    stirling: bool
    cubic_sine: bool
    log_step: bool | None
    chain: bool | None


def check_ineq(n: int) -> IneqCheck:
    """Compare ``l2sum_capacity_upper_bound(n)`` with the explicit orbit's action.

    The auxiliary predicates are evaluated at the values the chain uses:
    Stirling at ``n``, the cubic sine bound at the sine's argument, and the
    logarithmic step and the reduced inequality only where they are meant to
    apply (``2n >= 10``); elsewhere they are None.
    """
    if n < 1:
        raise ValueError("n must be positive")
    lhs = l2sum_capacity_upper_bound(n)
    rhs = pl_flow.nd_period_formula(n)
    x = (math.pi * n / 2) ** (1 / (2 * n)) / n
    big = 2 * n >= 10
    return IneqCheck(
        n,
        lhs,
        rhs,
        lhs >= rhs - 1e-12,
        abs(lhs - rhs) <= 1e-12 * lhs,
        stirling_predicate(n),
        cubic_sine_predicate(x),
        log_step_predicate(2 * n) if big else None,
        sufficient_chain(n) if big else None,
    )


def auxiliary_grid(x_max: float = 2000.0, count: int = 20001) -> dict[str, bool]:
    """The chain's scalar predicates on grids: cubic sine on ``[0, 10]``,
    log step on ``[10, x_max]``, and ``ln 10 > 2.3 > 2 + ln(4/pi)``."""
    xs = np.linspace(0.0, 10.0, count)
    big = np.linspace(10.0, x_max, count)
    return {
        "cubic_sine": bool(np.all(np.sin(xs) >= xs - xs**3 / 6 - 1e-15)),
        "log_step": all(log_step_predicate(float(x)) for x in big),
        "constants": math.log(10) > 2.3 > 2 + math.log(4 / math.pi),
    }


# --------------------------------------------------------------------------
# reports


@dataclass
class ViterboReport:
    """One body: volume, capacity (or an upper bound) and their ratio."""

    body_label: str
    n: int
    volume: float
    volume_method: str
    volume_std_error: float
    capacity: float
    capacity_tag: str
    ratio: float
    ok: bool
    note: str = ""

    @classmethod
    def build(cls, label: str, n: int, volume: Volume, capacity: float, tag: str, note: str = "") -> "ViterboReport":
        ratio = viterbo_ratio(volume.value, capacity, n)
        # ratio is linear in the volume, so its standard error scales the same way
        spread = 3 * ratio * volume.std_error / volume.value
        return cls(label, n, float(volume.value), volume.method, float(volume.std_error),
                   float(capacity), tag, ratio, bool(ratio >= 1 - spread), note)

    def as_dict(self) -> dict:
        return asdict(self)


def _matrix(value, size: int | None = None, name: str = "matrix") -> np.ndarray:
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: not a numeric array") from exc
    if M.ndim == 1:
        k = math.isqrt(M.size)
        if k * k != M.size:
            raise ConfigError(f"{name}: {M.size} entries do not form a square matrix")
        M = M.reshape(k, k)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"{name}: need a square matrix")
    if size is not None and M.shape[0] != size:
        raise ConfigError(f"{name}: expected size {size}, got {M.shape[0]}")
    return M


def _norm(spec, n: int, name: str) -> NormDescriptor:
    if isinstance(spec, str):
        return NormDescriptor(spec, n)
    if isinstance(spec, dict) and "kind" in spec:
        return NormDescriptor(spec["kind"], n, tuple(spec["weights"]) if "weights" in spec else None)
    raise ConfigError(f"{name}: expected a norm kind or a mapping with 'kind'")


def _half_hamiltonian(spec, n: int, name: str) -> ConvexHamiltonian:
    """``T`` or ``V`` of a split body: a quadratic form or a squared norm."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{name}: expected a mapping with 'kind'")
    kind = spec["kind"]
    if kind == "quadratic":
        return quadratic_hamiltonian(_matrix(spec.get("matrix"), n, f"{name}.matrix"), f"{name}_Q")
    if kind == "norm":
        f = norm_power(_norm(spec.get("norm"), n, f"{name}.norm"), 2.0)
        scale = float(spec.get("scale", 1.0))
        return f if scale == 1.0 else f.scaled(scale)
    raise ConfigError(f"{name}: unknown kind {kind!r}")


def _planar_system(spec, i: int) -> OneDofSystem:
    if isinstance(spec, (int, float)):
        return harmonic(float(spec))
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"systems[{i}]: expected a frequency or a mapping with 'kind'")
    if spec["kind"] == "harmonic":
        return harmonic(float(spec["omega"]))
    if spec["kind"] == "quadratic":
        M = _matrix(spec.get("matrix"), 2, f"systems[{i}].matrix")
        return OneDofSystem(quadratic_hamiltonian(M, f"h{i}"), f"h{i}")
    if spec["kind"] == "power":
        # a |p|^m + b |q|^k
        a, m = float(spec.get("a", 0.5)), float(spec.get("p_power", 2))
        b, k = float(spec.get("b", 1.0)), float(spec.get("q_power", 2))
        deg = m if m == k else 0.0
        return from_function(lambda x: a * np.abs(x[..., 0]) ** m + b * np.abs(x[..., 1]) ** k,
                             f"{a:g}|p|^{m:g}+{b:g}|q|^{k:g}", deg)
    raise ConfigError(f"systems[{i}]: unknown kind {spec['kind']!r}")


def load_config(path) -> list[dict]:
    """Parse a configuration file into a list of body mappings."""
    try:
        text = Path(path).read_text(encoding="utf-8")
        doc = yaml.safe_load(text)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if isinstance(doc, dict) and "bodies" in doc:
        bodies = doc["bodies"]
    else:
        bodies = [doc]
    if not isinstance(bodies, list) or not bodies:
        raise ConfigError("no bodies in configuration")
    for b in bodies:
        if not isinstance(b, dict):
            raise ConfigError("each body must be a mapping")
        if b.get("family") not in FAMILIES:
            raise ConfigError(f"unknown family {b.get('family')!r}; expected one of {FAMILIES}")
    return bodies


def _dims(body) -> tuple[int, float]:
    try:
        n = int(body.get("dimension", 0))
        level = float(body.get("level", 1.0))
    except (TypeError, ValueError) as exc:
        raise ConfigError("dimension must be an integer and level a number") from exc
    if level <= 0:
        raise ConfigError("level must be positive")
    return n, level


def _l2sum_capacity(spec: L2SumSpec, n: int) -> tuple[float, str, str]:
    kinds = {spec.norm.kind, spec.dual_norm.kind}
    if kinds <= {"l2", "weighted-l2"}:
        return math.pi, "exact", "linear image of the unit ball"
    if kinds == {"l1", "linf"}:
        if n == 1:
            return math.pi, "exact", "interval times interval: forth-and-back orbit"
        if n == 2:
            return pl_flow.one_cycle_minimal().action, "exact", "minimal one-cycle orbit"
        traj = pl_flow.simulate(pl_flow.explicit_nd_start(n))
        return traj.action, "upper-bound", "action of the explicit symmetric orbit"
    raise ConfigError(f"no capacity method for the l2-sum of {spec.norm.kind}")


def body_report(body: dict, *, samples: int = 10**6, seed: int = 0, workers: int = 1) -> ViterboReport:
    """Volume, capacity and ratio for one configured body."""
    family = body["family"]
    n, level = _dims(body)
    params = body.get("parameters") or {}
    label = str(body.get("label", family))

    if family == "quadratic":
        A = QuadraticForm(_matrix(params.get("matrix"), 2 * n if n else None))
        vol = Volume(ellipsoid_volume(A, level))
        return ViterboReport.build(label, A.n, vol, ellipsoid_capacity(A, level), "exact")

    if family == "l2-sum":
        if n < 1:
            raise ConfigError("l2-sum needs dimension >= 1")
        norm = _norm(params.get("norm", "ell-infinity"), n, "norm")
        spec = L2SumSpec.from_norm(norm)
        if "dual_norm" in params and _norm(params["dual_norm"], n, "dual_norm") != spec.dual_norm:
            raise ConfigError("dual_norm is not the dual of norm")
        cap, tag, note = _l2sum_capacity(spec, n)
        # {||p||_*^2 + ||q||^2 <= level} is the unit body scaled by sqrt(level)
        vol = l2_sum_volume(spec)
        vol = Volume(vol.value * level**n, vol.std_error * level**n, vol.method)
        return ViterboReport.build(label, n, vol, cap * level, tag, note)

    if family == "split-T-V":
        if n < 1:
            raise ConfigError("split-T-V needs dimension >= 1")
        T = _half_hamiltonian(params.get("T"), n, "T")
        V = _half_hamiltonian(params.get("V"), n, "V")
        rep = verify_theorem_sandwich(T, V, energy=level, mc_samples=samples, seed=seed)
        if rep.holds:
            return ViterboReport.build(label, n, rep.volume, rep.capacity, "exact",
                                       f"sandwich C = {rep.C:.12g}")
        raise ConfigError(f"split-T-V: no capacity method ({rep.message})")

    if family == "direct-sum":
        systems = [_planar_system(s, i) for i, s in enumerate(params.get("systems") or [])]
        if not systems:
            raise ConfigError("direct-sum needs a non-empty 'systems' list")
        crit = minimal_critical_action(systems, level)
        H = direct_sum_hamiltonian([s.bounded() for s in systems])
        vol = monte_carlo_volume(H, level, samples, seed, workers=workers)
        return ViterboReport.build(label, len(systems), vol, crit.A_E, "upper-bound",
                                   f"support {list(crit.support)}")

    raise ConfigError(f"unknown family {family!r}")


def even_potential_report(V: ConvexHamiltonian, *, samples: int = 10**6, seed: int = 0) -> ViterboReport:
    """Report for ``|p|^2/2 + V(q) <= 1`` through the inscribed-ellipsoid check."""
    rep = verify_theorem_even_2hom(V, mc_samples=samples, seed=seed)
    note = "shared characteristic" if rep.shared_characteristic_ok else "capacity is an upper bound only"
    tag = "exact" if rep.shared_characteristic_ok else "upper-bound"
    return ViterboReport.build(V.label or "even-potential", V.dimension, rep.volume, rep.capacity, tag, note)


def format_rows(rows: list[ViterboReport], fmt: str = "table") -> str:
    """Rows as a tab-separated table or as JSON; floats to 12 significant digits."""
    def num(x):
        return float(f"{x:.12g}") if isinstance(x, float) else x

    if fmt == "structured":
        return json.dumps({"rows": [{k: num(v) for k, v in r.as_dict().items()} for r in rows],
                           "all_ok": all(r.ok for r in rows)}, indent=2, ensure_ascii=False)
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    fields = list(ViterboReport.__dataclass_fields__)
    w.writerow(fields)
    for r in rows:
        w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in r.as_dict().values()])
    return buf.getvalue()


def run_report(config_path, *, samples: int = 10**6, seed: int = 0, workers: int = 1) -> tuple[int, list[ViterboReport]]:
    """Build every configured body's report.  Exit status 0 iff every row is ok.

    Parse and configuration errors propagate as `ConfigError`; numeric
    failures as `viterbo.errors.NumericFailure`.  The CLI maps them to exit
    codes 2 and 3.
    """
    rows = [body_report(b, samples=samples, seed=seed, workers=workers) for b in load_config(config_path)]
    return (0 if all(r.ok for r in rows) else 1), rows


# --------------------------------------------------------------------------
# figure data

FIGURE_KINDS = ("trajectory-2d", "trajectory-nd", "coordinate-evolution")


def figure_trajectory(kind: str, n: int = 3):
    if kind == "trajectory-2d":
        return pl_flow.one_cycle_minimal()
    if kind in ("trajectory-nd", "coordinate-evolution"):
        traj = pl_flow.simulate(pl_flow.explicit_nd_start(n))
        if not traj.closed:
            raise pl_flow.InconsistencyError(f"explicit orbit for n = {n} did not close")
        return traj
    raise ValueError(f"unknown figure kind {kind!r}; expected one of {FIGURE_KINDS}")


def emit_figure_data(kind: str, *, n: int = 3, out=None, per_segment: int = 64, dense: bool = True) -> str:
    """Delimited trajectory data for the orbit plots.

    Columns ``t, p_1..p_n, q_1..q_n, event``; every turning event gets its
    own row with the event kind, and ``dense`` adds ``per_segment`` samples
    per arc.  Returns the text, and writes it to ``out`` when given.
    """
    traj = figure_trajectory(kind, n)
    dim = traj.n
    rows = []
    if dense:
        ts, xs = traj.sample(per_segment)
        rows.extend((float(t), x, "") for t, x in zip(ts, xs))
    rows.append((0.0, traj.start.vector(), "start"))
    rows.extend((ev.time, ev.point.vector(), ev.kind) for ev in traj.events)
    rows.sort(key=lambda r: (r[0], r[2] == ""))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"p_{i + 1}" for i in range(dim)] + [f"q_{i + 1}" for i in range(dim)] + ["event"])
    for t, x, tag in rows:
        w.writerow([f"{t:.12g}"] + [f"{v:.12g}" for v in x] + [tag])
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text
