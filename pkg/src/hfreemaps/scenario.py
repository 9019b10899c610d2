"""Plain-text scenario files.

The format is INI-like with repeatable keys; expression payloads pass
through verbatim (the expression grammar contains no commas, so
comma-separated lists are unambiguous)::

    # comment
    [chart]
    coords = x, y, z

    [exprs]
    f = y*exp(x)

    [distribution]
    field = 0, 1, 0
    field = 1, 0, -y

    [map]
    component = y
    component = exp(x)

    [points]
    count = 50
    box = -2:2, -2:2, -2:2
    seed = 7
    point = 0, 0, 0

    [window]
    box = -1:1, -1:1
    grid = 101, 101

    [task]
    kind = check-hfree

Exactly one ``[task]`` section is required; every other section is
optional and validated by the task that consumes it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExprSyntaxError, ScenarioError
from .expr import Chart, Expr, parse
from .geometry import Distribution
from .hfree import MapSpec
from .lie import VectorField
from .transversal import Window

TASK_KINDS = (
    "check-hfree", "induced-metric", "invert", "construct-1d", "construct-cis",
    "construct-rp", "rp-bracket", "transversal", "genericity", "render-levels",
)

KNOWN_SECTIONS = ("chart", "exprs", "distribution", "map", "points", "window", "task")


@dataclass
class Entry:
    key: str
    value: str
    line: int


@dataclass
class Scenario:
    path: str
    chart: Chart
    names: dict[str, Expr]
    frame: list[VectorField]
    map_components: list[Expr]
    task: str
    task_entries: list[Entry]
    points_entries: list[Entry] = field(default_factory=list)
    window: Window | None = None

    # -- helpers used by the task runners ----------------------------------

    def fail(self, message: str, line: int | None = None):
        raise ScenarioError(message, self.path, line)

    def task_get(self, key: str, default: str | None = None) -> str | None:
        hits = [e for e in self.task_entries if e.key == key]
        if not hits:
            return default
        return hits[-1].value

    def task_get_all(self, key: str) -> list[Entry]:
        return [e for e in self.task_entries if e.key == key]

    def expr(self, text: str, line: int | None = None) -> Expr:
        """Resolve a named expression or parse inline text."""
        name = text.strip()
        if name in self.names:
            return self.names[name]
        try:
            e = parse(text)
        except ExprSyntaxError as err:
            self.fail(f"unknown name or invalid expression {text!r}: {err}", line)
        undeclared = _undeclared(e, self.chart)
        if undeclared:
            self.fail(f"unknown name {undeclared[0]!r} in {text!r}", line)
        return e

    def distribution(self, line: int | None = None) -> Distribution:
        if not self.frame:
            self.fail("task needs a [distribution] section", line)
        return Distribution(self.chart, tuple(self.frame))

    def map_spec(self, line: int | None = None) -> MapSpec:
        if not self.map_components:
            self.fail("task needs a [map] section", line)
        return MapSpec(self.chart, tuple(self.map_components))

    def points(self, seed_override: int | None = None) -> tuple[np.ndarray, int]:
        """Evaluation points and the seed in effect."""
        m = self.chart.dim
        explicit = []
        count, box, seed = 0, None, 0
        for e in self.points_entries:
            if e.key == "point":
                vals = _floats(e.value, self, e.line)
                if len(vals) != m:
                    self.fail(f"point needs {m} coordinates", e.line)
                explicit.append(vals)
            elif e.key == "count":
                count = _int(e.value, self, e.line)
            elif e.key == "box":
                box = _box(e.value, m, self, e.line)
            elif e.key == "seed":
                seed = _int(e.value, self, e.line)
            else:
                self.fail(f"unknown key {e.key!r} in [points]", e.line)
        if seed_override is not None:
            seed = seed_override
        pts = [np.array(explicit)] if explicit else []
        if count:
            if box is None:
                self.fail("[points] with count needs a box")
            rng = np.random.Generator(np.random.Philox(
                key=np.array([seed & 0xFFFFFFFFFFFFFFFF, 0], dtype=np.uint64)))
            pts.append(rng.uniform(box[:, 0], box[:, 1], size=(count, m)))
        if not pts:
            self.fail("task needs a [points] section with points")
        return np.concatenate(pts, axis=0), seed


def _undeclared(e: Expr, chart: Chart) -> list[str]:
    from .expr import coordinates
    return sorted(coordinates(e) - set(chart.coords))


def _floats(text: str, sc: Scenario, line: int) -> list[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        sc.fail(f"expected comma-separated numbers, got {text!r}", line)


def _int(text: str, sc: Scenario, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        sc.fail(f"expected an integer, got {text!r}", line)


def _box(text: str, m: int, sc: Scenario, line: int) -> np.ndarray:
    ranges = []
    for part in text.split(","):
        pieces = part.split(":")
        if len(pieces) != 2:
            sc.fail(f"box ranges look like lo:hi, got {part.strip()!r}", line)
        try:
            lo, hi = float(pieces[0]), float(pieces[1])
        except ValueError:
            sc.fail(f"invalid box bound in {part.strip()!r}", line)
        if not lo < hi:
            sc.fail(f"empty box range {part.strip()!r}", line)
        ranges.append((lo, hi))
    if len(ranges) != m:
        sc.fail(f"box needs {m} ranges, got {len(ranges)}", line)
    return np.array(ranges)


def _parse_sections(text: str, path: str) -> dict[str, list[Entry]]:
    sections: dict[str, list[Entry]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in KNOWN_SECTIONS:
                raise ScenarioError(f"unknown section [{current}]", path, lineno)
            sections.setdefault(current, [])
            continue
        if "=" not in line:
            raise ScenarioError("expected 'key = value'", path, lineno)
        if current is None:
            raise ScenarioError("key outside any section", path, lineno)
        key, _, value = line.partition("=")
        sections[current].append(Entry(key.strip(), value.strip(), lineno))
    return sections


def parse_scenario(text: str, path: str = "<scenario>") -> Scenario:
    sections = _parse_sections(text, path)

    chart_entries = sections.get("chart", [])
    coords = None
    for e in chart_entries:
        if e.key == "coords":
            coords = tuple(n.strip() for n in e.value.split(","))
        elif e.key != "dim":  # dim is implied by coords
            raise ScenarioError(f"unknown key {e.key!r} in [chart]", path, e.line)
    if coords is None:
        raise ScenarioError("scenario needs a [chart] section with coords", path)
    try:
        chart = Chart(coords)
    except ValueError as err:
        raise ScenarioError(str(err), path) from None

    sc = Scenario(path=path, chart=chart, names={}, frame=[], map_components=[],
                  task="", task_entries=[])

    for e in sections.get("exprs", []):
        if e.key in sc.names:
            sc.fail(f"duplicate expression name {e.key!r}", e.line)
        sc.names[e.key] = sc.expr(e.value, e.line)

    for e in sections.get("distribution", []):
        if e.key != "field":
            sc.fail(f"unknown key {e.key!r} in [distribution]", e.line)
        comps = [sc.expr(part, e.line) for part in e.value.split(",")]
        if len(comps) != chart.dim:
            sc.fail(f"field needs {chart.dim} components", e.line)
        sc.frame.append(VectorField(chart, tuple(comps)))

    for e in sections.get("map", []):
        if e.key != "component":
            sc.fail(f"unknown key {e.key!r} in [map]", e.line)
        sc.map_components.append(sc.expr(e.value, e.line))

    sc.points_entries = sections.get("points", [])

    window_entries = sections.get("window", [])
    if window_entries:
        box = None
        grid = (101, 101)
        for e in window_entries:
            if e.key == "box":
                box = _box(e.value, 2, sc, e.line)
            elif e.key == "grid":
                vals = [_int(v, sc, e.line) for v in e.value.split(",")]
                if len(vals) != 2:
                    sc.fail("grid needs two resolutions", e.line)
                grid = (vals[0], vals[1])
            else:
                sc.fail(f"unknown key {e.key!r} in [window]", e.line)
        if box is None:
            sc.fail("[window] needs a box")
        sc.window = Window(box[0, 0], box[0, 1], box[1, 0], box[1, 1],
                           grid[0], grid[1])

    task_entries = sections.get("task")
    if not task_entries:
        raise ScenarioError("scenario needs exactly one [task] section", path)
    kinds = [e for e in task_entries if e.key == "kind"]
    if len(kinds) != 1:
        raise ScenarioError("[task] needs exactly one kind", path)
    if kinds[0].value not in TASK_KINDS:
        raise ScenarioError(
            f"unknown task kind {kinds[0].value!r} (expected one of "
            f"{', '.join(TASK_KINDS)})", path, kinds[0].line)
    sc.task = kinds[0].value
    sc.task_entries = [e for e in task_entries if e.key != "kind"]
    return sc


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_scenario(handle.read(), str(path))
