"""Class configuration files.

An INI-style document with one ``[class]`` section and model stanzas in
file order (file order fixes the model indices, hence tie-breaking)::

    [class]
    alphabet = 2
    true = lambda
    tie-break = weight-then-index

    [model lambda]
    kind = iid
    theta = 1/2 1/2
    weight = 2/3

    [model nu]
    kind = factorizable
    table = 0 1
    tail = 1/2 1/2
    weight = 1/3

Generator stanzas expand to several models::

    [family lower]
    family = example-lowerbound
    n = 8

    [family grid]
    family = bernoulli
    thetas = 0 1/4 1/2 3/4 1

``bernoulli`` thetas are probabilities of symbol 1; models are named
``bern<theta>``; weights default to ``1/k``.  Rows of a factorizable
``table`` are separated by ``;``.  Tabular ``values`` are ``string:value``
pairs with ``-`` for the empty string.
"""

from __future__ import annotations

import configparser
from fractions import Fraction

from .measures import DeterministicModel, Model, ModelError, build_model, parse_fraction
from .predictors import ClassError, TieBreak, WeightedClass


class ConfigError(ValueError):
    """Invalid class configuration."""


def _rationals(text: str) -> list[str]:
    return text.split()


def _model_from_section(name: str, sec, alphabet: int) -> Model:
    kind = sec.get("kind")
    if kind is None:
        raise ConfigError(f"model {name!r}: missing kind")
    spec: dict = {"kind": kind, "alphabet": alphabet}
    if "theta" in sec:
        spec["theta"] = _rationals(sec["theta"])
    for key in ("prefix", "period", "generator"):
        if key in sec:
            spec[key] = sec[key].strip()
    if "table" in sec:
        rows = [r for r in sec["table"].split(";") if r.strip()]
        spec["table"] = [_rationals(r) for r in rows]
    if "tail" in sec:
        spec["tail"] = _rationals(sec["tail"])
    if "values" in sec:
        values = {}
        for item in sec["values"].split():
            key, sep, val = item.partition(":")
            if not sep:
                raise ConfigError(f"model {name!r}: malformed values entry {item!r}")
            values["" if key == "-" else key] = val
        spec["values"] = values
    try:
        model = build_model(spec)
    except ModelError as exc:
        raise ConfigError(f"model {name!r}: {exc}") from exc
    if model.alphabet_size != alphabet:
        raise ConfigError(f"model {name!r}: alphabet size {model.alphabet_size} != {alphabet}")
    return model


def _family(name: str, sec, alphabet: int) -> list[tuple[str, Model, Fraction | None]]:
    family = sec.get("family")
    if family == "example-lowerbound":
        n = sec.getint("n")
        if n is None or n < 1:
            raise ConfigError(f"family {name!r}: n must be a positive integer")
        w = Fraction(1, n)
        out = [(f"nu{i}", DeterministicModel((1,) * (i - 1), (0,)), w) for i in range(1, n)]
        out.append(("mu", DeterministicModel((), (1,)), w))
        return out
    if family == "bernoulli":
        thetas = [parse_fraction(t) for t in _rationals(sec.get("thetas", ""))]
        if not thetas:
            raise ConfigError(f"family {name!r}: thetas missing")
        w = parse_fraction(sec["weight"]) if "weight" in sec else Fraction(1, len(thetas))
        try:
            return [(f"bern{t}", build_model({"kind": "iid", "theta": [1 - t, t]}), w) for t in thetas]
        except ModelError as exc:
            raise ConfigError(f"family {name!r}: {exc}") from exc
    raise ConfigError(f"family {name!r}: unknown family {family!r}")


def parse_class_config(text: str) -> WeightedClass:
    """Parse a class configuration document into a :class:`WeightedClass`."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"syntax error: {exc}") from exc
    head = parser["class"] if parser.has_section("class") else {}
    try:
        alphabet = int(head.get("alphabet", "2"))
    except ValueError as exc:
        raise ConfigError("alphabet must be an integer") from exc

    names: list[str] = []
    models: list[Model] = []
    weights: list[Fraction] = []
    for section in parser.sections():
        kind, _, name = section.partition(" ")
        sec = parser[section]
        if kind == "class":
            continue
        if kind == "model":
            if "weight" not in sec:
                raise ConfigError(f"model {name!r}: missing weight")
            try:
                w = parse_fraction(sec["weight"])
            except ModelError as exc:
                raise ConfigError(f"model {name!r}: weight: {exc}") from exc
            entries = [(name, _model_from_section(name, sec, alphabet), w)]
        elif kind == "family":
            entries = _family(name, sec, alphabet)
        else:
            raise ConfigError(f"unknown section [{section}]")
        for nm, model, w in entries:
            if w <= 0:
                raise ConfigError(f"model {nm!r}: weight must be positive, got {w}")
            names.append(nm)
            models.append(model)
            weights.append(w)

    if not models:
        raise ConfigError("no models defined")
    total = sum(weights)
    if total > 1:
        raise ConfigError(f"weights sum to {total} > 1")
    true = head.get("true")
    if true is None:
        if "mu" in names:
            true = "mu"
        else:
            raise ConfigError("missing true model: set `true = <name>` in [class]")
    if true not in names:
        raise ConfigError(f"true model {true!r} is not defined")
    try:
        tiebreak = TieBreak.parse(head.get("tie-break", "weight-then-index"))
        return WeightedClass(tuple(models), tuple(weights), tuple(names), names.index(true), tiebreak)
    except (ClassError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _fmt_row(row) -> str:
    return " ".join(str(p) for p in row)


def render_class_config(cls: WeightedClass) -> str:
    """Inverse of :func:`parse_class_config` (families are written out flat)."""
    lines = ["[class]", f"alphabet = {cls.alphabet_size}"]
    if cls.true_index is not None:
        lines.append(f"true = {cls.names[cls.true_index]}")
    lines.append(f"tie-break = {cls.tiebreak}")
    for name, model, w in zip(cls.names, cls.models, cls.weights):
        spec = model.spec()
        lines += ["", f"[model {name}]", f"kind = {spec['kind']}"]
        if "theta" in spec:
            lines.append(f"theta = {_fmt_row(spec['theta'])}")
        for key in ("prefix", "period", "generator"):
            if key in spec:
                lines.append(f"{key} = {spec[key]}")
        if spec.get("table"):
            lines.append("table = " + " ; ".join(_fmt_row(r) for r in spec["table"]))
        if "values" in spec:
            items = " ".join(f"{k or '-'}:{v}" for k, v in spec["values"].items())
            lines.append(f"values = {items}")
        if "tail" in spec:
            lines.append(f"tail = {_fmt_row(spec['tail'])}")
        lines.append(f"weight = {w}")
    return "\n".join(lines) + "\n"


def load_class_config(path) -> WeightedClass:
    with open(path, encoding="utf-8") as fh:
        return parse_class_config(fh.read())
