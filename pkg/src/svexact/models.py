"""Compile statistical model descriptions into Segre-Veronese configurations.

Supported descriptions:

* group-wise selection (items nested in subgroups nested in groups) under the
  complete, subgroup-wise or group-wise independence hypotheses;
* multi-locus genetics under genotype-wise independence, Hardy-Weinberg, or
  haplotype-wise Hardy-Weinberg (diplotype data);
* a raw Segre-Veronese description (``d``, ``tau``, interval bounds, optional
  cell weights).

Compilation builds the model's own cell set, maps every cell to its multiset
of parameter rows, derives interval bounds and then checks that the
Segre-Veronese enumeration of those bounds reproduces the cell set exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Callable, Sequence

from .configuration import (
    Configuration,
    Constraint,
    SegreVeroneseSpec,
    build_matrices,
    enumerate_cells,
    validate_spec,
)
from .errors import DataKindMismatch, InconsistentTau, ModelError, UnknownCell, UnsupportedPattern

GROUP_HYPOTHESES = ("complete", "subgroup_wise", "group_wise")
GENETICS_HYPOTHESES = ("genotype_wise", "hardy_weinberg", "haplotype_wise_hw")


@dataclass
class Subgroup:
    name: str
    items: list


@dataclass
class Group:
    name: str
    subgroups: list
    patterns: list  # admissible (c_1, ..., c_m) choice-count vectors


@dataclass
class GroupSelectionModel:
    groups: list
    hypothesis: str = "complete"


@dataclass
class Locus:
    name: str
    alleles: list


@dataclass
class GeneticsModel:
    loci: list
    hypothesis: str = "hardy_weinberg"
    data_kind: str = "genotype"


@dataclass(eq=False)
class CompiledModel:
    configuration: Configuration
    parameter_names: tuple
    hypothesis: str
    source: object = None
    canonicalize: Callable[[str], str] | None = field(default=None, repr=False)

    @property
    def h(self) -> tuple:
        return self.configuration.weights

    @property
    def labels(self) -> tuple:
        return self.configuration.labels

    def __post_init__(self):
        self._label_index = {lab: i for i, lab in enumerate(self.configuration.labels)}

    def resolve(self, label: str) -> int:
        """Cell index for ``label``; non-canonical spellings are normalised."""
        label = label.strip()
        if label in self._label_index:
            return self._label_index[label]
        if self.canonicalize is not None:
            try:
                canon = self.canonicalize(label)
            except (ValueError, KeyError, IndexError):
                canon = None
            if canon in self._label_index:
                return self._label_index[canon]
        raise UnknownCell(f"unknown cell label {label!r}")


def cell_weight(model: CompiledModel, cell_label: str) -> Fraction:
    return model.h[model.resolve(cell_label)]


def _multinomial(selection: Sequence) -> int:
    """Number of orderings of a multiset selection."""
    counts: dict = {}
    for item in selection:
        counts[item] = counts.get(item, 0) + 1
    out = factorial(len(selection))
    for c in counts.values():
        out //= factorial(c)
    return out


def _qualify(labels: list, prefixes: list) -> list:
    """Prefix labels with their qualifier only where the bare label clashes."""
    seen: dict = {}
    for lab in labels:
        seen[lab] = seen.get(lab, 0) + 1
    return [f"{p}:{lab}" if seen[lab] > 1 else lab for lab, p in zip(labels, prefixes)]


def _finish(
    cell_rows: dict,
    weights: dict,
    cell_names: dict,
    row_labels: list,
    tau: int,
    constraints: list,
    where: str,
) -> Configuration:
    """Build the configuration and verify it reproduces the model's cell set."""
    spec = SegreVeroneseSpec(d=len(row_labels), tau=tau, constraints=tuple(constraints),
                             row_labels=tuple(row_labels))
    by_rows = {}
    for key, rows in cell_rows.items():
        rows = tuple(sorted(rows))
        if rows in by_rows:
            raise UnsupportedPattern(f"{where}: two cells share the parameter multiset {rows}")
        by_rows[rows] = key
    sv_cells = enumerate_cells(spec)
    if set(sv_cells) != set(by_rows):
        extra = len(set(sv_cells) - set(by_rows))
        missing = len(set(by_rows) - set(sv_cells))
        raise UnsupportedPattern(
            f"{where}: choice patterns are not expressible as interval bounds "
            f"({extra} spurious, {missing} missing cells)"
        )
    keys = [by_rows[c] for c in sv_cells]
    return build_matrices(spec, weights=[weights[k] for k in keys], labels=[cell_names[k] for k in keys])


# ---------------------------------------------------------------- group selection


def _group_selections(group: Group) -> list:
    """All selections of one group as tuples (one item-index multiset per subgroup)."""
    out = []
    for pattern in group.patterns:
        per_sub = [
            list(itertools.combinations_with_replacement(range(len(sub.items)), c))
            for sub, c in zip(group.subgroups, pattern)
        ]
        out.extend(itertools.product(*per_sub))
    return out


def _selection_label(group: Group, sel: tuple, item_names: list) -> str:
    parts = []
    for k, picks in enumerate(sel):
        parts.extend(item_names[k][l] for l in picks)
    return ",".join(parts)


def _check_group_model(model: GroupSelectionModel):
    if model.hypothesis not in GROUP_HYPOTHESES:
        raise ModelError(f"unknown hypothesis {model.hypothesis!r}")
    if not model.groups:
        raise ModelError("model has no groups")
    for g in model.groups:
        if not g.subgroups:
            raise ModelError(f"group {g.name!r} has no subgroups")
        for sub in g.subgroups:
            if not sub.items:
                raise ModelError(f"subgroup {sub.name!r} has no items")
            if len(set(sub.items)) != len(sub.items):
                raise ModelError(f"duplicate item labels in subgroup {sub.name!r}")
        if not g.patterns:
            raise ModelError(f"group {g.name!r} has no admissible patterns")
        for p in g.patterns:
            if len(p) != len(g.subgroups) or any(c < 0 for c in p):
                raise ModelError(f"group {g.name!r}: bad pattern {p}")
        if len({tuple(p) for p in g.patterns}) != len(g.patterns):
            raise ModelError(f"group {g.name!r}: duplicate patterns")
        totals = {sum(p) for p in g.patterns}
        if len(totals) != 1:
            raise InconsistentTau(f"group {g.name!r}: patterns choose {sorted(totals)} items")


def compile_group_selection(model: GroupSelectionModel) -> CompiledModel:
    _check_group_model(model)
    groups = model.groups
    hyp = model.hypothesis

    # item display names, qualified by subgroup when a name repeats inside a group
    item_names = []
    for g in groups:
        flat = [(sub.name, it) for sub in g.subgroups for it in sub.items]
        qual = _qualify([it for _, it in flat], [s for s, _ in flat])
        it = iter(qual)
        item_names.append([[next(it) for _ in sub.items] for sub in g.subgroups])

    selections = [_group_selections(g) for g in groups]
    sel_labels = [
        {sel: _selection_label(g, sel, item_names[j]) for sel in selections[j]}
        for j, g in enumerate(groups)
    ]

    row_labels: list = []
    constraints: list = []
    row_of: list = []  # per group: callable(selection) -> list of row indices (1-based)

    if hyp == "complete":
        tau = 0
        for j, g in enumerate(groups):
            start = len(row_labels) + 1
            offsets = []
            for k, sub in enumerate(g.subgroups):
                offsets.append(len(row_labels) + 1)
                s = len(row_labels) + 1
                row_labels.extend(item_names[j][k])
                counts = [p[k] for p in g.patterns]
                constraints.append(Constraint(s=s, r=len(row_labels), c=min(counts), b=max(counts)))
            tau_j = sum(g.patterns[0])
            constraints.append(Constraint(s=start, r=len(row_labels), c=tau_j, b=tau_j))
            tau += tau_j

            def rows(sel, offsets=offsets):
                return [offsets[k] + l for k, picks in enumerate(sel) for l in picks]

            row_of.append(rows)
    elif hyp == "subgroup_wise":
        tau = 0
        for j, g in enumerate(groups):
            start = len(row_labels) + 1
            index_maps = []
            for k, sub in enumerate(g.subgroups):
                sizes = sorted({p[k] for p in g.patterns if p[k] > 0})
                s = len(row_labels) + 1
                imap = {}
                for size in sizes:
                    cs = len(row_labels) + 1
                    for picks in itertools.combinations_with_replacement(range(len(sub.items)), size):
                        imap[picks] = len(row_labels) + 1
                        row_labels.append(",".join(item_names[j][k][l] for l in picks))
                    if len(sizes) > 1:
                        constraints.append(Constraint(s=cs, r=len(row_labels), c=0, b=1))
                index_maps.append(imap)
                if sizes:
                    always = all(p[k] > 0 for p in g.patterns)
                    constraints.append(Constraint(s=s, r=len(row_labels), c=1 if always else 0, b=1))
            nonempty = {sum(1 for c in p if c > 0) for p in g.patterns}
            if len(nonempty) != 1:
                raise InconsistentTau(
                    f"group {g.name!r}: patterns select from {sorted(nonempty)} subgroups"
                )
            tau_j = nonempty.pop()
            if len(row_labels) >= start:
                constraints.append(Constraint(s=start, r=len(row_labels), c=tau_j, b=tau_j))
            tau += tau_j

            def rows(sel, index_maps=index_maps):
                return [index_maps[k][picks] for k, picks in enumerate(sel) if picks]

            row_of.append(rows)
    else:  # group_wise
        tau = len(groups)
        for j, g in enumerate(groups):
            start = len(row_labels) + 1
            flat_offsets = [0]
            for sub in g.subgroups:
                flat_offsets.append(flat_offsets[-1] + len(sub.items))

            def flat(sel, flat_offsets=flat_offsets):
                return tuple(flat_offsets[k] + l for k, picks in enumerate(sel) for l in picks)

            ordered = sorted(selections[j], key=flat)
            imap = {sel: start + n for n, sel in enumerate(ordered)}
            row_labels.extend(sel_labels[j][sel] for sel in ordered)
            constraints.append(Constraint(s=start, r=len(row_labels), c=1, b=1))

            def rows(sel, imap=imap):
                return [imap[sel]]

            row_of.append(rows)

    if tau < 1:
        raise InconsistentTau("models must select at least one item")
    row_labels = _qualify(row_labels, _row_group_names(groups, row_labels, hyp, selections))

    cell_rows, weights, names = {}, {}, {}
    for combo in itertools.product(*selections):
        rows = []
        w = 1
        for j, sel in enumerate(combo):
            rows.extend(row_of[j](sel))
            for picks in sel:
                w *= _multinomial(picks)
        cell_rows[combo] = rows
        weights[combo] = Fraction(w)
        names[combo] = ";".join(sel_labels[j][sel] for j, sel in enumerate(combo))

    config = _finish(cell_rows, weights, names, row_labels, tau, constraints, "group selection")
    return CompiledModel(
        configuration=config,
        parameter_names=config.spec.row_labels,
        hypothesis=hyp,
        source=model,
    )


def _row_group_names(groups, row_labels, hyp, selections) -> list:
    """Group name owning each row, used to disambiguate clashing row labels."""
    out = []
    for j, g in enumerate(groups):
        if hyp == "group_wise":
            n = len(selections[j])
        elif hyp == "complete":
            n = sum(len(sub.items) for sub in g.subgroups)
        else:
            n = 0
            for k, sub in enumerate(g.subgroups):
                for size in {p[k] for p in g.patterns if p[k] > 0}:
                    n += len(list(itertools.combinations_with_replacement(range(len(sub.items)), size)))
        out.extend([g.name] * n)
    return out


# ---------------------------------------------------------------- genetics


def _allele_sep(loci) -> str:
    return "" if all(len(a) == 1 for loc in loci for a in loc.alleles) else "|"


def _hap_sep(loci) -> str:
    return "" if all(len(a) == 1 for loc in loci for a in loc.alleles) else "-"


def _split_alleles(text: str, alleles: list, sep: str) -> list:
    if sep:
        return text.split(sep)
    return list(text)


def genotype_label(loci, genotype: Sequence[tuple]) -> str:
    """Label such as ``CT,CC,TT`` for per-locus allele index pairs."""
    sep = _allele_sep(loci)
    return ",".join(
        sep.join(loc.alleles[a] for a in pair) for loc, pair in zip(loci, genotype)
    )


def haplotype_label(loci, hap: Sequence[int]) -> str:
    sep = _hap_sep(loci)
    return sep.join(loc.alleles[a] for loc, a in zip(loci, hap))


def diplotype_label(loci, h1: Sequence[int], h2: Sequence[int]) -> str:
    h1, h2 = sorted([tuple(h1), tuple(h2)])
    return f"{haplotype_label(loci, h1)}/{haplotype_label(loci, h2)}"


def parse_haplotype(loci, text: str) -> tuple:
    sep = _hap_sep(loci)
    parts = text.split(sep) if sep else list(text)
    if len(parts) != len(loci):
        raise ValueError(f"haplotype {text!r} does not have {len(loci)} alleles")
    return tuple(loc.alleles.index(p) for loc, p in zip(loci, parts))


def parse_genotype(loci, text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != len(loci):
        raise ValueError(f"genotype {text!r} does not cover {len(loci)} loci")
    sep = _allele_sep(loci)
    out = []
    for loc, part in zip(loci, parts):
        alleles = _split_alleles(part.strip(), loc.alleles, sep)
        if len(alleles) != 2:
            raise ValueError(f"locus genotype {part!r} is not two alleles")
        out.append(tuple(sorted(loc.alleles.index(a) for a in alleles)))
    return tuple(out)


def diplotype_to_genotype(loci, label: str) -> str:
    """Collapse a diplotype label (``CCT/TTT``) to its genotype label (``CT,CT,TT``)."""
    h1, h2 = (parse_haplotype(loci, p) for p in label.split("/"))
    return genotype_label(loci, [tuple(sorted(pair)) for pair in zip(h1, h2)])


def _check_genetics(model: GeneticsModel):
    if model.hypothesis not in GENETICS_HYPOTHESES:
        raise ModelError(f"unknown hypothesis {model.hypothesis!r}")
    if model.data_kind not in ("genotype", "diplotype"):
        raise ModelError(f"unknown data_kind {model.data_kind!r}")
    if model.hypothesis == "haplotype_wise_hw" and model.data_kind != "diplotype":
        raise DataKindMismatch("haplotype_wise_hw requires diplotype data")
    if not model.loci:
        raise ModelError("model has no loci")
    for loc in model.loci:
        if not loc.alleles or len(set(loc.alleles)) != len(loc.alleles):
            raise ModelError(f"locus {loc.name!r} needs distinct allele labels")


def compile_genetics(model: GeneticsModel) -> CompiledModel:
    _check_genetics(model)
    loci = model.loci
    J = len(loci)
    hyp = model.hypothesis

    if hyp == "haplotype_wise_hw":
        haps = list(itertools.product(*[range(len(loc.alleles)) for loc in loci]))
        row_labels = [haplotype_label(loci, h) for h in haps]
        cell_rows, weights, names = {}, {}, {}
        for a, b in itertools.combinations_with_replacement(range(len(haps)), 2):
            key = (a, b)
            cell_rows[key] = [a + 1, b + 1]
            weights[key] = Fraction(1 if a == b else 2)
            names[key] = diplotype_label(loci, haps[a], haps[b])
        config = _finish(cell_rows, weights, names, row_labels, 2, [], "haplotype-wise HW")

        def canon(label: str) -> str:
            h1, h2 = (parse_haplotype(loci, p.strip()) for p in label.split("/"))
            return diplotype_label(loci, h1, h2)

        return CompiledModel(config, config.spec.row_labels, hyp, model, canon)

    per_locus = [
        list(itertools.combinations_with_replacement(range(len(loc.alleles)), 2)) for loc in loci
    ]
    row_labels, constraints = [], []
    offsets = []
    sep = _allele_sep(loci)
    for j, loc in enumerate(loci):
        offsets.append(len(row_labels) + 1)
        s = len(row_labels) + 1
        if hyp == "genotype_wise":
            row_labels.extend(f"{loc.name}:" + sep.join(loc.alleles[a] for a in g) for g in per_locus[j])
            constraints.append(Constraint(s=s, r=len(row_labels), c=1, b=1))
        else:
            row_labels.extend(f"{loc.name}:{a}" for a in loc.alleles)
            constraints.append(Constraint(s=s, r=len(row_labels), c=2, b=2))
    tau = J if hyp == "genotype_wise" else 2 * J

    cell_rows, weights, names = {}, {}, {}
    for geno in itertools.product(*per_locus):
        if hyp == "genotype_wise":
            rows = [offsets[j] + per_locus[j].index(g) for j, g in enumerate(geno)]
            w = 1
        else:
            rows = [offsets[j] + a for j, g in enumerate(geno) for a in g]
            w = 2 ** sum(1 for g in geno if g[0] != g[1])
        cell_rows[geno] = rows
        weights[geno] = Fraction(w)
        names[geno] = genotype_label(loci, geno)
    if tau < 2 and hyp == "hardy_weinberg":
        raise InconsistentTau("Hardy-Weinberg needs at least one locus")
    config = _finish(cell_rows, weights, names, row_labels, tau, constraints, "genetics")

    def canon(label: str) -> str:
        if "/" in label:
            return diplotype_to_genotype(loci, label)
        return genotype_label(loci, parse_genotype(loci, label))

    return CompiledModel(config, config.spec.row_labels, hyp, model, canon)


# ---------------------------------------------------------------- JSON model files


def model_from_dict(doc: dict):
    kind = doc.get("type")
    if kind == "group_selection":
        groups = []
        for g in doc["groups"]:
            subs = [Subgroup(name=s.get("name", f"sub{k + 1}"), items=list(s["items"]))
                    for k, s in enumerate(g["subgroups"])]
            if "patterns" in g:
                patterns = [tuple(int(c) for c in p) for p in g["patterns"]]
            else:
                patterns = [tuple(int(s.get("choose", 1)) for s in g["subgroups"])]
            groups.append(Group(name=g.get("name", f"group{len(groups) + 1}"), subgroups=subs,
                                patterns=patterns))
        return GroupSelectionModel(groups=groups, hypothesis=doc.get("hypothesis", "complete"))
    if kind == "genetics":
        loci = [Locus(name=l.get("name", f"locus{k + 1}"), alleles=list(l["alleles"]))
                for k, l in enumerate(doc["loci"])]
        return GeneticsModel(loci=loci, hypothesis=doc.get("hypothesis", "hardy_weinberg"),
                             data_kind=doc.get("data_kind", "genotype"))
    if kind == "segre_veronese":
        spec = SegreVeroneseSpec(
            d=int(doc["d"]),
            tau=int(doc["tau"]),
            constraints=tuple(Constraint(**{k: int(c[k]) for k in "srcb"}) for c in doc.get("constraints", [])),
            row_labels=tuple(doc.get("row_labels", ())),
        )
        return RawModel(spec=spec, weights=doc.get("weights"))
    raise ModelError(f"unknown model type {kind!r}")


@dataclass
class RawModel:
    """A Segre-Veronese configuration given directly by its interval bounds."""

    spec: SegreVeroneseSpec
    weights: list | None = None


def compile_raw(model: RawModel) -> CompiledModel:
    report = validate_spec(model.spec)
    if not report.ok:
        raise ModelError("; ".join(report.violations))
    weights = None if model.weights is None else [Fraction(str(w)) for w in model.weights]
    config = build_matrices(model.spec, weights=weights)
    return CompiledModel(config, model.spec.row_labels, "segre_veronese", model)


def compile_model(model) -> CompiledModel:
    if isinstance(model, dict):
        model = model_from_dict(model)
    if isinstance(model, RawModel):
        return compile_raw(model)
    if isinstance(model, GroupSelectionModel):
        return compile_group_selection(model)
    if isinstance(model, GeneticsModel):
        return compile_genetics(model)
    raise TypeError(f"cannot compile {type(model).__name__}")
