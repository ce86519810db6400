"""Reference data bundled with the package.

* NCT 2006: examinees taking two Social Studies and two Science subjects
  (n = 195094). Only the two within-group cross tabulations are published,
  so the bundled 108-cell table is a northwest-corner coupling of them. It
  has the published sufficient statistics under both the complete and the
  group-wise model, which is all that fitting and sampling depend on.
* PTGDR diplotype counts for three SNPs (T-549C, C-441T, T-197C) among
  controls and patients of two populations.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

SOCIAL_GEOHIST = ["WH", "JH", "Geo"]
SOCIAL_CIVICS = ["ContS", "Ethics", "P&E"]

# rows WH, JH, Geo; columns ContS, Ethics, P&E
NCT_SOCIAL = {
    ("WH", "ContS"): 32352, ("WH", "Ethics"): 8839, ("WH", "P&E"): 8338,
    ("JH", "ContS"): 51573, ("JH", "Ethics"): 8684, ("JH", "P&E"): 14499,
    ("Geo", "ContS"): 59588, ("Geo", "Ethics"): 4046, ("Geo", "P&E"): 7175,
}

NCT_SCIENCE = {
    ("CSiB", "CSiA"): 1648, ("CSiB", "Chem"): 1572, ("CSiB", "Phys"): 169, ("CSiB", "Earth"): 4012,
    ("Bio", "CSiA"): 21392, ("Bio", "Chem"): 55583, ("Bio", "Phys"): 1416, ("Bio", "Earth"): 1845,
    ("CSiA", "Phys"): 3286, ("Chem", "Phys"): 102856, ("CSiA", "Earth"): 522, ("Chem", "Earth"): 793,
}

NCT_N = 195094


def nct_model(hypothesis: str = "complete") -> dict:
    return {
        "type": "group_selection",
        "hypothesis": hypothesis,
        "groups": [
            {
                "name": "Social",
                "subgroups": [
                    {"name": "GeoHist", "items": list(SOCIAL_GEOHIST)},
                    {"name": "Civics", "items": list(SOCIAL_CIVICS)},
                ],
                "patterns": [[1, 1]],
            },
            {
                "name": "Science",
                "subgroups": [
                    {"name": "Sci1", "items": ["CSiB", "Bio"]},
                    {"name": "Sci2", "items": ["CSiA", "Chem"]},
                    {"name": "Sci3", "items": ["Phys", "Earth"]},
                ],
                "patterns": [[1, 1, 0], [1, 0, 1], [0, 1, 1]],
            },
        ],
    }


def northwest_corner(row_sums, col_sums) -> np.ndarray:
    """Integer table with the given margins, filled greedily from the top-left."""
    rows = list(int(v) for v in row_sums)
    cols = list(int(v) for v in col_sums)
    if sum(rows) != sum(cols):
        raise ValueError("margins have different totals")
    table = np.zeros((len(rows), len(cols)), dtype=np.int64)
    i = j = 0
    while i < len(rows) and j < len(cols):
        v = min(rows[i], cols[j])
        table[i, j] = v
        rows[i] -= v
        cols[j] -= v
        if rows[i] == 0:
            i += 1
        else:
            j += 1
    return table


def nct_counts() -> dict:
    """Cell label -> count for the 108-cell NCT table."""
    social = list(NCT_SOCIAL.items())
    science = sorted(NCT_SCIENCE.items(), key=lambda kv: _science_order(kv[0]))
    table = northwest_corner([v for _, v in social], [v for _, v in science])
    out = {}
    for a, ((g, c), _) in enumerate(social):
        for b, ((s1, s2), _) in enumerate(science):
            out[f"{g},{c};{s1},{s2}"] = int(table[a, b])
    return out


def _science_order(pair):
    order = ["CSiB", "Bio", "CSiA", "Chem", "Phys", "Earth"]
    return tuple(order.index(p) for p in pair)


PTGDR_LOCI = [
    {"name": "T-549C", "alleles": ["C", "T"]},
    {"name": "C-441T", "alleles": ["C", "T"]},
    {"name": "T-197C", "alleles": ["C", "T"]},
]

PTGDR_COLUMNS = ("whites_controls", "whites_patients", "blacks_controls", "blacks_patients")

PTGDR_DIPLOTYPES = {
    "CCT/CCT": (16, 78, 7, 10),
    "CCT/TTT": (27, 106, 12, 27),
    "CCT/TCT": (48, 93, 4, 12),
    "CCT/CCC": (17, 45, 3, 9),
    "TTT/TTT": (9, 43, 2, 7),
    "TTT/TCT": (34, 60, 8, 6),
    "TTT/CCC": (4, 28, 1, 6),
    "TCT/TCT": (11, 20, 7, 0),
    "TCT/CCC": (6, 35, 1, 2),
    "CCC/CCC": (1, 8, 0, 0),
}


def ptgdr_model(hypothesis: str = "hardy_weinberg") -> dict:
    kind = "diplotype" if hypothesis == "haplotype_wise_hw" else "genotype"
    return {"type": "genetics", "hypothesis": hypothesis, "data_kind": kind,
            "loci": [dict(l) for l in PTGDR_LOCI]}


def ptgdr_counts(column: str = "blacks_patients") -> dict:
    k = PTGDR_COLUMNS.index(column)
    return {label: counts[k] for label, counts in PTGDR_DIPLOTYPES.items()}


BUNDLED_MODELS = {
    "nct_complete.json": lambda: nct_model("complete"),
    "nct_subgroupwise.json": lambda: nct_model("subgroup_wise"),
    "nct_groupwise.json": lambda: nct_model("group_wise"),
    "ptgdr_hw.json": lambda: ptgdr_model("hardy_weinberg"),
    "ptgdr_genotype.json": lambda: ptgdr_model("genotype_wise"),
    "ptgdr_haplotype_hw.json": lambda: ptgdr_model("haplotype_wise_hw"),
}


def bundled_path(name: str):
    """Path of a bundled model or data file, or None when no such file ships."""
    ref = resources.files("svexact") / "data" / name
    return ref if ref.is_file() else None


def write_bundled(directory) -> None:
    """Regenerate every bundled file from the constants above."""
    import csv
    import json
    from pathlib import Path

    from .models import compile_model, diplotype_to_genotype, model_from_dict

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, make in BUNDLED_MODELS.items():
        (directory / name).write_text(json.dumps(make(), indent=2) + "\n")

    def write_counts(name, counts):
        with open(directory / name, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["cell", "count"])
            writer.writerows(counts.items())

    write_counts("nct2006.csv", nct_counts())
    hw = compile_model(ptgdr_model("hardy_weinberg"))
    hap = compile_model(ptgdr_model("haplotype_wise_hw"))
    loci = model_from_dict(ptgdr_model("hardy_weinberg")).loci
    for col in PTGDR_COLUMNS:
        counts = {hap.canonicalize(k): v for k, v in ptgdr_counts(col).items()}
        write_counts(f"ptgdr_{col}.csv", counts)
        geno = {lab: 0 for lab in hw.labels}
        for lab, v in counts.items():
            geno[diplotype_to_genotype(loci, lab)] += v
        write_counts(f"ptgdr_{col}_genotype.csv", geno)


if __name__ == "__main__":
    import sys

    write_bundled(sys.argv[1] if len(sys.argv) > 1 else "src/svexact/data")
