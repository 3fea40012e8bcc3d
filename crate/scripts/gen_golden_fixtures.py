#!/usr/bin/env python3
"""Regenerate the golden evaluation fixtures under crates/core/tests/fixtures/golden.

The manifest has the per-CWE vulnerable/benign counts of the evaluation
corpus. Each prediction file reproduces one system's confusion counts; the
choice of which benign samples are false positives is deterministic.
"""
import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures/golden"

# cwe -> (vulnerable, benign)
COUNTS = {
    78: (10, 10), 121: (10, 10), 122: (10, 10), 134: (10, 10), 190: (10, 10),
    252: (10, 10), 369: (10, 10), 400: (10, 10), 401: (10, 10), 415: (6, 6),
    416: (7, 7), 457: (10, 10), 476: (9, 9), 789: (10, 8),
}
# cwe -> false positives of the parallel+verifier system
PARA_V_FP = {
    476: 1, 252: 2, 401: 3, 457: 3, 78: 4, 415: 3, 122: 6,
    190: 7, 369: 7, 121: 8, 134: 9, 416: 7, 789: 8, 400: 10,
}


def manifest():
    samples = []
    for cwe, (nv, nb) in sorted(COUNTS.items()):
        for k in range(max(nv, nb)):
            stem = f"CWE{cwe}_golden__case_{k + 1:02d}"
            for label, suffix, present in (("vulnerable", "bad", k < nv), ("benign", "good", k < nb)):
                if not present:
                    continue
                code = f"void function_1(void)\n{{\n    int value = {cwe * 100 + k};\n    (void)value;\n}}\n"
                samples.append({
                    "id": f"{stem}#{suffix}",
                    "cwe": f"CWE-{cwe}",
                    "label": label,
                    "code": code,
                    "source_path": f"CWE{cwe}/{stem}.c",
                    "line_count": len(code.splitlines()),
                })
    return samples


def prediction(sample, vulnerable, cwes, decided_by):
    return {
        "sample_id": sample["id"],
        "predicted_vulnerable": vulnerable,
        "predicted_cwes": cwes,
        "decided_by": decided_by,
    }


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows))


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    samples = manifest()
    assert sum(s["label"] == "vulnerable" for s in samples) == 132
    assert sum(s["label"] == "benign" for s in samples) == 130
    write_jsonl(OUT / "manifest.jsonl", samples)

    benign = [s for s in samples if s["label"] == "benign"]
    para_v_fp = []
    seen = {}
    for s in benign:
        cwe = int(s["cwe"][4:])
        seen[cwe] = seen.get(cwe, 0) + 1
        if seen[cwe] <= PARA_V_FP[cwe]:
            para_v_fp.append(s["id"])
    para_v_tn = [s["id"] for s in benign if s["id"] not in set(para_v_fp)]
    assert len(para_v_fp) == 78 and len(para_v_tn) == 52

    fp_sets = {
        "para_v": set(para_v_fp),
        # The verifier removes 41 false positives and adds none.
        "para_nov": set(para_v_fp) | set(para_v_tn[:41]),
        # Single expert: 28 more false positives than the full system.
        "single": set(para_v_fp) | set(para_v_tn[:28]),
        # Serial: 52 new false positives, 57 removed (73 total).
        "serial_v": set(para_v_tn) | set(para_v_fp[57:]),
    }
    assert [len(fp_sets[k]) for k in ("para_v", "para_nov", "single", "serial_v")] == [78, 119, 106, 73]
    decided = {"para_v": "verifier_override", "para_nov": "majority_vote",
               "single": "single_expert", "serial_v": "verifier_override"}

    for name, fps in fp_sets.items():
        rows = []
        for s in samples:
            if s["label"] == "vulnerable":
                rows.append(prediction(s, True, [s["cwe"]], decided[name]))
            elif s["id"] in fps:
                rows.append(prediction(s, True, [s["cwe"]], decided[name]))
            else:
                rows.append(prediction(s, False, [], decided[name]))
        write_jsonl(OUT / f"{name}.jsonl", rows)

    write_jsonl(OUT / "cppcheck.jsonl",
                [prediction(s, True, [], "single_expert") for s in samples])


if __name__ == "__main__":
    main()
