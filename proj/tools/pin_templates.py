#!/usr/bin/env python3
"""Rewrites assets/templates/manifest.json with current file hashes."""
import hashlib
import json
import pathlib
import sys

FILES = [
    ("explainer", "Explainer", "V0", "explainer.tmpl"),
    ("refeed", "Refeed", "V0", "refeed.tmpl"),
    ("verifier_v0", "Verifier", "V0", "verifier_v0.tmpl"),
    ("verifier_v1", "Verifier", "V1", "verifier_v1.tmpl"),
    ("verifier_v2", "Verifier", "V2", "verifier_v2.tmpl"),
    ("rubric", None, None, "verifier_rubric.txt"),
    ("criteria", None, None, "verifier_criteria.txt"),
    ("refusal_block", None, None, "refusal_block.txt"),
    ("response_format", None, None, "response_format.txt"),
    ("methods", None, None, "methods.json"),
]


def main() -> None:
    root = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "assets/templates")
    entries = []
    for fid, kind, variant, path in FILES:
        digest = hashlib.sha256((root / path).read_bytes()).hexdigest()
        entry = {"id": fid, "path": path, "sha256": digest}
        if kind:
            entry["kind"] = kind
            entry["variant"] = variant
        entries.append(entry)
    manifest = {"version": "1.0.0", "wording": "reconstructed", "files": entries}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main()
