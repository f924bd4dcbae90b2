from __future__ import annotations

import json

import jsonschema
import pytest

from embatlas.cli import main
from embatlas.report import SCHEMA_SECTIONS, load_schema

from test_cli import write_mini_corpus


@pytest.fixture(scope="module")
def audit_out(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("schema")
    # the mini corpus exercises every section except holes' subsample branch
    import numpy as np

    config = write_mini_corpus(tmp_path, np.random.default_rng(20240813))
    out = tmp_path / "out"
    base = json.loads(config.read_text())
    base["baseline"] = {
        "field": "fst",
        "bins": [
            {"name": "I-II", "values": [1, 2]},
            {"name": "III-IV", "values": [3, 4]},
            {"name": "V-VI", "values": [5, 6]},
        ],
        "baseline_fractions": [0.159, 0.403, 0.438],
        "source_note": "test baseline",
    }
    config.write_text(json.dumps(base))
    assert main(["audit-all", "--config", str(config), "--out-dir", str(out)]) == 0
    return out


def test_every_schema_is_itself_valid():
    for section in SCHEMA_SECTIONS:
        jsonschema.Draft202012Validator.check_schema(load_schema(section))


@pytest.mark.parametrize("section", SCHEMA_SECTIONS)
def test_emitted_documents_validate(audit_out, section):
    path = audit_out / f"{section}.json"
    assert path.exists(), f"audit-all did not emit {section}.json"
    document = json.loads(path.read_text())
    jsonschema.Draft202012Validator(load_schema(section)).validate(document)


def test_unknown_section_rejected():
    with pytest.raises(ValueError, match="known"):
        load_schema("nonsense")
