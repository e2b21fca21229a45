"""Finding renderers: plain text and a SARIF 2.1.0 subset.

The SARIF output is the pinned subset shape::

    version, runs[].tool.driver.{name, version, rules[]},
    runs[].results[].{ruleId, message.text, locations[], codeFlows[]?}

Rules carry one entry per query id.  Result locations point at the sink
statement, with a code flow carrying the witness path from the source.
URIs use forward slashes and come from the declaring class's ``file``
declaration when present, else from the class name (dots to slashes
plus ``.class``).  Key order is construction order, so serialization is
deterministic.
"""

from __future__ import annotations

import json
from typing import Iterable

from .engine import Finding, Location

__all__ = [
    "TOOL_NAME",
    "to_text",
    "to_sarif",
    "validate_sarif_subset",
    "findings_to_triples",
]

TOOL_NAME = "ktaint"


def _location_line(label: str, loc: Location) -> str:
    return f"  {label} {loc.render()}"


def to_text(findings: list[Finding]) -> str:
    """One block per finding plus a trailing count line."""
    lines: list[str] = []
    for finding in findings:
        lines.append(f"query {finding.query_id}: {finding.message}")
        lines.append(_location_line("source", finding.source))
        lines.append(_location_line("sink", finding.sink))
        lines.append("  witness " + " -> ".join(w.render() for w in finding.witness))
    count = len(findings)
    lines.append(f"{count} finding" + ("" if count == 1 else "s"))
    return "\n".join(lines) + "\n"


def _sarif_location(loc: Location) -> dict:
    return {
        "physicalLocation": {
            "artifactLocation": {"uri": loc.uri},
            "region": {"startLine": loc.line},
        }
    }


def to_sarif(findings: list[Finding], tool_version: str) -> str:
    """Serialize findings as a SARIF-subset JSON document."""
    rules: dict[str, dict] = {}
    results: list[dict] = []
    for finding in findings:
        if finding.query_id not in rules:
            rules[finding.query_id] = {
                "id": finding.query_id,
                "shortDescription": {"text": finding.message or finding.query_id},
            }
        results.append(
            {
                "ruleId": finding.query_id,
                "message": {"text": finding.message or finding.query_id},
                "locations": [_sarif_location(finding.sink)],
                "codeFlows": [
                    {
                        "threadFlows": [
                            {
                                "locations": [
                                    {"location": _sarif_location(w)}
                                    for w in finding.witness
                                ]
                            }
                        ]
                    }
                ],
            }
        )
    document = {
        "version": "2.1.0",
        "runs": [
            {
                "tool": {
                    "driver": {
                        "name": TOOL_NAME,
                        "version": tool_version,
                        "rules": list(rules.values()),
                    }
                },
                "results": results,
            }
        ],
    }
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def _check(problems: list[str], condition: bool, message: str) -> None:
    if not condition:
        problems.append(message)


def validate_sarif_subset(document: object) -> list[str]:
    """Structural checks against the pinned subset schema; [] when valid."""
    problems: list[str] = []
    _check(problems, isinstance(document, dict), "document must be an object")
    if not isinstance(document, dict):
        return problems
    _check(problems, document.get("version") == "2.1.0", "version must be '2.1.0'")
    runs = document.get("runs")
    _check(problems, isinstance(runs, list) and runs, "runs must be a non-empty array")
    if not isinstance(runs, list):
        return problems
    for run in runs:
        if not isinstance(run, dict):
            problems.append("run must be an object")
            continue
        driver = run.get("tool", {}).get("driver", {}) if isinstance(run.get("tool"), dict) else {}
        _check(problems, isinstance(driver.get("name"), str), "tool.driver.name must be a string")
        _check(problems, isinstance(driver.get("version"), str), "tool.driver.version must be a string")
        rules = driver.get("rules")
        _check(problems, isinstance(rules, list), "tool.driver.rules must be an array")
        rule_ids = set()
        for rule in rules if isinstance(rules, list) else []:
            ok = isinstance(rule, dict) and isinstance(rule.get("id"), str)
            _check(problems, ok, "rule entries need a string id")
            if ok:
                rule_ids.add(rule["id"])
        results = run.get("results")
        _check(problems, isinstance(results, list), "results must be an array")
        for result in results if isinstance(results, list) else []:
            if not isinstance(result, dict):
                problems.append("result must be an object")
                continue
            _check(problems, isinstance(result.get("ruleId"), str), "result.ruleId must be a string")
            _check(
                problems,
                result.get("ruleId") in rule_ids,
                f"result.ruleId {result.get('ruleId')!r} is not declared in rules",
            )
            message = result.get("message")
            _check(
                problems,
                isinstance(message, dict) and isinstance(message.get("text"), str),
                "result.message.text must be a string",
            )
            locations = result.get("locations")
            _check(problems, isinstance(locations, list) and locations, "result.locations must be non-empty")
            for loc in locations if isinstance(locations, list) else []:
                physical = loc.get("physicalLocation", {}) if isinstance(loc, dict) else {}
                artifact = physical.get("artifactLocation", {}) if isinstance(physical, dict) else {}
                uri = artifact.get("uri")
                _check(problems, isinstance(uri, str), "location uri must be a string")
                if isinstance(uri, str):
                    _check(problems, "\\" not in uri, "location uri must use forward slashes")
                region = physical.get("region", {}) if isinstance(physical, dict) else {}
                _check(
                    problems,
                    isinstance(region.get("startLine"), int),
                    "location startLine must be an integer",
                )
    return problems


def findings_to_triples(findings: Iterable[Finding]) -> list[tuple[str, int, int]]:
    """The corpus-manifest view: (query id, source line, sink line), sorted."""
    return sorted(
        {(f.query_id, f.source.line, f.sink.line) for f in findings}
    )
