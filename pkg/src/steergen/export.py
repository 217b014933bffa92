"""Deployable constrained-model bundles.

A bundle is one ZIP archive holding the model checkpoint, the compiled
constraint automaton with its source expression, and a manifest whose
content hash covers everything else, so any post-export modification is
detected at load time. ``run_bundle`` is the offline runner: batch
constrained generation straight from the archive.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass

from .constraint import ConstraintDfa, dfa_from_json, dfa_to_json
from .core import DataTable, Example
from .errors import CompatibilityError, ExportError, IoError
from .forecast import ForecastTuple, decode_batch
from .model import ModelParams, checkpoint_from_bytes, checkpoint_to_bytes

BUNDLE_VERSION = 1

_CKPT = "model.ckpt"
_DFA = "dfa.json"
_MANIFEST = "manifest.json"


@dataclass(frozen=True)
class Bundle:
    """A loaded export archive: model, constraint, and provenance."""

    params: ModelParams
    dfa: ConstraintDfa
    regex: str
    version: int
    content_hash: str


def export_bundle(params: ModelParams, dfa: ConstraintDfa, regex: str,
                  path: str) -> Bundle:
    """Write a single-file archive; returns the equivalent in-memory bundle."""
    if not _language_nonempty(dfa):
        raise ExportError(f"constraint {regex!r} accepts no sequence at all")
    ckpt = checkpoint_to_bytes(params)
    dfa_bytes = json.dumps(dfa_to_json(dfa), sort_keys=True).encode("utf-8")
    digest = _digest(BUNDLE_VERSION, regex, ckpt, dfa_bytes)
    manifest = json.dumps(
        {"version": BUNDLE_VERSION, "regex": regex, "content_hash": digest},
        sort_keys=True,
    ).encode("utf-8")
    try:
        with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
            zf.writestr(_MANIFEST, manifest)
            zf.writestr(_CKPT, ckpt)
            zf.writestr(_DFA, dfa_bytes)
    except OSError as exc:
        raise IoError(f"cannot write bundle: {exc}") from exc
    return Bundle(params, dfa, regex, BUNDLE_VERSION, digest)


def load_bundle(path: str) -> Bundle:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read bundle: {exc}") from exc
    try:
        with zipfile.ZipFile(io.BytesIO(raw)) as zf:
            names = set(zf.namelist())
            missing = {_MANIFEST, _CKPT, _DFA} - names
            if missing:
                raise CompatibilityError(
                    f"bundle lacks members: {sorted(missing)}"
                )
            manifest_bytes = zf.read(_MANIFEST)
            ckpt = zf.read(_CKPT)
            dfa_bytes = zf.read(_DFA)
    except zipfile.BadZipFile as exc:
        raise CompatibilityError(f"not a bundle archive: {exc}") from exc
    try:
        manifest = json.loads(manifest_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CompatibilityError(f"unreadable bundle manifest: {exc}") from exc
    version = manifest.get("version")
    if version != BUNDLE_VERSION:
        raise CompatibilityError(f"bundle version {version} unsupported")
    regex = manifest.get("regex")
    if not isinstance(regex, str):
        raise CompatibilityError("bundle manifest lacks a source expression")
    digest = _digest(version, regex, ckpt, dfa_bytes)
    if digest != manifest.get("content_hash"):
        raise CompatibilityError("bundle content hash mismatch")
    params = checkpoint_from_bytes(ckpt)
    try:
        dfa = dfa_from_json(json.loads(dfa_bytes.decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CompatibilityError(f"unreadable bundle automaton: {exc}") from exc
    return Bundle(params, dfa, regex, version, digest)


def run_bundle(path: str, data, beam_width: int = 5,
               max_len: int = 30) -> list[ForecastTuple]:
    """Constrained generation for one table or a whole dataset.

    Every input yields a tuple; inputs the constraint cannot satisfy come
    back with ``feasible=False`` rather than being dropped.
    """
    bundle = load_bundle(path)
    if isinstance(data, (DataTable, Example)):
        data = [data]
    tables = [item.table if isinstance(item, Example) else item
              for item in data]
    return decode_batch(bundle.params, bundle.dfa, tables, beam_width,
                        max_len)


def _digest(version: int, regex: str, ckpt: bytes, dfa_bytes: bytes) -> str:
    h = hashlib.sha256()
    h.update(json.dumps({"version": version, "regex": regex},
                        sort_keys=True).encode("utf-8"))
    for name, blob in ((_CKPT, ckpt), (_DFA, dfa_bytes)):
        h.update(name.encode("utf-8"))
        h.update(blob)
    return h.hexdigest()


def _language_nonempty(dfa: ConstraintDfa) -> bool:
    seen = {dfa.start}
    frontier = [dfa.start]
    while frontier:
        q = frontier.pop()
        if q in dfa.accepting:
            return True
        for t in dfa.delta[q]:
            if t != -1 and t not in seen:
                seen.add(t)
                frontier.append(t)
    return False
