"""Model backends: a replay corpus, a scripted offline answerer, and an HTTP
client. The harness never ships model weights; anything that answers prompts
plugs in behind the same two-method interface."""
from __future__ import annotations

import hashlib
import json
import os
import re
import urllib.request
from typing import Protocol, runtime_checkable

from .. import formats
from ..errors import ConfigError, DataError


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@runtime_checkable
class LlmBackend(Protocol):
    name: str
    deterministic: bool

    def generate(self, prompt: str) -> str: ...


class ReplayBackend:
    """Replays frozen answers keyed by prompt hash. Fully deterministic."""

    deterministic = True

    def __init__(self, corpus_path, name: str = "replay"):
        self.name = name
        self._answers: dict[str, str] = {}
        with open(corpus_path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    self._answers[obj["prompt_sha256"]] = obj["answer"]
                except (json.JSONDecodeError, KeyError) as exc:
                    raise DataError(f"{corpus_path}:{lineno}: bad replay record ({exc})") from exc

    def __len__(self) -> int:
        return len(self._answers)

    def generate(self, prompt: str) -> str:
        key = prompt_key(prompt)
        if key not in self._answers:
            raise DataError(f"no replay answer for prompt hash {key[:12]}…")
        return self._answers[key]


class HttpJsonBackend:
    """Minimal JSON-over-HTTP backend.

    Endpoint and token come from NOTEKG_BACKEND_URL / NOTEKG_BACKEND_TOKEN
    unless given explicitly. POSTs {"model": ..., "prompt": ...} and expects
    {"answer": ...}.
    """

    deterministic = False

    def __init__(self, name: str, url: str | None = None, token: str | None = None, timeout: float = 120.0):
        self.name = name
        self.url = url or os.environ.get("NOTEKG_BACKEND_URL")
        self.token = token or os.environ.get("NOTEKG_BACKEND_TOKEN")
        self.timeout = timeout
        if not self.url:
            raise ConfigError("no backend URL configured (NOTEKG_BACKEND_URL)")

    def generate(self, prompt: str) -> str:
        payload = json.dumps({"model": self.name, "prompt": prompt}).encode("utf-8")
        request = urllib.request.Request(
            self.url, data=payload, headers={"Content-Type": "application/json"}
        )
        if self.token:
            request.add_header("Authorization", f"Bearer {self.token}")
        with urllib.request.urlopen(request, timeout=self.timeout) as response:
            body = json.loads(response.read().decode("utf-8"))
        return body["answer"]


ABSTAIN_ANSWER = "Cannot determine from the available notes."

_QUESTION_RE = re.compile(r"^QUESTION: (?P<q>.*)$", re.MULTILINE)


def _block(prompt: str, start: str, end: str) -> list[str]:
    lines = prompt.splitlines()
    try:
        i = lines.index(start)
        j = lines.index(end, i + 1)
    except ValueError:
        return []
    return [l for l in lines[i + 1 : j] if l.strip()]


def _content_words(text: str, min_len: int = 4) -> set[str]:
    return {w for w in re.findall(r"[a-z0-9']+", text.casefold()) if len(w) >= min_len}


class ScriptedBackend:
    """Deterministic heuristic answerer.

    Reads the evidence sections out of the prompt and writes short prose
    grounded in them; abstains when the prompt carries no evidence. Used to
    build the shipped replay corpus and as an offline stand-in for a real
    model.
    """

    deterministic = True

    def __init__(self, name: str = "scripted"):
        self.name = name

    def generate(self, prompt: str) -> str:
        graph_lines = _block(prompt, formats.EVIDENCE_START, formats.EVIDENCE_END)
        graph_lines = [
            l for l in graph_lines if formats.is_evidence_line(l)
        ]
        doc_lines = _block(prompt, formats.DOCUMENT_START, formats.DOCUMENT_END)
        doc_lines = [l for l in doc_lines if l.strip() != formats.NO_DOCUMENT_EVIDENCE]
        match = _QUESTION_RE.search(prompt)
        question = match.group("q") if match else ""

        if graph_lines:
            return self._answer_from_graph(graph_lines, doc_lines, question)
        if doc_lines:
            return self._answer_from_documents(doc_lines, question)
        return ABSTAIN_ANSWER

    # -- graph-grounded prose -------------------------------------------

    def _answer_from_graph(
        self, lines: list[str], doc_lines: list[str], question: str
    ) -> str:
        sentences: list[str] = []
        changes: dict[str, list[str]] = {"ADDED": [], "REMOVED": [], "CONTINUED": []}
        edge_admissions: list[tuple[str, str]] = []

        for line in lines:
            tag, _, rest = line.strip().partition(": ")
            label = rest.split(" [", 1)[0].strip()
            detail = rest.split(" [", 1)[1].rstrip("]") if " [" in rest else ""
            if tag in changes:
                changes[tag].append(label)
            elif tag == "NOT FOUND":
                sentences.append(f"NOT FOUND IN CURRENT RECORDS for {label}.")
            elif tag == "RESOLVED":
                sentences.append(
                    f"{label} was resolved; there is a history of {label} from an earlier admission."
                )
            elif tag == "ABSENT":
                sentences.append(f"No {label}; this was ruled out and is negative.")
            elif tag == "POSSIBLE":
                sentences.append(f"Possible {label}; it is suspected and may need further workup.")
            elif tag == "CONDITIONAL":
                sentences.append(f"{label} is pending: it applies only if the stated criteria are met.")
            elif tag == "HYPOTHETICAL":
                sentences.append(f"{label} was discussed as a risk only and may never apply.")
            elif tag == "FAMILY_HISTORY":
                sentences.append(
                    f"There is a family history of {label} in a relative, not the patient."
                )
            elif tag == "HISTORICAL":
                sentences.append(f"History of {label}; it was present formerly and has since resolved.")
            elif tag == "PRESENT":
                marker = "current and active" if "temporality=current" in detail else "documented"
                sentences.append(f"The patient has {label}, which is {marker}.")
            admission = re.search(r"admission=([0-9]+)", detail or "")
            if admission and tag in (
                "PRESENT",
                "ABSENT",
                "POSSIBLE",
                "HISTORICAL",
                "CONDITIONAL",
                "HYPOTHETICAL",
                "FAMILY_HISTORY",
            ):
                edge_admissions.append((admission.group(1), label))

        if any(changes.values()):
            parts = []
            for tag, verb in (("ADDED", "added"), ("REMOVED", "removed"), ("CONTINUED", "continued")):
                if changes[tag]:
                    parts.append(f"{verb} {', '.join(changes[tag])}")
            sentences.insert(0, "Medications changed between admissions: " + "; ".join(parts) + ".")

        distinct = sorted({(a, l) for a, l in edge_admissions})
        if len({a for a, _ in distinct}) >= 2:
            ordered = sorted(distinct)
            sentences.append(f"First came {ordered[0][1]}, then {ordered[-1][1]}.")

        sentences.extend(self._matching_doc_sentences(doc_lines, question, limit=1))
        return " ".join(sentences) if sentences else ABSTAIN_ANSWER

    # -- document-grounded prose ------------------------------------------

    def _matching_doc_sentences(
        self, doc_lines: list[str], question: str, limit: int
    ) -> list[str]:
        q_words = _content_words(question)
        if not q_words:
            return []
        scored: list[tuple[int, int, str]] = []
        position = 0
        for line in doc_lines:
            for sentence in re.split(r"(?<=[.;])\s+", line):
                sentence = sentence.strip()
                if not sentence or sentence.startswith("["):
                    continue
                overlap = len(q_words & _content_words(sentence))
                if overlap >= 2:
                    scored.append((-overlap, position, sentence))
                position += 1
        return [s for _, _, s in sorted(scored)[:limit]]

    def _answer_from_documents(self, doc_lines: list[str], question: str) -> str:
        picked = self._matching_doc_sentences(doc_lines, question, limit=3)
        if not picked:
            return ABSTAIN_ANSWER
        return "Based on the notes: " + " ".join(picked)
