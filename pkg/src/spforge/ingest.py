"""Bug-tracker ingestion: fetch bug records over REST and assemble the corpus.

Talks to a Bugzilla-style API:

    GET {base}/rest/bug?id=N            -> {"bugs": [{"id", "summary", "severity"}]}
    GET {base}/rest/bug/N/attachment    -> {"bugs": {"N": [{"id", "content_type", "file_name"}]}}

Story points are not part of the tracker schema; they arrive through a
sidecar CSV (header ``id,story_point``) and are joined during assembly.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import requests


class IngestError(Exception):
    """Base for ingestion failures."""


class BugNotFoundError(IngestError):
    """The tracker has no bug with the requested id."""


class TransportError(IngestError):
    """Network-level failure that persisted through retries."""


class MalformedResponseError(IngestError):
    """The tracker answered with something that is not the expected shape."""


@dataclass
class AttachmentRef:
    id: int
    content_type: str
    filename: str


@dataclass
class RemoteBug:
    id: int
    summary: str
    severity: str
    attachment_refs: list[AttachmentRef] = field(default_factory=list)

    def __post_init__(self):
        if self.id <= 0:
            raise ValueError(f"bug id must be positive, got {self.id}")
        if not self.summary.strip():
            raise ValueError(f"bug {self.id} has an empty summary")


class BugzillaClient:
    """Minimal read-only client with bounded retries.

    Transport errors (connection failures, timeouts, 5xx) are retried up to
    max_attempts with exponential backoff; 404 and empty result sets raise
    BugNotFoundError without retrying.
    """

    def __init__(
        self,
        base_url: str,
        session: requests.Session | None = None,
        max_attempts: int = 3,
        backoff: float = 0.5,
        timeout: float = 10.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.session = session or requests.Session()
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.timeout = timeout

    def _get(self, url: str, params: dict | None = None) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                response = self.session.get(url, params=params, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code == 404:
                raise BugNotFoundError(f"{url}: not found")
            if response.status_code >= 500:
                last_error = TransportError(f"{url}: HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise MalformedResponseError(f"{url}: unexpected HTTP {response.status_code}")
            try:
                return response.json()
            except (json.JSONDecodeError, ValueError) as exc:
                raise MalformedResponseError(f"{url}: response is not JSON") from exc
        raise TransportError(
            f"{url}: gave up after {self.max_attempts} attempts ({last_error})"
        ) from last_error

    def fetch_bug(self, bug_id: int) -> RemoteBug:
        """Fetch one bug's summary, severity, and attachment references."""
        if bug_id <= 0:
            raise ValueError(f"bug id must be positive, got {bug_id}")

        payload = self._get(
            f"{self.base_url}/rest/bug",
            params={"id": bug_id, "include_fields": "id,summary,severity"},
        )
        bugs = payload.get("bugs")
        if not isinstance(bugs, list):
            raise MalformedResponseError(f"bug {bug_id}: missing 'bugs' list in response")
        if not bugs:
            raise BugNotFoundError(f"bug {bug_id}: tracker returned no match")
        raw = bugs[0]
        try:
            summary = str(raw["summary"])
            severity = str(raw["severity"])
        except (KeyError, TypeError) as exc:
            raise MalformedResponseError(f"bug {bug_id}: missing summary/severity") from exc

        att_payload = self._get(f"{self.base_url}/rest/bug/{bug_id}/attachment")
        raw_atts = att_payload.get("bugs", {}).get(str(bug_id), [])
        if not isinstance(raw_atts, list):
            raise MalformedResponseError(f"bug {bug_id}: malformed attachment listing")
        refs = []
        for att in raw_atts:
            try:
                refs.append(
                    AttachmentRef(
                        id=int(att["id"]),
                        content_type=str(att.get("content_type", "")),
                        filename=str(att.get("file_name", "")),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedResponseError(f"bug {bug_id}: malformed attachment entry") from exc

        return RemoteBug(id=bug_id, summary=summary, severity=severity, attachment_refs=refs)

    def fetch_bugs(self, ids: Sequence[int], max_workers: int = 4) -> list[RemoteBug]:
        """Fetch many bugs concurrently; the result is ordered by bug id."""
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            bugs = list(pool.map(self.fetch_bug, ids))
        return sorted(bugs, key=lambda b: b.id)


def read_annotations(path) -> dict[int, int]:
    """Sidecar story-point annotations: CSV with header id,story_point."""
    annotations: dict[int, int] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) < {"id", "story_point"}:
            raise ValueError(f"{path}: expected CSV header 'id,story_point'")
        for row in reader:
            annotations[int(row["id"])] = int(row["story_point"])
    return annotations


@dataclass
class IngestSummary:
    written: int
    skipped: list[int]

    def __str__(self) -> str:
        msg = f"wrote {self.written} records"
        if self.skipped:
            msg += f"; skipped {len(self.skipped)} bugs without story points: {self.skipped}"
        return msg


def first_image_attachment(bug: RemoteBug) -> AttachmentRef | None:
    for att in sorted(bug.attachment_refs, key=lambda a: a.id):
        if att.content_type.startswith("image/"):
            return att
    return None


def assemble_records(
    bugs: Iterable[RemoteBug],
    sp_annotations: dict[int, int],
    out_path,
    image_ref_template: str = "attachment:{id}",
) -> IngestSummary:
    """Write annotated bugs as corpus lines ordered by bug id.

    Bugs without a story-point annotation are skipped and reported, not
    fatal. image_ref points at the first image attachment via the template
    (e.g. '{base}/attachment.cgi?id={id}' for a fetchable URL).
    """
    ordered = sorted(bugs, key=lambda b: b.id)
    skipped = [b.id for b in ordered if b.id not in sp_annotations]
    written = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for bug in ordered:
            if bug.id not in sp_annotations:
                continue
            obj = {
                "story_id": str(bug.id),
                "story_text": bug.summary,
                "severity": bug.severity,
                "story_point": sp_annotations[bug.id],
            }
            image = first_image_attachment(bug)
            if image is not None:
                obj["image_ref"] = image_ref_template.format(id=image.id)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
            written += 1
    return IngestSummary(written=written, skipped=skipped)
