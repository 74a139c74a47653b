"""Manual-validation queue: persistent review state plus the HTTP API.

Segmentation leaves a queue directory behind (previews, page copies,
segmentation JSONs and a ``queue.json`` item list).  Verdicts are recorded
in an append-only JSON-lines journal, ``journal.jsonl``; the current
verdict of an item is simply the last journal entry for its id, so a
restart replays the journal and loses nothing.  The curator UI talks to
the FastAPI app from :func:`create_app` and never mutates state any other
way.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .profileseg import SystemRegion

QUEUE_FILE = "queue.json"
JOURNAL_FILE = "journal.jsonl"
VERDICTS = ("accepted", "rejected")


@dataclass
class ReviewItem:
    """One segmented system awaiting (or holding) a curator verdict."""

    item_id: str
    page_id: str
    source: str
    region: SystemRegion
    preview: str
    page_image: str
    page_height: int
    page_width: int
    verdict: str = "pending"
    note: str | None = None
    timestamp: str | None = None

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id, "page_id": self.page_id,
            "source": self.source, "region": self.region.to_dict(),
            "preview": self.preview, "page_image": self.page_image,
            "page_height": self.page_height, "page_width": self.page_width,
            "verdict": self.verdict, "note": self.note,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReviewItem":
        return cls(
            item_id=d["item_id"], page_id=d["page_id"], source=d["source"],
            region=SystemRegion.from_dict(d["region"]), preview=d["preview"],
            page_image=d["page_image"], page_height=d["page_height"],
            page_width=d["page_width"], verdict=d.get("verdict", "pending"),
            note=d.get("note"), timestamp=d.get("timestamp"),
        )


def write_queue(queue_dir: str | Path, items: list[ReviewItem]) -> None:
    """Write the static item list. Verdict state lives in the journal only."""
    doc = {"items": [
        {k: v for k, v in it.to_dict().items()
         if k not in ("verdict", "note", "timestamp")}
        for it in items
    ]}
    (Path(queue_dir) / QUEUE_FILE).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class ReviewQueue:
    """Queue state assembled from queue.json plus a journal replay."""

    def __init__(self, queue_dir: str | Path):
        self.root = Path(queue_dir)
        queue_path = self.root / QUEUE_FILE
        if not queue_path.exists():
            raise FileNotFoundError(f"no {QUEUE_FILE} in {self.root}")
        doc = json.loads(queue_path.read_text(encoding="utf-8"))
        self._items: dict[str, ReviewItem] = {}
        self._order: list[str] = []
        for d in doc["items"]:
            item = ReviewItem.from_dict(d)
            self._items[item.item_id] = item
            self._order.append(item.item_id)
        self._lock = threading.Lock()
        self._replay()

    def _replay(self) -> None:
        journal = self.root / JOURNAL_FILE
        if not journal.exists():
            return
        for line in journal.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            item = self._items.get(entry["item_id"])
            if item is not None:
                item.verdict = entry["verdict"]
                item.note = entry.get("note")
                item.timestamp = entry.get("ts")

    # -- queries ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self._order)

    def get(self, item_id: str) -> ReviewItem | None:
        return self._items.get(item_id)

    def items(self, status: str = "all") -> list[ReviewItem]:
        out = [self._items[i] for i in self._order]
        if status != "all":
            out = [it for it in out if it.verdict == status]
        return out

    def counts(self) -> dict:
        c = {"pending": 0, "accepted": 0, "rejected": 0}
        for it in self._items.values():
            c[it.verdict] = c.get(it.verdict, 0) + 1
        c["total"] = len(self._items)
        return c

    def accepted_ids(self) -> set[str]:
        return {i for i, it in self._items.items() if it.verdict == "accepted"}

    # -- mutation --------------------------------------------------------

    def record(self, item_id: str, verdict: str, note: str | None = None) -> ReviewItem:
        """Append a verdict to the journal and update the snapshot."""
        if verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}, got {verdict!r}")
        item = self._items.get(item_id)
        if item is None:
            raise KeyError(item_id)
        ts = datetime.now(timezone.utc).isoformat()
        entry = {"item_id": item_id, "verdict": verdict, "note": note, "ts": ts}
        with self._lock:
            with open(self.root / JOURNAL_FILE, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, sort_keys=True) + "\n")
                f.flush()
            item.verdict = verdict
            item.note = note
            item.timestamp = ts
        return item


# ---------------------------------------------------------------------------
# HTTP API
# ---------------------------------------------------------------------------

def create_app(queue_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    """Build the review API (and optionally mount the static curator UI)."""
    queue = ReviewQueue(queue_dir)
    root = Path(queue_dir)
    app = FastAPI(title="visionseg review API")

    @app.get("/api/items")
    def list_items(status: str = "pending", page: int = 0, page_size: int = 50):
        if status not in ("pending", "accepted", "rejected", "all"):
            return JSONResponse({"error": f"unknown status {status!r}"}, status_code=400)
        matching = queue.items(status)
        lo = max(0, page) * page_size
        return {
            "items": [it.to_dict() for it in matching[lo:lo + page_size]],
            "total": len(matching),
            "page": page,
            "page_size": page_size,
        }

    @app.get("/api/items/{item_id}")
    def get_item(item_id: str):
        item = queue.get(item_id)
        if item is None:
            return JSONResponse({"error": "unknown item"}, status_code=404)
        return item.to_dict()

    @app.get("/api/items/{item_id}/image")
    def get_image(item_id: str):
        item = queue.get(item_id)
        if item is None or not (root / item.preview).exists():
            return JSONResponse({"error": "unknown item"}, status_code=404)
        return FileResponse(root / item.preview, media_type="image/png")

    @app.get("/api/items/{item_id}/page")
    def get_page_image(item_id: str):
        item = queue.get(item_id)
        if item is None or not (root / item.page_image).exists():
            return JSONResponse({"error": "unknown item"}, status_code=404)
        return FileResponse(root / item.page_image, media_type="image/png")

    @app.get("/api/items/{item_id}/context")
    def get_context(item_id: str):
        item = queue.get(item_id)
        if item is None:
            return JSONResponse({"error": "unknown item"}, status_code=404)
        return {
            "item_id": item.item_id,
            "page_id": item.page_id,
            "region": item.region.to_dict(),
            "page_height": item.page_height,
            "page_width": item.page_width,
            "page_image_url": f"/api/items/{item.item_id}/page",
        }

    @app.post("/api/items/{item_id}/verdict")
    async def post_verdict(item_id: str, request: Request):
        if queue.get(item_id) is None:
            return JSONResponse({"error": "unknown item"}, status_code=404)
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            return JSONResponse({"error": "body is not valid JSON"}, status_code=400)
        if not isinstance(body, dict):
            return JSONResponse({"error": "body must be a JSON object"}, status_code=400)
        verdict = body.get("verdict")
        note = body.get("note")
        if verdict not in VERDICTS or (note is not None and not isinstance(note, str)):
            return JSONResponse(
                {"error": f"verdict must be one of {list(VERDICTS)}"}, status_code=409)
        item = queue.record(item_id, verdict, note)
        return item.to_dict()

    @app.get("/api/progress")
    def progress():
        return queue.counts()

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
