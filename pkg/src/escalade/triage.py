"""Live triage service: Escalation Risk for every open ticket, over HTTP.

The service scores each open PMR with a trained ensemble and keeps three
numbers per ticket:

* ER, the model's escalation risk, rendered 0-100;
* MER, an analyst's manual 0-100 judgment, display-only (never fed back
  into the model), persisted across restarts;
* CER, the change in rendered ER since the previous recompute, an integer
  in [-100, 100] (0 on the first compute).

Time is explicit: a recompute happens at an instant ``now`` on the corpus
clock, the triage set is every PMR open at that instant, and all features
are computed at cutoff ``now``, so serving a historical corpus behaves
exactly like a live system observed mid-history.

Persistence is a single JSON-lines file: an optional snapshot record first,
then a write-ahead journal of MER writes. The file is rewritten atomically
on snapshot and replayed on startup.

Routes (JSON):
    GET  /api/pmrs?sort=er|mer|cer&order=desc|asc   overview rows
    GET  /api/pmrs/{id}                             in-depth view
    PUT  /api/pmrs/{id}/mer    {"mer": 0..100}      store + echo
    POST /api/recompute        {"now": iso, optional} rescore all open PMRs
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import (
    CritSit,
    EventKind,
    Label,
    MINUTES_PER_DAY,
    PMR,
    iso_to_minutes,
    minutes_to_iso,
)
from .featurize import (
    ALL_FEATURES,
    FeatureSetPreset,
    compute_all_features,
    preset_columns,
    snapshot_series,
)
from .ingest import CorpusIndex, build_index
from .learner import EnsembleModel

MODEL_PATH_ENV = "ESCALADE_MODEL_PATH"
_SNAPSHOT_EVERY = 200


class ModelNotLoadedError(RuntimeError):
    pass


@dataclass
class TriageEntry:
    pmr_id: str
    customer_id: str
    er: float = 0.0
    mer: int | None = None
    cer: int = 0
    last_update: int = 0
    days_open: int = 0
    er_history: list[tuple[int, float]] = field(default_factory=list)
    features: dict[str, float] = field(default_factory=dict)


class TriageStore:
    """Single-file store: one optional snapshot line plus a MER journal."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._writes_since_snapshot = 0
        self._fh = None

    def load(self) -> tuple[dict, dict[str, int]]:
        """(snapshot state or {}, replayed MER values)."""
        state: dict = {}
        mers: dict[str, int] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    obj = json.loads(line)
                    if obj.get("op") == "snapshot":
                        state = obj["state"]
                        mers = {k: int(v) for k, v in state.get("mers", {}).items()}
                    elif obj.get("op") == "mer":
                        mers[obj["pmr_id"]] = int(obj["mer"])
        return state, mers

    def append_mer(self, pmr_id: str, mer: int) -> None:
        if self._fh is None:
            self._fh = open(self.path, "a", encoding="utf-8")
        self._fh.write(json.dumps({"op": "mer", "pmr_id": pmr_id, "mer": mer}) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self._writes_since_snapshot += 1

    def should_snapshot(self) -> bool:
        return self._writes_since_snapshot >= _SNAPSHOT_EVERY

    def write_snapshot(self, state: dict) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"op": "snapshot", "state": state}) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path)
        self._writes_since_snapshot = 0


class TriageService:
    """Holds the corpus, the model, and per-ticket triage state."""

    def __init__(
        self,
        pmrs: list[PMR],
        critsits: list[CritSit],
        model: EnsembleModel | None,
        store: TriageStore | None = None,
        preset: FeatureSetPreset = FeatureSetPreset.FINAL57,
    ):
        self.pmrs = pmrs
        self.critsits = critsits
        self.model = model
        self.preset = preset
        self.index: CorpusIndex = build_index(pmrs, critsits)
        self.store = store
        self._lock = threading.RLock()
        self._entries: dict[str, TriageEntry] = {}
        self._now: int | None = None
        self._columns = preset_columns(preset)
        self._positions = [ALL_FEATURES.index(c) for c in self._columns]
        if store is not None:
            state, mers = store.load()
            self._restore(state, mers)

    # -- state ---------------------------------------------------------------

    def _restore(self, state: dict, mers: dict[str, int]) -> None:
        self._now = state.get("now")
        for pmr_id, entry in state.get("entries", {}).items():
            self._entries[pmr_id] = TriageEntry(
                pmr_id=pmr_id,
                customer_id=entry["customer_id"],
                er=entry["er"],
                mer=entry.get("mer"),
                cer=entry["cer"],
                last_update=entry["last_update"],
                days_open=entry["days_open"],
                er_history=[tuple(p) for p in entry["er_history"]],
                features=entry["features"],
            )
        for pmr_id, mer in mers.items():
            if pmr_id in self._entries:
                self._entries[pmr_id].mer = mer
            else:
                self._entries[pmr_id] = TriageEntry(pmr_id=pmr_id, customer_id="", mer=mer)

    def _state_dict(self) -> dict:
        return {
            "now": self._now,
            "mers": {k: e.mer for k, e in self._entries.items() if e.mer is not None},
            "entries": {
                k: {
                    "customer_id": e.customer_id,
                    "er": e.er,
                    "mer": e.mer,
                    "cer": e.cer,
                    "last_update": e.last_update,
                    "days_open": e.days_open,
                    "er_history": [list(p) for p in e.er_history],
                    "features": e.features,
                }
                for k, e in self._entries.items()
            },
        }

    def state_fingerprint(self) -> str:
        """Digest of all mutable state; GET handlers must not change it."""
        import hashlib

        with self._lock:
            blob = json.dumps(self._state_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def default_now(self) -> int:
        """A mid-history instant: the 60th percentile of open dates."""
        opens = sorted(p.open_date for p in self.pmrs)
        return opens[int(0.6 * (len(opens) - 1))]

    def open_pmrs_at(self, now: int) -> list[PMR]:
        return [
            p
            for p in self.pmrs
            if p.open_date <= now and (p.close_date is None or p.close_date > now)
        ]

    # -- operations ----------------------------------------------------------

    def recompute_all(self, now: int | None = None) -> int:
        """Rescore every open PMR at instant ``now``; returns tickets updated."""
        if self.model is None:
            raise ModelNotLoadedError("no model loaded")
        with self._lock:
            if now is None:
                now = self._now + MINUTES_PER_DAY if self._now is not None else self.default_now()
            if self._now is not None and now <= self._now:
                raise ValueError(f"recompute time {now} not after previous {self._now}")
            open_pmrs = self.open_pmrs_at(now)
            rows = np.empty((len(open_pmrs), len(self._columns)))
            panels = []
            for i, pmr in enumerate(open_pmrs):
                full = compute_all_features(pmr, now, self.index)
                panels.append(dict(zip(ALL_FEATURES, full)))
                rows[i] = [full[j] for j in self._positions]
            ers = self.model.predict_proba(rows) if len(open_pmrs) else np.empty(0)

            open_ids = set()
            for pmr, er, panel in zip(open_pmrs, ers, panels):
                open_ids.add(pmr.pmr_id)
                entry = self._entries.get(pmr.pmr_id)
                if entry is None or not entry.er_history:
                    cer = 0
                    history: list[tuple[int, float]] = []
                    mer = entry.mer if entry else None
                else:
                    cer = round(100 * float(er)) - round(100 * entry.er)
                    history = entry.er_history
                    mer = entry.mer
                history = history + [(now, float(er))]
                self._entries[pmr.pmr_id] = TriageEntry(
                    pmr_id=pmr.pmr_id,
                    customer_id=pmr.customer_id,
                    er=float(er),
                    mer=mer,
                    cer=cer,
                    last_update=now,
                    days_open=(now - pmr.open_date) // MINUTES_PER_DAY,
                    er_history=history,
                    features=panel,
                )
            # tickets that closed since the last recompute leave the triage set
            for pmr_id in [k for k, e in self._entries.items() if k not in open_ids]:
                del self._entries[pmr_id]
            self._now = now
            if self.store is not None:
                self.store.write_snapshot(self._state_dict())
            return len(open_pmrs)

    def overview(self, sort: str = "er", order: str = "desc") -> list[dict]:
        if sort not in ("er", "mer", "cer"):
            raise ValueError(f"sort must be er, mer or cer, got {sort!r}")
        if order not in ("asc", "desc"):
            raise ValueError(f"order must be asc or desc, got {order!r}")
        with self._lock:
            rows = [
                {
                    "pmr_id": e.pmr_id,
                    "customer_id": e.customer_id,
                    "days_open": e.days_open,
                    "er": round(100 * e.er),
                    "mer": e.mer,
                    "cer": e.cer,
                    "last_update": minutes_to_iso(e.last_update) if e.last_update else None,
                }
                for e in self._entries.values()
            ]
        missing_low = -1_000_000

        def key(row):
            v = row[sort]
            return missing_low if v is None else v

        rows.sort(key=lambda r: (key(r), r["pmr_id"]), reverse=(order == "desc"))
        return rows

    def detail(self, pmr_id: str) -> dict | None:
        with self._lock:
            entry = self._entries.get(pmr_id)
            if entry is None or self._now is None:
                return None
            pmr = self.index.pmr_by_id[pmr_id]
            now = self._now
            history = list(entry.er_history)
            features = dict(entry.features)
            mer, cer, er = entry.mer, entry.cer, entry.er
            days_open = entry.days_open
        correspondence = [
            {
                "ts": minutes_to_iso(e.ts),
                "kind": e.kind.value,
                "analyst_id": e.analyst_id,
                "severity": e.severity_after,
                "level": e.level_after.value,
            }
            for e in pmr.events
            if e.ts <= now and e.kind in (EventKind.CONTACT_IN, EventKind.CONTACT_OUT)
        ]
        series = snapshot_series(pmr, Label(is_crit=False, cutoff=now), self.index, self.model, self.preset)
        return {
            "pmr_id": pmr_id,
            "customer_id": pmr.customer_id,
            "er": round(100 * er),
            "mer": mer,
            "cer": cer,
            "days_open": days_open,
            "features": features,
            "correspondence": correspondence,
            "er_history": [[minutes_to_iso(t), round(100 * v)] for t, v in history],
            "snapshot_series": [[seq, round(100 * v)] for seq, v in series],
        }

    def set_mer(self, pmr_id: str, mer: int) -> dict | None:
        if not 0 <= mer <= 100:
            raise ValueError("mer must be within [0, 100]")
        with self._lock:
            entry = self._entries.get(pmr_id)
            if entry is None:
                return None
            entry.mer = mer
            if self.store is not None:
                self.store.append_mer(pmr_id, mer)
                if self.store.should_snapshot():
                    self.store.write_snapshot(self._state_dict())
            return {"pmr_id": pmr_id, "mer": mer}


from pydantic import BaseModel, Field


class MerBody(BaseModel):
    mer: int = Field(ge=0, le=100)


class RecomputeBody(BaseModel):
    now: str | None = None


def create_app(service: TriageService, ui_dir: str | Path | None = None):
    """FastAPI wiring over a TriageService.

    ``ui_dir`` optionally mounts a built dashboard (index.html + dist/) at
    the web root; the API namespace stays under /api either way.
    """
    from fastapi import FastAPI, HTTPException, Query

    app = FastAPI(title="escalade triage", version="1.0")

    @app.get("/api/pmrs")
    def list_pmrs(sort: str = Query("er"), order: str = Query("desc")):
        try:
            return service.overview(sort=sort, order=order)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/api/pmrs/{pmr_id}")
    def pmr_detail(pmr_id: str):
        detail = service.detail(pmr_id)
        if detail is None:
            raise HTTPException(status_code=404, detail=f"unknown PMR {pmr_id}")
        return detail

    @app.put("/api/pmrs/{pmr_id}/mer")
    def put_mer(pmr_id: str, body: MerBody):
        result = service.set_mer(pmr_id, body.mer)
        if result is None:
            raise HTTPException(status_code=404, detail=f"unknown PMR {pmr_id}")
        return result

    @app.post("/api/recompute")
    def recompute(body: RecomputeBody | None = None):
        now = None
        if body is not None and body.now:
            now = iso_to_minutes(body.now)
        try:
            updated = service.recompute_all(now)
        except ModelNotLoadedError as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"updated": updated, "now": minutes_to_iso(service._now)}

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="dashboard")

    return app
