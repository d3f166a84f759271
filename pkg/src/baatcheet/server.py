"""HTTP surface for a trained engine.

Four endpoints: the chat webhook, a pure parse probe, a synchronous
retrain trigger, and status. Bodies are parsed by hand so malformed input
maps to 400 (not a framework-shaped 422); 422 is reserved for corpus
diagnostics out of /model/train, and 503 means no model is loaded yet.

Handlers are plain sync functions (the framework runs them on a thread
pool), so the engine's per-sender locks serialize one conversation while
distinct conversations proceed concurrently. Retraining swaps the whole
engine object by one attribute assignment: requests already in flight
keep the old reference and finish on the model they started with.
"""

from __future__ import annotations

import json
import time
from typing import Optional

from fastapi import Depends, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import engine as engine_module
from .errors import BaatcheetError
from .kg import Triple


def _triple_dict(triple: Optional[Triple]) -> Optional[dict]:
    if triple is None:
        return None
    return {"subject": triple.subject, "predicate": triple.predicate, "object": triple.object}


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


async def _raw_body(request: Request) -> bytes:
    return await request.body()


def _decode(raw: bytes) -> Optional[dict]:
    try:
        payload = json.loads(raw)
    except (ValueError, UnicodeDecodeError):
        return None
    return payload if isinstance(payload, dict) else None


def create_app(engine: Optional[engine_module.Engine] = None) -> FastAPI:
    app = FastAPI(title="baatcheet", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.engine = engine
    app.state.started = time.monotonic()

    @app.post("/webhooks/rest/webhook")
    def webhook(raw: bytes = Depends(_raw_body)):
        active = app.state.engine
        if active is None:
            return _error(503, "no model loaded")
        body = _decode(raw)
        if body is None:
            return _error(400, "body must be a JSON object")
        sender = body.get("sender")
        message = body.get("message")
        if not isinstance(sender, str) or not sender.strip():
            return _error(400, "missing or empty 'sender'")
        if not isinstance(message, str) or not message.strip():
            return _error(400, "missing or empty 'message'")
        replies = active.respond(sender, message)
        parse = active.tracker(sender).latest_parse()
        return [
            {
                "recipient_id": sender,
                "text": reply.text,
                "meta": {
                    "intent": parse.top_intent,
                    "confidence": parse.top_confidence,
                    "policy": reply.decision.source,
                    "policy_confidence": reply.decision.confidence,
                    "triple": _triple_dict(reply.decision.triple),
                    "fingerprint": active.fingerprint,
                },
            }
            for reply in replies
        ]

    @app.post("/model/parse")
    def parse(raw: bytes = Depends(_raw_body)):
        active = app.state.engine
        if active is None:
            return _error(503, "no model loaded")
        body = _decode(raw)
        if body is None:
            return _error(400, "body must be a JSON object")
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            return _error(400, "missing or empty 'text'")
        result = active.parse(text)
        return {"text": text, **result.to_dict()}

    @app.post("/model/train")
    def train(raw: bytes = Depends(_raw_body)):
        body = _decode(raw)
        if body is None:
            return _error(400, "body must be a JSON object")
        data_dir = body.get("data_dir")
        if not isinstance(data_dir, str) or not data_dir.strip():
            return _error(400, "missing or empty 'data_dir'")
        config_path = body.get("config_path")
        if config_path is not None and not isinstance(config_path, str):
            return _error(400, "'config_path' must be a string")
        seed = body.get("seed", 42)
        if not isinstance(seed, int) or isinstance(seed, bool):
            return _error(400, "'seed' must be an integer")
        try:
            project = engine_module.train_project(
                data_dir, config_path=config_path, seed=seed
            )
        except BaatcheetError as exc:
            return _error(422, str(exc))
        previous = app.state.engine
        kg_store = previous.kg_store if previous is not None else None
        app.state.engine = engine_module.Engine(project, kg_store=kg_store)
        return {"fingerprint": app.state.engine.fingerprint}

    @app.get("/status")
    def status():
        active = app.state.engine
        if active is None:
            return _error(503, "no model loaded")
        return {
            "fingerprint": active.fingerprint,
            "intent_count": active.intent_count,
            "triple_count": active.triple_count,
            "uptime_seconds": time.monotonic() - app.state.started,
        }

    return app
