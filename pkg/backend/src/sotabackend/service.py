"""HTTP generation service.

POST /generate takes {"inputs": [...], "max_new_tokens": N,
"temperature": T} and returns {"outputs": [...]} in input order; GET
/health reports readiness.  Both answer 503 until the checkpoint has
loaded, and schema violations come back as 400.  Generation runs under a
lock, one request at a time, and decodes greedily when temperature is 0
so identical requests yield identical outputs.
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path

import torch
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

logger = logging.getLogger(__name__)


class GenerateRequest(BaseModel):
    inputs: list[str]
    max_new_tokens: int = Field(default=256, ge=1)
    temperature: float = Field(default=0.0, ge=0.0)


class GenerationEngine:
    """Loaded checkpoint plus a lock serializing generation."""

    def __init__(self, checkpoint_dir: str | Path, seed: int = 0) -> None:
        self.tokenizer = AutoTokenizer.from_pretrained(checkpoint_dir)
        self.model = AutoModelForSeq2SeqLM.from_pretrained(checkpoint_dir)
        self.model.eval()
        self.seed = seed
        self._lock = threading.Lock()

    def generate(self, inputs: list[str], max_new_tokens: int,
                 temperature: float) -> list[str]:
        if not inputs:
            return []
        limit = self.tokenizer.model_max_length or 512
        encoded = self.tokenizer(inputs, padding=True, truncation=True,
                                 max_length=limit, return_tensors="pt")
        with self._lock, torch.no_grad():
            if temperature == 0:
                generated = self.model.generate(
                    **encoded, do_sample=False, num_beams=1,
                    max_new_tokens=max_new_tokens)
            else:
                torch.manual_seed(self.seed)
                generated = self.model.generate(
                    **encoded, do_sample=True, temperature=temperature,
                    max_new_tokens=max_new_tokens)
        return self.tokenizer.batch_decode(generated,
                                           skip_special_tokens=True)


class EngineHolder:
    """Mutable slot the app reads; empty means "still loading"."""

    def __init__(self) -> None:
        self.engine: GenerationEngine | None = None
        self.error: str | None = None

    def load(self, checkpoint_dir: str | Path) -> None:
        try:
            self.engine = GenerationEngine(checkpoint_dir)
            logger.info("checkpoint %s loaded", checkpoint_dir)
        except Exception as exc:
            self.error = f"checkpoint load failed: {exc}"
            logger.error("%s", self.error)


def create_app(checkpoint_dir: str | Path | None = None,
               preload: bool = True) -> FastAPI:
    """Build the service app.

    With preload the checkpoint loads synchronously here; otherwise the
    caller starts holder.load (typically on a thread) and the app serves
    503 in the meantime.
    """
    app = FastAPI(title="sotabackend")
    holder = EngineHolder()
    app.state.holder = holder
    if preload:
        if checkpoint_dir is None:
            raise ValueError("preload requires a checkpoint_dir")
        holder.load(checkpoint_dir)
        if holder.engine is None:
            raise RuntimeError(holder.error)

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request,
                                  exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"detail": "malformed request body"})

    @app.get("/health")
    def health():
        if holder.engine is not None:
            return {"status": "ok"}
        status = 500 if holder.error else 503
        return JSONResponse(
            status_code=status,
            content={"status": holder.error or "loading"})

    @app.post("/generate")
    def generate(body: GenerateRequest):
        if holder.engine is None:
            status = 500 if holder.error else 503
            return JSONResponse(
                status_code=status,
                content={"detail": holder.error or "model is loading"})
        outputs = holder.engine.generate(body.inputs, body.max_new_tokens,
                                         body.temperature)
        return {"outputs": outputs}

    return app
