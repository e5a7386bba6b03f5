"""FastAPI application implementing the inference wire protocol.

    POST /v1/nli       {"premise", "hypothesis", "model"}
                       -> {"probs": {"entailment", "neutral", "contradiction"}}
    POST /v1/generate  {"prompt", "n", "temperature", "max_tokens",
                        "diversity_penalty", "beam_groups", "model"}
                       -> {"candidates": [...]}
    POST /v1/embed     {"text", "model"} -> {"vector": [...]}

All failures, including body-validation failures, are non-2xx responses
with {"error": str}.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from nli_shim.config import ShimConfig
from nli_shim.engines import EmbedEngine, GenerateEngine, NliEngine


class NliRequest(BaseModel):
    premise: str
    hypothesis: str
    model: str


class GenerateRequest(BaseModel):
    prompt: str
    n: int
    temperature: float
    max_tokens: int
    diversity_penalty: float
    beam_groups: int
    model: str


class EmbedRequest(BaseModel):
    text: str
    model: str


def create_app(
    config: ShimConfig,
    nli_engine: NliEngine,
    generate_engine: GenerateEngine,
    embed_engine: EmbedEngine,
) -> FastAPI:
    app = FastAPI(title="nli-inference-shim", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException):
        return JSONResponse(status_code=exc.status_code, content={"error": str(exc.detail)})

    @app.exception_handler(Exception)
    async def engine_error(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": f"{type(exc).__name__}: {exc}"})

    def check_model(requested: str, capability: str) -> None:
        declared = config.model_for(capability)
        if requested != declared:
            # A silently substituted model would poison client caches keyed
            # on (model, inputs), so mismatches are refused outright.
            raise HTTPException(
                status_code=400,
                detail=f"this server hosts {declared!r} for {capability}, not {requested!r}",
            )

    @app.post("/v1/nli")
    def nli(request: NliRequest):
        check_model(request.model, "nli")
        if not request.premise.strip() or not request.hypothesis.strip():
            raise HTTPException(status_code=400, detail="premise and hypothesis must be non-empty")
        return {"probs": nli_engine.predict(request.premise, request.hypothesis)}

    @app.post("/v1/generate")
    def generate(request: GenerateRequest):
        check_model(request.model, "generate")
        if not request.prompt.strip():
            raise HTTPException(status_code=400, detail="prompt must be non-empty")
        if not 1 <= request.n <= config.max_candidates:
            raise HTTPException(
                status_code=400, detail=f"n must be in [1, {config.max_candidates}]"
            )
        if request.max_tokens < 1:
            raise HTTPException(status_code=400, detail="max_tokens must be >= 1")
        candidates = generate_engine.generate(
            prompt=request.prompt,
            n=request.n,
            temperature=request.temperature,
            max_tokens=request.max_tokens,
            diversity_penalty=request.diversity_penalty,
            beam_groups=request.beam_groups,
        )
        return {"candidates": candidates[: request.n]}

    @app.post("/v1/embed")
    def embed(request: EmbedRequest):
        check_model(request.model, "embed")
        if not request.text.strip():
            raise HTTPException(status_code=400, detail="text must be non-empty")
        return {"vector": embed_engine.embed(request.text)}

    return app
