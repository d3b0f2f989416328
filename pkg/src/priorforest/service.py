"""Local HTTP service behind the browser front end.

Sessions are project bundles loaded into memory; every mutation rebuilds
the prior from the bundle so the stored file and the served state cannot
drift apart.  All model math stays on this side of the wire: the front
end renders trees, questions and grids exactly as served.
"""

from __future__ import annotations

import os
import threading
import uuid
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .assembly import (
    HDJointPrior,
    print_text,
    sample_prior,
    summary_text,
    variance_prior_label,
    weight_prior_label,
)
from .bundle import build_from_bundle, make_bundle, save_bundle
from .elicitation import Guide, GuideError
from .inference import (
    InferenceError,
    SamplerSettings,
    posterior_summaries,
    posterior_text,
    prior_density_grid,
    run_mcmc,
)
from .tree import TreeError, render_tree

MAX_PRIOR_DRAWS = 100_000
# formula, tree, data, kernel, assembly and bundle errors all derive
# from ValueError, so one catch covers every way a rebuild can fail
_BUILD_ERRORS = (ValueError,)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class Session:
    sid: str
    bundle: dict
    prior: HDJointPrior
    settings: SamplerSettings
    guide: Guide | None = None
    jobs: dict[str, dict] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _serialize_weight_choice(wp) -> Any:
    label = weight_prior_label(wp)
    if label.startswith("Dirichlet"):
        return "dirichlet"
    out = [wp.variant, wp.median]
    if wp.concentration is not None:
        out.append(wp.concentration)
    return out


def _normalized_bundle(bundle: dict, prior: HDJointPrior) -> dict:
    """Rewrite tree and choices in canonical form so rebuilds are exact."""
    out = dict(bundle)
    out["tree"] = render_tree(prior.forest)
    out["weights"] = {
        s: _serialize_weight_choice(prior.weight_priors[s])
        for s in prior.forest.splits()
    }
    out["variances"] = {
        r: [prior.variance_priors[r].kind, *prior.variance_priors[r].params]
        for r in prior.forest.roots
    }
    if prior.intercept_prior is not None:
        out["intercept_prior"] = list(prior.intercept_prior)
    out["covariate_priors"] = {
        k: list(v) for k, v in prior.covariate_priors.items()
    }
    return out


def _node_payload(prior: HDJointPrior) -> list[dict]:
    forest = prior.forest
    nodes = []
    for name, node in forest.nodes.items():
        kind = forest.node_kind(name)
        weight_label = None
        variance_label = None
        if node.children:
            first = prior.split_children(name)[0]
            weight_label = (
                f"w[{first}/{name}] ~ {weight_prior_label(prior.weight_priors[name])}"
            )
        if node.parent is None:
            form, text = variance_prior_label(prior.variance_priors[name])
            head = f"sqrt(V)[{name}]" if form == "sd" else f"V[{name}]"
            variance_label = f"{head} ~ {text}"
        # a root with children carries both a split and a variance prior
        label = " ; ".join(t for t in (variance_label, weight_label) if t)
        nodes.append(
            {
                "name": name,
                "children": list(node.children),
                "parent": node.parent,
                "kind": kind,
                "weight_label": weight_label,
                "variance_label": variance_label,
                "label": label,
            }
        )
    return nodes


def _tree_payload(session: Session) -> dict:
    prior = session.prior
    return {
        "tree": render_tree(prior.forest),
        "roots": list(prior.forest.roots),
        "components": prior.component_order,
        "parameters": prior.parameter_names(),
        "nodes": _node_payload(prior),
    }


def _summary_payload(session: Session) -> dict:
    return {
        "summary": summary_text(session.prior),
        "print": print_text(session.prior),
        "parameters": session.prior.parameter_names(),
        "likelihood": session.prior.spec.likelihood,
        "formula": session.prior.spec.text,
    }


def _question_payload(guide: Guide) -> dict:
    question = guide.current_question()
    if question is None:
        return {"done": True}
    payload = asdict(question)
    payload["options"] = list(payload["options"])
    return {"done": False, "question": payload}


def create_app(session_dir: str | None = None, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="priorforest service")
    sessions: dict[str, Session] = {}
    executor = ThreadPoolExecutor(max_workers=2)
    app.state.sessions = sessions
    app.state.session_dir = session_dir

    def persist(session: Session) -> None:
        if session_dir:
            os.makedirs(session_dir, exist_ok=True)
            save_bundle(session.bundle, os.path.join(session_dir, f"{session.sid}.json"))

    def build(bundle: dict) -> tuple[HDJointPrior, SamplerSettings, list[str]]:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            prior, settings = build_from_bundle(bundle, base_dir=session_dir)
        return prior, settings, [str(w.message) for w in caught]

    def build_canonical(bundle: dict) -> tuple[dict, HDJointPrior, SamplerSettings, list[str]]:
        # Sessions always hold the canonical form: the stored tree text and the
        # prior's declared child order agree, so guide answers and node edits
        # can be written straight into the bundle without re-orienting them.
        prior, settings, notes = build(bundle)
        canonical = _normalized_bundle(bundle, prior)
        if canonical["tree"] != bundle.get("tree"):
            prior, settings, _ = build(canonical)
        return canonical, prior, settings, notes

    def get_session(sid: str) -> Session:
        if sid not in sessions and session_dir:
            path = os.path.join(session_dir, f"{sid}.json")
            if os.path.exists(path):
                from .bundle import load_bundle

                bundle = load_bundle(path)
                canonical, prior, settings, _ = build_canonical(bundle)
                sessions[sid] = Session(sid, canonical, prior, settings)
        if sid not in sessions:
            raise ApiError(404, "session_not_found", f"no session {sid!r}")
        return sessions[sid]

    def resolve_node(session: Session, name: str) -> str:
        try:
            return session.prior.forest.resolve(name)
        except TreeError as err:
            raise ApiError(404, "node_not_found", str(err)) from err

    @app.exception_handler(ApiError)
    async def api_error_handler(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.post("/session")
    async def create_session(request: Request):
        body = await request.json()
        if "example" in body:
            from .examples import EXAMPLES, example_setup

            if body["example"] not in EXAMPLES:
                raise ApiError(
                    404, "example_not_found",
                    f"unknown example {body['example']!r}; pick one of {sorted(EXAMPLES)}",
                )
            bundle = make_bundle(**example_setup(body["example"]))
        else:
            bundle = body.get("bundle", body)
            if not isinstance(bundle, dict) or "formula" not in bundle:
                raise ApiError(400, "invalid_bundle", "body must carry a project bundle")
            bundle.setdefault("version", 1)
        try:
            canonical, prior, settings, notes = build_canonical(bundle)
        except _BUILD_ERRORS as err:
            raise ApiError(400, "invalid_bundle", str(err)) from err
        sid = uuid.uuid4().hex[:8]
        session = Session(sid, canonical, prior, settings)
        sessions[sid] = session
        persist(session)
        return {"session": sid, "notes": notes, **_tree_payload(session)}

    @app.get("/session/{sid}/tree")
    async def get_tree(sid: str):
        return _tree_payload(get_session(sid))

    @app.get("/session/{sid}/summary")
    async def get_summary(sid: str):
        return _summary_payload(get_session(sid))

    @app.post("/session/{sid}/tree/edit")
    async def edit_tree(sid: str, request: Request):
        session = get_session(sid)
        body = await request.json()
        if "tree" not in body:
            raise ApiError(400, "invalid_request", "body needs a 'tree' field")
        with session.lock:
            trial = dict(session.bundle)
            trial["tree"] = body["tree"]
            # an edited tree drops every weight choice back to Dirichlet
            trial["weights"] = {}
            trial["variances"] = {}
            try:
                prior, settings, _ = build(trial)
            except _BUILD_ERRORS as err:
                raise ApiError(400, "invalid_tree", str(err)) from err
            notes = ["tree changed: all split priors reset to Dirichlet"]
            kept = {
                name: choice
                for name, choice in (session.bundle.get("variances") or {}).items()
                if name in prior.forest.roots
            }
            if kept:
                retry = dict(trial)
                retry["variances"] = kept
                try:
                    prior, settings, _ = build(retry)
                    trial = retry
                except _BUILD_ERRORS:
                    notes.append(
                        "previous total-variance choices no longer fit; defaults used"
                    )
            session.bundle = _normalized_bundle(trial, prior)
            session.prior = prior
            session.settings = settings
            if session.guide is not None:
                session.guide.note_tree_edit(prior.forest)
            persist(session)
        return {"notes": notes, **_tree_payload(session)}

    @app.post("/session/{sid}/node/{name}/prior")
    async def set_node_prior(sid: str, name: str, request: Request):
        session = get_session(sid)
        body = await request.json()
        if "prior" not in body:
            raise ApiError(400, "invalid_request", "body needs a 'prior' field")
        params = body.get("param", [])
        if isinstance(params, (int, float)):
            params = [params]
        choice = body["prior"] if not params else [body["prior"], *params]
        with session.lock:
            node = resolve_node(session, name)
            kind = session.prior.forest.node_kind(node)
            trial = dict(session.bundle)
            if kind == "split":
                trial["weights"] = {**trial.get("weights", {}), node: choice}
            elif kind in ("tree-root", "singleton-root"):
                trial["variances"] = {**trial.get("variances", {}), node: choice}
            else:
                raise ApiError(
                    400, "invalid_node",
                    f"{node!r} is a leaf and carries no prior of its own",
                )
            try:
                prior, settings, _ = build(trial)
            except _BUILD_ERRORS as err:
                raise ApiError(400, "invalid_prior", str(err)) from err
            session.bundle = _normalized_bundle(trial, prior)
            session.prior = prior
            session.settings = settings
            persist(session)
        return _tree_payload(session)

    @app.get("/session/{sid}/node/{name}/density")
    async def node_density(sid: str, name: str, child: str | None = None):
        session = get_session(sid)
        node = resolve_node(session, name)
        tree_node = session.prior.forest.nodes[node]
        if child is not None and tree_node.children:
            param = f"w[{child}/{node}]"
        elif tree_node.parent is None:
            param = f"V[{node}]"
        elif tree_node.children:
            param = f"w[{session.prior.split_children(node)[0]}/{node}]"
        else:
            raise ApiError(
                400, "invalid_node", f"{node!r} is a leaf and has no density"
            )
        try:
            x, dens, scale = prior_density_grid(session.prior, param)
        except InferenceError as err:
            if "improper" in str(err):
                raise ApiError(400, "improper_prior", str(err)) from err
            raise ApiError(400, "invalid_request", str(err)) from err
        return {
            "parameter": param,
            "scale": scale,
            "x": np.round(x, 10).tolist(),
            "density": np.round(dens, 10).tolist(),
        }

    @app.post("/session/{sid}/guide/start")
    async def guide_start(sid: str):
        session = get_session(sid)
        with session.lock:
            session.guide = Guide(
                session.prior.forest, session.prior.spec.likelihood
            )
            return _question_payload(session.guide)

    @app.post("/session/{sid}/guide/answer")
    async def guide_answer(sid: str, request: Request):
        session = get_session(sid)
        body = await request.json()
        if "answer" not in body:
            raise ApiError(400, "invalid_request", "body needs an 'answer' field")
        with session.lock:
            if session.guide is None:
                raise ApiError(409, "guide_not_started", "start the guide first")
            try:
                session.guide.answer(body["answer"])
            except GuideError as err:
                raise ApiError(400, "invalid_answer", str(err)) from err
            if not session.guide.finished:
                return _question_payload(session.guide)
            choices = session.guide.choices()
            trial = dict(session.bundle)
            trial["weights"] = {
                s: _plain_guide_choice(c) for s, c in choices["weights"].items()
            }
            trial["variances"] = {
                r: [c.kind, *c.params] for r, c in choices["variances"].items()
            }
            try:
                prior, settings, _ = build(trial)
            except _BUILD_ERRORS as err:
                raise ApiError(400, "invalid_prior", str(err)) from err
            session.bundle = _normalized_bundle(trial, prior)
            session.prior = prior
            session.settings = settings
            session.guide = None
            persist(session)
            return {"done": True, **_summary_payload(session)}

    @app.post("/session/{sid}/sample-prior")
    async def sample_prior_endpoint(sid: str, request: Request):
        session = get_session(sid)
        body = await request.json() if await request.body() else {}
        n = min(int(body.get("n", 5000)), MAX_PRIOR_DRAWS)
        seed = int(body.get("seed", 1))
        draws = sample_prior(session.prior, n, seed=seed)
        columns: dict[str, list] = {}
        for root, values in draws.total_variances.items():
            columns[f"V[{root}]"] = values.tolist()
        for split, values in draws.weights.items():
            heads = session.prior.weight_names(split)
            for j, head in enumerate(heads):
                col = values[:, j] if values.ndim == 2 else values
                columns[head] = col.tolist()
        return {"n": n, "pinned_roots": draws.pinned_roots, "draws": columns}

    @app.post("/session/{sid}/infer")
    async def start_infer(sid: str, request: Request):
        session = get_session(sid)
        body = await request.json() if await request.body() else {}
        prior_only = bool(body.get("prior_only", False))
        fields = ("iterations", "warmup", "chains", "seed", "latent_draws")
        overrides = {k: int(body[k]) for k in fields if k in body}
        try:
            settings = SamplerSettings(
                **{
                    **{
                        "iterations": session.settings.iterations,
                        "warmup": session.settings.warmup,
                        "chains": session.settings.chains,
                        "seed": session.settings.seed,
                        "latent_draws": session.settings.latent_draws,
                    },
                    **overrides,
                }
            )
        except InferenceError as err:
            raise ApiError(400, "invalid_request", str(err)) from err
        job_id = uuid.uuid4().hex[:8]
        job: dict[str, Any] = {"status": "running", "result": None, "error": None}
        session.jobs[job_id] = job
        prior = session.prior

        def work():
            try:
                result = run_mcmc(prior, settings, prior_only=prior_only)
                table = posterior_summaries(result, "tree")
                job["result"] = {
                    "acceptance_rate": result.acceptance_rate,
                    "n_draws": result.n_draws,
                    "prior_only": prior_only,
                    "rows": [
                        {"param": str(idx), **{c: float(row[c]) for c in table.columns}}
                        for idx, row in table.iterrows()
                    ],
                    "text": table.to_string() if prior_only else posterior_text(result),
                }
                job["status"] = "done"
            except Exception as err:  # report, do not crash the worker
                job["error"] = str(err)
                job["status"] = "failed"

        executor.submit(work)
        return {"job": job_id}

    @app.get("/session/{sid}/job/{job_id}")
    async def job_status(sid: str, job_id: str):
        session = get_session(sid)
        if job_id not in session.jobs:
            raise ApiError(404, "job_not_found", f"no job {job_id!r}")
        job = session.jobs[job_id]
        out = {"status": job["status"]}
        if job["status"] == "done":
            out["result"] = job["result"]
        elif job["status"] == "failed":
            out["error"] = job["error"]
        return out

    if ui_dir is not None:
        if not os.path.isdir(ui_dir):
            raise ValueError(f"ui_dir is not a directory: {ui_dir!r}")
        from fastapi.staticfiles import StaticFiles

        # mounted last so the API routes above keep precedence
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def _plain_guide_choice(choice) -> Any:
    if choice.variant == "dirichlet":
        return "dirichlet"
    out = [choice.variant, choice.median]
    if choice.concentration is not None:
        out.append(choice.concentration)
    return out
