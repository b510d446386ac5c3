"""Python bindings for the seqacq pipeline, metrics and session manager."""

import json

from . import _core
from ._core import SeqacqError, ServiceError, auprc, auroc, iou

__all__ = [
    "SeqacqError",
    "ServiceError",
    "Sessions",
    "auprc",
    "auroc",
    "default_config",
    "evaluate",
    "gen_data",
    "iou",
    "load_config",
    "oracle",
    "sweep_budget",
    "train_agent",
    "train_guesser",
    "with_overrides",
]


def default_config():
    return json.loads(_core.default_config())


def load_config(path):
    return json.loads(_core.load_config(str(path)))


def with_overrides(config, sets):
    return json.loads(_core.with_overrides(json.dumps(config), list(sets)))


def _command(name):
    fn = getattr(_core, name)

    def run(config):
        return json.loads(fn(json.dumps(config)))

    run.__name__ = name
    return run


gen_data = _command("gen_data")
train_guesser = _command("train_guesser")
train_agent = _command("train_agent")
evaluate = _command("evaluate")
sweep_budget = _command("sweep_budget")
oracle = _command("oracle")


class Sessions:
    """Consultation sessions over trained guesser and agent checkpoints."""

    def __init__(self, config):
        self._core = _core.Sessions(json.dumps(config))

    def create(self, features, budget=None):
        request = {"features": features}
        if budget is not None:
            request["budget"] = budget
        return json.loads(self._core.create(json.dumps(request)))

    def suggest(self, session_id, k=1):
        return json.loads(self._core.suggest(session_id, k))

    def observe(self, session_id, **request):
        return json.loads(self._core.observe(session_id, json.dumps(request)))

    def finalize(self, session_id):
        return json.loads(self._core.finalize(session_id))

    def export_log(self, session_id):
        return json.loads(self._core.export_log(session_id))

    def schema(self):
        return json.loads(self._core.schema())

    def __len__(self):
        return len(self._core)
