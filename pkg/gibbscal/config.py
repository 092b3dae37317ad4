"""Run configuration: JSON files and command-line overrides."""

import json
import logging
from dataclasses import dataclass, field, fields
from typing import Dict, Optional, Tuple

from .asymptotics import HessianConfig
from .calibration import GpcConfig
from .const import COMMANDS, DEFAULT_ETA0, DGP_KINDS, PRIOR_KIND, TAU_LOSS_KINDS
from .exceptions import ConfigError, GibbsCalError
from .gibbs import Prior, SamplerConfig, prior_from_json
from .io import dumps_canonical
from .loss import LossModel, loss_from_json
from .simulate import Dgp, make_dgp

_LOGGER = logging.getLogger(__name__)

DEFAULT_DGP_N = 50
DEFAULT_REPS = 100

# command-line overrides: flag -> (section, key); section None is the top level
OVERRIDES = {
    "data": ("dataset", "path"),
    "dgp_kind": ("dgp", "kind"),
    "eta": (None, "eta"),
    "alpha": ("gpc", "alpha"),
    "B": ("gpc", "B"),
    "n": ("dgp", "n"),
    "reps": ("study", "reps"),
    "tau": ("loss", "tau"),
}


@dataclass(frozen=True)
class DatasetSpec:
    """A CSV file of records and how to read it."""

    path: str
    split_index: Optional[int] = None
    header: bool = False
    classification: bool = False

    def to_json(self) -> Dict:
        return {
            "path": self.path,
            "split_index": self.split_index,
            "header": self.header,
            "classification": self.classification,
        }


@dataclass(frozen=True)
class DgpSpec:
    """A built-in data-generating process and the sample size drawn from it."""

    kind: str
    n: int = DEFAULT_DGP_N

    def __post_init__(self) -> None:
        if self.kind not in DGP_KINDS:
            raise ConfigError(f"dgp kind='{self.kind}' isn't valid.", "dgp.kind")
        if self.n < 1:
            raise ConfigError("dgp n must be a positive integer", "dgp.n")

    def build(self) -> Dgp:
        return make_dgp(self.kind)

    def to_json(self) -> Dict:
        return {"kind": self.kind, "n": self.n}


@dataclass(frozen=True)
class StudyConfig:
    """Settings for the simulate, curve and diagnose commands."""

    reps: int = DEFAULT_REPS
    calibrate: bool = True
    n_list: Tuple[int, ...] = (50, 200, 800)
    eta_grid: Tuple[float, ...] = (0.5, 1.0, 2.0)
    eps: float = 0.5

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ConfigError("study reps must be a positive integer", "study.reps")
        if not self.n_list or min(self.n_list) < 1:
            raise ConfigError("study n_list needs positive sizes", "study.n_list")
        if not self.eta_grid or min(self.eta_grid) <= 0.0:
            raise ConfigError("study eta_grid needs positive rates", "study.eta_grid")
        if not self.eps > 0.0:
            raise ConfigError("study eps must be positive", "study.eps")
        object.__setattr__(self, "n_list", tuple(int(v) for v in self.n_list))
        object.__setattr__(self, "eta_grid", tuple(float(v) for v in self.eta_grid))

    def to_json(self) -> Dict:
        return {
            "reps": self.reps,
            "calibrate": self.calibrate,
            "n_list": list(self.n_list),
            "eta_grid": list(self.eta_grid),
            "eps": self.eps,
        }


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run: what to compute, on which data, and where to write it."""

    command: str
    loss: LossModel
    prior: Prior
    eta: float = DEFAULT_ETA0
    dataset: Optional[DatasetSpec] = None
    dgp: Optional[DgpSpec] = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    gpc: GpcConfig = field(default_factory=GpcConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    hessian: HessianConfig = field(default_factory=HessianConfig)
    seed: int = 0
    output_path: Optional[str] = None
    workers: int = 1

    def to_json(self) -> Dict:
        """Return every setting, defaults included; workers is not echoed."""
        result = {
            "command": self.command,
            "loss": self.loss.to_json(),
            "prior": self.prior.to_json(),
            "eta": self.eta,
            "sampler": self.sampler.to_json(),
            "gpc": {k: v for k, v in self.gpc.to_json().items() if k != "sampler"},
            "study": self.study.to_json(),
            "hessian": {
                "h0": self.hessian.h0,
                "smooth": self.hessian.smooth,
                "step_fraction": self.hessian.step_fraction,
            },
            "seed": self.seed,
            "output_path": self.output_path,
        }
        if self.dataset is not None:
            result["dataset"] = self.dataset.to_json()
        else:
            result["dgp"] = self.dgp.to_json()
        return result


def _check_keys(node, allowed, where) -> Dict:
    if not isinstance(node, dict):
        raise ConfigError(f"'{where}' must be an object", where)
    for key in node:
        if key not in allowed:
            name = f"{where}.{key}" if where else key
            raise ConfigError(f"unknown key '{name}'", name)
    return node


def _typed(node, key, kind, where, default=None):
    name = f"{where}.{key}" if where else key
    if key not in node or node[key] is None:
        return default
    value = node[key]
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"'{name}' must be true or false", name)
        return value
    if isinstance(value, bool):
        raise ConfigError(f"'{name}' must be a number", name)
    if kind is int:
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ConfigError(f"'{name}' must be an integer", name)
        return value
    if kind is float:
        if not isinstance(value, (int, float)):
            raise ConfigError(f"'{name}' must be a number", name)
        return float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"'{name}' has the wrong type", name)
    return value


def _require(node, key, where):
    name = f"{where}.{key}" if where else key
    if key not in node or node[key] is None:
        raise ConfigError(f"missing required key '{name}'", name)
    return node[key]


def _section(builder, where):
    """Call builder(), turning a nested validation failure into a ConfigError."""
    try:
        return builder()
    except ConfigError:
        raise
    except (GibbsCalError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"'{where}' is invalid: {exc}", where) from exc


def _dataclass_kwargs(cls, node, where, kinds) -> Dict:
    allowed = [f.name for f in fields(cls) if f.init and f.name in kinds]
    _check_keys(node, allowed, where)
    kwargs = {}
    for key in allowed:
        value = _typed(node, key, kinds[key], where)
        if value is not None:
            kwargs[key] = value
    return kwargs


_SAMPLER_KINDS = {
    "n_draws": int,
    "burn_in": int,
    "thin": int,
    "init": (str, list),
    "target_accept": float,
    "adapt_window": int,
}
_GPC_KINDS = {
    "alpha": float,
    "B": int,
    "eta0": float,
    "kappa0": float,
    "gamma_exp": float,
    "max_iter": int,
    "tol": float,
    "eta_bounds": list,
    "region_kind": str,
    "feature": int,
    "band_grid": list,
}
_STUDY_KINDS = {
    "reps": int,
    "calibrate": bool,
    "n_list": list,
    "eta_grid": list,
    "eps": float,
}
_HESSIAN_KINDS = {"h0": float, "smooth": bool, "step_fraction": float}

_TOP_KEYS = (
    "command",
    "dataset",
    "dgp",
    "loss",
    "prior",
    "eta",
    "sampler",
    "gpc",
    "study",
    "hessian",
    "seed",
    "output_path",
    "workers",
)


def _apply_overrides(raw: Dict, overrides: Dict) -> Dict:
    raw = json.loads(json.dumps(raw))
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    for key, value in overrides.items():
        if key in OVERRIDES:
            section, name = OVERRIDES[key]
            if section is None:
                raw[name] = value
                continue
            if key == "n" and raw.get("dgp") is None and "dgp_kind" not in overrides:
                raise ConfigError("'n' applies to a dgp run, not to a dataset", "n")
            node = raw.get(section)
            raw[section] = node = dict(node) if isinstance(node, dict) else {}
            node[name] = value
        elif key in _TOP_KEYS:
            raw[key] = value
        else:
            raise ConfigError(f"unknown override '{key}'", key)
    return raw


def parse_config_dict(raw: Dict, overrides: Dict = None) -> RunConfig:
    """Validate a configuration mapping and return the RunConfig it describes."""
    raw = _apply_overrides(_check_keys(raw, _TOP_KEYS, ""), overrides)
    _check_keys(raw, _TOP_KEYS, "")

    command = _require(raw, "command", "")
    if command not in COMMANDS:
        raise ConfigError(f"command='{command}' isn't valid, use {COMMANDS}", "command")

    has_dataset = raw.get("dataset") is not None
    has_dgp = raw.get("dgp") is not None
    if has_dataset and has_dgp:
        raise ConfigError("give either 'dataset' or 'dgp', not both", "dataset")
    if not has_dataset and not has_dgp:
        raise ConfigError("missing required key 'dataset' or 'dgp'", "dataset")

    dataset, dgp, dgp_model = None, None, None
    if has_dataset:
        node = _check_keys(
            raw["dataset"], ("path", "split_index", "header", "classification"), "dataset"
        )
        dataset = DatasetSpec(
            str(_require(node, "path", "dataset")),
            _typed(node, "split_index", int, "dataset"),
            _typed(node, "header", bool, "dataset", False),
            _typed(node, "classification", bool, "dataset", False),
        )
    else:
        node = _check_keys(raw["dgp"], ("kind", "n"), "dgp")
        dgp = DgpSpec(
            _require(node, "kind", "dgp"), _typed(node, "n", int, "dgp", DEFAULT_DGP_N)
        )
        dgp_model = dgp.build()

    loss_node = _check_keys(
        raw.get("loss") or {}, ("kind", "tau", "basis", "scale"), "loss"
    )
    if "kind" not in loss_node and dgp_model is not None:
        # the process supplies the loss; a bare tau overrides its level
        loss_node = {**dgp_model.loss_binding.to_json(), **loss_node}
    _require(loss_node, "kind", "loss")
    if "tau" in loss_node and loss_node["kind"] not in TAU_LOSS_KINDS:
        raise ConfigError(f"the {loss_node['kind']} loss has no tau", "loss.tau")
    loss = _section(lambda: loss_from_json(loss_node), "loss")

    prior_node = raw.get("prior")
    if prior_node is not None:
        _check_keys(prior_node, ("kind", "mean", "sd"), "prior")
        prior = _section(lambda: prior_from_json(prior_node, loss.param_dim), "prior")
    elif dgp_model is not None:
        prior = dgp_model.prior
    else:
        prior = prior_from_json({"kind": PRIOR_KIND.Flat}, loss.param_dim)

    eta = _typed(raw, "eta", float, "", DEFAULT_ETA0)
    if not eta > 0.0:
        raise ConfigError(f"eta={eta} must be positive", "eta")

    sampler_kwargs = _dataclass_kwargs(
        SamplerConfig, raw.get("sampler") or {}, "sampler", _SAMPLER_KINDS
    )
    sampler = _section(lambda: SamplerConfig(**sampler_kwargs), "sampler")

    gpc_kwargs = _dataclass_kwargs(GpcConfig, raw.get("gpc") or {}, "gpc", _GPC_KINDS)
    if dgp_model is not None:
        gpc = _section(lambda: dgp_model.gpc_config(sampler=sampler, **gpc_kwargs), "gpc")
    else:
        gpc = _section(lambda: GpcConfig(sampler=sampler, **gpc_kwargs), "gpc")

    study_kwargs = _dataclass_kwargs(
        StudyConfig, raw.get("study") or {}, "study", _STUDY_KINDS
    )
    study = _section(lambda: StudyConfig(**study_kwargs), "study")

    hessian_kwargs = _dataclass_kwargs(
        HessianConfig, raw.get("hessian") or {}, "hessian", _HESSIAN_KINDS
    )
    hessian = _section(lambda: HessianConfig(**hessian_kwargs), "hessian")

    seed = _typed(raw, "seed", int, "", 0)
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed={seed} must be an unsigned 64-bit integer", "seed")
    workers = _typed(raw, "workers", int, "", 1)
    if workers < 1:
        raise ConfigError(f"workers={workers} must be a positive integer", "workers")

    return RunConfig(
        command=command,
        loss=loss,
        prior=prior,
        eta=eta,
        dataset=dataset,
        dgp=dgp,
        sampler=sampler,
        gpc=gpc,
        study=study,
        hessian=hessian,
        seed=seed,
        output_path=_typed(raw, "output_path", str, ""),
        workers=workers,
    )


def parse_config(path=None, overrides: Dict = None) -> RunConfig:
    """Return the RunConfig from a JSON file and/or command-line overrides."""
    raw = {}
    if path is not None:
        _LOGGER.debug("parse_config(path=%s)...", path)
        try:
            with open(path, encoding="utf-8") as handle:
                raw = json.load(handle)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file '{path}' does not exist", "config") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config file '{path}' is not valid JSON: {exc}", "config"
            ) from exc
    return parse_config_dict(raw, overrides)


def emit_config(cfg: RunConfig) -> str:
    """Return the canonical JSON text of a RunConfig."""
    return dumps_canonical(cfg.to_json())
