"""JSON model files: one document with ``orientation`` and ``position`` sections.

Field names and units are fixed by ``model.schema.json`` next to this module;
every load is validated against it before any model object is built.
"""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from .mobility import PositionModel
from .pose_model import AzimuthRegimes, LaplaceParams, MixedLogisticLaplaceParams, OrientationModel
from .splitter import PoseModels
from .traces import atomic_write_text

SCHEMA_VERSION = 1


class ModelFormatError(ValueError):
    pass


@lru_cache(maxsize=1)
def model_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("model.schema.json").read_text())


def orientation_to_dict(m: OrientationModel) -> dict:
    az = m.azimuth
    return {
        "theta": {"mean_deg": m.theta_dist.mean, "scale_deg": m.theta_dist.scale},
        "delta_theta": [{"dt_s": dt, "scale_deg": s} for dt, s in sorted(m.delta_theta_table.items())],
        "azimuth": {
            "beta1_s": az.beta1,
            "beta2_s": az.beta2,
            "laplace": [{"dt_s": dt, "mean_deg": p.mean, "scale_deg": p.scale}
                        for dt, p in sorted(az.laplace.items())],
            "mixed": [{"dt_s": dt, "mu_lo_deg": p.mu_lo, "b_lo_deg": p.b_lo, "mu_l_deg": p.mu_l,
                       "b_l_deg": p.b_l, "p_l": p.p_l}
                      for dt, p in sorted(az.mixed.items())],
        },
    }


def position_to_dict(m: PositionModel) -> dict:
    return {"mu_per_s": m.mu, "lambda_per_s": m.lam, "c": m.c, "v_m_per_s": m.v}


def model_to_dict(models: PoseModels, fit_reports: dict | None = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "orientation": orientation_to_dict(models.orientation),
        "position": position_to_dict(models.position),
    }
    if fit_reports:
        doc["fit_reports"] = fit_reports
    return doc


def _orientation_from_dict(d: dict) -> OrientationModel:
    az = d["azimuth"]
    return OrientationModel(
        theta_dist=LaplaceParams(d["theta"]["mean_deg"], d["theta"]["scale_deg"]),
        delta_theta_table={e["dt_s"]: e["scale_deg"] for e in d["delta_theta"]},
        azimuth=AzimuthRegimes(
            az["beta1_s"], az["beta2_s"],
            {e["dt_s"]: LaplaceParams(e["mean_deg"], e["scale_deg"]) for e in az["laplace"]},
            {e["dt_s"]: MixedLogisticLaplaceParams(e["mu_lo_deg"], e["b_lo_deg"], e["mu_l_deg"],
                                                   e["b_l_deg"], e["p_l"])
             for e in az["mixed"]},
        ),
    )


def model_from_dict(doc: dict) -> PoseModels:
    try:
        jsonschema.validate(doc, model_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ModelFormatError(f"{where}: {exc.message}") from None
    try:
        p = doc["position"]
        position = PositionModel(p["mu_per_s"], p["lambda_per_s"], p["c"], p["v_m_per_s"])
        return PoseModels(_orientation_from_dict(doc["orientation"]), position)
    except ValueError as exc:
        # cross-field checks (beta1 < beta2 and the like) live in the model types
        raise ModelFormatError(str(exc)) from None


def dumps_model(models: PoseModels, fit_reports: dict | None = None) -> str:
    return json.dumps(model_to_dict(models, fit_reports), indent=2) + "\n"


def loads_model(text: str) -> PoseModels:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from None
    return model_from_dict(doc)


def save_model(models: PoseModels, path, fit_reports: dict | None = None) -> None:
    atomic_write_text(path, dumps_model(models, fit_reports))


def load_model(path) -> PoseModels:
    path = Path(path)
    try:
        return loads_model(path.read_text())
    except ModelFormatError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
