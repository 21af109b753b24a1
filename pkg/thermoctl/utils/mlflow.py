"""
Utils for tracking thermoctl commands with MLflow.

A tracked command becomes one run: its flattened problem and settings as
parameters, its scalar results (optimal time, terminal error, scan fraction)
as metrics, and its JSON report as an artifact.
"""
import mlflow
import tempfile
import os
import json
import pandas as pd
import logging
from typing import Union, Dict, Optional

logger = logging.getLogger(__name__)


def create_expe(expe_name: str) -> str:
    """Create expe if does not exist, and return its id.

    Parameters
    ----------
    expe_name : str
        Name of the experiment

    Returns
    -------
    str
        Experiment ID (for mlflow functions)
    """
    experiment_id = get_expe_id(expe_name=expe_name)
    if experiment_id is None:
        logger.info(
            "Experiment did not exist. Created '{}'.".format(expe_name)
        )
        experiment_id = mlflow.create_experiment(name=expe_name)
    return experiment_id


def get_expe_id(expe_name: str) -> Union[str, None]:
    """Get MLflow experiment id based on its name, None if it does not exist"""
    experiment = mlflow.get_experiment_by_name(expe_name)
    if experiment is not None:
        return experiment.experiment_id
    return None


def create_artifact_from_str(s: str, filename: str) -> None:
    """Log the string `s` as an artifact named `filename`"""
    with tempfile.TemporaryDirectory() as directory:
        artifact_tmp_path = os.path.join(directory, filename)
        with open(artifact_tmp_path, "w") as f:
            f.write(s)
        mlflow.log_artifact(artifact_tmp_path)


def log_json_artifact(json_dict: dict, filename: str) -> None:
    """Avoid using mlflow.log_dict, whose format depends on the extension"""
    json_str = json.dumps(obj=json_dict, default=str)
    create_artifact_from_str(s=json_str, filename=filename)


def dict_to_mlflow_params(dic: dict, concat_sep: str = "__") -> dict:
    """Convert configuration dict to mlflow parameters

    Collapse `dic` to one dimension, appending keys with `concat_sep`.

    Parameters
    ----------
    dic : dict
        dic
    concat_sep : str
        concat_sep

    Returns
    -------
    dict
    """
    records = pd.json_normalize(dic, sep=concat_sep).to_dict(orient="records")
    return records[0] if records else {}


def log_command_run(
    tracking_uri: str,
    expe_name: str,
    command: str,
    params: dict,
    metrics: Dict[str, Optional[float]],
    report: dict,
) -> str:
    """Log one CLI command as an MLflow run and return its id

    Parameters
    ----------
    tracking_uri : str
        Folder (or server) where experiments are stored.
    expe_name : str
        Experiment name, created if needed.
    command : str
        Command name, used as run name and artifact name.
    params : dict
        Nested configuration, flattened with `dict_to_mlflow_params`.
    metrics : Dict[str, Optional[float]]
        Scalar results; None values are skipped.
    report : dict
        JSON report, logged as `<command>.json`.
    """
    mlflow.set_tracking_uri(uri=tracking_uri)
    experiment_id = create_expe(expe_name=expe_name)
    with mlflow.start_run(
        experiment_id=experiment_id, run_name=command
    ) as run:
        mlflow.log_params(dict_to_mlflow_params(dic=params))
        for key, value in metrics.items():
            if value is not None:
                mlflow.log_metric(key=key, value=float(value))
        log_json_artifact(json_dict=report, filename=f"{command}.json")
        run_id = run.info.run_id
    logger.info(f"Logged run {run_id} in experiment '{expe_name}'")
    return run_id
