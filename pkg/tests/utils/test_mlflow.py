import unittest
import json
import mlflow
import mlflow.artifacts
import tempfile
import shutil
import thermoctl.utils.mlflow


class MlflowTester(unittest.TestCase):
    """Tester with setUp and tearDown creating an expe folder and deleting
    it"""

    def setUp(self):
        self.expes_uri = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.expes_uri)


class TestCreateExpe(MlflowTester):
    """
    Test type: functional (public API)
    """

    def test_created_once(self):
        mlflow.set_tracking_uri(uri=self.expes_uri)
        self.assertIsNone(thermoctl.utils.mlflow.get_expe_id("thermoctl"))
        first = thermoctl.utils.mlflow.create_expe("thermoctl")
        second = thermoctl.utils.mlflow.create_expe("thermoctl")
        self.assertEqual(first, second)
        self.assertEqual(
            thermoctl.utils.mlflow.get_expe_id("thermoctl"), first
        )


class TestLogCommandRun(MlflowTester):
    """
    Test type: functional (public API)
    """

    def test_report_params_and_metrics(self):
        report = {
            "command": "solve",
            "optimal_time": 0.2417493,
            "is_bang_bang": False,
            "exit_code": 0,
        }
        run_id = thermoctl.utils.mlflow.log_command_run(
            tracking_uri=self.expes_uri,
            expe_name="thermoctl",
            command="solve",
            params={"problem": {"modes": {"m": 2, "k": 2}}, "seed": 0},
            metrics={"optimal_time": 0.2417493, "target_distance": None},
            report=report,
        )
        json_path = mlflow.artifacts.download_artifacts(
            run_id=run_id, artifact_path="solve.json"
        )
        with open(json_path) as f:
            self.assertEqual(json.load(f), report)
        data = mlflow.get_run(run_id).data
        self.assertAlmostEqual(data.metrics["optimal_time"], 0.2417493)
        self.assertNotIn("target_distance", data.metrics)
        self.assertEqual(data.params["problem__modes__m"], "2")
        self.assertEqual(data.params["seed"], "0")

    def test_runs_share_the_experiment(self):
        for seed in [0, 1]:
            thermoctl.utils.mlflow.log_command_run(
                tracking_uri=self.expes_uri,
                expe_name="thermoctl",
                command="solve",
                params={"seed": seed},
                metrics={},
                report={"command": "solve", "seed": seed},
            )
        experiment_id = thermoctl.utils.mlflow.get_expe_id("thermoctl")
        self.assertIsNotNone(experiment_id)
        runs = mlflow.search_runs(
            experiment_ids=[experiment_id], output_format="list"
        )
        self.assertEqual(
            sorted(run.data.params["seed"] for run in runs), ["0", "1"]
        )
        self.assertIsNone(thermoctl.utils.mlflow.get_expe_id("missing"))


class TestDictToMlflowParams(unittest.TestCase):
    def test_depth_1_dic(self):
        dic = {"tol": 1e-6, "seed": 0}
        obs_out = thermoctl.utils.mlflow.dict_to_mlflow_params(dic=dic)
        self.assertEqual(dic, obs_out)

    def test_depth_2_dic(self):
        dic = {"m": 2, "omega": {"length": 1.0, "intervals": "full"}}
        exp_out = {"m": 2, "omega__length": 1.0, "omega__intervals": "full"}
        obs_out = thermoctl.utils.mlflow.dict_to_mlflow_params(dic=dic)
        self.assertEqual(exp_out, obs_out)

    def test_custom_separator(self):
        dic = {"bounds": {"a": [1.0, 1.0]}}
        obs_out = thermoctl.utils.mlflow.dict_to_mlflow_params(
            dic=dic, concat_sep="."
        )
        self.assertEqual(obs_out, {"bounds.a": [1.0, 1.0]})

    def test_empty_dic(self):
        self.assertEqual(thermoctl.utils.mlflow.dict_to_mlflow_params({}), {})
