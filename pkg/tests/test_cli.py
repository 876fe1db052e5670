import json

import pytest

from meshbot import cli
from meshbot.config import load_settings, parse_settings
from meshbot.errors import ConfigError, IngestionError
from meshbot.ingest import (
    API_KEY_ENV,
    ENDPOINT_ENV,
    PromptSpec,
    ServiceConfig,
    check_candidate,
    ingest_local,
    ingest_remote,
)
from meshbot.mesh import concatenate, save_stl, stl_bytes
from meshbot.mesh.shapes import box, synthetic_quadruped
from meshbot.mockservice import MockMeshService


@pytest.fixture(scope="module")
def meshes(tmp_path_factory):
    d = tmp_path_factory.mktemp("meshes")
    shapes = {
        "quad.stl": synthetic_quadruped(),
        "wide.stl": synthetic_quadruped({"body_half": (0.09, 0.12, 0.035)}),
        "three_legs.stl": synthetic_quadruped(missing_legs=(0,)),
        "prism.stl": box((0.3, 0.12, 0.08), (0.0, 0.0, 0.04)),
        "two_bodies.stl": concatenate([synthetic_quadruped(), box((0.1, 0.1, 0.1), (0.6, 0.0, 0.05))]),
    }
    return {name: save_stl(m, d / name) for name, m in shapes.items()}


@pytest.fixture
def env(monkeypatch):
    monkeypatch.delenv(API_KEY_ENV, raising=False)
    monkeypatch.delenv(ENDPOINT_ENV, raising=False)
    return monkeypatch


def test_prompt_template():
    spec = PromptSpec("  spiky   frog ")
    assert spec.rendered_prompt == "Quadrupedal walking robot resembling a spiky frog"
    with pytest.raises(ConfigError):
        PromptSpec("a very long description")
    with pytest.raises(ConfigError):
        PromptSpec("dog", 0)


@pytest.mark.parametrize("name, connectivity, symmetry, legs", [
    ("quad.stl", True, True, True),
    ("three_legs.stl", True, False, False),
    ("prism.stl", True, True, False),
    ("two_bodies.stl", False, True, False),
])
def test_candidate_filters(meshes, name, connectivity, symmetry, legs):
    from meshbot.mesh import load_mesh

    rep = check_candidate(load_mesh(meshes[name]), name)
    assert (rep.connectivity, rep.symmetry, rep.legs) == (connectivity, symmetry, legs)
    assert rep.accepted == (connectivity and symmetry and legs)


def test_ingest_local_writes_accepted_and_report(tmp_path, meshes):
    reports = ingest_local([meshes["quad.stl"], meshes["prism.stl"]], tmp_path)
    assert [r.accepted for r in reports] == [True, False]
    report = json.loads((tmp_path / "ingest_report.json").read_text())
    assert report["accepted"] == 1
    assert (tmp_path / "candidates").iterdir().__next__().read_bytes() == meshes["quad.stl"].read_bytes()
    with pytest.raises(FileNotFoundError):
        ingest_local([tmp_path / "nope.stl"], tmp_path)


def _service(meshes, names):
    return MockMeshService({n: (meshes[n].read_bytes(), "stl") for n in names}, api_key="k123")


def test_ingest_remote_against_mock(tmp_path, meshes):
    with _service(meshes, ["quad.stl", "two_bodies.stl"]) as svc:
        cfg = ServiceConfig.from_env(environ={API_KEY_ENV: "k123", ENDPOINT_ENV: svc.url})
        reports = ingest_remote(PromptSpec("dog", 2), cfg, tmp_path)
        assert svc.requests == [{"prompt": "Quadrupedal walking robot resembling a dog", "num_candidates": 2}]
    assert [(r.name, r.accepted) for r in reports] == [("quad.stl", True), ("two_bodies.stl", False)]
    assert reports[1].components == 2


def test_ingest_remote_bad_credential(tmp_path, meshes):
    with _service(meshes, ["quad.stl"]) as svc:
        cfg = ServiceConfig.from_env(environ={API_KEY_ENV: "wrong", ENDPOINT_ENV: svc.url})
        with pytest.raises(IngestionError, match="401"):
            ingest_remote(PromptSpec("dog"), cfg, tmp_path)


def test_missing_credential_is_config_error_before_network(tmp_path, meshes, env, capsys):
    with _service(meshes, ["quad.stl"]) as svc:
        env.setenv(ENDPOINT_ENV, svc.url)
        assert cli.main(["ingest", "--description", "dog", "--workspace", str(tmp_path)]) == cli.EXIT_CONFIG
        assert svc.requests == []
    assert API_KEY_ENV in capsys.readouterr().err


def test_cli_ingest_remote_and_empty_result(tmp_path, meshes, env):
    env.setenv(API_KEY_ENV, "k123")
    with _service(meshes, ["quad.stl"]) as svc:
        env.setenv(ENDPOINT_ENV, svc.url)
        assert cli.main(["ingest", "--description", "dog", "--workspace", str(tmp_path / "a")]) == cli.EXIT_OK
    with _service(meshes, ["prism.stl"]) as svc:
        env.setenv(ENDPOINT_ENV, svc.url)
        code = cli.main(["ingest", "--description", "brick", "--workspace", str(tmp_path / "b")])
    assert code == cli.EXIT_NO_CANDIDATES
    assert code not in (cli.EXIT_CONFIG, cli.EXIT_INGESTION, cli.EXIT_GEOMETRY, cli.EXIT_EVALUATION)


def test_cli_ingest_unreachable_service(tmp_path, env):
    env.setenv(API_KEY_ENV, "k")
    env.setenv(ENDPOINT_ENV, "http://127.0.0.1:9")
    assert cli.main(["ingest", "--description", "dog", "--workspace", str(tmp_path)]) == cli.EXIT_INGESTION


def test_config_file(tmp_path):
    cfg = tmp_path / "meshbot.toml"
    cfg.write_text("""
[sim]
kp = 12.0
[reward]
alpha1 = 0.5
[reward.command]
v_star_xy = [0.2, 0.0]
[evolution]
generations = 3
budget = 7
[ingestion]
symmetry_threshold = 0.8
""")
    s = load_settings(cfg)
    assert s.sim.kp == 12.0 and s.weights.alpha1 == 0.5 and s.command.v_star_xy == (0.2, 0.0)
    assert s.ingestion["symmetry_threshold"] == 0.8 and s.ingestion["candidates"] == 4
    over = s.with_evolution(generations=9, seed=None)
    assert over.evolution == {"generations": 9, "budget": 7}
    for bad in ({"physics": {}}, {"sim": {"warp": 1}}, {"ingestion": {"colour": 1}}, {"reward": {"x": 1}}):
        with pytest.raises(ConfigError):
            parse_settings(bad)
    with pytest.raises(ConfigError):
        load_settings(tmp_path / "missing.toml")
    (tmp_path / "broken.toml").write_text("[sim\n")
    with pytest.raises(ConfigError):
        load_settings(tmp_path / "broken.toml")


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[evolution]\ngenerations = 3\nseed = 5\n")
    args = cli.build_parser().parse_args(["evolve", "--config", str(cfg), "--seed", "8", "--smoke"])
    config = cli._evolution_config(args, load_settings(cfg))
    assert (config.generations, config.seed, config.population_size, config.n_elites) == (3, 8, 20, 10)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, meshes):
    ws = tmp_path_factory.mktemp("ws")
    for name in ("quad.stl", "wide.stl"):
        assert cli.main(["process", str(meshes[name]), "--workspace", str(ws)]) == cli.EXIT_OK
    return ws


def test_process_is_idempotent(workspace, meshes):
    manifests = sorted(workspace.glob("designs/*/bank/manifest.json"))
    assert len(manifests) == 2
    before = {p: p.read_bytes() for p in workspace.rglob("*") if p.is_file()}
    assert cli.main(["process", str(meshes["quad.stl"]), "--workspace", str(workspace)]) == cli.EXIT_OK
    after = {p: p.read_bytes() for p in workspace.rglob("*") if p.is_file()}
    assert before == after
    body = json.loads(manifests[0].read_text())
    assert len(body["variants"]) == 30 and body["complete"]


def test_process_errors(tmp_path, meshes):
    assert cli.main(["process", str(tmp_path / "missing.stl"), "--workspace", str(tmp_path)]) == cli.EXIT_CONFIG
    bad = tmp_path / "junk.stl"
    bad.write_bytes(b"solid nothing\nendsolid\n")
    assert cli.main(["process", str(bad), "--workspace", str(tmp_path)]) == cli.EXIT_GEOMETRY
    assert cli.main(["process", str(meshes["prism.stl"]), "--workspace", str(tmp_path)]) == cli.EXIT_GEOMETRY
    assert not list((tmp_path / "designs").glob("*"))


def test_export_and_report_need_a_run(tmp_path, capsys):
    assert cli.main(["export", "--run", str(tmp_path / "none")]) == cli.EXIT_CONFIG
    assert "no completed generations" in capsys.readouterr().err
    assert cli.main(["report", "--run", str(tmp_path / "none")]) == cli.EXIT_CONFIG


def test_evolve_without_designs(tmp_path):
    code = cli.main(["evolve", "--workspace", str(tmp_path), "--generations", "0", "--smoke"])
    assert code == cli.EXIT_CONFIG


def _members(run):
    recs = [json.loads(p.read_text()) for p in sorted((run / "history").glob("gen_*.json"))]
    return recs, {m["key"]: m["result"] for r in recs for m in r["members"]}


def test_evolve_preferences_export_report(workspace):
    runs = {}
    for pref in ("velocity", "energy"):
        run = workspace / "runs" / pref
        code = cli.main(["evolve", "--workspace", str(workspace), "--smoke", "--generations", "1",
                         "--budget", "2", "--seed", "4", "--preference", pref, "--run", str(run)])
        assert code == cli.EXIT_OK
        runs[pref] = _members(run)
    (vrec, vres), (erec, eres) = runs["velocity"], runs["energy"]
    assert vrec[-1]["best"]["key"] != erec[-1]["best"]["key"]
    shared = set(vres) & set(eres)
    assert shared
    for key in shared:
        for field in ("mean_episode_reward", "velocity_term_sum", "energy_term_sum"):
            assert vres[key][field] == eres[key][field]
    run = workspace / "runs" / "velocity"
    assert cli.main(["export", "--run", str(run)]) == cli.EXIT_OK
    summary = json.loads((run / "export" / "summary.json").read_text())
    from meshbot.model import validate_urdf

    assert validate_urdf(run / "export" / summary["urdf"]) == []
    assert cli.main(["report", "--run", str(run)]) == cli.EXIT_OK
    assert (run / "report.csv").read_text().count("\n") == 3
