# Copyright (c), CommunityLogiq Software

import json
from dataclasses import replace

import numpy as np
import pytest

from faultforge.engine.campaign import (
    LEG_CORR,
    LEG_ORIG,
    LEG_RESIL,
    RangeProfile,
    Session,
    SweepAxis,
    harden_with_clipper,
    profile_ranges,
    replay,
    run_campaign,
    sweep,
)
from faultforge.engine.dataset import dataset_for_model
from faultforge.engine.fault_gen import generate_fault_matrix, load_fault_matrix, save_fault_matrix
from faultforge.engine.injector import make_fault_iterator
from faultforge.engine.model_registry import builtin_model, weights_digest
from faultforge.engine.monitors import CountingMonitor
from faultforge.engine.results import write_classification_csv, write_detection_json
from faultforge.engine.runset import load_runset, save_runset
from faultforge.engine.scenario import (
    FaultPersistence,
    InjectionPolicy,
    InjectionTarget,
    RndMode,
    parse_scenario,
)
from faultforge.errors import (
    ScenarioMismatchError,
    ScenarioStateError,
    ScenarioValidationError,
    ValidationError,
)
from tests.conftest import make_scenario

OUTPUT_FILES = [
    "meta/scenario.yml",
    "meta/dataset.json",
    "meta/model.txt",
    "faults/campaign.alff",
    "faults/campaign.alfr",
    "results/orig.csv",
    "results/corr.csv",
]


@pytest.fixture(scope="module")
def images_256():
    return dataset_for_model(builtin_model("tiny-cnn"), 256)


@pytest.fixture(scope="module")
def exponent_campaigns(images_256):
    model = builtin_model("tiny-cnn")
    results = {}
    for bit in (30, 0):
        cfg = make_scenario(dataset_size=256, rnd_bit_range=(bit, bit), batch_size=16, seed=11)
        results[bit] = run_campaign(model, images_256, cfg, with_mitigation=True)
    return results


def test_zero_fault_campaign_is_the_identity(tiny_cnn, scenario):
    ds = dataset_for_model(tiny_cnn, 64)
    cfg = scenario(dataset_size=64, rnd_mode=RndMode.NO_OP, batch_size=8)
    result = run_campaign(tiny_cnn, ds, cfg)

    orig, corr = result.rows[LEG_ORIG], result.rows[LEG_CORR]
    assert len(orig) == len(corr) == 64
    for o, c in zip(orig, corr):
        assert (o.top, o.probs) == (c.top, c.probs)
        assert not (c.nan or c.inf)
    for record in result.records:
        assert record.original_value.tobytes() == record.corrupted_value.tobytes()
    report = result.kpi()
    assert (report.corrupted, report.due) == (0, 0)


def test_zero_fault_outputs_are_bit_identical(tiny_cnn, small_dataset, scenario):
    cfg = scenario(rnd_mode=RndMode.NO_OP, max_faults_per_image=3)
    images = np.stack([s.image for s in small_dataset][:4])
    corrupted = next(make_fault_iterator(tiny_cnn, generate_fault_matrix(tiny_cnn, cfg), cfg))
    out, _ = corrupted.forward(images)
    assert out.tobytes() == tiny_cnn.forward(images).tobytes()


@pytest.mark.parametrize("persistence", [FaultPersistence.TRANSIENT, FaultPersistence.PERMANENT])
def test_weight_campaigns_restore_the_model(tiny_cnn, small_dataset, scenario, persistence):
    before = weights_digest(tiny_cnn)
    cfg = scenario(inj_target=InjectionTarget.WEIGHTS, rnd_bit_range=(23, 30), fault_persistence=persistence)
    result = run_campaign(tiny_cnn, small_dataset, cfg)
    assert weights_digest(tiny_cnn) == before
    assert len(result.rows[LEG_CORR]) == 8
    # one record per applied weight fault; permanent faults accumulate over the epoch
    expected = 8 if persistence == FaultPersistence.TRANSIENT else sum(range(1, 9))
    assert len(result.records) == expected


def test_identical_seeds_give_identical_files(tmp_path, tiny_cnn, small_dataset, scenario):
    cfg = scenario(num_runs=2, max_faults_per_image=2)
    run_campaign(tiny_cnn, small_dataset, cfg, out_dir=tmp_path / "first")
    run_campaign(tiny_cnn, small_dataset, cfg, out_dir=tmp_path / "second")
    for name in OUTPUT_FILES:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes(), name


def test_thread_count_does_not_change_outputs(tmp_path, tiny_cnn, small_dataset, scenario):
    cfg = scenario(num_runs=2, rnd_bit_range=(20, 31))
    run_campaign(tiny_cnn, small_dataset, cfg, out_dir=tmp_path / "one", threads=1)
    run_campaign(tiny_cnn, small_dataset, cfg, out_dir=tmp_path / "four", threads=4)
    for name in OUTPUT_FILES:
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "four" / name).read_bytes(), name
    with pytest.raises(ValidationError):
        run_campaign(tiny_cnn, small_dataset, cfg, threads=0)


def test_replay_reproduces_a_campaign(tmp_path, tiny_cnn, small_dataset, scenario):
    cfg = scenario(num_runs=2, max_faults_per_image=2, rnd_bit_range=(22, 31))
    run_campaign(tiny_cnn, small_dataset, cfg, out_dir=tmp_path)
    report = replay(tmp_path / "faults/campaign.alff", tmp_path / "faults/campaign.alfr", tiny_cnn, small_dataset)
    assert report.ok, report.mismatches
    assert report.inferences == 16
    assert report.faults == 32


def test_replay_reports_tampered_values(tmp_path, tiny_cnn, small_dataset, scenario):
    run_campaign(tiny_cnn, small_dataset, scenario(), out_dir=tmp_path)
    runset = tmp_path / "faults/campaign.alfr"
    records = load_runset(runset)
    first = records[0]
    records[0] = type(first)(
        first.epoch, first.batch_index, first.image_id, first.fault_column, first.location,
        first.original_value, np.float32(-first.corrupted_value),
        first.flip_direction, first.nan_detected, first.inf_detected,
    )
    save_runset(records, runset)

    report = replay(tmp_path / "faults/campaign.alff", runset, tiny_cnn, small_dataset)
    assert not report.ok
    assert report.mismatches[0].field == "corrupted_value"
    assert report.mismatches[0].image_id == first.image_id


def test_replay_refuses_another_model(tmp_path, tiny_cnn, small_dataset, scenario):
    run_campaign(tiny_cnn, small_dataset, scenario(), out_dir=tmp_path)
    other = builtin_model("tiny-3d")
    with pytest.raises(ScenarioMismatchError, match="tiny-cnn"):
        replay(tmp_path / "faults/campaign.alff", tmp_path / "faults/campaign.alfr", other, small_dataset)


def test_exponent_bits_are_more_harmful(exponent_campaigns):
    high, low = exponent_campaigns[30].kpi(), exponent_campaigns[0].kpi()
    assert high.total == low.total == 256
    assert high.sde_rate > low.sde_rate
    assert high.due > 0
    assert low.due == 0


def test_clipper_leg_contains_the_damage(exponent_campaigns):
    corr, resil = exponent_campaigns[30].kpi(LEG_CORR), exponent_campaigns[30].kpi(LEG_RESIL)
    assert resil.sde_rate <= corr.sde_rate
    assert resil.due == 0


def test_faulty_and_hardened_legs_see_the_same_faults(exponent_campaigns):
    rows = exponent_campaigns[30].rows
    assert [(r.image_id, len(r.faults)) for r in rows[LEG_CORR]] == [(r.image_id, len(r.faults)) for r in rows[LEG_RESIL]]
    assert [f.layer for r in rows[LEG_CORR] for f in r.faults] == [f.layer for r in rows[LEG_RESIL] for f in r.faults]


def test_profiled_ranges_bound_fault_free_outputs(tiny_cnn, small_dataset):
    profile = profile_ranges(tiny_cnn, small_dataset, batch_size=3)
    assert sorted(profile.bounds) == [0, 1, 2]
    assert all(lo <= hi for lo, hi in profile.bounds.values())
    hardened = harden_with_clipper(tiny_cnn, profile)
    images = np.stack([s.image for s in small_dataset])
    assert hardened.forward(images).tobytes() == tiny_cnn.forward(images).tobytes()
    assert hardened.name == "tiny-cnn+clipper"
    with pytest.raises(ValidationError):
        RangeProfile({0: (1.0, -1.0)})


def test_scenario_larger_than_the_data_set(tiny_cnn, small_dataset, scenario):
    with pytest.raises(ScenarioValidationError) as e:
        run_campaign(tiny_cnn, small_dataset, scenario(dataset_size=16))
    assert e.value.key == "dataset_size"


def test_output_layout(tmp_path, tiny_cnn, small_dataset, scenario):
    result = run_campaign(tiny_cnn, small_dataset, scenario(), out_dir=tmp_path, with_mitigation=True)
    for name in OUTPUT_FILES + ["results/resil.csv"]:
        assert (tmp_path / name).is_file(), name
    assert parse_scenario(tmp_path / "meta/scenario.yml") == result.cfg
    assert (tmp_path / "meta/model.txt").read_text().splitlines() == ["tiny-cnn", weights_digest(tiny_cnn)]
    assert len(load_runset(tmp_path / "faults/campaign.alfr")) == 8


def test_detection_campaign_writes_json(tmp_path, tiny_det, scenario):
    ds = dataset_for_model(tiny_det, 8)
    cfg = scenario(rnd_mode=RndMode.RANDOM_VALUE, rnd_bit_range=None, rnd_value_range=(-100.0, 100.0))
    result = run_campaign(tiny_det, ds, cfg, out_dir=tmp_path, with_mitigation=True)
    for leg in (LEG_ORIG, LEG_CORR, LEG_RESIL):
        assert (tmp_path / f"results/{leg}.json").is_file()
    assert (tmp_path / "meta/ground_truth.json").is_file()
    assert result.kpi().total == 8
    assert result.kpi(LEG_RESIL).due == 0


def test_per_batch_faults_hit_one_image_per_batch(tiny_cnn, small_dataset, scenario):
    cfg = scenario(inj_policy=InjectionPolicy.PER_BATCH)
    result = run_campaign(tiny_cnn, small_dataset, cfg)
    assert len(result.records) == 2
    assert sorted({r.batch_index for r in result.records}) == [0, 1]
    assert sum(1 for row in result.rows[LEG_CORR] if row.faults) == 2


def test_per_epoch_faults_repeat_in_every_batch(tiny_cnn, small_dataset, scenario):
    cfg = scenario(num_runs=2, inj_policy=InjectionPolicy.PER_EPOCH, inj_target=InjectionTarget.WEIGHTS)
    result = run_campaign(tiny_cnn, small_dataset, cfg)
    assert len(result.faults) == 16
    assert [r.fault_column for r in result.records] == [0] * 8 + [1] * 8


def test_session_monitors_and_scenario_changes(tiny_cnn, small_dataset, scenario):
    session = Session(tiny_cnn, small_dataset, scenario())
    counting, clean = CountingMonitor(), CountingMonitor()
    session.attach_monitor(counting)
    session.attach_monitor(clean, LEG_ORIG)
    session.run()
    # two batches of four images, three injectable layers
    assert counting.events == clean.events == 6
    with pytest.raises(ValidationError):
        session.attach_monitor(counting, "bogus")

    first = session.faults
    session.set_scenario(scenario(seed=2))
    assert session.get_scenario().seed == 2
    assert session.faults.columns != first.columns
    session.set_scenario(scenario())
    assert session.faults == first


def test_scenario_cannot_change_mid_campaign(tiny_cnn, small_dataset, scenario):
    session = Session(tiny_cnn, small_dataset, scenario())
    errors = []

    def meddle(layer, out):
        try:
            session.set_scenario(scenario(seed=9))
        except ScenarioStateError as e:
            errors.append(e)

    session.attach_monitor(meddle)
    session.run()
    assert len(errors) == 6
    assert session.get_scenario().seed == 1


def test_sweep_runs_one_campaign_per_value(tmp_path, tiny_cnn, small_dataset, scenario):
    session = Session(tiny_cnn, small_dataset, scenario())
    dirs = sweep(session, SweepAxis.BIT, [0, 30], tmp_path)
    assert [d.name for d in dirs] == ["bit-0", "bit-30"]
    for d, bit in zip(dirs, (0, 30)):
        assert json.loads((d / "meta/sweep.json").read_text()) == {"axis": "bit", "value": str(bit)}
        assert parse_scenario(d / "meta/scenario.yml").rnd_bit_range == (bit, bit)
        assert {r.location.value for r in load_runset(d / "faults/campaign.alfr")} == {float(bit)}
    assert session.get_scenario() == scenario()

    dirs = sweep(session, "layer", ["0-1", "2"], tmp_path)
    assert [d.name for d in dirs] == ["layer-0-1", "layer-2"]
    assert {r.location.layer for r in load_runset(dirs[1] / "faults/campaign.alfr")} == {2}

    with pytest.raises(ScenarioValidationError):
        sweep(session, SweepAxis.FAULTS_PER_IMAGE, ["many"], tmp_path)
    with pytest.raises(ValueError):
        sweep(session, "colour", [1], tmp_path)


def test_saved_faults_are_reused(tmp_path, tiny_cnn, small_dataset, scenario):
    first = run_campaign(tiny_cnn, small_dataset, scenario(seed=5), out_dir=tmp_path / "first")
    fault_file = str(tmp_path / "first/faults/campaign.alff")

    reused = run_campaign(tiny_cnn, small_dataset, scenario(seed=6, read_fault_file=fault_file), with_mitigation=True)
    assert reused.faults == first.faults
    assert [r.faults for r in reused.rows[LEG_CORR]] == [r.faults for r in first.rows[LEG_CORR]]

    with pytest.raises(ScenarioMismatchError):
        run_campaign(tiny_cnn, small_dataset, scenario(max_faults_per_image=2, read_fault_file=fault_file))


def test_set_scenario_reuses_a_saved_fault_file(tmp_path, tiny_cnn, small_dataset, scenario):
    session = Session(tiny_cnn, small_dataset, scenario())
    path = tmp_path / "saved.alff"
    save_fault_matrix(session.faults, path)

    session.set_scenario(replace(scenario(), seed=3, read_fault_file=str(path)))
    assert session.faults == load_fault_matrix(path)
    assert session.run().faults == load_fault_matrix(path)


def test_replay_compares_classification_outputs(tmp_path, tiny_cnn, small_dataset, scenario):
    result = run_campaign(tiny_cnn, small_dataset, scenario(), out_dir=tmp_path)
    key = result.records[0].inference_key()
    rows = []
    for row in result.rows[LEG_CORR]:
        if (row.epoch, row.image_id) == (key[0], key[2]):
            row = replace(row, top=(row.top[1], row.top[0], *row.top[2:]))
        rows.append(row)
    write_classification_csv(rows, tmp_path / "results/corr.csv")

    report = replay(tmp_path / "faults/campaign.alff", tmp_path / "faults/campaign.alfr", tiny_cnn, small_dataset)
    assert [(m.field, m.image_id) for m in report.mismatches] == [("top5", key[2])]


def test_replay_reproduces_a_detection_campaign(tmp_path, tiny_det, scenario):
    ds = dataset_for_model(tiny_det, 8)
    result = run_campaign(tiny_det, ds, scenario(num_runs=2, rnd_bit_range=(20, 30)), out_dir=tmp_path)
    fault_file, runset = tmp_path / "faults/campaign.alff", tmp_path / "faults/campaign.alfr"
    report = replay(fault_file, runset, tiny_det, ds)
    assert report.ok, report.mismatches
    assert report.inferences == 16

    key = result.records[0].inference_key()
    rows = []
    for row in result.rows[LEG_CORR]:
        if (row.epoch, row.image_id) == (key[0], key[2]):
            first = row.detections[0]
            row = replace(row, detections=(first._replace(cls=first.cls + 1), *row.detections[1:]))
        rows.append(row)
    write_detection_json(rows, tmp_path / "results/corr.json")

    report = replay(fault_file, runset, tiny_det, ds)
    assert [(m.field, m.epoch, m.image_id) for m in report.mismatches] == [("detections", key[0], key[2])]
