"""CSV round-trips, the summary format, and the SVG chart."""

import math

import numpy as np
import pytest

from replan import (
    ExperimentConfig,
    embedding_rows,
    read_episodes_csv,
    results_svg,
    results_table,
    write_embedding_csv,
    write_episodes_csv,
    write_results_svg,
    write_summary_csv,
)
from replan.loop import EpisodeRow
from replan.report import EPISODE_COLUMNS, format_theta


def sample_rows():
    return [
        EpisodeRow("pushbar", "ours", 0, 111, 0.3, 2, True, 51.25, 0.93,
                   {"retrieve": 1.5, "generate": 2.25, "reject": 0.125, "act": 3.0}),
        EpisodeRow("pushbar", "ours", 1, 222, -0.05, 14, False, 40.0, 0.8,
                   {"retrieve": 0.0, "generate": 0.0, "reject": 0.0, "act": 0.0}),
        EpisodeRow("openbox", "random", 0, 333, "lift", 1, True, None, None,
                   {"retrieve": 0.0, "generate": 0.0, "reject": 0.0, "act": 0.5}),
    ]


def test_format_theta():
    assert format_theta(0.3) == "0.3"
    assert format_theta(-0.05) == "-0.05"
    assert format_theta("lift") == "lift"
    assert format_theta(0.0) == "0"


def test_episode_csv_roundtrip(tmp_path):
    path = tmp_path / "episodes.csv"
    write_episodes_csv(sample_rows(), path)
    header = path.read_text().splitlines()[0]
    assert header == ",".join(EPISODE_COLUMNS)

    back = read_episodes_csv(path)
    assert len(back) == 3
    assert back[0].task == "pushbar"
    assert back[0].theta == 0.3
    assert back[1].theta == -0.05
    assert back[2].theta == "lift"
    assert back[0].replans == 2 and back[0].succeeded
    assert not back[1].succeeded
    assert back[0].mean_psnr == pytest.approx(51.25)
    assert back[2].mean_psnr is None and back[2].mean_ssim is None
    # timing off: walls read back as zero
    assert all(v == 0.0 for r in back for v in r.wall_ms.values())


def test_episode_csv_timing_column(tmp_path):
    plain = tmp_path / "plain.csv"
    timed = tmp_path / "timed.csv"
    write_episodes_csv(sample_rows(), plain)
    write_episodes_csv(sample_rows(), timed, timing=True)

    # empty timing cells keep reruns byte-comparable
    line = plain.read_text().splitlines()[1]
    assert line.endswith(",,,,")
    back = read_episodes_csv(timed)
    assert back[0].wall_ms == {
        "retrieve": 1.5, "generate": 2.25, "reject": 0.125, "act": 3.0
    }

    write_episodes_csv(sample_rows(), tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == plain.read_bytes()


def test_episode_csv_schema_check(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("task,method\nx,y\n")
    with pytest.raises(ValueError):
        read_episodes_csv(bad)


def test_summary_csv_layout(tmp_path):
    rows = [
        EpisodeRow("t1", "ours", i, 0, 0.0, r, True, None, None, {})
        for i, r in enumerate((1, 2))
    ] + [
        EpisodeRow("t1", "avdc", i, 0, 0.0, r, True, None, None, {})
        for i, r in enumerate((3, 3))
    ]
    table = results_table(rows)
    path = tmp_path / "summary.csv"
    write_summary_csv(table, path)
    text = path.read_text().splitlines()

    assert text[0] == "task,method,mean_replans,sem,trials"
    assert "t1,ours,1.5000,0.5000,2" in text
    assert "t1,avdc,3.0000,0.0000,2" in text
    comment = [i for i, line in enumerate(text) if line.startswith("#")]
    assert len(comment) == 1
    assert text[comment[0] + 1] == "method,normalized_replans"
    assert "ours,1.0000" in text
    assert "avdc,2.0000" in text


def test_summary_csv_without_baseline(tmp_path):
    rows = [EpisodeRow("t1", "avdc", 0, 0, 0.0, 2, True, None, None, {})]
    path = tmp_path / "no-baseline.csv"
    write_summary_csv(results_table(rows), path)
    text = path.read_text()
    assert "avdc,\n" in text  # NaN renders as an empty cell


def test_results_svg_contents(tmp_path):
    rows = []
    for task in ("pushbar", "openbox"):
        for method in ("avdc", "ours"):
            for trial, r in enumerate((2, 3, 4)):
                rows.append(
                    EpisodeRow(task, method, trial, 0, 0.0, r, True, None, None, {})
                )
    table = results_table(rows)
    svg = results_svg(table)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    for label in ("pushbar", "openbox", "avdc", "ours", "Replans until success"):
        assert label in svg
    assert svg == results_svg(table)  # deterministic

    out = tmp_path / "chart.svg"
    write_results_svg(table, out)
    assert out.read_text() == svg

    retitled = results_svg(table, title="Mean rounds")
    assert "Mean rounds" in retitled


def test_embedding_rows_two_object_task():
    rows = embedding_rows(ExperimentConfig(tasks=("openbox",)))
    assert len(rows) == 2
    tasks = {r[0] for r in rows}
    ids = {r[1] for r in rows}
    assert tasks == {"openbox"}
    assert ids == {"openbox/lift", "openbox/slide"}
    # two objects support one component; y pads to zero
    for _, _, x, y in rows:
        assert y == 0.0
    xs = sorted(r[2] for r in rows)
    assert xs[0] == pytest.approx(-xs[1], rel=1e-9)
    assert xs[1] > 0


def test_embedding_csv(tmp_path):
    rows = [("openbox", "openbox/lift", 1.25, 0.0), ("openbox", "openbox/slide", -1.25, 0.0)]
    path = tmp_path / "embed.csv"
    write_embedding_csv(rows, path)
    text = path.read_text().splitlines()
    assert text[0] == "task,object_id,x,y"
    assert text[1] == "openbox,openbox/lift,1.250000,0.000000"
    assert len(text) == 3
