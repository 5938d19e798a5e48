"""Command-line interface: ingest, features, train-recognizer, arrange,
eval, serve."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import click

from emoarrange.core import EmotionVA
from emoarrange.features import FormCache, features as compute_features, flatten_features
from emoarrange.midi import parse_midi
from emoarrange.pipeline import (
    ingest_directory,
    read_pieces,
    screen,
    split_song,
)
from emoarrange.recognizer import (
    default_recognizer,
    recognize,
    save_recognizer,
    train_supervised,
)
from emoarrange.server import serve as serve_server, song_from_midi_bytes
from emoarrange.stream import StreamConfig, run_offline
from emoarrange import metrics


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Real-time emotion-driven music arrangement toolkit."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
@click.option("--labels", "labels_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--granularity", type=click.Choice(["beat", "bar"]), default="beat")
def ingest(in_dir, out_file, labels_file, granularity) -> None:
    """Ingest a directory of MIDI files into a JSONL piece file."""
    stats = ingest_directory(in_dir, out_file, labels_file, granularity)
    click.echo(
        f"files={stats.files} rejected={stats.rejected} pieces={stats.pieces}"
    )
    for reason, count in sorted(stats.reasons.items()):
        click.echo(f"  rejected[{reason}] = {count}")


@main.command("features")
@click.option("--in", "in_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
def features_cmd(in_file, out_file) -> None:
    """Emit per-segment theory-feature rows for inspection."""
    cache = FormCache()
    count = 0
    with open(out_file, "w", encoding="utf-8") as fh:
        for piece in read_pieces(in_file):
            seg = piece.segment()
            feats = compute_features(seg, cache)
            row = {
                "harmonic_color": list(feats.harmonic_color),
                "rhythm": [[p, d] for p, d in feats.rhythm.entries],
                "contour": {
                    "melody_max": feats.contour.melody_max,
                    "chord_min": feats.contour.chord_min,
                    "melody_trend": feats.contour.melody_trend,
                    "chord_trend": feats.contour.chord_trend,
                    "melody_concavity": feats.contour.melody_concavity,
                    "chord_concavity": feats.contour.chord_concavity,
                    "valid": feats.contour.valid,
                },
                "form": {
                    "melody_rep": list(feats.form.melody_rep),
                    "chord_rep": list(feats.form.chord_rep),
                    "tonality_transform": feats.form.tonality_transform,
                    "zone_transform": feats.form.zone_transform,
                    "rhythm_difference": feats.form.rhythm_difference,
                },
                "flat": [float(x) for x in flatten_features(feats)],
            }
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")
            count += 1
    click.echo(f"wrote {count} feature rows to {out_file}")


@main.command("train-recognizer")
@click.option("--data", "data_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
@click.option("--epochs", default=40, show_default=True)
@click.option("--lr", default=1e-4, show_default=True)
@click.option("--batch-size", default=128, show_default=True)
@click.option("--hidden", default=512, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_recognizer(data_file, out_file, epochs, lr, batch_size, hidden, seed) -> None:
    """Train the emotion recognizer on labeled pieces."""
    pieces = list(read_pieces(data_file))
    est, trace = train_supervised(
        pieces,
        max_epochs=epochs,
        lr=lr,
        batch_size=batch_size,
        hidden=hidden,
        seed=seed,
    )
    save_recognizer(out_file, est)
    click.echo(
        f"trained on {len(pieces)} pieces: loss {trace[0]:.4f} -> {trace[-1]:.4f} "
        f"({len(trace)} epochs, converged={est.converged_}); saved to {out_file}"
    )


def _load_emotions(path) -> list:
    """Per-4-bar V-A rows: 'v a' or 'v,a' per line, # comments allowed."""
    out = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip().replace(",", " ")
        if not line:
            continue
        v, a = line.split()
        out.append(EmotionVA(float(v), float(a)))
    return out


@main.command()
@click.option("--in", "in_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--emotions", "emotions_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--fusion", type=click.Choice(["median", "concat", "features"]), default="features", show_default=True)
@click.option("--backend", type=click.Choice(["rule", "neural"]), default="rule", show_default=True)
@click.option("--granularity", type=click.Choice(["beat", "bar"]), default="beat", show_default=True)
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
def arrange(in_file, emotions_file, fusion, backend, granularity, out_file) -> None:
    """Arrange a MIDI file offline against a per-4-bar emotion trajectory."""
    song = song_from_midi_bytes(Path(in_file).read_bytes())
    trajectory = _load_emotions(emotions_file)
    config = StreamConfig(fusion=fusion, backend=backend, granularity=granularity)
    recognizer = default_recognizer()
    midi_bytes, report, results = run_offline(
        song, trajectory, config, recognizer=recognizer
    )
    Path(out_file).write_bytes(midi_bytes)
    click.echo(f"arranged {len(results)} segments -> {out_file}")
    click.echo(report.render_text())


@main.command("eval")
@click.option("--original", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--arranged", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--emotions", "emotions_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--report", "report_file", required=True, type=click.Path(dir_okay=False))
def eval_cmd(original, arranged, emotions_file, report_file) -> None:
    """Score an arranged MIDI against the original and an emotion trajectory."""
    orig_mid = parse_midi(Path(original).read_bytes())
    arr_mid = parse_midi(Path(arranged).read_bytes())
    for name, mid in (("original", orig_mid), ("arranged", arr_mid)):
        decision = screen(mid)
        if not decision.keep:
            raise click.ClickException(f"{name} rejected: {decision.reason}")
    orig_segments = [p.segment() for p in split_song(orig_mid)]
    arr_segments = [p.segment() for p in split_song(arr_mid)]
    n = min(len(orig_segments), len(arr_segments))
    orig_segments, arr_segments = orig_segments[:n], arr_segments[:n]

    targets = _load_emotions(emotions_file)[:n]
    recognizer = default_recognizer()
    cache = FormCache()
    recognized = []
    for seg in arr_segments[: len(targets)]:
        seq = recognize(recognizer, seg, compute_features(seg, cache))
        v = sum(p.valence for p in seq) / len(seq)
        a = sum(p.arousal for p in seq) / len(seq)
        recognized.append(EmotionVA(v, a))

    report = metrics.evaluate_stream(
        orig_segments, arr_segments, targets=targets[: len(recognized)], recognized=recognized
    )
    Path(report_file).write_text(report.render_text() + "\n")
    Path(str(report_file) + ".json").write_text(json.dumps(report.as_dict(), indent=2))
    click.echo(report.render_text())
    click.echo(f"report -> {report_file} (+ .json)")


@main.command("serve")
@click.option("--bind", default="127.0.0.1:8765", show_default=True)
@click.option("--backend", type=click.Choice(["rule", "neural"]), default="rule", show_default=True)
@click.option("--fusion", type=click.Choice(["median", "concat", "features"]), default="features", show_default=True)
@click.option("--granularity", type=click.Choice(["beat", "bar"]), default="beat", show_default=True)
def serve_cmd(bind, backend, fusion, granularity) -> None:
    """Run the long-lived session service (WebSocket protocol)."""
    config = StreamConfig(fusion=fusion, backend=backend, granularity=granularity)
    click.echo(f"serving on {bind} (song id 'demo' is built in)")
    serve_server(bind=bind, default_config=config)


if __name__ == "__main__":
    main()
