"""Command-line pipeline: decompose, beats, analyze, spectrum, blend.

Each stage reads and writes files (BVH, WAV, JSON archives) so runs can be
scripted and replayed.  Every command writes a ``<out>.manifest.json``
recording the command, content hashes of the inputs, all parameters, and the
output paths; re-running with identical inputs and parameters reproduces the
outputs byte for byte.

Exit codes: 2 unreadable/unparseable input, 3 unknown channels or shape
mismatch, 4 decomposition did not converge, 5 no periodicity in audio,
6 blend-spec schema error, 64 usage error.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import tempfile

import click
import numpy as np

from . import __version__
from .analysis import (
    detect_singular_imfs,
    fibonacci_relations,
    hilbert_spectrum,
    spectrum_sidecar,
    spectrum_to_csv,
    summarize,
    wafa,
)
from .beat import (
    Segment,
    estimate_tempo,
    fixed_grid,
    grid_from_dict,
    grid_to_dict,
    onset_envelope,
    read_wav,
    track_beats,
)
from .edit import align, apply_blend, blend_spec_from_dict, synthesize_clip
from .errors import (
    BadDimension,
    BadTempo,
    BlendSpecError,
    BvhSyntaxError,
    ChannelMismatch,
    FrameCountMismatch,
    GridOutsideClip,
    LengthMismatch,
    NoBeats,
    NoConvergence,
    NoPeriodicity,
    SpecOutOfBounds,
    TooFewFrequencies,
    TooFewIMFs,
    UnknownChannel,
    UnknownChannelName,
    WavFormatError,
)
from .memd import (
    MultivariateDecomposition,
    direction_set,
    memd,
    multivariate_from_dict,
    multivariate_to_dict,
    na_memd,
)
from .mocap_io import extract_channels, parse_bvh, write_bvh
from .signal_core import Decomposition, emd

EXIT_PARSE = 2
EXIT_CHANNELS = 3
EXIT_CONVERGENCE = 4
EXIT_PERIODICITY = 5
EXIT_SPEC = 6
EXIT_USAGE = 64


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            digest.update(block)
    return "sha256:" + digest.hexdigest()


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _write_manifest(command, inputs, parameters, seed, outputs):
    manifest = {
        "command": command,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "parameters": parameters,
        "seed": seed,
        "tool_version": __version__,
        "outputs": [str(p) for p in outputs],
    }
    _atomic_write(str(outputs[0]) + ".manifest.json", _dump_json(manifest))


def _load_json(path, code=EXIT_PARSE):
    try:
        with open(path) as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        _fail(code, f"cannot read {path}: {exc}")


def _load_archive(path):
    obj = _load_json(path)
    try:
        if "channels" in obj:
            return multivariate_from_dict(obj)
        return multivariate_from_dict(
            {
                "rate": obj["rate"],
                "sd_threshold": obj.get("sd_threshold"),
                "channels": [
                    {"label": "signal", "imfs": obj["imfs"], "trend": obj["trend"]}
                ],
                "meta": obj.get("meta") or {},
            }
        )
    except (KeyError, TypeError, ValueError) as exc:
        _fail(EXIT_PARSE, f"bad archive {path}: {exc}")


@click.group()
@click.version_option(version=__version__)
def main():
    """Decompose, analyze, and blend motion-capture signals."""


@main.command("decompose")
@click.argument("bvh_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--channels", required=True,
              help="Comma-separated joint.Channel names, e.g. hips.Xrotation")
@click.option("--method", type=click.Choice(["emd", "memd", "na-memd"]),
              default="na-memd", show_default=True)
@click.option("--sd-threshold", type=float, default=0.25, show_default=True)
@click.option("--directions", type=int, default=64, show_default=True,
              help="Projection direction count for memd/na-memd")
@click.option("--noise-pct", type=float, default=0.09, show_default=True)
@click.option("--noise-channels", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_decompose(bvh_path, channels, method, sd_threshold, directions,
                  noise_pct, noise_channels, seed, out):
    """Decompose selected BVH channels into an IMF archive."""
    try:
        clip = parse_bvh(open(bvh_path).read())
    except (OSError, BvhSyntaxError, FrameCountMismatch, UnknownChannelName) as exc:
        _fail(EXIT_PARSE, f"cannot parse {bvh_path}: {exc}")
    selection = [name.strip() for name in channels.split(",") if name.strip()]
    try:
        series = extract_channels(clip, selection)
    except UnknownChannel as exc:
        _fail(EXIT_CHANNELS, f"unknown channel: {exc.name}")

    try:
        if method == "emd":
            decomp = _emd_multichannel(series, sd_threshold)
        elif method == "memd":
            if series.n_channels < 2:
                _fail(EXIT_USAGE, "memd needs at least 2 channels")
            dirs = direction_set(series.n_channels, directions, seed=seed)
            decomp = memd(series, dirs=dirs, sd_threshold=sd_threshold)
        else:
            dims = series.n_channels + noise_channels
            dirs = direction_set(dims, max(directions, 2 * dims), seed=seed)
            decomp = na_memd(
                series,
                noise_channels=noise_channels,
                noise_pct=noise_pct,
                seed=seed,
                dirs=dirs,
                sd_threshold=sd_threshold,
            )
    except NoConvergence as exc:
        _fail(EXIT_CONVERGENCE, str(exc))
    except BadDimension as exc:
        _fail(EXIT_USAGE, str(exc))

    _atomic_write(out, _dump_json(multivariate_to_dict(decomp)))
    _write_manifest(
        "decompose",
        [bvh_path],
        {
            "channels": selection,
            "method": method,
            "sd_threshold": sd_threshold,
            "directions": directions,
            "noise_pct": noise_pct,
            "noise_channels": noise_channels,
        },
        seed,
        [out],
    )
    report = summarize(decomp)
    click.echo(
        f"{decomp.imf_count} IMFs; trend RMS fraction "
        f"{report.trend_rms_fraction:.4f}"
    )


def _emd_multichannel(series, sd_threshold):
    """Independent univariate decompositions, zero-padded to a common count."""
    decomps = [emd(ch, sd_threshold=sd_threshold) for ch in series.channels]
    top = max(d.imf_count for d in decomps)
    padded = []
    for d in decomps:
        imfs = list(d.imfs) + [np.zeros(d.trend.size) for _ in range(top - d.imf_count)]
        padded.append(
            Decomposition(imfs=imfs, trend=d.trend, rate=d.rate, meta=d.meta)
        )
    meta = dict(padded[0].meta)
    meta["source"] = "emd"
    return MultivariateDecomposition(
        per_channel=padded, labels=list(series.labels), meta=meta
    )


@main.command("beats")
@click.argument("wav_path", required=False,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--bpm", type=float, default=None,
              help="Fixed tempo instead of tracking audio")
@click.option("--duration", type=float, default=None,
              help="Grid length in seconds (with --bpm)")
@click.option("--offset", type=float, default=0.0, show_default=True)
@click.option("--strong-period", type=int, default=4, show_default=True)
@click.option("--tightness", type=float, default=400.0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_beats(wav_path, bpm, duration, offset, strong_period, tightness, out):
    """Produce a beat grid from audio or from a fixed tempo."""
    if (wav_path is None) == (bpm is None):
        _fail(EXIT_USAGE, "provide exactly one of a WAV path or --bpm")
    inputs = []
    try:
        if bpm is not None:
            if duration is None:
                _fail(EXIT_USAGE, "--bpm needs --duration")
            grid = fixed_grid(bpm, duration, offset=offset,
                              strong_period=strong_period)
        else:
            inputs = [wav_path]
            try:
                audio = read_wav(wav_path)
            except (OSError, WavFormatError) as exc:
                _fail(EXIT_PARSE, f"cannot read {wav_path}: {exc}")
            envelope = onset_envelope(audio)
            tempo = estimate_tempo(envelope)
            grid = track_beats(envelope, tempo, tightness=tightness,
                               strong_period=strong_period)
            grid.beats = grid.beats + offset
    except BadTempo as exc:
        _fail(EXIT_USAGE, str(exc))
    except (NoPeriodicity, NoBeats) as exc:
        _fail(EXIT_PERIODICITY, str(exc))

    _atomic_write(out, _dump_json(grid_to_dict(grid)))
    _write_manifest(
        "beats",
        inputs,
        {
            "bpm": bpm,
            "duration": duration,
            "offset": offset,
            "strong_period": strong_period,
            "tightness": tightness,
        },
        None,
        [out],
    )
    click.echo(f"{len(grid)} beats at {grid.bpm:.2f} BPM")


@main.command("analyze")
@click.argument("archive_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--beats", "beats_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Beat grid JSON for per-segment statistics")
@click.option("--beats-per-segment", type=int, default=1, show_default=True)
@click.option("--fibonacci-tolerance", type=float, default=0.05, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_analyze(archive_path, beats_path, beats_per_segment,
                fibonacci_tolerance, out):
    """Weighted-frequency, sum-relation, and summary reports for an archive."""
    decomp = _load_archive(archive_path)
    inputs = [archive_path]
    segments = None
    if beats_path is not None:
        inputs.append(beats_path)
        grid = grid_from_dict(_load_json(beats_path))
        n = decomp.per_channel[0].trend.size
        duration = n / decomp.rate
        if grid.beats[0] >= duration or grid.beats[-1] <= 0:
            _fail(EXIT_CHANNELS, "beat grid does not overlap the archive span")
        frames = np.round(grid.beats * decomp.rate).astype(int)
        segments = []
        for start in range(0, len(frames) - beats_per_segment, beats_per_segment):
            lo, hi = frames[start], frames[start + beats_per_segment]
            if lo >= 0 and hi <= n and hi > lo:
                segments.append(Segment(int(lo), int(hi), start))

    channels_report = []
    warnings = []
    for label, d in zip(decomp.labels, decomp.per_channel):
        report = wafa(d, segments)
        entry = {
            "label": label,
            "wafa": {
                "per_imf_per_segment": report.per_imf_per_segment.tolist(),
                "per_imf_overall": report.per_imf_overall.tolist(),
                "excluded_fraction": report.excluded_fraction,
            },
        }
        try:
            fib = fibonacci_relations(report.per_imf_overall,
                                      tolerance=fibonacci_tolerance)
            entry["fibonacci"] = {
                "triples": [list(t) for t in fib.triples],
                "chain_length": fib.chain_length,
                "tolerance": fib.tolerance,
            }
        except TooFewFrequencies as exc:
            entry["fibonacci"] = None
            warnings.append(f"{label}: {exc}")
        try:
            entry["singular_imfs"] = detect_singular_imfs(report)
        except TooFewIMFs as exc:
            entry["singular_imfs"] = None
            warnings.append(f"{label}: {exc}")
        channels_report.append(entry)

    overall = summarize(decomp)
    payload = {
        "summary": {
            "imf_count": overall.imf_count,
            "freq_range": list(overall.freq_range),
            "trend_rms_fraction": overall.trend_rms_fraction,
        },
        "channels": channels_report,
        "warnings": warnings,
    }
    _atomic_write(out, _dump_json(payload))
    _write_manifest(
        "analyze",
        inputs,
        {
            "beats_per_segment": beats_per_segment,
            "fibonacci_tolerance": fibonacci_tolerance,
        },
        None,
        [out],
    )
    for message in warnings:
        click.echo(f"warning: {message}", err=True)
    click.echo(
        f"{overall.imf_count} IMFs, frequency range "
        f"[{overall.freq_range[0]:.2f}, {overall.freq_range[1]:.2f}] Hz"
    )


@main.command("spectrum")
@click.argument("archive_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--channel", default=None,
              help="Channel label (defaults to the first channel)")
@click.option("--time-bin", type=float, default=0.05, show_default=True)
@click.option("--freq-bins", type=int, default=100, show_default=True)
@click.option("--freq-max", type=float, default=None,
              help="Upper frequency edge in Hz (defaults to Nyquist)")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="CSV path; a .json sidecar lands next to it")
def cmd_spectrum(archive_path, channel, time_bin, freq_bins, freq_max, out):
    """Export a time-frequency energy grid as CSV plus a JSON sidecar."""
    decomp = _load_archive(archive_path)
    if channel is None:
        d = decomp.per_channel[0]
    else:
        if channel not in decomp.labels:
            _fail(EXIT_CHANNELS, f"unknown channel: {channel}")
        d = decomp.per_channel[decomp.labels.index(channel)]
    spectrum = hilbert_spectrum(d, time_bin=time_bin, freq_max=freq_max,
                                freq_bins=freq_bins)
    sidecar_path = os.path.splitext(out)[0] + ".json"
    _atomic_write(out, spectrum_to_csv(spectrum))
    _atomic_write(sidecar_path, _dump_json(spectrum_sidecar(spectrum)))
    _write_manifest(
        "spectrum",
        [archive_path],
        {
            "channel": channel,
            "time_bin": time_bin,
            "freq_bins": freq_bins,
            "freq_max": freq_max,
        },
        None,
        [out, sidecar_path],
    )
    click.echo(f"grid {spectrum.energy.shape[0]} x {spectrum.energy.shape[1]}, "
               f"overflow {spectrum.overflow:.4g}")


@main.command("blend")
@click.argument("archive_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("archive_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--spec", "spec_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--template", "template_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--target-fps", type=float, default=None,
              help="Alignment rate (defaults to the spec's target_rate, "
                   "then the template's rate)")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_blend(archive_a, archive_b, spec_path, template_path, target_fps, out):
    """Edit archive A against archive B and write the result into a BVH."""
    a = _load_archive(archive_a)
    b = _load_archive(archive_b)
    try:
        spec = blend_spec_from_dict(_load_json(spec_path, code=EXIT_SPEC))
    except BlendSpecError as exc:
        _fail(EXIT_SPEC, f"bad blend spec: {exc}")
    try:
        template = parse_bvh(open(template_path).read())
    except (OSError, BvhSyntaxError, FrameCountMismatch, UnknownChannelName) as exc:
        _fail(EXIT_PARSE, f"cannot parse {template_path}: {exc}")

    rate = target_fps or spec.target_rate or template.rate
    try:
        pair = align(a, b, target_rate=rate)
        edited = apply_blend(pair, spec)
        clip = synthesize_clip(template, edited)
    except (ChannelMismatch, UnknownChannel, LengthMismatch) as exc:
        _fail(EXIT_CHANNELS, str(exc))
    except (SpecOutOfBounds, BlendSpecError) as exc:
        _fail(EXIT_SPEC, str(exc))

    _atomic_write(out, write_bvh(clip))
    _write_manifest(
        "blend",
        [archive_a, archive_b, spec_path, template_path],
        {"target_fps": rate},
        None,
        [out],
    )
    click.echo(f"wrote {clip.frame_count} frames to {out}")


if __name__ == "__main__":
    main()
