"""SI-SNR and evaluation reports.

Perceptual metrics (PESQ, ESTOI, DNSMOS, CSIG/CBAK/COVL) come from external
tools; each report item carries ``null`` slots for them so their values can
be merged in later.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

log = logging.getLogger(__name__)

SI_SNR_CAP = 100.0
SNR_BANDS = (("-15~-5", -15.0, -5.0, False), ("-5~5", -5.0, 5.0, False), ("5~15", 5.0, 15.0, True))
EXTERNAL_METRICS = ("pesq", "estoi", "dnsmos", "csig", "cbak", "covl")


def si_snr(estimate, reference):
    """Scale-invariant SNR in dB, mean-removed, clipped to +/-100 dB."""
    est = np.asarray(getattr(estimate, "samples", estimate), dtype=np.float64)
    ref = np.asarray(getattr(reference, "samples", reference), dtype=np.float64)
    if est.shape != ref.shape:
        raise InvalidInputError(f"length mismatch {est.shape} vs {ref.shape}")
    est = est - est.mean()
    ref = ref - ref.mean()
    ref_energy = np.dot(ref, ref)
    if ref_energy == 0:
        raise DegenerateInputError("reference is silent")
    target = np.dot(est, ref) / ref_energy * ref
    err = est - target
    t_e, e_e = np.dot(target, target), np.dot(err, err)
    if t_e == 0:
        return -SI_SNR_CAP
    if e_e == 0:
        return SI_SNR_CAP
    return float(np.clip(10.0 * math.log10(t_e / e_e), -SI_SNR_CAP, SI_SNR_CAP))


def band_of(snr_db):
    for name, lo, hi, closed in SNR_BANDS:
        if lo <= snr_db < hi or (closed and snr_db == hi):
            return name
    return "other"


def aggregate(items):
    """Mean SI-SNR figures per SNR band, plus an ``all`` entry."""
    groups = {}
    for it in items:
        if it.get("error"):
            continue
        for key in (band_of(it["snr_db"]), "all"):
            groups.setdefault(key, []).append(it)
    out = {}
    for key, members in groups.items():
        noisy = [m["si_snr_noisy"] for m in members]
        enh = [m["si_snr_enhanced"] for m in members]
        out[key] = {
            "count": len(members),
            "si_snr_noisy": float(np.mean(noisy)),
            "si_snr_enhanced": float(np.mean(enh)),
            "si_snr_improvement": float(np.mean(np.subtract(enh, noisy))),
        }
    return out


def evaluate(entries, enhancer, config_echo=None, cfg=None):
    """Run ``enhancer(noisy_waveform) -> Waveform`` over manifest entries.

    Mixtures use each entry's SNR (range midpoint draws are seeded per item),
    at full length. Failures are recorded per item and the run continues.
    """
    from .data import make_pair

    if not entries:
        raise ValueError("manifest is empty")
    seed = (config_echo or {}).get("seed", 0)
    items = []
    for i, entry in enumerate(entries):
        rec = {"id": entry.item_id, "index": i}
        try:
            pair = make_pair(entry, seed + i, cfg, crop_seconds=None)
            enhanced = enhancer(pair.noisy)
            rec.update(
                snr_db=pair.snr_db,
                si_snr_noisy=si_snr(pair.noisy, pair.clean),
                si_snr_enhanced=si_snr(enhanced, pair.clean),
            )
        except Exception as exc:  # recorded, run continues
            log.warning("item %s failed: %s", entry.item_id, exc)
            rec["error"] = f"{type(exc).__name__}: {exc}"
        for name in EXTERNAL_METRICS:
            rec[name] = None
        items.append(rec)
    return {
        "config_echo": config_echo or {},
        "items": items,
        "aggregates_by_band": aggregate(items),
    }


def write_report(report, path):
    """Write the JSON report and a per-item CSV next to it; returns both paths."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2))
    csv_path = path.with_suffix(".csv")
    cols = ["id", "snr_db", "si_snr_noisy", "si_snr_enhanced", "error"]
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for it in report["items"]:
            w.writerow({c: it.get(c, "") for c in cols})
    return path, csv_path
