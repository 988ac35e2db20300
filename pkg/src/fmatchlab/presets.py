"""Named experiment presets at desk scale.

Each preset is a plain experiment-config dict (same schema as --config files).
Trial counts are sized for quick runs; override with --trials for production
sweeps.  fig8 reads the two-user RB system with one RB per user per band;
fig8alt is the alternative reading with one subchannel per band (three
subchannels per user).
"""

from __future__ import annotations

import copy

PRESETS: dict[str, dict] = {
    # DMT polylines of all schemes for the 2-user, 6-band, 12-RB system
    "fig4": {
        "experiment": "sweep",
        "num_users": 2,
        "num_bands": 6,
        "num_subchannels": 12,
        "target_rates": [1.0, 1.0],
        "schemes": ["rb_coded", "interleaved", "tdma", "localized"],
        "snr_db": {"start": 0.0, "stop": 24.0, "step": 2.0},
        "trials": 20000,
        "seed": 1234,
    },
    # conditional outage bound vs MC: 4 subchannels, 2 known good, r = 1.2
    "fig6": {
        "experiment": "conditional",
        "n_channels": 4,
        "n_good": 2,
        "multiplexing_gain": 1.2,
        "snr_db": {"start": 10.0, "stop": 30.0, "step": 2.5},
        "trials": 200000,
        "seed": 1234,
    },
    # conditional outage exponent and conditional DMT at the same operating point
    "fig7": {
        "experiment": "conditional",
        "n_channels": 4,
        "n_good": 2,
        "multiplexing_gain": 1.2,
        "snr_db": {"start": 10.0, "stop": 40.0, "step": 2.5},
        "trials": 200000,
        "seed": 1234,
    },
    # fixed-rate RB sweep: coded f-matching vs interleaved vs TDMA
    "fig8": {
        "experiment": "sweep",
        "num_users": 2,
        "num_bands": 6,
        "num_subchannels": 12,
        "target_rates": [1.0, 1.0],
        "schemes": ["rb_coded", "interleaved", "tdma"],
        "snr_db": {"start": 0.0, "stop": 14.0, "step": 1.0},
        "trials": 100000,
        "seed": 1234,
    },
    # alternative caption reading: one RB per band, three per user
    "fig8alt": {
        "experiment": "sweep",
        "num_users": 2,
        "num_bands": 6,
        "num_subchannels": 6,
        "target_rates": [1.0, 1.0],
        "schemes": ["rb_coded", "interleaved", "tdma"],
        "snr_db": {"start": 0.0, "stop": 14.0, "step": 1.0},
        "trials": 100000,
        "seed": 1234,
    },
    # dynamic-rate RB sweep at multiplexing gain 0.9
    "fig9": {
        "experiment": "sweep",
        "num_users": 2,
        "num_bands": 6,
        "num_subchannels": 12,
        "multiplexing_gains": [0.9, 0.9],
        "schemes": ["rb_coded", "interleaved", "tdma"],
        "snr_db": {"start": 0.0, "stop": 24.0, "step": 2.0},
        "trials": 100000,
        "seed": 1234,
    },
    # fixed-rate chunk sweep: coded chunks vs localized
    "fig10": {
        "experiment": "sweep",
        "num_users": 3,
        "num_bands": 6,
        "num_subchannels": 6,
        "target_rates": [1.0, 1.0, 1.0],
        "schemes": ["chunk_coded", "localized"],
        "chunk_caps": [1, 1, 1],
        "snr_db": {"start": 0.0, "stop": 15.0, "step": 1.5},
        "trials": 100000,
        "seed": 1234,
    },
    # dynamic-rate chunk sweep at multiplexing gain 0.6 with two chunks per user
    "fig11": {
        "experiment": "sweep",
        "num_users": 3,
        "num_bands": 6,
        "num_subchannels": 6,
        "multiplexing_gains": [0.6, 0.6, 0.6],
        "schemes": ["chunk_coded", "localized"],
        "chunk_caps": [2, 2, 2],
        "snr_db": {"start": 0.0, "stop": 24.0, "step": 2.0},
        "trials": 100000,
        "seed": 1234,
    },
}


def get_preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return copy.deepcopy(PRESETS[name])
