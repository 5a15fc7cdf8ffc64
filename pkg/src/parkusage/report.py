"""Plot-ready frequency tables: travel modes by hour and weekday, trip durations."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .trips import MODES

WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


@dataclass
class HistogramSeries:
    """Counts per bin for one or more named series.

    ``edges`` has one more entry than each count list; ``labels`` are the
    printable bin names used in the CSV ``bin`` column.
    """

    edges: list
    counts: dict
    labels: list = None
    properties: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.labels is None:
            self.labels = [_fmt(e) for e in self.edges[:-1]]

    def total(self, name=None):
        if name is not None:
            return int(sum(self.counts[name]))
        return int(sum(sum(c) for c in self.counts.values()))

    def write_csv(self, path):
        names = list(self.counts)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin", *names])
            for i, label in enumerate(self.labels):
                w.writerow([label, *(self.counts[n][i] for n in names)])


def _fmt(x):
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def local_hour_and_weekday(epoch_s, tz_offset_h):
    """Local hour (0-23) and weekday (Monday=0) of epoch seconds shifted by ``tz_offset_h``.

    >>> local_hour_and_weekday(0, 0)
    (0, 3)
    """
    local = int(epoch_s) + int(round(tz_offset_h * 3600))
    # 1970-01-01 was a Thursday
    return (local // 3600) % 24, (local // 86400 + 3) % 7


def mode_histograms(segments, tz_offset_h=-4):
    """Travel-mode counts per local hour of day and per weekday.

    Each segment is binned by the local time of its first ping.  Returns
    ``{"hourly": HistogramSeries, "weekly": HistogramSeries}``.
    """
    hourly = {m: [0] * 24 for m in MODES}
    weekly = {m: [0] * 7 for m in MODES}
    for s in segments:
        h, d = local_hour_and_weekday(s.start_ts, tz_offset_h)
        hourly[s.mode][h] += 1
        weekly[s.mode][d] += 1
    return {
        "hourly": HistogramSeries(list(range(25)), hourly,
                                  properties={"tz_offset_h": tz_offset_h}),
        "weekly": HistogramSeries(list(range(8)), weekly, labels=list(WEEKDAYS),
                                  properties={"tz_offset_h": tz_offset_h}),
    }


def duration_histogram(durations_s, bin_width_min=5.0):
    """Histogram of trip durations in minutes with left-closed bins from 0.

    ``durations_s`` are trip durations in seconds (or :class:`Trip` objects).
    The median, mean and max (minutes) are attached as properties.
    """
    if not bin_width_min > 0:
        raise ValueError("bin width must be positive")
    minutes = np.array([getattr(d, "duration_s", d) for d in durations_s], dtype=float) / 60.0
    if len(minutes) == 0:
        return HistogramSeries([0.0, float(bin_width_min)], {"trips": [0]},
                               properties={"median_min": float("nan"),
                                           "mean_min": float("nan"),
                                           "max_min": float("nan"), "n": 0})
    n_bins = int(np.floor(minutes.max() / bin_width_min)) + 1
    idx = np.floor(minutes / bin_width_min).astype(np.int64)
    counts = np.bincount(idx, minlength=n_bins)
    edges = [i * bin_width_min for i in range(n_bins + 1)]
    props = {"median_min": float(np.median(minutes)), "mean_min": float(minutes.mean()),
             "max_min": float(minutes.max()), "n": int(len(minutes))}
    return HistogramSeries(edges, {"trips": counts.tolist()}, properties=props)
