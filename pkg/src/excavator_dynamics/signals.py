"""Sensor logs and their conditioning: episodes, acceleration fits, spectra, curve fits."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import Polynomial
from scipy import signal as sp_signal

from .errors import BadBand, EpisodeTooShort, MalformedEpisode, RankDeficient, TooShort
from .hydraulics import PressurePair
from .kinematics import INSTRUMENTED, JointAccels, JointAngles, JointRates

CSV_COLUMNS = (
    "t",
    "theta_boom", "theta_stick", "theta_bucket", "theta_cab",
    "omega_boom", "omega_stick", "omega_bucket", "omega_cab",
    "p1_boom", "p2_boom", "p1_stick", "p2_stick",
)
PAYLOAD_COLUMN = "payload_kg"


@dataclass(frozen=True)
class Sample:
    t: float
    q: JointAngles
    qd: JointRates
    pressures: dict


@dataclass(frozen=True)
class AlignedSample(Sample):
    qdd: JointAccels = None


@dataclass
class Episode:
    """One uniformly sampled recording, stored column-wise.

    ``q``, ``qd`` and ``pressures`` hold numpy arrays; indexing an episode
    yields a :class:`Sample`.
    """

    t: np.ndarray
    q: JointAngles
    qd: JointRates
    pressures: dict
    payload: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.q = self.q.map(lambda v: np.broadcast_to(np.asarray(v, float), self.t.shape).copy())
        self.qd = self.qd.map(lambda v: np.broadcast_to(np.asarray(v, float), self.t.shape).copy())
        if self.payload is not None:
            self.payload = np.asarray(self.payload, dtype=float)
        if self.t.size < 2:
            raise EpisodeTooShort("an episode needs at least two samples")
        dt = np.diff(self.t)
        if np.any(dt <= 0):
            raise MalformedEpisode("timestamps must be strictly increasing")
        nominal = np.median(dt)
        if np.any(np.abs(dt - nominal) > 0.01 * nominal):
            raise MalformedEpisode("sample period varies by more than 1 %")

    def __len__(self):
        return self.t.size

    @property
    def rate(self):
        return float(1.0 / np.median(np.diff(self.t)))

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])

    @property
    def true_payload(self):
        if self.payload is not None and self.payload.size:
            return float(np.mean(self.payload))
        value = self.metadata.get("payload_kg")
        return None if value is None else float(value)

    def __getitem__(self, i):
        return Sample(
            float(self.t[i]),
            self.q.map(lambda v: float(v[i])),
            self.qd.map(lambda v: float(v[i])),
            {j: PressurePair(float(p.p1[i]), float(p.p2[i])) for j, p in self.pressures.items()},
        )

    def select(self, mask):
        """Sub-episode of the samples where ``mask`` holds (keeps uniform spacing only if contiguous)."""
        idx = np.flatnonzero(mask)
        return type(self)(**self._take(idx))

    def _take(self, idx):
        return dict(
            t=self.t[idx],
            q=self.q.map(lambda v: v[idx]),
            qd=self.qd.map(lambda v: v[idx]),
            pressures={j: PressurePair(p.p1[idx], p.p2[idx]) for j, p in self.pressures.items()},
            payload=None if self.payload is None else self.payload[idx],
            metadata=dict(self.metadata),
        )


@dataclass(kw_only=True)
class AlignedEpisode(Episode):
    """Episode after acceleration fitting; every channel shares the same delay."""

    qdd: JointAccels

    def __getitem__(self, i):
        s = super().__getitem__(i)
        return AlignedSample(s.t, s.q, s.qd, s.pressures, self.qdd.map(lambda v: float(v[i])))

    def _take(self, idx):
        out = super()._take(idx)
        out["qdd"] = self.qdd.map(lambda v: v[idx])
        return out

    def __post_init__(self):
        # windows may straddle irregular raw timestamps; uniformity was checked upstream
        self.t = np.asarray(self.t, dtype=float)
        if self.t.size < 1:
            raise EpisodeTooShort("aligned episode is empty")


def derive_accelerations(episode, window=5):
    """Joint accelerations from a least-squares line through the last ``window`` rates.

    Angles, rates, pressures and payload are replaced by their mean over the
    same window so all channels carry the same phase delay. The timestamp is
    the window centre. Output length is ``len(episode) - window + 1``.
    """
    if window < 2:
        raise ValueError("window must be at least 2")
    n = len(episode)
    if n < window:
        raise EpisodeTooShort(f"episode has {n} samples, window needs {window}")

    def win(x):
        return np.lib.stride_tricks.sliding_window_view(np.asarray(x, float), window)

    tw = win(episode.t)
    tc = tw - tw.mean(axis=1, keepdims=True)
    denom = np.sum(tc**2, axis=1)

    def mean(x):
        return win(x).mean(axis=1)

    def slope(x):
        w = win(x)
        return np.sum(tc * (w - w.mean(axis=1, keepdims=True)), axis=1) / denom

    return AlignedEpisode(
        t=tw.mean(axis=1),
        q=episode.q.map(mean),
        qd=episode.qd.map(mean),
        pressures={j: PressurePair(mean(p.p1), mean(p.p2)) for j, p in episode.pressures.items()},
        payload=None if episode.payload is None else mean(episode.payload),
        metadata=dict(episode.metadata),
        qdd=JointAccels(slope(episode.qd.boom), slope(episode.qd.stick), slope(episode.qd.bucket)),
    )


def ensure_aligned(episode, window=5):
    return episode if isinstance(episode, AlignedEpisode) else derive_accelerations(episode, window)


@dataclass
class Spectrum:
    freqs: np.ndarray
    power: np.ndarray  # one-sided density, units**2 / Hz


PSD_SEGMENT = 256


def psd(x, rate, segment=PSD_SEGMENT):
    """Welch estimate: Hann window, 50 % overlap, mean removed per segment."""
    x = np.asarray(x, dtype=float)
    if x.size < 64:
        raise TooShort(f"PSD needs at least 64 samples, got {x.size}")
    nperseg = min(segment, x.size)
    freqs, power = sp_signal.welch(
        x, fs=rate, window="hann", nperseg=nperseg, noverlap=nperseg // 2,
        detrend="constant", scaling="density",
    )
    return Spectrum(freqs, power)


def band_power(spectrum, lo, hi):
    """Trapezoidal integral of the density over ``[lo, hi]`` Hz."""
    f, p = spectrum.freqs, spectrum.power
    if lo < 0 or hi < lo or hi > f[-1] + 1e-12:
        raise BadBand(f"band [{lo}, {hi}] Hz is outside [0, {f[-1]}] or reversed")
    if hi == lo:
        return 0.0
    inside = (f > lo) & (f < hi)
    fx = np.concatenate([[lo], f[inside], [hi]])
    px = np.concatenate([[np.interp(lo, f, p)], p[inside], [np.interp(hi, f, p)]])
    return float(np.sum(0.5 * (px[1:] + px[:-1]) * np.diff(fx)))


def polyfit(x, y, degree):
    """Least-squares polynomial, fitted on a normalised abscissa.

    Returns a :class:`numpy.polynomial.Polynomial` in the original
    variable; ``.coef`` lists coefficients from the constant term up.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size <= degree or np.unique(x).size <= degree:
        raise RankDeficient(f"need more than {degree} distinct abscissae for degree {degree}")
    return Polynomial.fit(x, y, degree).convert()


# CSV -----------------------------------------------------------------------

def write_episode_csv(episode, path):
    """Write the canonical episode CSV; ``# key=value`` lines carry metadata."""
    cols = [
        episode.t,
        episode.q.boom, episode.q.stick, episode.q.bucket, episode.q.cab,
        episode.qd.boom, episode.qd.stick, episode.qd.bucket, episode.qd.cab,
        episode.pressures["boom"].p1, episode.pressures["boom"].p2,
        episode.pressures["stick"].p1, episode.pressures["stick"].p2,
    ]
    names = list(CSV_COLUMNS)
    if episode.payload is not None:
        cols.append(episode.payload)
        names.append(PAYLOAD_COLUMN)
    data = np.column_stack([np.asarray(c, dtype=float) for c in cols])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in sorted(episode.metadata.items()):
            fh.write(f"# {key}={value}\n")
        fh.write(",".join(names) + "\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.17g")


def read_episode_csv(path):
    path = Path(path)
    metadata = {}
    header = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    metadata[key.strip()] = value.strip()
                continue
            header = [c.strip() for c in line.strip().split(",")]
            break
        if header is None:
            raise MalformedEpisode(f"{path}: missing header row")
        expected = list(CSV_COLUMNS)
        if header[: len(expected)] != expected or header[len(expected):] not in ([], [PAYLOAD_COLUMN]):
            raise MalformedEpisode(f"{path}: unexpected columns {header}")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise MalformedEpisode(f"{path}: {exc}") from None
    if data.shape[0] == 0:
        raise EpisodeTooShort(f"{path}: no samples")
    if data.shape[1] != len(header):
        raise MalformedEpisode(f"{path}: row width {data.shape[1]} != header width {len(header)}")
    c = {name: data[:, i] for i, name in enumerate(header)}
    metadata.setdefault("source", path.name)
    return Episode(
        t=c["t"],
        q=JointAngles(c["theta_boom"], c["theta_stick"], c["theta_bucket"], c["theta_cab"]),
        qd=JointRates(c["omega_boom"], c["omega_stick"], c["omega_bucket"], c["omega_cab"]),
        pressures={j: PressurePair(c[f"p1_{j}"], c[f"p2_{j}"]) for j in INSTRUMENTED},
        payload=c.get(PAYLOAD_COLUMN),
        metadata=metadata,
    )
