"""Seeded surrogate corpora with the NSL-KDD and UCI Parkinson's layouts.

The real files are not redistributable with this package. These generators
write CSVs that load under the same schemas, with class-conditional
distributions modelled on the published corpora: the KDD archetypes
(normal traffic, SYN floods, ICMP floods, probes, content attacks) and the
per-group summary statistics of the voice measurements. They exist so the
whole pipeline can run offline; accuracy figures obtained on them say
nothing about the real corpora.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .schemas import NSL_KDD_FEATURES, PARKINSONS_COLUMNS

_TCP_SERVICES = ("http", "smtp", "ftp_data", "ftp", "telnet", "finger", "auth", "pop_3",
                 "imap4", "private", "other", "ssh", "whois", "domain", "sunrpc")
_UDP_SERVICES = ("domain_u", "private", "ntp_u", "other", "tftp_u")
_ICMP_SERVICES = ("ecr_i", "eco_i", "urp_i", "tim_i")

# (label, share of attack records, archetype)
_ATTACKS = (
    ("neptune", 0.68, "flood"),
    ("smurf", 0.05, "icmp_flood"),
    ("satan", 0.06, "probe_rej"),
    ("ipsweep", 0.06, "probe_icmp"),
    ("portsweep", 0.05, "probe_rej"),
    ("nmap", 0.025, "probe_icmp"),
    ("back", 0.02, "content"),
    ("teardrop", 0.015, "fragment"),
    ("warezclient", 0.015, "r2l"),
    ("guess_passwd", 0.01, "r2l"),
    ("pod", 0.005, "fragment"),
    ("buffer_overflow", 0.005, "r2l"),
)


def _rate(rng, hi: bool, sharp=12.0) -> float:
    x = rng.beta(sharp, 1.0) if hi else rng.beta(1.0, sharp)
    return round(float(x), 2)


def _kdd_record(rng: np.random.Generator, archetype: str) -> dict:
    r = dict.fromkeys(NSL_KDD_FEATURES, 0)
    if archetype in ("normal", "r2l", "content"):
        proto = "tcp" if archetype != "normal" else rng.choice(["tcp", "udp", "icmp"], p=[0.82, 0.13, 0.05])
        if proto == "tcp":
            if archetype == "r2l":
                service = rng.choice(["ftp_data", "ftp", "telnet", "imap4", "pop_3"])
            elif archetype == "content":
                service = "http"
            else:
                service = rng.choice(_TCP_SERVICES[:9], p=[0.52, 0.14, 0.14, 0.05, 0.03, 0.03, 0.03, 0.03, 0.03])
        else:
            service = rng.choice(_UDP_SERVICES[:4] if proto == "udp" else _ICMP_SERVICES[:2])
        flag = "SF" if rng.random() < 0.94 else rng.choice(["S1", "RSTO", "REJ", "S0", "RSTR"])
        r.update(protocol_type=proto, service=service, flag=flag)
        r["duration"] = int(rng.exponential(40)) if rng.random() < 0.12 else 0
        r["src_bytes"] = int(rng.lognormal(5.4, 1.3))
        r["dst_bytes"] = int(rng.lognormal(7.2, 2.0)) if proto == "tcp" else int(rng.lognormal(4.5, 1.0))
        r["logged_in"] = int(proto == "tcp" and rng.random() < 0.9)
        r["count"] = int(rng.integers(1, 25))
        r["srv_count"] = int(rng.integers(1, 30))
        r["same_srv_rate"] = _rate(rng, True)
        r["diff_srv_rate"] = _rate(rng, False)
        r["srv_diff_host_rate"] = round(float(rng.uniform(0, 0.4)), 2)
        r["dst_host_count"] = int(rng.integers(1, 256))
        r["dst_host_srv_count"] = int(rng.integers(120, 256)) if rng.random() < 0.75 else int(rng.integers(1, 120))
        r["dst_host_same_srv_rate"] = _rate(rng, True, 6.0)
        r["dst_host_diff_srv_rate"] = _rate(rng, False, 10.0)
        r["dst_host_same_src_port_rate"] = round(float(rng.beta(1.0, 6.0)), 2)
        r["dst_host_srv_diff_host_rate"] = round(float(rng.beta(1.0, 12.0)), 2)
        if archetype == "r2l":
            r["hot"] = int(rng.integers(0, 6))
            r["num_failed_logins"] = int(rng.random() < 0.3)
            r["is_guest_login"] = int(service.startswith("ftp") and rng.random() < 0.5)
            r["duration"] = int(rng.exponential(300))
            r["src_bytes"] = int(rng.lognormal(6.5, 2.0))
            r["dst_host_same_src_port_rate"] = round(float(rng.beta(4.0, 2.0)), 2)
            if rng.random() < 0.2:
                r["root_shell"], r["num_file_creations"] = 1, int(rng.integers(1, 4))
        elif archetype == "content":
            r["src_bytes"] = int(rng.normal(54540, 800))
            r["dst_bytes"] = int(rng.normal(8314, 300))
            r["hot"] = 2
            r["num_compromised"] = 1
            r["dst_host_same_src_port_rate"] = round(float(rng.beta(2.0, 8.0)), 2)
        elif rng.random() < 0.04:
            r["hot"] = int(rng.integers(1, 4))
    elif archetype == "flood":
        r.update(protocol_type="tcp", service=rng.choice(_TCP_SERVICES[7:] + ("http",)),
                 flag="S0" if rng.random() < 0.85 else rng.choice(["REJ", "RSTO", "SH"]))
        r["count"] = int(rng.integers(80, 512))
        r["srv_count"] = int(rng.integers(1, 30))
        syn = r["flag"] == "S0"
        r["serror_rate"] = r["srv_serror_rate"] = 1.0 if syn else _rate(rng, False)
        r["rerror_rate"] = r["srv_rerror_rate"] = 0.0 if syn else _rate(rng, True)
        r["same_srv_rate"] = _rate(rng, False, 8.0)
        r["diff_srv_rate"] = round(float(rng.uniform(0.03, 0.1)), 2)
        r["dst_host_count"] = 255
        r["dst_host_srv_count"] = int(rng.integers(1, 30))
        r["dst_host_same_srv_rate"] = _rate(rng, False, 8.0)
        r["dst_host_diff_srv_rate"] = round(float(rng.uniform(0.03, 0.1)), 2)
        r["dst_host_serror_rate"] = r["dst_host_srv_serror_rate"] = r["serror_rate"]
        r["dst_host_rerror_rate"] = r["dst_host_srv_rerror_rate"] = r["rerror_rate"]
    elif archetype == "icmp_flood":
        r.update(protocol_type="icmp", service="ecr_i", flag="SF")
        r["src_bytes"] = int(rng.choice([1032, 520]))
        r["count"] = r["srv_count"] = int(rng.integers(300, 512))
        r["same_srv_rate"] = 1.0
        r["dst_host_count"] = r["dst_host_srv_count"] = 255
        r["dst_host_same_srv_rate"] = 1.0
        r["dst_host_same_src_port_rate"] = 1.0
    elif archetype.startswith("probe"):
        icmp = archetype == "probe_icmp" and rng.random() < 0.8
        r.update(protocol_type="icmp" if icmp else "tcp",
                 service=rng.choice(["eco_i", "ecr_i"]) if icmp else rng.choice(_TCP_SERVICES),
                 flag="SF" if icmp else rng.choice(["REJ", "RSTO", "RSTR", "S0", "SF"], p=[0.45, 0.2, 0.15, 0.1, 0.1]))
        r["src_bytes"] = int(rng.integers(0, 20)) if icmp else int(rng.integers(0, 5))
        r["count"] = int(rng.integers(1, 200))
        r["srv_count"] = int(rng.integers(1, 20))
        r["rerror_rate"] = r["srv_rerror_rate"] = _rate(rng, not icmp)
        r["same_srv_rate"] = _rate(rng, False, 4.0)
        r["diff_srv_rate"] = _rate(rng, True, 4.0)
        r["srv_diff_host_rate"] = _rate(rng, icmp, 4.0)
        r["dst_host_count"] = int(rng.integers(1, 256))
        r["dst_host_srv_count"] = int(rng.integers(1, 60))
        r["dst_host_same_srv_rate"] = _rate(rng, False, 3.0)
        r["dst_host_diff_srv_rate"] = _rate(rng, True, 3.0)
        r["dst_host_same_src_port_rate"] = _rate(rng, True, 3.0)
        r["dst_host_srv_diff_host_rate"] = _rate(rng, icmp, 3.0)
        r["dst_host_rerror_rate"] = r["dst_host_srv_rerror_rate"] = r["rerror_rate"]
    elif archetype == "fragment":
        r.update(protocol_type=rng.choice(["udp", "icmp"]), flag="SF")
        r["service"] = "private" if r["protocol_type"] == "udp" else "ecr_i"
        r["wrong_fragment"] = int(rng.choice([1, 3]))
        r["src_bytes"] = int(rng.choice([28, 1480, 1480, 1480]))
        r["count"] = int(rng.integers(1, 120))
        r["srv_count"] = int(rng.integers(1, 120))
        r["same_srv_rate"] = 1.0
        r["dst_host_count"] = int(rng.integers(1, 256))
        r["dst_host_srv_count"] = int(rng.integers(1, 100))
        r["dst_host_same_srv_rate"] = _rate(rng, True, 3.0)
    else:
        raise ValueError(f"unknown archetype {archetype!r}")
    return r


def nsl_kdd_rows(n_rows: int, seed: int, attack_fraction: float = 0.465,
                 stealth: float = 0.10, mislabel: float = 0.01, difficulty: bool = False) -> list[list[str]]:
    """Generate NSL-KDD-layout records.

    ``stealth`` is the fraction of attacks drawn from the normal-traffic
    archetype (undetectable by design) and ``mislabel`` flips labels at
    random; together they keep the task from being trivially separable.
    """
    rng = np.random.default_rng(seed)
    names = [a[0] for a in _ATTACKS]
    shares = np.array([a[1] for a in _ATTACKS])
    shares /= shares.sum()
    kinds = {a[0]: a[2] for a in _ATTACKS}
    rows = []
    for _ in range(n_rows):
        if rng.random() < attack_fraction:
            label = str(rng.choice(names, p=shares))
            arch = "normal" if rng.random() < stealth else kinds[label]
        else:
            label, arch = "normal", "normal"
        rec = _kdd_record(rng, arch)
        if rng.random() < mislabel:
            label = "normal" if label != "normal" else str(rng.choice(names, p=shares))
        row = [str(rec[f]) for f in NSL_KDD_FEATURES] + [label]
        if difficulty:
            row.append(str(int(rng.integers(5, 22))))
        rows.append(row)
    return rows


# per-group (healthy, PD) mean and spread; "log" features are generated in log space
_VOICE = {
    "MDVP:Fo(Hz)": (181.9, 145.2, 45.0, False),
    "MDVP:Fhi(Hz)": (223.6, 188.4, 90.0, False),
    "MDVP:Flo(Hz)": (145.2, 106.9, 48.0, False),
    "MDVP:Jitter(%)": (0.00387, 0.00699, 0.45, True),
    "MDVP:Jitter(Abs)": (2.3e-5, 5.1e-5, 0.55, True),
    "MDVP:RAP": (0.00193, 0.00376, 0.5, True),
    "MDVP:PPQ": (0.00206, 0.00390, 0.45, True),
    "MDVP:Shimmer": (0.0176, 0.0337, 0.45, True),
    "MDVP:Shimmer(dB)": (0.163, 0.321, 0.45, True),
    "Shimmer:APQ3": (0.0095, 0.0177, 0.45, True),
    "Shimmer:APQ5": (0.0105, 0.0205, 0.45, True),
    "MDVP:APQ": (0.0133, 0.0277, 0.5, True),
    "NHR": (0.0115, 0.0292, 0.9, True),
    "HNR": (24.68, 20.97, 4.0, False),
    "RPDE": (0.443, 0.517, 0.095, False),
    "DFA": (0.696, 0.725, 0.053, False),
    "spread1": (-6.76, -5.33, 0.85, False),
    "spread2": (0.160, 0.248, 0.072, False),
    "D2": (2.154, 2.456, 0.36, False),
    "PPE": (0.123, 0.234, 0.38, True),
}
_JITTER = {"MDVP:Jitter(%)", "MDVP:Jitter(Abs)", "MDVP:RAP", "MDVP:PPQ"}
_SHIMMER = {"MDVP:Shimmer", "MDVP:Shimmer(dB)", "Shimmer:APQ3", "Shimmer:APQ5", "MDVP:APQ"}


def parkinsons_rows(seed: int, n_healthy_subjects: int = 8, n_pd_subjects: int = 23,
                    recordings: int = 6, extra_pd_recordings: int = 9) -> list[list[str]]:
    """Generate voice-measure records grouped by subject (defaults: 195 rows, 147 PD)."""
    rng = np.random.default_rng(seed)
    subjects = [(0, recordings)] * n_healthy_subjects + [
        (1, recordings + (1 if k < extra_pd_recordings else 0)) for k in range(n_pd_subjects)]
    order = rng.permutation(len(subjects))
    rows = []
    for sid, si in enumerate(order, start=1):
        status, n_rec = subjects[si]
        # one latent severity per subject places the voice between the group means
        severity = rng.normal(float(status), 0.38)
        subject_z = {k: rng.normal() for k in _VOICE}
        for rec in range(1, n_rec + 1):
            s = severity + rng.normal(0.0, 0.12)
            jit, shim = rng.normal(), rng.normal()
            vals = {}
            for k, (h, p, sd, log) in _VOICE.items():
                shared = jit if k in _JITTER else shim if k in _SHIMMER else 0.0
                z = 0.3 * subject_z[k] + 0.2 * rng.normal() + 0.25 * shared
                if log:
                    vals[k] = float(np.exp(np.log(h) + (np.log(p) - np.log(h)) * s + sd * z))
                else:
                    vals[k] = h + (p - h) * s + sd * z
            vals["Jitter:DDP"] = 3.0 * vals["MDVP:RAP"]
            vals["Shimmer:DDA"] = 3.0 * vals["Shimmer:APQ3"]
            vals["MDVP:Fhi(Hz)"] = max(vals["MDVP:Fhi(Hz)"], vals["MDVP:Fo(Hz)"] + abs(rng.normal(10, 5)))
            vals["MDVP:Flo(Hz)"] = min(vals["MDVP:Flo(Hz)"], vals["MDVP:Fo(Hz)"] - abs(rng.normal(10, 5)))
            vals["name"] = f"phon_R01_S{sid:02d}_{rec}"
            vals["status"] = status
            rows.append([v if isinstance(v := vals[c], str) else
                         str(v) if isinstance(v, int) else f"{v:.6g}" for c in PARKINSONS_COLUMNS])
    return rows


def write_csv(path: str | Path, rows: list[list[str]], header: list[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        w.writerows(rows)
    return path


def write_nsl_kdd(path, n_rows: int = 10000, seed: int = 0, **kw) -> Path:
    return write_csv(path, nsl_kdd_rows(n_rows, seed, **kw))


def write_parkinsons(path, seed: int = 0, **kw) -> Path:
    return write_csv(path, parkinsons_rows(seed, **kw), header=list(PARKINSONS_COLUMNS))
