import csv
from pathlib import Path

import pytest

from cardiotel.model import EcgFeatures, VitalSample

REPO_ROOT = Path(__file__).resolve().parent.parent
TABLE3_CSV = REPO_ROOT / "fixtures" / "table3.csv"


def sample_from_row(setup: str, pid: str, values: list[int], ts: int = 0) -> VitalSample:
    """Build a VitalSample from the 11 metric columns of a table3 row."""
    spo2, temp, sbp, dbp, hr, ecg, p, q, r, s, t = values
    return VitalSample(
        patient_id=str(pid),
        ts=ts,
        spo2=spo2,
        temp=float(temp),
        sbp=sbp,
        dbp=dbp,
        hr=hr,
        ecg=EcgFeatures(ecg_base=ecg, p=p, q=q, r=r, s=s, t=t),
    )


@pytest.fixture(scope="session")
def table3_pairs() -> list[tuple[str, VitalSample, VitalSample]]:
    """The 20 (patient_id, kit, clinic) pairs from the checked-in fixture."""
    kits: dict[str, VitalSample] = {}
    clinics: dict[str, VitalSample] = {}
    with open(TABLE3_CSV, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            sample = sample_from_row(
                row["Setup"], row["ID"],
                [int(row[k]) for k in ("SpO2", "Temp", "S_BP", "D_BP", "HR", "ECG", "P", "Q", "R", "S", "T")],
            )
            (kits if row["Setup"] == "Kit" else clinics)[row["ID"]] = sample
    assert set(kits) == set(clinics)
    return [(pid, kits[pid], clinics[pid]) for pid in sorted(kits, key=int)]
