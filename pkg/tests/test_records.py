import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pedt_vqe.records import (
    COMPARE_COLUMNS,
    TRACE_COLUMNS,
    IterationEntry,
    RecordError,
    RunRecord,
    compare_records,
    csv_to_rows,
    kappa_trace_rows,
    load_record,
    load_record_dir,
    rows_to_csv,
    save_record,
)


def make_record(variant, seed, energies, kappas=None, deltas=None, final=None, oracle=-10.0):
    kappas = kappas or [0.5] * len(energies)
    deltas = deltas or [0.1] * len(energies)
    entries = [
        IterationEntry(i + 1, e, e + 0.01, k, d, 3, 0.2, 2 * (i + 1), wall_ms=1.5)
        for i, (e, k, d) in enumerate(zip(energies, kappas, deltas))
    ]
    return RunRecord(
        config={"hamiltonian": {"family": "ising"}},
        seed=seed,
        variant=variant,
        init={"n_init": 4},
        entries=entries,
        final_energy=energies[-1] if final is None else final,
        final_params=[0.1, 0.2],
        oracle_energy=oracle,
    )


class TestRunRecord:
    def test_relative_error(self):
        r = make_record("pedt", 0, [-9.0, -9.5])
        assert r.relative_error == pytest.approx(0.05)
        assert r.to_dict()["relative_error"] == r.relative_error

    def test_kappa_zero_iterations_ignore_warmup(self):
        r = make_record("emicore", 0, [-1.0] * 4, kappas=[0.0, 0.0, 0.3, 0.0], deltas=[None, 0.0, 0.1, 0.0])
        assert r.kappa_zero_iterations == [2, 4]

    def test_json_round_trip(self, tmp_path):
        r = make_record("pedt", 7, [-1.0, -2.5, -3.25])
        path = save_record(r, tmp_path)
        assert path.name == "pedt_seed7.json"
        back = load_record(path)
        assert back == r
        assert back.payload() == r.payload()

    def test_payload_without_timing(self):
        r = make_record("pedt", 0, [-1.0])
        assert "wall_ms" in r.payload() and "wall_ms" not in r.payload(timing=False)

    def test_malformed_offset(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_bytes(b'{"seed": 1, "variant": ]')
        with pytest.raises(RecordError) as info:
            load_record(p)
        assert info.value.offset == 23

    def test_malformed_offset_counts_bytes(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_bytes('{"v": "éé", x}'.encode())
        with pytest.raises(RecordError) as info:
            load_record(p)
        assert info.value.offset == 14  # two 2-byte characters before the error

    def test_wrong_structure(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps([1, 2]))
        with pytest.raises(RecordError):
            load_record(p)


class TestCsv:
    def test_trace_rows(self):
        r = make_record("emicore", 0, [-1.0, -2.0], kappas=[0.5, 0.0], deltas=[None, 0.0])
        text = rows_to_csv(kappa_trace_rows(r), TRACE_COLUMNS)
        assert text.splitlines() == ["iteration,kappa,delta_e,best_energy", "1,0.5,,-1.0", "2,0.0,0.0,-2.0"]

    @given(
        st.lists(
            st.tuples(
                st.integers(0, 10 ** 6),
                st.one_of(st.none(), st.floats(allow_nan=False, allow_infinity=False)),
                st.floats(allow_nan=False, allow_infinity=False),
            ),
            max_size=10,
        )
    )
    def test_round_trip(self, rows):
        dicts = [{"iteration": i, "kappa": k, "delta_e": k, "best_energy": e} for i, k, e in rows]
        assert csv_to_rows(rows_to_csv(dicts, TRACE_COLUMNS)) == dicts


class TestCompare:
    def test_single_seed(self):
        r = make_record("pedt", 0, [-1.0, -2.0, -3.0])
        s = compare_records([r]).variants["pedt"]
        assert s.mean_energy == [-1.0, -2.0, -3.0]
        assert s.std_energy == [0.0, 0.0, 0.0]
        assert s.final_std == 0.0

    def test_identical_records(self):
        a = make_record("pedt", 0, [-1.3, -2.7])
        b = make_record("pedt", 1, [-1.3, -2.7])
        assert compare_records([a, b]).variants["pedt"].std_energy == [0.0, 0.0]

    def test_hand_computed(self):
        recs = [
            make_record("emicore", 0, [-1.0, -4.0], kappas=[1.0, 0.0]),
            make_record("emicore", 1, [-3.0, -6.0], kappas=[0.5, 0.0]),
            make_record("pedt", 0, [-2.0, -5.0], kappas=[0.25, 0.125]),
        ]
        rep = compare_records(recs)
        em = rep.variants["emicore"]
        assert em.mean_energy == [-2.0, -5.0]
        assert em.std_energy == [1.0, 1.0]
        assert em.mean_kappa == [0.75, 0.0]
        assert em.kappa_zero_fraction == [0.0, 1.0]
        assert em.kappa_zero_episodes == 2 and em.kappa_zero_by_seed == {0: 1, 1: 1}
        assert em.final_mean == -5.0 and em.final_std == 1.0
        assert em.mean_relative_error == pytest.approx(0.5 * (0.6 + 0.4))
        assert rep.variants["pedt"].kappa_zero_episodes == 0
        rows = csv_to_rows(rep.to_csv())
        assert list(rows[0]) == list(COMPARE_COLUMNS)
        assert rows[0] == {"iteration": 1, "variant": "emicore", "mean_energy": -2.0, "std_energy": 1.0,
                           "mean_kappa": 0.75, "kappa_zero_fraction": 0.0}

    def test_fsum_exact_mean(self):
        vals = [0.1, 0.2, 0.3]
        recs = [make_record("pedt", i, [v]) for i, v in enumerate(vals)]
        assert compare_records(recs).variants["pedt"].mean_energy[0] == math.fsum(vals) / 3

    def test_variant_filter(self):
        recs = [make_record("pedt", 0, [-1.0]), make_record("emicore", 0, [-1.0, -2.0])]
        assert set(compare_records(recs, ["pedt"]).variants) == {"pedt"}
        with pytest.raises(ValueError, match="nft"):
            compare_records(recs, ["pedt", "nft"])

    def test_mismatched_counts_names_files(self):
        recs = [make_record("pedt", 0, [-1.0, -2.0]), make_record("pedt", 1, [-1.0])]
        with pytest.raises(ValueError) as info:
            compare_records(recs, names=["a.json", "b.json"])
        assert "b.json" in str(info.value)

    def test_byte_identical(self, tmp_path):
        for s in range(3):
            save_record(make_record("pedt", s, [-1.0 - 0.1 * s, -2.0 - 0.3 * s]), tmp_path)
        outs = []
        for _ in range(2):
            recs, names = load_record_dir(tmp_path)
            rep = compare_records(recs, names=names)
            outs.append((rep.to_csv(), rep.to_json()))
        assert outs[0] == outs[1]
