import csv
import math

import numpy as np
import pytest

from freqguide import FormatError, ShapeError, Tensor4, UsageError, elementwise, frobenius_norm, scale_add
from freqguide.tensor import read_tensor, tensor_from_bytes, tensor_to_bytes, write_csv, write_tensor

rng = np.random.default_rng(20240817)


def rand(dims, lo=-5.0, hi=5.0):
    return Tensor4(rng.uniform(lo, hi, dims))


class TestTensor4:
    def test_dims_and_layout(self):
        t = Tensor4(np.arange(24.0).reshape(1, 2, 3, 4))
        assert t.dims == (1, 2, 3, 4)
        assert t.data.flags["C_CONTIGUOUS"]

    def test_rejects_wrong_rank(self):
        with pytest.raises(ShapeError):
            Tensor4(np.zeros((2, 2, 2)))

    def test_rejects_nan_and_inf(self):
        bad = np.zeros((1, 1, 2, 2))
        bad[0, 0, 0, 0] = np.nan
        with pytest.raises(ShapeError):
            Tensor4(bad)
        bad[0, 0, 0, 0] = np.inf
        with pytest.raises(ShapeError):
            Tensor4(bad)

    def test_immutable(self):
        t = Tensor4.zeros((1, 1, 2, 2))
        with pytest.raises(ValueError):
            t.data[0, 0, 0, 0] = 1.0


class TestElementwise:
    def test_add_identity(self):
        x = rand((2, 1, 4, 4))
        assert np.array_equal(elementwise(x, Tensor4.zeros(x.dims), "add").data, x.data)

    def test_sub_self_cancels(self):
        x = rand((2, 1, 4, 4))
        assert np.all(elementwise(x, x, "sub").data == 0.0)

    def test_mul_against_scalar_loop(self):
        a = Tensor4(np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 1, 2, 2))
        b = Tensor4(np.full((1, 1, 2, 2), 2.0))
        got = elementwise(a, b, "mul")
        expected = [x * y for x, y in zip(a.data.ravel(), b.data.ravel())]
        assert list(got.data.ravel()) == expected == [2.0, 4.0, 6.0, 8.0]

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            elementwise(rand((1, 1, 2, 2)), rand((1, 1, 2, 3)), "add")

    def test_add_commutes_and_reassociates(self):
        x, y, z = (rand((1, 1, 64, 64)) for _ in range(3))
        xy = elementwise(x, y, "add")
        yx = elementwise(y, x, "add")
        assert np.array_equal(xy.data, yx.data)
        left = elementwise(xy, z, "add")
        right = elementwise(x, elementwise(y, z, "add"), "add")
        scale = np.abs(left.data).max()
        assert np.abs(left.data - right.data).max() <= 1e-12 * scale


class TestScaleAdd:
    def test_alpha_zero(self):
        a, b = rand((1, 2, 3, 3)), rand((1, 2, 3, 3))
        assert np.array_equal(scale_add(a, b, 0.0).data, a.data)

    def test_zero_base(self):
        b = rand((1, 2, 3, 3))
        assert np.array_equal(scale_add(Tensor4.zeros(b.dims), b, 1.0).data, b.data)

    def test_scalar_case(self):
        a = Tensor4(np.full((1, 1, 1, 1), 1.0))
        b = Tensor4(np.full((1, 1, 1, 1), 2.0))
        assert scale_add(a, b, 0.5).data.item() == 2.0

    def test_alpha_must_be_finite(self):
        a = rand((1, 1, 2, 2))
        with pytest.raises(UsageError):
            scale_add(a, a, math.inf)


class TestFrobeniusNorm:
    def test_zero(self):
        assert frobenius_norm(Tensor4.zeros((2, 1, 3, 3))) == 0.0

    def test_three_four_five(self):
        t = Tensor4(np.array([3.0, 4.0]).reshape(1, 1, 1, 2))
        assert frobenius_norm(t) == pytest.approx(5.0, abs=0)

    def test_absolute_homogeneity(self):
        x = rand((2, 2, 5, 5))
        scaled = Tensor4(-2.0 * x.data)
        assert frobenius_norm(scaled) == pytest.approx(2.0 * frobenius_norm(x), rel=1e-13)

    def test_per_batch(self):
        x = rand((3, 1, 4, 4))
        per = frobenius_norm(x, per_batch=True)
        for i in range(3):
            assert per[i] == pytest.approx(np.linalg.norm(x.data[i]), rel=1e-13)

    def test_triangle_inequality(self):
        for _ in range(20):
            a, b = rand((1, 1, 6, 6)), rand((1, 1, 6, 6))
            lhs = frobenius_norm(elementwise(a, b, "add"))
            rhs = frobenius_norm(a) + frobenius_norm(b)
            assert lhs <= rhs * (1 + 1e-12)


class TestTensorFile:
    def test_float64_round_trip_bit_exact(self, tmp_path):
        t = rand((2, 3, 8, 8))
        path = tmp_path / "t.fqg"
        write_tensor(path, t)
        back = read_tensor(path)
        assert back.dims == t.dims
        assert back.data.tobytes() == t.data.tobytes()

    def test_float32_round_trip_is_nearest_float32(self, tmp_path):
        t = Tensor4(np.full((1, 1, 1, 1), 1.0 / 3.0))
        path = tmp_path / "t32.fqg"
        write_tensor(path, t, dtype="float32")
        assert read_tensor(path).data.item() == float(np.float32(1.0 / 3.0))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.fqg"
        blob = bytearray(tensor_to_bytes(rand((1, 1, 2, 2))))
        blob[:4] = b"XXXX"
        path.write_bytes(blob)
        with pytest.raises(FormatError, match="offset 0"):
            read_tensor(path)

    def test_truncated_payload(self):
        blob = tensor_to_bytes(rand((1, 1, 2, 2)))
        with pytest.raises(FormatError, match="offset"):
            tensor_from_bytes(blob[:-3])

    def test_trailing_bytes_rejected(self):
        blob = tensor_to_bytes(rand((1, 1, 2, 2)))
        with pytest.raises(FormatError):
            tensor_from_bytes(blob + b"\x00")

    def test_unsupported_dtype_code(self):
        blob = bytearray(tensor_to_bytes(rand((1, 1, 2, 2))))
        blob[4] = 9
        with pytest.raises(FormatError, match="offset 4"):
            tensor_from_bytes(bytes(blob))

    def test_unsupported_dtype_name(self, tmp_path):
        with pytest.raises(FormatError):
            write_tensor(tmp_path / "x.fqg", rand((1, 1, 2, 2)), dtype="float16")


class TestCsv:
    def test_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_csv(path, ["step", "value"], [])
        assert path.read_bytes() == b"step,value\n"

    def test_single_row(self, tmp_path):
        path = tmp_path / "one.csv"
        write_csv(path, ["step", "value"], [(1, 0.5)])
        assert path.read_bytes() == b"step,value\n1,0.5\n"

    def test_thousand_rows_parse_back_exact(self, tmp_path):
        values = rng.standard_normal(1000)
        path = tmp_path / "big.csv"
        write_csv(path, ["i", "v"], [(i, v) for i, v in enumerate(values)])
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            assert next(reader) == ["i", "v"]
            parsed = [float(row[1]) for row in reader]
        # 17 significant digits round-trip float64 exactly
        assert parsed == list(values)

    def test_arity_mismatch(self, tmp_path):
        with pytest.raises(UsageError):
            write_csv(tmp_path / "bad.csv", ["a", "b"], [(1, 2, 3)])
