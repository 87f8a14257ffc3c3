import io
import sys

import numpy as np
import pytest

from eotpairs import ProtocolError, Seed, optimal_drift
from eotpairs.protocol import SubprocessDrift, serve_drift

from conftest import single_component_pair


class TestServeDrift:
    def test_round_trip_in_process(self, preset_d2):
        xs = np.random.default_rng(0).normal(size=(4, 2))
        t = 0.4
        request = "".join(
            " ".join("%.17g" % v for v in list(row) + [t]) + "\n" for row in xs
        )
        out = io.StringIO()
        serve_drift(preset_d2, io.StringIO(request), out)
        lines = out.getvalue().strip().splitlines()
        answers = np.array([[float(v) for v in line.split()] for line in lines])
        assert np.array_equal(answers, optimal_drift(preset_d2, xs, t))

    def test_wrong_arity_request_rejected(self, preset_d2):
        with pytest.raises(ProtocolError, match="fields"):
            serve_drift(preset_d2, io.StringIO("1.0 2.0\n"), io.StringIO())

    def test_malformed_request_rejected(self, preset_d2):
        with pytest.raises(ProtocolError, match="malformed"):
            serve_drift(preset_d2, io.StringIO("1.0 nope 0.5\n"), io.StringIO())


class TestSubprocessDrift:
    def test_echo_child_has_wrong_arity(self):
        # `cat` answers with the request line itself: dim + 1 values.
        with SubprocessDrift(["cat"], dim=2) as drift:
            with pytest.raises(ProtocolError, match="expected 2"):
                drift(np.zeros((1, 2)), 0.1)

    def test_garbage_child_output(self):
        child = [sys.executable, "-c",
                 "import sys\n"
                 "for line in sys.stdin:\n"
                 "    print('alpha beta'); sys.stdout.flush()\n"]
        with SubprocessDrift(child, dim=2) as drift:
            with pytest.raises(ProtocolError, match="malformed"):
                drift(np.zeros((1, 2)), 0.1)

    def test_silent_child_reported(self):
        child = [sys.executable, "-c", "pass"]
        with SubprocessDrift(child, dim=2) as drift:
            with pytest.raises(ProtocolError, match="closed"):
                drift(np.zeros((1, 2)), 0.1)


class TestHighDimensionalPresets:
    def test_extreme_dimension_stays_in_log_space(self):
        # The matched-density weight rule underflows linear float64 around
        # dimension 64; everything downstream must still normalize.
        from eotpairs import MixturesPresetSpec, build_mixtures_preset, sample_joint
        from eotpairs.plan import conditional_parameters

        for eps in (10.0, 0.1):
            pair = build_mixtures_preset(
                MixturesPresetSpec(dim=128, epsilon=eps, seed=Seed(42))
            )
            assert np.allclose(pair.potential.weights, 1.0)
            js = sample_joint(pair, Seed(1), 200)
            assert np.all(np.isfinite(js.ys))
            log_gammas, _ = conditional_parameters(pair, js.xs[:50])
            assert np.max(np.abs(np.exp(log_gammas).sum(axis=1) - 1.0)) < 1e-12
            assert np.all(np.isfinite(optimal_drift(pair, js.xs[0], 0.5)))

    def test_extreme_dimension_file_roundtrip(self, tmp_path):
        from eotpairs import MixturesPresetSpec, build_mixtures_preset
        from eotpairs.pairfile import load_pair, pair_to_text, save_pair

        pair = build_mixtures_preset(MixturesPresetSpec(dim=128, epsilon=10.0, seed=Seed(42)))
        path = tmp_path / "d128.pair.json"
        save_pair(path, pair)
        assert pair_to_text(load_pair(path)) == path.read_text()
