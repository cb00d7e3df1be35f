import numpy as np
import pytest

from digmilp.baselines import random_decode
from digmilp.exceptions import AssemblyFailure, LastConstraint, ValidationError
from digmilp.graph import FeatureScaler, corrupt, encode_graph
from digmilp.instance import FTuple, Mode, Status
from digmilp.nn import Tensor
from digmilp.nn.gradcheck import check_store
from digmilp.solver import classify, extract_labels
from digmilp.vae import (
    DecoderOutput,
    DigMilpGenerator,
    DigMilpNet,
    InferConfig,
    TrainConfig,
    assemble_instance,
    elbo_loss,
    graph_input,
    reconstruction_loss,
    reconstruction_targets,
    sample_from_graph,
)


def toy_graph(rng, m=3, n=4, mode=Mode.BINARY):
    a = rng.normal(size=(m, n)) * (rng.uniform(size=(m, n)) < 0.7)
    a[np.arange(m), rng.integers(n, size=m)] = rng.uniform(0.5, 2, size=m)
    binary = mode is Mode.BINARY
    t = FTuple(a, rng.integers(0, 2, n).astype(float), rng.uniform(0, 2, m), rng.uniform(0, 2, n),
               rng.uniform(0, 2, m), mode, rng.uniform(0, 2, n) if binary else None)
    return encode_graph(t)


def toy_setup(seed, mode=Mode.BINARY, m=3, n=4):
    rng = np.random.default_rng(seed)
    graphs = [toy_graph(rng, m, n, mode) for _ in range(3)]
    scaler = FeatureScaler().fit(graphs)
    return DigMilpNet(mode, hidden=4, latent=2, seed=seed), graphs[0], scaler


@pytest.fixture(scope="module")
def fitted(toy_sc):
    return DigMilpGenerator(epochs=15, seed=123).fit(toy_sc[:8])


class TestShapes:
    def test_encoder_shape(self):
        net, g, scaler = toy_setup(0, m=3, n=5)
        enc = net.encode_latent(graph_input(g, scaler, erased=False))
        assert enc.mu.shape == (8, 2) and enc.logvar.shape == (8, 2)

    def test_zero_weights_give_bias(self):
        net, g, scaler = toy_setup(1)
        for name, t in net.store:
            if name.endswith(".w"):
                t.data[:] = 0
        enc = net.encode_latent(graph_input(g, scaler, erased=False))
        last = sorted(k for k, _ in net.store if k.startswith("enc.mu.") and k.endswith(".b"))[-1]
        assert np.array_equal(enc.mu.data, np.tile(net.store[last].data, (7, 1)))

    @pytest.mark.parametrize("mode", list(Mode))
    def test_decoder_shapes_and_y2(self, mode):
        net, g, scaler = toy_setup(2, mode=mode, m=3, n=5)
        cg = corrupt(g, 1)
        out = net.decode_heads(graph_input(cg.base, scaler, True), 1, Tensor(np.zeros((8, 2)))).numpy()
        assert out.edge_logits.shape == (5,) and out.y_hat.shape == (3,) and out.r_hat.shape == (3,)
        assert (out.y2_hat is not None) == (mode is Mode.BINARY)

    def test_latent_row_count_checked(self):
        net, g, scaler = toy_setup(3)
        cg = corrupt(g, 0)
        with pytest.raises(ValidationError):
            net.decode_heads(graph_input(cg.base, scaler, True), 0, Tensor(np.zeros((5, 2))))


class TestElbo:
    def test_linear_in_alpha(self):
        net, g, scaler = toy_setup(4)
        _, p1 = elbo_loss(net, g, scaler, 1.0, np.random.default_rng(9))
        _, p2 = elbo_loss(net, g, scaler, 2.0, np.random.default_rng(9))
        assert p2["weighted_recon"] == 2 * p1["weighted_recon"] and p1["kl"] == p2["kl"]

    def test_perfect_decoder_has_zero_reconstruction(self):
        _, g, scaler = toy_setup(5)
        cg = corrupt(g, 1)
        t = reconstruction_targets(cg, scaler)
        edge_weights = np.zeros(g.n_vars)
        edge_weights[cg.removed_vars] = t["weight"]
        out = DecoderOutput(Tensor(t["degree"]), Tensor(t["edge"]), Tensor(edge_weights), Tensor(t["x"]),
                            Tensor(t["s"]), Tensor(t["y"]), Tensor(t["r"]), Tensor(t["y2"]))
        assert reconstruction_loss(out, t, cg.removed_vars).item() == 0.0

    def test_loss_nonnegative_and_kl_part(self):
        for seed in range(10):
            net, g, scaler = toy_setup(seed)
            loss, parts = elbo_loss(net, g, scaler, 5.0, np.random.default_rng(seed))
            assert loss.item() >= 0 and parts["kl"] >= 0
            assert parts["loss"] == pytest.approx(parts["weighted_recon"] + parts["kl"])

    def test_last_constraint(self):
        net, _, scaler = toy_setup(6)
        g = toy_graph(np.random.default_rng(0), m=1, n=4)
        with pytest.raises(LastConstraint):
            elbo_loss(net, g, scaler, 1.0, np.random.default_rng(0))

    @pytest.mark.parametrize("seed", range(2))
    @pytest.mark.parametrize("mode", list(Mode))
    def test_full_gradient(self, seed, mode):
        net, g, scaler = toy_setup(seed, mode=mode)
        loss = lambda: elbo_loss(net, g, scaler, 5.0, np.random.default_rng(seed))[0]
        assert check_store(loss, net.store) <= 1e-4


class TestTraining:
    def test_lr_zero_leaves_parameters(self, toy_sc):
        est = DigMilpGenerator(epochs=2, lr=0.0).fit(toy_sc[:3])
        fresh = DigMilpNet(Mode.BINARY, est.hidden_dim, est.latent_dim, est.seed)
        assert np.array_equal(est.net_.store.flat(), fresh.store.flat())

    def test_seed_determinism(self, toy_sc):
        a = DigMilpGenerator(epochs=2).fit(toy_sc[:3])
        b = DigMilpGenerator(epochs=2).fit(toy_sc[:3])
        assert a.checksum() == b.checksum() and a.loss_trace_ == b.loss_trace_

    def test_loss_decreases_on_five(self, toy_sc):
        trace = DigMilpGenerator(epochs=50, seed=123).fit(toy_sc[:5]).loss_trace_
        assert len(trace) == 50 and trace[-1] < trace[0]

    def test_labels_length_checked(self, toy_sc):
        with pytest.raises(ValidationError):
            DigMilpGenerator(epochs=1).fit(toy_sc[:3], [None])

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            TrainConfig(alpha=0)
        with pytest.raises(ValidationError):
            InferConfig(gamma=0)
        assert InferConfig(gamma=0.05).iterations(10) == 1
        assert InferConfig(gamma=0.5).iterations(10) == 5


class TestAssembly:
    def _cg(self):
        rng = np.random.default_rng(7)
        graphs = [toy_graph(rng, 3, 6) for _ in range(4)]
        scaler = FeatureScaler().fit(graphs)
        return corrupt(graphs[0], 1), scaler

    def test_degree_rounding(self):
        cg, scaler = self._cg()
        out = random_decode(cg, np.random.default_rng(0))
        out.degree_hat = float(scaler.scale("degree", 2.4))
        out.weight_hat = np.full(6, 0.9)
        g, _ = assemble_instance(cg, out, scaler)
        assert g.matrix()[1].nnz == 2
        top2 = np.sort(np.argsort(-out.edge_logits)[:2])
        assert np.array_equal(g.matrix()[1].indices, top2)

    def test_nonfinite_rejected(self):
        cg, scaler = self._cg()
        out = random_decode(cg, np.random.default_rng(0))
        out.x_hat[0] = np.nan
        with pytest.raises(AssemblyFailure):
            assemble_instance(cg, out, scaler)

    def test_retry_cap_surfaces_error(self):
        cg, scaler = self._cg()
        calls = []

        def bad(cg, rng):
            calls.append(1)
            out = random_decode(cg, rng)
            out.degree_hat = np.inf
            return out

        with pytest.raises(AssemblyFailure):
            sample_from_graph(cg.original, bad, scaler, 1, np.random.default_rng(0))
        assert len(calls) == 9

    def test_random_outputs_always_feasible(self):
        cg, scaler = self._cg()
        rng = np.random.default_rng(1)
        for _ in range(300):
            out = random_decode(cg, rng)
            out.x_hat = rng.normal(size=6) * 3
            out.y_hat = rng.normal(size=3) * 3
            g, inst = assemble_instance(cg, out, scaler)
            x = g.column("x")
            assert np.all(x == np.round(x)) and np.all((x >= 0) & (x <= 1))
            assert np.all(g.cons_feats[:, 1:] >= 0) and np.all(g.var_feats[:, 1:] >= 0)
            assert classify(inst) is Status.OPTIMAL


class TestSampling:
    @pytest.mark.parametrize("gamma", [0.05, 0.2, 0.5])
    def test_feasible_and_shape_preserving(self, fitted, gamma):
        samples = fitted.sample(100, gamma=gamma, seed=1)
        assert all(s.a.shape == (10, 20) for s in samples)
        assert all(classify(s) is Status.OPTIMAL for s in samples)

    def test_single_step_locality(self, fitted):
        samples, graphs = fitted.sample(20, gamma=0.05, seed=2, return_graphs=True)
        sources = [g.matrix().toarray() for g in fitted.graphs_]
        for s in samples:
            rows_changed = min(int(np.any(s.dense() != src, axis=1).sum()) for src in sources)
            assert rows_changed <= 1

    def test_per_output_streams(self, fitted):
        a = fitted.sample(6, gamma=0.1, seed=3)
        b = fitted.sample(3, gamma=0.1, seed=3)
        assert all(x.equals(y) for x, y in zip(a, b))

    def test_labels_recovered_from_samples(self, fitted):
        for s in fitted.sample(5, gamma=0.1, seed=4):
            assert extract_labels(s) is not None

    def test_save_load(self, fitted, tmp_path):
        fitted.save(tmp_path / "m.ckpt")
        back = DigMilpGenerator.load(tmp_path / "m.ckpt", graphs=fitted.graphs_)
        assert back.checksum() == fitted.checksum() and back.get_params() == fitted.get_params()
        a, b = fitted.sample(3, seed=5), back.sample(3, seed=5)
        assert all(x.equals(y) for x, y in zip(a, b))
