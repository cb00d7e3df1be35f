import numpy as np
import pytest

from digmilp.exceptions import DimensionMismatch, FormatError
from digmilp.nn import (
    MLP,
    AdamState,
    BipartiteGNN,
    GraphInput,
    ParamStore,
    Tensor,
    adam_step,
    autograd as ag,
    huber,
    kl_std_normal,
    load_checkpoint,
    reparameterize,
    save_checkpoint,
)
from digmilp.nn.gradcheck import check_store, numeric_grad, relative_error

TOL = 1e-4


def _check_op(fn, *shapes, seed=0, positive=False):
    """Gradient check of sum(fn(*inputs) * random weights) w.r.t. every input."""
    rng = np.random.default_rng(seed)
    xs = [rng.uniform(0.1, 2, s) if positive else rng.normal(size=s) for s in shapes]
    tensors = [Tensor(x, requires_grad=True) for x in xs]
    out = fn(*tensors)
    w = rng.normal(size=out.shape)

    def loss():
        return ag.sum(ag.mul(fn(*tensors), Tensor(w)))

    loss().backward()
    for t in tensors:
        num = numeric_grad(lambda: loss().item(), t.data)
        assert relative_error(t.grad, num) <= TOL


@pytest.mark.parametrize("seed", range(3))
class TestOpGradients:
    def test_add_broadcast(self, seed):
        _check_op(ag.add, (3, 4), (4,), seed=seed)

    def test_mul(self, seed):
        _check_op(ag.mul, (3, 4), (3, 4), seed=seed)

    def test_matmul(self, seed):
        _check_op(ag.matmul, (3, 4), (4, 2), seed=seed)

    def test_relu(self, seed):
        _check_op(ag.relu, (5, 3), seed=seed)

    def test_exp_square_neg(self, seed):
        _check_op(lambda a: ag.neg(ag.square(ag.exp(a))), (2, 3), seed=seed)

    def test_sum_mean_axis(self, seed):
        _check_op(lambda a: ag.add(ag.sum(a, axis=0), ag.mean(a, axis=0)), (4, 3), seed=seed)

    def test_reshape_concat(self, seed):
        _check_op(lambda a, b: ag.reshape(ag.concat([a, b], axis=1), (-1,)), (2, 3), (2, 2), seed=seed)

    def test_take_rows_segment_sum(self, seed):
        idx = np.array([0, 2, 2, 1, 0])
        _check_op(lambda a: ag.segment_sum(ag.take_rows(a, idx), idx[::-1].copy(), 4), (3, 2), seed=seed)

    def test_huber(self, seed):
        target = np.random.default_rng(seed + 10).normal(size=(4, 3)) * 2
        _check_op(lambda a: huber(a, target, 1.0), (4, 3), seed=seed)

    def test_kl_and_reparameterize(self, seed):
        noise = np.random.default_rng(seed).normal(size=(3, 2))
        _check_op(lambda mu, lv: ag.add(kl_std_normal(mu, lv), ag.sum(reparameterize(mu, lv, noise))),
                  (3, 2), (3, 2), seed=seed)


class TestHuber:
    def test_branches(self):
        assert huber(Tensor(np.array([0.5])), np.array([0.0])).item() == 0.125
        assert huber(Tensor(np.array([2.0])), np.array([0.0])).item() == 1.5

    def test_gradient_tight(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.normal(size=6) * 3, requires_grad=True)
        tgt = rng.normal(size=6)
        huber(x, tgt).backward()
        num = numeric_grad(lambda: huber(x, tgt).item(), x.data)
        assert relative_error(x.grad, num) <= 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            huber(Tensor(np.zeros(2)), np.zeros(3))


class TestLatent:
    def test_kl_values(self):
        assert kl_std_normal(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3)))).item() == 0
        assert kl_std_normal(Tensor(np.ones((1, 1))), Tensor(np.zeros((1, 1)))).item() == 0.5

    def test_kl_nonnegative(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            mu, lv = rng.normal(size=(3, 4)) * 3, rng.normal(size=(3, 4)) * 3
            assert kl_std_normal(Tensor(mu), Tensor(lv)).item() >= 0

    def test_reparameterize(self):
        mu = Tensor(np.array([[0.5]]))
        assert reparameterize(mu, Tensor(np.zeros((1, 1))), np.zeros((1, 1))).data.item() == 0.5
        assert reparameterize(Tensor(np.zeros((1, 1))), Tensor(np.zeros((1, 1))), np.ones((1, 1))).data.item() == 1

    def test_monte_carlo_moments(self):
        n = 100_000
        noise = np.random.default_rng(2).standard_normal((n, 1))
        z = reparameterize(Tensor(np.full((n, 1), 1.5)), Tensor(np.full((n, 1), np.log(4.0))), noise).data
        assert abs(z.mean() - 1.5) <= 3 * 2 / np.sqrt(n)
        assert abs(z.std() - 2.0) <= 3 * 2 / np.sqrt(2 * n)


def _graph(rng, m, n, p=0.6):
    mask = rng.uniform(size=(m, n)) < p
    rows, cols = np.nonzero(mask)
    return GraphInput(rng.uniform(size=(m, 2)), rng.uniform(size=(n, 3)), rows, cols, rng.uniform(size=rows.size))


class TestGnn:
    def test_no_edges_gives_per_side_mlp(self):
        store = ParamStore(np.random.default_rng(0))
        net = BipartiteGNN(store, "g", 2, 3, hidden=4)
        g = GraphInput(np.ones((2, 2)), np.ones((3, 3)), np.array([], int), np.array([], int), np.array([]))
        emb = net(g)
        hc = net.cons_embed(Tensor(g.cons))
        expect = net.v_to_c.out(ag.concat([Tensor(np.zeros((2, 4))), hc], axis=1))
        np.testing.assert_allclose(emb.h_cons.data, expect.data)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(1)
        store = ParamStore(rng)
        net = BipartiteGNN(store, "g", 2, 3, hidden=6)
        g = _graph(rng, 4, 5)
        perm = rng.permutation(5)
        inv = np.argsort(perm)
        g2 = GraphInput(g.cons, g.var[perm], g.src_cons, inv[g.dst_var], g.edge_w)
        a, b = net(g), net(g2)
        np.testing.assert_allclose(b.h_vars.data, a.h_vars.data[perm], atol=1e-12)
        np.testing.assert_allclose(b.h_cons.data, a.h_cons.data, atol=1e-12)

    def test_full_gradient_check(self):
        rng = np.random.default_rng(2)
        store = ParamStore(rng)
        net = BipartiteGNN(store, "g", 2, 3, hidden=4)
        head = MLP(store, "head", [4, 3, 1])
        g = _graph(rng, 4, 5)

        def loss():
            emb = net(g)
            return ag.sum(head(ag.concat([emb.h_cons, emb.h_vars], axis=0)))

        assert check_store(loss, store) <= TOL


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        store = ParamStore(np.random.default_rng(0))
        store.add("w", np.arange(3.0))
        adam_step(store, {"w": np.zeros(3)}, AdamState())
        assert store["w"].data.tolist() == [0, 1, 2]

    def test_reference_trace(self):
        store = ParamStore()
        store.add("w", np.array([1.0]))
        state = AdamState()
        trace, m, v, w = [], 0.0, 0.0, 1.0
        for t in range(1, 21):
            adam_step(store, {"w": np.array([1.0])}, state, lr=1e-3)
            m = 0.9 * m + 0.1
            v = 0.999 * v + 0.001
            w -= 1e-3 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
            trace.append(store["w"].data.item())
            assert store["w"].data.item() == pytest.approx(w, abs=1e-15)
        assert all(a > b for a, b in zip(trace, trace[1:]))

    def test_determinism(self):
        def run():
            store = ParamStore(np.random.default_rng(5))
            MLP(store, "m", [3, 4, 1])
            st = AdamState()
            x = Tensor(np.random.default_rng(6).normal(size=(5, 3)))
            for _ in range(5):
                store.zero_grad()
                out = ag.sum(ag.square(ag.matmul(x, store["m.0.w"])))
                out.backward()
                adam_step(store, store.grads(), st)
            return store.flat()

        assert np.array_equal(run(), run())


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        t = {"a": np.arange(6.0).reshape(2, 3), "b": np.array([1.5])}
        save_checkpoint(tmp_path / "c.bin", t, {"k": 1})
        back, meta = load_checkpoint(tmp_path / "c.bin")
        assert meta == {"k": 1} and all(np.array_equal(t[k], back[k]) for k in t)

    def test_truncated_and_corrupt(self, tmp_path):
        p = tmp_path / "c.bin"
        save_checkpoint(p, {"a": np.ones(10)})
        raw = p.read_bytes()
        for cut in (3, 7, 20, len(raw) - 8):
            (tmp_path / "t.bin").write_bytes(raw[:cut])
            with pytest.raises(FormatError, match="offset"):
                load_checkpoint(tmp_path / "t.bin")
        (tmp_path / "x.bin").write_bytes(raw + b"junk")
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / "x.bin")
