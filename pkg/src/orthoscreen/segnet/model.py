"""Dynamic-graph point cloud segmentation network, forward and backward.

The network is four edge-convolution blocks whose neighbor graphs are
rebuilt in each block's own input feature space, a fuse block that mixes
the stacked block outputs into a global descriptor, and a per-point
classifier head. Everything runs in float64 numpy with hand-derived
gradients; there is no autodiff anywhere.

Gradient conventions:
  * neighbor selection is treated as piecewise constant, so no gradient
    flows through the k-NN indices;
  * max pooling routes gradients to the argmax slot (first on ties);
  * batch-norm in train mode backpropagates through the batch statistics.
"""

import hashlib
import json
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..geometry import pairwise_sq_dists
from ..kernels import knn_from_sq_dists, scatter_add_rows


class ShapeMismatch(DomainError):
    pass


class NonFiniteActivation(DomainError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    k: int = 3
    in_features: int = 6
    edge_channels: tuple = (32, 32, 64, 64)
    fuse_channels: int = 32
    head_channels: tuple = (128, 64)
    num_classes: int = 33
    dropout: float = 0.3
    leaky_slope: float = 0.2
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if len(self.edge_channels) < 1 or len(self.head_channels) < 1:
            raise ValueError("need at least one edge block and one head layer")


def _snap_f32(arr):
    # keep parameters exactly representable in 32 bits so checkpoints
    # round-trip without changing any forward output
    return arr.astype(np.float32).astype(np.float64)


def _leaky(z, slope):
    return np.where(z > 0.0, z, slope * z)


class SegModel:
    def __init__(self, config: ModelConfig | None = None, seed: int = 0):
        self.config = config or ModelConfig()
        cfg = self.config
        rng = np.random.default_rng(seed)
        params = OrderedDict()
        stats = OrderedDict()

        def he_std(fan_in):
            return np.sqrt(2.0 / ((1.0 + cfg.leaky_slope ** 2) * fan_in))

        def add_block(tag, c_in, c_out):
            params[f"{tag}.w"] = rng.normal(0.0, he_std(c_in), size=(c_in, c_out))
            params[f"{tag}.b"] = np.zeros(c_out)
            params[f"{tag}.gamma"] = np.ones(c_out)
            params[f"{tag}.beta"] = np.zeros(c_out)
            stats[f"{tag}.running_mean"] = np.zeros(c_out)
            stats[f"{tag}.running_var"] = np.ones(c_out)

        c_in = cfg.in_features
        for i, c_out in enumerate(cfg.edge_channels, start=1):
            add_block(f"ec{i}", 2 * c_in, c_out)
            c_in = c_out
        stack_dim = sum(cfg.edge_channels)
        add_block("fuse", stack_dim, cfg.fuse_channels)

        c_in = stack_dim + cfg.fuse_channels
        for i, c_out in enumerate((*cfg.head_channels, cfg.num_classes), start=1):
            params[f"head{i}.w"] = rng.normal(0.0, he_std(c_in), size=(c_in, c_out))
            params[f"head{i}.b"] = np.zeros(c_out)
            c_in = c_out

        self.params = OrderedDict((k, _snap_f32(v)) for k, v in params.items())
        self.stats = stats

    @property
    def param_count(self):
        return int(sum(v.size for v in self.params.values()))

    @property
    def arch_hash(self):
        cfg = self.config
        payload = {
            "k": cfg.k,
            "in_features": cfg.in_features,
            "edge_channels": list(cfg.edge_channels),
            "fuse_channels": cfg.fuse_channels,
            "head_channels": list(cfg.head_channels),
            "num_classes": cfg.num_classes,
            "params": [[name, list(arr.shape)] for name, arr in self.params.items()],
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def snap_params(self):
        for name in self.params:
            self.params[name] = _snap_f32(self.params[name])

    # ----- forward -------------------------------------------------------

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.config.in_features:
            raise ShapeMismatch(
                f"expected (B, N, {self.config.in_features}) features, got {x.shape}")
        if x.shape[1] < self.config.k + 1:
            raise ShapeMismatch(
                f"need at least k+1 = {self.config.k + 1} points, got {x.shape[1]}")
        if not np.isfinite(x).all():
            raise ShapeMismatch("input features contain non-finite values")
        return x

    def _bn_forward(self, tag, z, train_mode, update_running):
        cfg = self.config
        gamma = self.params[f"{tag}.gamma"]
        beta = self.params[f"{tag}.beta"]
        if train_mode:
            mean = z.mean(axis=0)
            var = z.var(axis=0)
            if update_running:
                m = z.shape[0]
                unbiased = var * (m / (m - 1.0)) if m > 1 else var
                mom = cfg.bn_momentum
                self.stats[f"{tag}.running_mean"] *= 1.0 - mom
                self.stats[f"{tag}.running_mean"] += mom * mean
                self.stats[f"{tag}.running_var"] *= 1.0 - mom
                self.stats[f"{tag}.running_var"] += mom * unbiased
        else:
            mean = self.stats[f"{tag}.running_mean"]
            var = self.stats[f"{tag}.running_var"]
        inv_std = 1.0 / np.sqrt(var + cfg.bn_eps)
        xhat = (z - mean) * inv_std
        return xhat * gamma + beta, xhat, inv_std

    def forward_with_cache(self, x, train_mode=False, dropout_seed=0,
                           update_running=None, graph_override=None):
        """Logits of shape (B, N, classes) plus the cache backward() needs.

        ``update_running`` defaults to ``train_mode``; pass False to probe a
        train-mode forward without mutating running statistics (finite
        difference checks). ``graph_override`` pins the per-layer neighbor
        indices: a list with one (B, N, k) int array per edge block.
        """
        cfg = self.config
        x = self._check_input(x)
        if update_running is None:
            update_running = train_mode
        b_size, n_pts, _ = x.shape
        k = cfg.k

        cache = {"train_mode": train_mode, "b": b_size, "n": n_pts, "layers": []}
        hidden = x
        layer_outputs = []
        for li in range(1, len(cfg.edge_channels) + 1):
            tag = f"ec{li}"
            c_in = hidden.shape[2]
            if graph_override is not None:
                idx = np.asarray(graph_override[li - 1])
                if idx.shape != (b_size, n_pts, k):
                    raise ShapeMismatch(
                        f"graph_override[{li - 1}] must be {(b_size, n_pts, k)}, got {idx.shape}")
            else:
                idx = np.empty((b_size, n_pts, k), dtype=np.int64)
                for b in range(b_size):
                    idx[b] = knn_from_sq_dists(pairwise_sq_dists(hidden[b]), k)
            edge = np.empty((b_size, n_pts, k, 2 * c_in))
            for b in range(b_size):
                neigh = hidden[b][idx[b]]
                edge[b, :, :, :c_in] = hidden[b][:, None, :]
                edge[b, :, :, c_in:] = neigh - hidden[b][:, None, :]
            edge_flat = edge.reshape(-1, 2 * c_in)
            z = edge_flat @ self.params[f"{tag}.w"] + self.params[f"{tag}.b"]
            z, xhat, inv_std = self._bn_forward(tag, z, train_mode, update_running)
            act = _leaky(z, cfg.leaky_slope)
            act4 = act.reshape(b_size, n_pts, k, -1)
            arg = act4.argmax(axis=2)
            pooled = np.take_along_axis(act4, arg[:, :, None, :], axis=2)[:, :, 0, :]
            if not np.isfinite(pooled).all():
                raise NonFiniteActivation(f"non-finite activation after block {tag}")
            cache["layers"].append({
                "tag": tag, "c_in": c_in, "idx": idx, "edge_flat": edge_flat,
                "xhat": xhat, "inv_std": inv_std, "pos": z > 0.0, "argmax": arg,
            })
            layer_outputs.append(pooled)
            hidden = pooled

        stack = np.concatenate(layer_outputs, axis=2)
        stack_flat = stack.reshape(b_size * n_pts, -1)
        z = stack_flat @ self.params["fuse.w"] + self.params["fuse.b"]
        z, xhat, inv_std = self._bn_forward("fuse", z, train_mode, update_running)
        fuse_act = _leaky(z, cfg.leaky_slope)
        fuse3 = fuse_act.reshape(b_size, n_pts, -1)
        pool_arg = fuse3.argmax(axis=1)
        global_desc = np.take_along_axis(fuse3, pool_arg[:, None, :], axis=1)[:, 0, :]
        if not np.isfinite(global_desc).all():
            raise NonFiniteActivation("non-finite activation after fuse block")
        cache["fuse"] = {"xhat": xhat, "inv_std": inv_std, "pos": z > 0.0,
                         "pool_arg": pool_arg, "stack_flat": stack_flat}

        head_in = np.concatenate(
            [stack, np.broadcast_to(global_desc[:, None, :], (b_size, n_pts, global_desc.shape[1]))],
            axis=2).reshape(b_size * n_pts, -1)
        cache["head_in"] = head_in

        use_dropout = train_mode and cfg.dropout > 0.0
        rng = np.random.default_rng(dropout_seed) if use_dropout else None
        keep = 1.0 - cfg.dropout
        h = head_in
        n_head = len(cfg.head_channels)
        for i in range(1, n_head + 2):
            pre = h @ self.params[f"head{i}.w"] + self.params[f"head{i}.b"]
            if i == n_head + 1:
                logits = pre
                break
            act = _leaky(pre, cfg.leaky_slope)
            mask = None
            if use_dropout:
                mask = rng.random(act.shape) >= cfg.dropout
                act = act * mask / keep
            cache[f"head{i}"] = {"input": h, "pos": pre > 0.0, "mask": mask}
            h = act
        cache[f"head{n_head + 1}"] = {"input": h}
        if not np.isfinite(logits).all():
            raise NonFiniteActivation("non-finite logits in classifier head")
        return logits.reshape(b_size, n_pts, cfg.num_classes), cache

    def forward(self, x, train_mode=False, dropout_seed=0,
                update_running=None, graph_override=None):
        logits, _ = self.forward_with_cache(
            x, train_mode=train_mode, dropout_seed=dropout_seed,
            update_running=update_running, graph_override=graph_override)
        return logits

    # ----- backward ------------------------------------------------------

    def _bn_backward(self, tag, dz, layer_cache, train_mode):
        gamma = self.params[f"{tag}.gamma"]
        xhat, inv_std = layer_cache["xhat"], layer_cache["inv_std"]
        dgamma = (dz * xhat).sum(axis=0)
        dbeta = dz.sum(axis=0)
        dxhat = dz * gamma
        if train_mode:
            dx = inv_std * (dxhat - dxhat.mean(axis=0) - xhat * (dxhat * xhat).mean(axis=0))
        else:
            dx = dxhat * inv_std
        return dx, dgamma, dbeta

    def backward(self, d_logits, cache):
        """Parameter gradients for a forward pass captured in ``cache``."""
        cfg = self.config
        b_size, n_pts = cache["b"], cache["n"]
        train_mode = cache["train_mode"]
        keep = 1.0 - cfg.dropout
        grads = {name: np.zeros_like(arr) for name, arr in self.params.items()}

        d = np.asarray(d_logits).reshape(b_size * n_pts, cfg.num_classes)
        n_head = len(cfg.head_channels)
        for i in range(n_head + 1, 0, -1):
            hc = cache[f"head{i}"]
            grads[f"head{i}.w"] += hc["input"].T @ d
            grads[f"head{i}.b"] += d.sum(axis=0)
            d = d @ self.params[f"head{i}.w"].T
            if i > 1:
                prev = cache[f"head{i - 1}"]
                if prev["mask"] is not None:
                    d = d * prev["mask"] / keep
                d = np.where(prev["pos"], d, cfg.leaky_slope * d)

        stack_dim = sum(cfg.edge_channels)
        d_stack = d[:, :stack_dim].reshape(b_size, n_pts, stack_dim).copy()
        d_global = d[:, stack_dim:].reshape(b_size, n_pts, -1).sum(axis=1)

        fc = cache["fuse"]
        d_fuse = np.zeros((b_size * n_pts, cfg.fuse_channels))
        rows = fc["pool_arg"] + np.arange(b_size)[:, None] * n_pts
        cols = np.broadcast_to(np.arange(cfg.fuse_channels), rows.shape)
        np.add.at(d_fuse, (rows.ravel(), cols.ravel()), d_global.ravel())

        d_fuse = np.where(fc["pos"], d_fuse, cfg.leaky_slope * d_fuse)
        d_fuse, dg, db = self._bn_backward("fuse", d_fuse, fc, train_mode)
        grads["fuse.gamma"] += dg
        grads["fuse.beta"] += db
        grads["fuse.w"] += fc["stack_flat"].T @ d_fuse
        grads["fuse.b"] += d_fuse.sum(axis=0)
        d_stack += (d_fuse @ self.params["fuse.w"].T).reshape(b_size, n_pts, stack_dim)

        splits = np.cumsum(cfg.edge_channels)[:-1]
        d_outs = list(np.split(d_stack, splits, axis=2))
        for li in range(len(cfg.edge_channels), 0, -1):
            lc = cache["layers"][li - 1]
            tag, c_in = lc["tag"], lc["c_in"]
            c_out = cfg.edge_channels[li - 1]
            d_out = d_outs[li - 1]

            d_act4 = np.zeros((b_size, n_pts, cfg.k, c_out))
            np.put_along_axis(d_act4, lc["argmax"][:, :, None, :], d_out[:, :, None, :], axis=2)
            dz = d_act4.reshape(-1, c_out)
            dz = np.where(lc["pos"], dz, cfg.leaky_slope * dz)
            dz, dg, db = self._bn_backward(tag, dz, lc, train_mode)
            grads[f"{tag}.gamma"] += dg
            grads[f"{tag}.beta"] += db
            grads[f"{tag}.w"] += lc["edge_flat"].T @ dz
            grads[f"{tag}.b"] += dz.sum(axis=0)
            if li == 1:
                continue
            d_edge = (dz @ self.params[f"{tag}.w"].T).reshape(b_size, n_pts, cfg.k, 2 * c_in)
            d_hidden = d_edge[..., :c_in].sum(axis=2) - d_edge[..., c_in:].sum(axis=2)
            for b in range(b_size):
                rows = np.ascontiguousarray(d_edge[b, :, :, c_in:].reshape(-1, c_in))
                scatter_add_rows(d_hidden[b], lc["idx"][b].ravel(), rows)
            d_outs[li - 2] += d_hidden
        return grads
