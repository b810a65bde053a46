"""Regular non-binary LDPC codes over GF(2^8) with an FFT-BP decoder.

Codes are (dv, dc)-regular with random nonzero coefficients, placed by
progressive edge growth. Encoding uses a systematic form obtained once per
code by Gaussian elimination. Decoding is probability-domain belief
propagation whose check-node convolutions run through the Walsh-Hadamard
transform over the additive group of the field.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .gf256 import DEFAULT_FIELD, FieldParams, gf_matvec

MESSAGE_FLOOR = 1e-30
Q = 256


class ConfigurationError(ValueError):
    """Invalid code parameters."""


class ConstructionError(RuntimeError):
    """The constructor could not produce a valid code."""


class RankDeficientError(RuntimeError):
    """The parity-check matrix is not full row rank."""


@dataclass(frozen=True)
class SparseParityCheck:
    """Sparse parity-check matrix with nonzero GF(2^8) coefficients.

    ``entries`` is an ``(E, 3)`` integer array of ``(row, col, coeff)``
    triples in row-major order.
    """

    n_cols: int
    n_rows: int
    entries: np.ndarray
    column_weight: int
    field: FieldParams = field(default=DEFAULT_FIELD, repr=False, compare=False)

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.int64).reshape(-1, 3)
        order = np.lexsort((e[:, 1], e[:, 0]))
        e = e[order]
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)
        if np.any(e[:, 2] == 0):
            raise ConstructionError("zero coefficient in parity-check matrix")
        if np.any(e[:, 2] >= self.field.size):
            raise ConstructionError("coefficient outside the field")
        if np.any((e[:, 0] < 0) | (e[:, 0] >= self.n_rows) | (e[:, 1] < 0) | (e[:, 1] >= self.n_cols)):
            raise ConstructionError("entry index out of range")
        pairs = e[:, 0] * self.n_cols + e[:, 1]
        if np.unique(pairs).size != pairs.size:
            raise ConstructionError("repeated (row, col) entry")

    @property
    def n(self) -> int:
        return self.n_cols

    @property
    def k(self) -> int:
        return self.n_cols - self.n_rows

    @property
    def rate(self) -> float:
        return self.k / self.n_cols

    @property
    def row_weight(self) -> int:
        return self.column_weight * self.n_cols // self.n_rows

    @cached_property
    def dense(self) -> np.ndarray:
        h = np.zeros((self.n_rows, self.n_cols), dtype=np.uint8)
        h[self.entries[:, 0], self.entries[:, 1]] = self.entries[:, 2]
        h.flags.writeable = False
        return h

    def column_weights(self) -> np.ndarray:
        return np.bincount(self.entries[:, 1], minlength=self.n_cols)

    def row_weights(self) -> np.ndarray:
        return np.bincount(self.entries[:, 0], minlength=self.n_rows)

    def syndrome(self, word) -> np.ndarray:
        return gf_matvec(self.dense, np.asarray(word, dtype=np.uint8), self.field)

    def is_codeword(self, word) -> bool:
        return not np.any(self.syndrome(word))

    def girth(self) -> int:
        """Length of the shortest cycle in the Tanner graph (0 if acyclic)."""
        adj = _tanner_adjacency(self)
        best = np.inf
        n_nodes = self.n_cols + self.n_rows
        for start in range(n_nodes):
            dist = {start: 0}
            parent = {start: -1}
            queue = deque([start])
            while queue:
                u = queue.popleft()
                if 2 * dist[u] >= best:
                    break
                for v in adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        parent[v] = u
                        queue.append(v)
                    elif parent[u] != v:
                        best = min(best, dist[u] + dist[v] + 1)
        return 0 if best == np.inf else int(best)

    @cached_property
    def graph(self) -> "_Graph":
        return _Graph(self)

    @cached_property
    def encoder(self) -> "SystematicEncoder":
        return SystematicEncoder(self)

    def to_text(self) -> str:
        lines = [f"{self.n_cols} {self.k} {self.column_weight}"]
        lines.extend(f"{r} {c} {v:02x}" for r, c, v in self.entries.tolist())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, field: FieldParams = DEFAULT_FIELD) -> "SparseParityCheck":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty code description")
        try:
            n, k, dv = (int(tok) for tok in lines[0].split())
            entries = []
            for ln in lines[1:]:
                r, c, v = ln.split()
                entries.append((int(r), int(c), int(v, 16)))
        except ValueError as exc:
            raise ValueError(f"malformed code description: {exc}") from None
        return cls(n_cols=n, n_rows=n - k, entries=np.array(entries, dtype=np.int64).reshape(-1, 3),
                   column_weight=dv, field=field)


def _tanner_adjacency(code: SparseParityCheck) -> list[list[int]]:
    # variable nodes 0..N-1, check nodes N..N+M-1
    adj: list[list[int]] = [[] for _ in range(code.n_cols + code.n_rows)]
    for r, c, _ in code.entries.tolist():
        adj[c].append(code.n_cols + r)
        adj[code.n_cols + r].append(c)
    return adj


def _peg_place(n: int, m: int, dv: int, dc: int, rng: np.random.Generator) -> list[tuple[int, int]] | None:
    """Progressive edge growth with a hard cap of ``dc`` edges per check."""
    var_checks: list[list[int]] = [[] for _ in range(n)]
    check_vars: list[list[int]] = [[] for _ in range(m)]
    degree = np.zeros(m, dtype=np.int64)

    def pick(candidates: np.ndarray) -> int:
        d = degree[candidates]
        lowest = candidates[d == d.min()]
        return int(lowest[rng.integers(lowest.size)])

    for j in rng.permutation(n):
        for _ in range(dv):
            open_checks = np.flatnonzero(degree < dc)
            open_checks = open_checks[~np.isin(open_checks, var_checks[j])]
            if open_checks.size == 0:
                return None
            if not var_checks[j]:
                chosen = pick(open_checks)
            else:
                # expand the tree from j until it stops growing or covers every open check
                reached = np.zeros(m, dtype=bool)
                frontier = list(var_checks[j])
                reached[frontier] = True
                seen_vars = {int(j)}
                candidates = open_checks
                while True:
                    nxt = []
                    for c in frontier:
                        for v in check_vars[c]:
                            if v in seen_vars:
                                continue
                            seen_vars.add(v)
                            for c2 in var_checks[v]:
                                if not reached[c2]:
                                    reached[c2] = True
                                    nxt.append(c2)
                    unreached = open_checks[~reached[open_checks]]
                    if not nxt or unreached.size == 0:
                        break
                    candidates = unreached
                    frontier = nxt
                unreached = open_checks[~reached[open_checks]]
                if unreached.size:
                    candidates = unreached
                chosen = pick(candidates)
            var_checks[j].append(chosen)
            check_vars[chosen].append(int(j))
            degree[chosen] += 1
    return [(c, v) for v in range(n) for c in var_checks[v]]


def build_regular_code(n_symbols: int, k_symbols: int, column_weight: int = 2, seed=None,
                       field: FieldParams = DEFAULT_FIELD, max_attempts: int = 50) -> SparseParityCheck:
    """Build a (dv, dc)-regular full-rank parity-check matrix.

    Parameters
    ----------
    n_symbols, k_symbols : int
        Code length N and dimension K, in field symbols.
    column_weight : int
        Variable-node degree dv.
    seed
        Anything accepted by :func:`numpy.random.default_rng`.

    Raises
    ------
    ConfigurationError
        If ``dv * N`` is not divisible by ``N - K`` or ``N > K > 0`` fails.
    ConstructionError
        If no full-rank regular matrix is found within ``max_attempts``.
    """
    n, k, dv = int(n_symbols), int(k_symbols), int(column_weight)
    if not n > k > 0:
        raise ConfigurationError(f"need N > K > 0, got N={n}, K={k}")
    m = n - k
    if dv < 1 or dv > m:
        raise ConfigurationError(f"column weight {dv} incompatible with {m} checks")
    if (dv * n) % m:
        raise ConfigurationError(f"dv*N = {dv * n} not divisible by N-K = {m}")
    dc = dv * n // m
    if dc > n:
        raise ConfigurationError(f"row weight {dc} exceeds N={n}")

    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        edges = _peg_place(n, m, dv, dc, rng)
        if edges is None:
            continue
        coeffs = rng.integers(1, field.size, size=len(edges))
        entries = np.array([(c, v, h) for (c, v), h in zip(edges, coeffs)], dtype=np.int64)
        code = SparseParityCheck(n_cols=n, n_rows=m, entries=entries, column_weight=dv, field=field)
        if np.all(code.row_weights() == dc) and np.all(code.column_weights() == dv):
            try:
                code.encoder
            except RankDeficientError:
                continue
            return code
    raise ConstructionError(f"no full-rank ({dv},{dc})-regular code after {max_attempts} attempts")


class SystematicEncoder:
    """Systematic encoder from the reduced row-echelon form of H.

    ``info_positions`` lists the K codeword positions that carry the
    information symbols in order; the remaining ``parity_positions`` are
    computed as ``parity = A @ info`` over the field.
    """

    def __init__(self, code: SparseParityCheck):
        f = code.field
        mul, inv = f.mul_table, f.inv_table
        a = np.array(code.dense, dtype=mul.dtype)
        m, n = a.shape
        pivots = []
        row = 0
        for col in range(n):
            if row == m:
                break
            nz = np.flatnonzero(a[row:, col])
            if nz.size == 0:
                continue
            p = row + nz[0]
            if p != row:
                a[[row, p]] = a[[p, row]]
            a[row] = mul[inv[a[row, col]], a[row]]
            others = np.flatnonzero(a[:, col])
            others = others[others != row]
            if others.size:
                a[others] ^= mul[a[others, col][:, None], a[row][None, :]]
            pivots.append(col)
            row += 1
        if row < m:
            raise RankDeficientError(f"parity-check matrix has rank {row} < {m}")
        self.code = code
        self.parity_positions = np.array(pivots, dtype=np.int64)
        self.info_positions = np.setdiff1d(np.arange(n), self.parity_positions)
        # rows of RREF: p_i + sum_j a_ij u_j = 0, characteristic 2 so p = A u
        self.parity_map = a[:, self.info_positions]

    def encode(self, info) -> np.ndarray:
        info = np.asarray(info)
        if info.shape != (self.code.k,):
            raise ValueError(f"expected {self.code.k} information symbols, got shape {info.shape}")
        if np.any((info < 0) | (info >= self.code.field.size)):
            raise ValueError("information symbol outside the field")
        word = np.zeros(self.code.n_cols, dtype=np.uint8)
        word[self.info_positions] = info
        word[self.parity_positions] = gf_matvec(self.parity_map, info.astype(np.uint8), self.code.field)
        return word

    def extract_info(self, word) -> np.ndarray:
        return np.asarray(word)[self.info_positions]


def encode(code: SparseParityCheck, info) -> np.ndarray:
    """Encode K information symbols into a length-N codeword (uint8 array)."""
    return code.encoder.encode(info)


@dataclass(frozen=True)
class RepeatedCode:
    """Mother code extended by multiplicative repetition.

    Block ``t`` (``t = 1 .. T-1``) of the extended word holds
    ``coefficients[t-1, i] * c_i`` for each mother symbol ``c_i``.
    """

    mother: SparseParityCheck
    factor: int
    coefficients: np.ndarray

    @property
    def n(self) -> int:
        return self.factor * self.mother.n_cols

    @property
    def k(self) -> int:
        return self.mother.k

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def info_positions(self) -> np.ndarray:
        return self.mother.encoder.info_positions

    def extend(self, word) -> np.ndarray:
        word = np.asarray(word, dtype=np.uint8)
        if self.factor == 1:
            return word.copy()
        mul = self.mother.field.mul_table
        blocks = [word] + [mul[self.coefficients[t], word] for t in range(self.factor - 1)]
        return np.concatenate(blocks)

    def encode(self, info) -> np.ndarray:
        return self.extend(self.mother.encoder.encode(info))

    def fold_priors(self, priors: np.ndarray) -> np.ndarray:
        """Combine the priors of all repeated blocks onto the mother symbols."""
        priors = np.asarray(priors, dtype=np.float64)
        n = self.mother.n_cols
        if priors.shape != (self.n, Q):
            raise ValueError(f"expected priors of shape {(self.n, Q)}, got {priors.shape}")
        mul = self.mother.field.mul_table
        folded = np.log(np.maximum(priors[:n], MESSAGE_FLOOR))
        rows = np.arange(n)[:, None]
        for t in range(self.factor - 1):
            block = priors[(t + 1) * n:(t + 2) * n]
            # P(c_i = x) gains P(c'_i = r * x)
            perm = mul[self.coefficients[t]][:, :].astype(np.int64)
            folded += np.log(np.maximum(block[rows, perm], MESSAGE_FLOOR))
        folded -= folded.max(axis=1, keepdims=True)
        out = np.exp(folded)
        return out / out.sum(axis=1, keepdims=True)


def multiplicative_repeat(mother: SparseParityCheck, factor: int, seed=None) -> RepeatedCode:
    """Lower the rate of ``mother`` by ``factor`` via random nonzero multipliers."""
    factor = int(factor)
    if factor < 1:
        raise ConfigurationError(f"repetition factor must be >= 1, got {factor}")
    rng = np.random.default_rng(seed)
    coeffs = rng.integers(1, mother.field.size, size=(factor - 1, mother.n_cols)).astype(np.uint8)
    coeffs.flags.writeable = False
    return RepeatedCode(mother=mother, factor=factor, coefficients=coeffs)


def _wht_inplace(x: np.ndarray) -> np.ndarray:
    """Butterfly transform along axis 0 of a C-contiguous ``(256, B)`` array."""
    width = x.shape[1]
    h = 1
    while h < Q:
        v = x.reshape(Q // (2 * h), 2, h * width)
        a = v[:, 0, :]
        b = v[:, 1, :]
        t = a - b
        a += b
        b[...] = t
        h *= 2
    return x


def wht256(vec: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis (length 256).

    ``F[a] = sum_b (-1)^popcount(a & b) v[b]``; applying it twice returns
    ``256 * v``.
    """
    x = np.asarray(vec, dtype=np.float64)
    if x.shape[-1:] != (Q,):
        raise ValueError(f"last axis must have length {Q}, got shape {x.shape}")
    cols = x.reshape(-1, Q).T.copy()
    return _wht_inplace(cols).T.reshape(x.shape)


@dataclass
class DecodeResult:
    decided_symbols: np.ndarray
    iterations_used: int
    converged: bool
    posteriors: np.ndarray | None = field(default=None, repr=False)


class _Graph:
    """Edge bookkeeping for a regular code; messages are ``(256, E)`` arrays."""

    def __init__(self, code: SparseParityCheck):
        e = code.entries
        self.n_edges = len(e)
        col = e[:, 1]
        self.col = col
        self.coeff = e[:, 2].astype(np.uint8)
        # entries are row-major, so edges of check r are r*dc .. r*dc+dc-1
        self.check_edges = np.arange(self.n_edges).reshape(code.n_rows, code.row_weight)
        self.var_edges = np.argsort(col, kind="stable").reshape(code.n_cols, code.column_weight)
        mul = code.field.mul_table.astype(np.int64)
        to_z = mul[e[:, 2]].T  # to_z[x, e] = h_e * x
        from_z = np.argsort(to_z, axis=0)  # from_z[z, e] = x with h_e * x = z
        offsets = np.arange(self.n_edges)
        # flat gather indices into a C-ordered (256, E) array
        self.to_z_flat = to_z * self.n_edges + offsets
        self.from_z_flat = from_z * self.n_edges + offsets


def _normalize(msgs: np.ndarray, axis: int = -1) -> np.ndarray:
    msgs = np.maximum(msgs, MESSAGE_FLOOR)
    return msgs / msgs.sum(axis=axis, keepdims=True)


def _leave_one_out_product(x: np.ndarray, axis: int) -> np.ndarray:
    """Product of all other entries along ``axis`` (no division, sign-safe)."""
    x = np.moveaxis(x, axis, 0)
    d = x.shape[0]
    prefix = np.ones_like(x)
    suffix = np.ones_like(x)
    for i in range(1, d):
        prefix[i] = prefix[i - 1] * x[i - 1]
        suffix[d - 1 - i] = suffix[d - i] * x[d - i]
    return np.moveaxis(prefix * suffix, 0, axis)


def check_node_update(v2c: np.ndarray, graph: _Graph) -> np.ndarray:
    """Check-to-variable messages from variable-to-check messages, both ``(256, E)``.

    Each message is moved to the product domain ``z = h x``, transformed,
    multiplied with the transforms of the other edges of its check,
    transformed back and moved to the value domain again.
    """
    z = v2c.ravel()[graph.from_z_flat]
    spectra = _wht_inplace(z)
    grouped = spectra[:, graph.check_edges]
    out = np.empty_like(spectra)
    out[:, graph.check_edges] = _leave_one_out_product(grouped, axis=2)
    _wht_inplace(out)
    out /= Q
    return _normalize(out.ravel()[graph.to_z_flat], axis=0)


def decode_fft_bp(code: SparseParityCheck, priors, max_iterations: int = 200,
                  return_posteriors: bool = False) -> DecodeResult:
    """FFT-based belief propagation in the probability domain.

    Parameters
    ----------
    code : SparseParityCheck
        Regular code to decode.
    priors : array_like, shape (N, 256)
        Per-symbol prior distributions; each row is normalized here.
    max_iterations : int
        Iteration cap. The syndrome of the hard decision is checked before
        the first iteration and after each one.

    Returns
    -------
    DecodeResult
        ``converged`` is true only when the syndrome is zero and every
        per-symbol posterior has a unique maximum.

    Raises
    ------
    ValueError
        On a wrongly shaped or non-normalizable prior.
    """
    priors = np.asarray(priors, dtype=np.float64)
    if priors.shape != (code.n_cols, Q):
        raise ValueError(f"priors must have shape {(code.n_cols, Q)}, got {priors.shape}")
    if np.any(priors < 0) or not np.all(np.isfinite(priors)):
        raise ValueError("priors must be finite and nonnegative")
    totals = priors.sum(axis=1)
    if np.any(totals <= 0):
        raise ValueError(f"prior of symbol {int(np.argmin(totals))} is not normalizable")
    priors = _normalize(priors / totals[:, None])

    g = code.graph
    mul = code.field.mul_table
    prior_cols = np.ascontiguousarray(priors.T)  # (256, N)

    def decide(post):  # post is (256, N)
        decided = np.argmax(post, axis=0)
        top = post[decided, np.arange(post.shape[1])]
        unique = np.count_nonzero(post == top, axis=0) == 1
        products = mul[g.coeff, decided[g.col]][g.check_edges]
        syndrome = np.bitwise_xor.reduce(products, axis=1)
        return decided.astype(np.uint8), bool(np.all(unique) and not np.any(syndrome))

    decided, ok = decide(prior_cols)
    c2v = np.full((Q, g.n_edges), 1.0 / Q)
    v2c = np.empty_like(c2v)
    posteriors = prior_cols
    iterations = 0
    while not ok and iterations < max_iterations:
        iterations += 1
        incoming = c2v[:, g.var_edges]  # (256, N, dv)
        v2c[:, g.var_edges] = _normalize(prior_cols[:, :, None] * _leave_one_out_product(incoming, axis=2), axis=0)
        c2v = check_node_update(v2c, g)
        posteriors = _normalize(prior_cols * np.prod(c2v[:, g.var_edges], axis=2), axis=0)
        decided, ok = decide(posteriors)

    return DecodeResult(decided_symbols=decided, iterations_used=iterations, converged=ok,
                        posteriors=posteriors.T.copy() if return_posteriors else None)
