"""Synthetic test instances and the plain-text problem file format.

Random numbers come from numpy's PCG64 generator. A single
``SeedSequence(seed)`` is spawned into five independent child streams, used
in this order: matrix, support, values, noise, outliers. Changing one
field of a :class:`SyntheticSpec` therefore leaves the draws of the other
streams untouched.
"""
import os
from dataclasses import dataclass, fields, replace
from typing import Dict, Optional

import numpy as np

from sparse_levelset.errors import DomainError, ProblemFormatError
from sparse_levelset.operator import Dictionary

DICT_KINDS = ("gaussian", "parseval")
NOISE_PARAMETERIZATIONS = ("variance", "std")
_STREAMS = ("matrix", "support", "values", "noise", "outliers")


@dataclass(frozen=True)
class SyntheticSpec:
    m: int
    n: int
    k: int
    dict_kind: str = "gaussian"
    noise_var: float = 0.0
    n_outliers: int = 0
    outlier_var: float = 0.0
    seed: int = 0
    noise_parameterization: str = "variance"

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise DomainError(f"Dimensions must be positive, got {self.m} x {self.n}")
        if not self.m < self.n:
            raise DomainError(f"Need m < n, got m={self.m}, n={self.n}")
        if not 0 <= self.k <= self.n:
            raise DomainError(f"Sparsity k must lie in [0, n], got {self.k}")
        if self.dict_kind not in DICT_KINDS:
            raise DomainError(f"dict_kind must be one of {DICT_KINDS}, got {self.dict_kind!r}")
        if self.noise_var < 0 or self.outlier_var < 0:
            raise DomainError("Noise and outlier variances must be nonnegative")
        if not 0 <= self.n_outliers <= self.m:
            raise DomainError(f"n_outliers must lie in [0, m], got {self.n_outliers}")
        if self.noise_parameterization not in NOISE_PARAMETERIZATIONS:
            raise DomainError(f"noise_parameterization must be one of {NOISE_PARAMETERIZATIONS}")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    def scale(self, level: float) -> float:
        """Standard deviation for a noise level given in the configured parameterization."""
        return float(np.sqrt(level)) if self.noise_parameterization == "variance" else float(level)


PRESETS: Dict[str, SyntheticSpec] = {
    "gauss-en": SyntheticSpec(m=256, n=1024, k=32, dict_kind="gaussian", noise_var=1e-3),
    "outliers": SyntheticSpec(m=175, n=600, k=20, dict_kind="parseval", noise_var=0.005,
                              n_outliers=5, outlier_var=4.0),
}


@dataclass
class ProblemInstance:
    d: Dictionary
    y: np.ndarray
    x_true: Optional[np.ndarray] = None
    outlier_mask: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None
    outliers: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.y.shape != (self.d.rows,):
            raise DomainError(f"y must have length {self.d.rows}, got shape {self.y.shape}")
        if self.x_true is not None:
            self.x_true = np.asarray(self.x_true, dtype=np.float64)
            if self.x_true.shape != (self.d.cols,):
                raise DomainError(f"x_true must have length {self.d.cols}, got shape {self.x_true.shape}")


def gen_instance(spec: SyntheticSpec) -> ProblemInstance:
    """Draw D, a k-sparse x_true and y = D x_true + w + zeta."""
    streams = dict(zip(_STREAMS, (np.random.Generator(np.random.PCG64(s))
                                  for s in np.random.SeedSequence(spec.seed).spawn(len(_STREAMS)))))

    # Dictionary with unit columns or orthonormal rows
    raw = streams["matrix"].standard_normal((spec.m, spec.n))
    if spec.dict_kind == "gaussian":
        D = raw / np.linalg.norm(raw, axis=0)
    else:
        # orthonormal basis of the row space via thin QR of D^T
        q, _ = np.linalg.qr(raw.T)
        D = q.T

    # Sparse signal on a random support
    x_true = np.zeros(spec.n)
    support = np.sort(streams["support"].choice(spec.n, size=spec.k, replace=False))
    x_true[support] = streams["values"].standard_normal(spec.k)

    # Dense noise plus sparse outliers
    noise = spec.scale(spec.noise_var) * streams["noise"].standard_normal(spec.m)
    outliers = np.zeros(spec.m)
    mask = np.zeros(spec.m, dtype=bool)
    if spec.n_outliers:
        where = streams["outliers"].choice(spec.m, size=spec.n_outliers, replace=False)
        mask[where] = True
        outliers[where] = spec.scale(spec.outlier_var) * streams["outliers"].standard_normal(spec.n_outliers)

    d = Dictionary(D)
    y = d.apply(x_true) + noise + outliers
    return ProblemInstance(d=d, y=y, x_true=x_true, outlier_mask=mask, noise=noise, outliers=outliers,
                           name=f"gen:{spec.m}x{spec.n}:{spec.dict_kind}:seed={spec.seed}")


def parse_gen_source(source: str) -> SyntheticSpec:
    """Parse ``gen:<preset>[,key=value...]`` or ``gen:key=value,...``."""
    if not source.startswith("gen:"):
        raise DomainError(f"Generator source must start with 'gen:', got {source!r}")
    parts = [p.strip() for p in source[4:].split(",") if p.strip()]
    if not parts:
        raise DomainError("Empty generator source")

    base = None
    if "=" not in parts[0]:
        name = parts.pop(0)
        if name not in PRESETS:
            raise DomainError(f"Unknown preset {name!r}. Must be one of: {', '.join(PRESETS)}")
        base = PRESETS[name]

    aliases = {"dict": "dict_kind", "noise": "noise_var", "outliers": "n_outliers"}
    types = {f.name: f.type for f in fields(SyntheticSpec)}
    values = {}
    for part in parts:
        key, sep, raw = part.partition("=")
        key = aliases.get(key.strip(), key.strip())
        if not sep or key not in types:
            raise DomainError(f"Bad generator field {part!r}")
        kind = types[key]
        try:
            if kind in (int, "int"):
                values[key] = int(raw)
            elif kind in (float, "float"):
                values[key] = float(raw)
            else:
                values[key] = raw.strip()
        except ValueError:
            raise DomainError(f"Bad value for {key}: {raw!r}")

    if base is not None:
        return replace(base, **values)
    try:
        return SyntheticSpec(**values)
    except TypeError as e:
        raise DomainError(f"Incomplete generator source {source!r}: {e}")


def load_source(source: str) -> ProblemInstance:
    """A problem from a ``gen:`` string or a problem file path."""
    if source.startswith("gen:"):
        instance = gen_instance(parse_gen_source(source))
        instance.name = source
        return instance
    instance = read_problem(source)
    instance.name = os.path.basename(source)
    return instance


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_problem(path: str, instance: ProblemInstance) -> None:
    """Write the dense matrix, y and (if present) x_true as UTF-8 text."""
    matrix = instance.d.matrix
    if matrix is None:
        raise DomainError("Only dense dictionaries can be written to a problem file")
    m, n = matrix.shape
    lines = [f"{m} {n}"]
    lines.extend(" ".join(_fmt(v) for v in row) for row in matrix)
    lines.append(str(m))
    lines.append(" ".join(_fmt(v) for v in instance.y))
    if instance.x_true is not None:
        lines.append(str(n))
        lines.append(" ".join(_fmt(v) for v in instance.x_true))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def _count(token: str, what: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ProblemFormatError(f"Expected an integer {what}, got {token!r}")
    if value < 1:
        raise ProblemFormatError(f"{what} must be positive, got {value}")
    return value


def _floats(tokens, what: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError as e:
        raise ProblemFormatError(f"Non-numeric token in {what}: {e}")


def read_problem(path: str) -> ProblemInstance:
    """Parse a problem file; all whitespace is equivalent."""
    with open(path, "r", encoding="utf-8") as f:
        tokens = f.read().split()
    if len(tokens) < 2:
        raise ProblemFormatError(f"{path}: missing 'M N' header")
    m = _count(tokens[0], "row count M")
    n = _count(tokens[1], "column count N")
    pos = 2

    if len(tokens) < pos + m * n:
        raise ProblemFormatError(f"{path}: expected {m * n} matrix entries, found {len(tokens) - pos}")
    matrix = _floats(tokens[pos:pos + m * n], "matrix").reshape(m, n)
    pos += m * n

    if len(tokens) <= pos:
        raise ProblemFormatError(f"{path}: missing measurement block")
    if _count(tokens[pos], "measurement length") != m:
        raise ProblemFormatError(f"{path}: measurement length {tokens[pos]} does not match M = {m}")
    pos += 1
    if len(tokens) < pos + m:
        raise ProblemFormatError(f"{path}: expected {m} measurement entries")
    y = _floats(tokens[pos:pos + m], "measurement")
    pos += m

    x_true = None
    if len(tokens) > pos:
        if _count(tokens[pos], "solution length") != n:
            raise ProblemFormatError(f"{path}: solution length {tokens[pos]} does not match N = {n}")
        pos += 1
        if len(tokens) != pos + n:
            raise ProblemFormatError(f"{path}: expected exactly {n} solution entries")
        x_true = _floats(tokens[pos:], "solution")

    try:
        d = Dictionary(matrix)
    except DomainError as e:
        raise ProblemFormatError(f"{path}: {e}")
    return ProblemInstance(d=d, y=y, x_true=x_true)


def recovery_error(x_hat, x_true) -> float:
    """||x_hat - x_true||_2 / ||x_true||_2."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x_true = np.asarray(x_true, dtype=np.float64)
    if x_hat.shape != x_true.shape:
        raise DomainError(f"Shape mismatch: {x_hat.shape} vs {x_true.shape}")
    scale = np.linalg.norm(x_true)
    if scale == 0.0:
        raise DomainError("Relative error is undefined for x_true = 0")
    return float(np.linalg.norm(x_hat - x_true) / scale)
