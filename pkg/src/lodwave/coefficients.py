"""Time-dependent multiscale coefficients and right-hand sides.

The builtin coefficients combine a microscopic pattern of period
``epsilon`` with smooth modulation in time; snapshots sample the formula
at fine-element midpoints, which is exact enough because runs are required
to resolve the microstructure (h <= epsilon / 4).
"""

import hashlib

import numpy as np


class ResolutionError(ValueError):
    """The fine grid does not resolve the coefficient oscillations."""


class CoefficientSnapshot:
    """Per-fine-element positive values of the coefficient at one time."""

    def __init__(self, t, values):
        values = np.ascontiguousarray(values, dtype=float)
        if np.any(values <= 0.0) or not np.all(np.isfinite(values)):
            raise ValueError("coefficient snapshot must be positive and finite")
        self.t = float(t)
        self.values = values
        self.values.setflags(write=False)
        self._hash = None

    @property
    def value_hash(self):
        if self._hash is None:
            self._hash = hashlib.sha1(self.values.tobytes()).hexdigest()
        return self._hash

    def __len__(self):
        return self.values.size


class CoefficientSpec:
    """A named coefficient formula with declared positive bounds."""

    def __init__(self, id, epsilon, evaluate, bounds, needs_resolution=True):
        self.id = id
        self.epsilon = epsilon
        self._evaluate = evaluate
        self.bounds = bounds
        self.needs_resolution = needs_resolution

    def evaluate(self, t, x):
        """Pointwise values at coordinates x of shape (n, d)."""
        return self._evaluate(t, np.asarray(x, dtype=float))


def _micro_inclusion(x, epsilon):
    """10 inside the periodically repeated [0.25, 0.75]^d cell core, else 1."""
    frac = np.mod(x / epsilon, 1.0)
    inside = np.all((frac >= 0.25) & (frac <= 0.75), axis=-1)
    return np.where(inside, 10.0, 1.0)


def _periodic_product(epsilon):
    def ev(t, x):
        mod = np.sin(2.0 * np.pi * t)
        out = np.ones(x.shape[0])
        for axis in range(x.shape[1]):
            out = out * (3.0 + np.sin(2.0 * np.pi * x[:, axis] / epsilon) + mod)
        return out
    return ev


def _a1_tensor(epsilon):
    def ev(t, x):
        return (1.0 + 0.5 * np.cos(9.0 * t)) * _micro_inclusion(x, epsilon)
    return ev


def _a2_local_modulation(epsilon):
    def ev(t, x):
        base = _micro_inclusion(x, epsilon)
        region = np.all((x >= 0.25) & (x <= 0.75), axis=-1)
        factor = np.where(region, 1.0 + 0.5 * np.cos(9.0 * t), 1.0)
        return factor * base
    return ev


def _a3_additive(epsilon):
    def ev(t, x):
        return _micro_inclusion(x, epsilon) + 1.0 + 0.5 * np.cos(9.0 * t)
    return ev


_BUILTIN_COEFFICIENTS = {
    # id -> (factory, (c_a, C_a)); bounds hold for all t and x
    "periodic_product": (_periodic_product, (1.0, 25.0)),
    "a1_tensor": (_a1_tensor, (0.5, 15.0)),
    "a2_local_modulation": (_a2_local_modulation, (0.5, 15.0)),
    "a3_additive": (_a3_additive, (1.5, 11.5)),
}


def make_coefficient(id, epsilon=2.0 ** -5, path=None):
    """Construct a builtin coefficient or load a custom one from files."""
    if id == "custom":
        if path is None:
            raise ValueError("custom coefficients need a snapshot directory")
        return CustomCoefficient(path)
    try:
        factory, bounds = _BUILTIN_COEFFICIENTS[id]
    except KeyError:
        raise ValueError("unknown coefficient id %r (known: %s, custom)"
                         % (id, ", ".join(sorted(_BUILTIN_COEFFICIENTS)))) from None
    return CoefficientSpec(id, float(epsilon), factory(float(epsilon)), bounds)


def sample(spec, t, grid):
    """Snapshot of the coefficient at fine-element midpoints."""
    if getattr(spec, "needs_resolution", False):
        if grid.h > spec.epsilon / 4.0 + 1e-14:
            raise ResolutionError(
                "fine width h=%g does not resolve epsilon=%g (need h <= eps/4)"
                % (grid.h, spec.epsilon))
    if isinstance(spec, CustomCoefficient):
        return spec.snapshot(t, grid)
    values = spec.evaluate(t, grid.element_midpoints("fine"))
    return CoefficientSnapshot(t, values)


def patch_average(snapshot, patch):
    """Mean of the fine-element values over a patch (elements have equal
    volume, so this is the integral average)."""
    return float(np.mean(snapshot.values[patch.fine_elements]))


def scaled_restriction(snapshot, patch):
    """Patch-restricted values divided by their patch average."""
    vals = snapshot.values[patch.fine_elements]
    return vals / np.mean(vals)


# -- right-hand sides --------------------------------------------------------

class RhsSpec:
    def __init__(self, id, evaluate):
        self.id = id
        self._evaluate = evaluate

    def evaluate(self, t, x):
        x = np.asarray(x, dtype=float)
        out = self._evaluate(t, x)
        return np.broadcast_to(np.asarray(out, dtype=float), (x.shape[0],)).copy()


def _f1(t, x):
    # discontinuous across x_1 = 0.4; nodes on the interface take the
    # lower branch so sampling is reproducible
    return np.where(x[:, 0] > 0.4, 20.0 * t + 230.0 * t * t,
                    100.0 * t + 2300.0 * t * t)


def _f2(t, x):
    px = x[:, 0] - x[:, 0] ** 2
    py = x[:, 1] - x[:, 1] ** 2
    return 20.0 * t * px * py + 230.0 * t * t * (px + py)


def _f_sine(t, x):
    return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]) \
        * (5.0 * t + 50.0 * t * t)


_BUILTIN_RHS = {
    "f1_discontinuous": _f1,
    "f2_smooth": _f2,
    "f_sine": _f_sine,
    "zero": lambda t, x: np.zeros(x.shape[0]),
}


def make_rhs(id):
    try:
        return RhsSpec(id, _BUILTIN_RHS[id])
    except KeyError:
        raise ValueError("unknown right-hand side %r (known: %s)"
                         % (id, ", ".join(sorted(_BUILTIN_RHS)))) from None


# -- custom snapshots on disk -------------------------------------------------
#
# Text format, one file per sampled time:
#
#     # lodwave coefficient snapshot
#     d = <dimension>
#     n_fine = <fine elements per axis>
#     t = <time>
#     <value of fine element 0>
#     <value of fine element 1>
#     ...
#
# Values are listed in lexicographic element order (x fastest).

import os


def save_snapshot_file(path, snapshot, grid):
    with open(path, "w") as fh:
        fh.write("# lodwave coefficient snapshot\n")
        fh.write("d = %d\n" % grid.d)
        fh.write("n_fine = %d\n" % grid.n_fine)
        fh.write("t = %.17g\n" % snapshot.t)
        for v in snapshot.values:
            fh.write("%.17g\n" % v)


def load_snapshot_file(path):
    header = {}
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line:
                key, _, val = line.partition("=")
                header[key.strip()] = val.strip()
            else:
                values.append(float(line))
    for key in ("d", "n_fine", "t"):
        if key not in header:
            raise ValueError("snapshot file %s is missing header key %r"
                             % (path, key))
    d = int(header["d"])
    n_fine = int(header["n_fine"])
    t = float(header["t"])
    if len(values) != n_fine ** d:
        raise ValueError("snapshot file %s has %d values, expected %d"
                         % (path, len(values), n_fine ** d))
    return d, n_fine, CoefficientSnapshot(t, np.array(values))


class CustomCoefficient:
    """Coefficient backed by snapshot files in a directory, one per time."""

    id = "custom"
    needs_resolution = False
    bounds = None
    epsilon = None

    def __init__(self, directory):
        self.directory = directory
        self._snapshots = {}
        self._meta = None
        for name in sorted(os.listdir(directory)):
            full = os.path.join(directory, name)
            if not os.path.isfile(full):
                continue
            d, n_fine, snap = load_snapshot_file(full)
            if self._meta is None:
                self._meta = (d, n_fine)
            elif self._meta != (d, n_fine):
                raise ValueError("inconsistent grids in %s" % directory)
            self._snapshots[snap.t] = snap
        if not self._snapshots:
            raise ValueError("no snapshot files found in %s" % directory)

    @property
    def times(self):
        return sorted(self._snapshots)

    def snapshot(self, t, grid):
        d, n_fine = self._meta
        if (grid.d, grid.n_fine) != (d, n_fine):
            raise ValueError(
                "custom snapshots are for d=%d, n_fine=%d, run uses d=%d, n_fine=%d"
                % (d, n_fine, grid.d, grid.n_fine))
        times = np.array(self.times)
        idx = np.argmin(np.abs(times - t))
        if abs(times[idx] - t) > 1e-9:
            raise ValueError(
                "no custom snapshot at t=%.17g (available: %s)"
                % (t, ", ".join("%.6g" % s for s in times)))
        return self._snapshots[times[idx]]
