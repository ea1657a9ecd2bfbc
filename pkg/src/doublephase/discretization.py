"""P1 simplicial meshes on intervals and axis-aligned rectangles.

Meshes, quadrature rules, and nodal functions are immutable after
construction (their arrays are marked read-only), so they are safe to share;
every operation in this module is pure.

Field convention: a scalar field is a callable taking an array of points of
shape (..., dim) and returning values broadcastable to shape (...).  Plain
constants such as ``lambda x: 1.0`` are fine.
"""

import csv

import numpy as np

from .errors import InputError

# P1 reference elements: the interval [0, 1] and the triangle (0,0)-(1,0)-(0,1).
_REF_GRADS = {
    1: np.array([[-1.0], [1.0]]),
    2: np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]),
}
_REF_MEASURE = {1: 1.0, 2: 0.5}


class QuadratureRule:
    """Reference-element rule with a stated polynomial exactness degree.

    Weights are positive and sum to the reference-element measure (1 for the
    interval, 1/2 for the triangle).
    """

    def __init__(self, points, weights, degree):
        points = np.array(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        weights = np.array(weights, dtype=float)
        degree = int(degree)
        if degree < 2:
            raise InputError("quadrature degree must be at least 2")
        if weights.ndim != 1 or len(weights) != len(points):
            raise InputError("points and weights must have matching length")
        if np.any(weights <= 0.0):
            raise InputError("quadrature weights must be positive")
        dim = points.shape[1]
        if dim not in _REF_MEASURE:
            raise InputError("only 1D and 2D rules are supported")
        if abs(weights.sum() - _REF_MEASURE[dim]) > 1e-12:
            raise InputError("weights must sum to the reference-element measure")
        self.points = points
        self.weights = weights
        self.degree = degree
        self.dimension = dim
        points.flags.writeable = False
        weights.flags.writeable = False


def interval_rule(npoints=3):
    """Gauss-Legendre rule on [0, 1], exact through degree 2*npoints - 1."""
    if npoints < 1:
        raise InputError("npoints must be positive")
    x, w = np.polynomial.legendre.leggauss(npoints)
    return QuadratureRule((x + 1.0) / 2.0, w / 2.0, 2 * npoints - 1)


# Symmetric two-orbit 6-point triangle rule (weights normalized to unit area).
_TRI6_ORBITS = (
    (0.108103018168070, 0.445948490915965, 0.223381589678011),
    (0.816847572980459, 0.091576213509771, 0.109951743655322),
)


def triangle_rule():
    """Symmetric 6-point rule on the reference triangle, exact to degree 4."""
    pts, wts = [], []
    for a, b, w in _TRI6_ORBITS:
        for lam in ((a, b, b), (b, a, b), (b, b, a)):
            pts.append((lam[1], lam[2]))
            wts.append(w / 2.0)
    return QuadratureRule(pts, wts, 4)


_DEFAULT_RULES = {}


def default_rule(dimension):
    """Shared default rule for a mesh dimension (exactness degree >= 4)."""
    if dimension not in (1, 2):
        raise InputError("dimension must be 1 or 2")
    if dimension not in _DEFAULT_RULES:
        _DEFAULT_RULES[dimension] = interval_rule() if dimension == 1 else triangle_rule()
    return _DEFAULT_RULES[dimension]


def _p1_geometry(dimension, vertices, elements):
    """Element measures and physical gradients of the nodal basis."""
    coords = vertices[elements]
    if dimension == 1:
        span = coords[:, 1, 0] - coords[:, 0, 0]
        measures = span
        with np.errstate(divide="ignore", invalid="ignore"):
            grads = np.broadcast_to(_REF_GRADS[1], (len(elements), 2, 1)) / span[:, None, None]
    else:
        e1 = coords[:, 1] - coords[:, 0]
        e2 = coords[:, 2] - coords[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        measures = 0.5 * det
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_t = np.empty((len(elements), 2, 2))
            inv_t[:, 0, 0] = e2[:, 1]
            inv_t[:, 0, 1] = -e1[:, 1]
            inv_t[:, 1, 0] = -e2[:, 0]
            inv_t[:, 1, 1] = e1[:, 0]
            inv_t /= det[:, None, None]
        grads = np.einsum("eij,kj->eki", inv_t, _REF_GRADS[2])
    return measures, np.ascontiguousarray(grads)


class Mesh:
    """Simplicial mesh: vertex coordinates, element connectivity, boundary flags.

    Elements are segments in 1D and positively oriented triangles in 2D.
    Derived P1 geometry (element measures, basis gradients, interior index
    list) is computed once at construction.
    """

    def __init__(self, dimension, vertices, elements, boundary_mask):
        dimension = int(dimension)
        if dimension not in (1, 2):
            raise InputError("dimension must be 1 or 2")
        vertices = np.array(vertices, dtype=float).reshape(-1, dimension)
        elements = np.array(elements, dtype=np.int64).reshape(-1, dimension + 1)
        boundary_mask = np.array(boundary_mask, dtype=bool).reshape(-1)
        if len(boundary_mask) != len(vertices):
            raise InputError("boundary_mask length must match the vertex count")
        if elements.size and (elements.min() < 0 or elements.max() >= len(vertices)):
            raise InputError("element vertex index out of range")
        measures, grads = _p1_geometry(dimension, vertices, elements)
        if np.any(~np.isfinite(measures)) or np.any(measures <= 0.0):
            raise InputError("elements must have positive measure and orientation")
        self.dimension = dimension
        self.vertices = vertices
        self.elements = elements
        self.boundary_mask = boundary_mask
        self.element_measures = measures
        self.basis_gradients = grads
        self.interior_indices = np.flatnonzero(~boundary_mask)
        for arr in (vertices, elements, boundary_mask, measures, grads,
                    self.interior_indices):
            arr.flags.writeable = False
        self._quad_cache = {}
        self._edges = None

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_elements(self):
        return len(self.elements)

    @property
    def total_measure(self):
        return float(self.element_measures.sum())

    @property
    def edges(self):
        """Unique vertex pairs joined by an element edge, sorted per pair."""
        if self._edges is None:
            if self.dimension == 1:
                pairs = np.sort(self.elements, axis=1)
            else:
                pairs = self.elements[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
                pairs = np.sort(pairs, axis=1)
            edges = np.unique(pairs, axis=0)
            edges.flags.writeable = False
            self._edges = edges
        return self._edges

    def quadrature(self, rule):
        """Rule mapped onto every element; cached per rule object."""
        cached = self._quad_cache.get(id(rule))
        if cached is not None and cached[0] is rule:
            return cached[1]
        eq = ElementQuadrature(self, rule)
        self._quad_cache[id(rule)] = (rule, eq)
        return eq


class ElementQuadrature:
    """A quadrature rule mapped onto every element of a mesh.

    Stores physical points of shape (ne, nq, dim), physical weights of shape
    (ne, nq) summing elementwise to the element measures, and the P1 basis
    values at the reference points (nq, nvert).
    """

    def __init__(self, mesh, rule):
        if rule.dimension != mesh.dimension:
            raise InputError("rule dimension does not match the mesh")
        coords = mesh.vertices[mesh.elements]
        ref = rule.points
        if mesh.dimension == 1:
            x0 = coords[:, 0, :]
            span = coords[:, 1, :] - coords[:, 0, :]
            points = x0[:, None, :] + ref[None, :, :] * span[:, None, :]
            basis = np.column_stack([1.0 - ref[:, 0], ref[:, 0]])
        else:
            p0 = coords[:, 0]
            e1 = coords[:, 1] - coords[:, 0]
            e2 = coords[:, 2] - coords[:, 0]
            points = (p0[:, None, :]
                      + ref[None, :, 0, None] * e1[:, None, :]
                      + ref[None, :, 1, None] * e2[:, None, :])
            basis = np.column_stack([1.0 - ref[:, 0] - ref[:, 1], ref[:, 0], ref[:, 1]])
        scale = mesh.element_measures / _REF_MEASURE[mesh.dimension]
        weights = rule.weights[None, :] * scale[:, None]
        self.mesh = mesh
        self.rule = rule
        self.points = points
        self.weights = weights
        self.basis = basis
        self.points_flat = points.reshape(-1, mesh.dimension)
        self.weights_flat = weights.reshape(-1)
        for arr in (points, weights, basis, self.points_flat, self.weights_flat):
            arr.flags.writeable = False

    @property
    def num_points(self):
        return self.basis.shape[0]

    def function_values(self, nodal_values):
        """Values of a P1 function at every quadrature point, shape (ne, nq)."""
        return nodal_values[self.mesh.elements] @ self.basis.T


def _parse_domain(domain):
    arr = np.asarray(domain, dtype=float)
    if arr.shape == (2,):
        spans = [(float(arr[0]), float(arr[1]))]
    elif arr.shape == (2, 2):
        spans = [(float(arr[0, 0]), float(arr[0, 1])),
                 (float(arr[1, 0]), float(arr[1, 1]))]
    else:
        raise InputError("domain must be (a, b) or ((a, b), (c, d))")
    for lo, hi in spans:
        if not hi > lo:
            raise InputError("domain bounds must satisfy a < b (and c < d)")
    return spans


def _parse_resolution(resolution, dims):
    if np.ndim(resolution) == 0:
        res = [resolution] * dims
    else:
        res = list(resolution)
        if len(res) != dims:
            raise InputError("resolution must be scalar or give one count per axis")
    out = []
    for n in res:
        if int(n) != n or int(n) < 1:
            raise InputError("resolution must be a positive integer cell count")
        out.append(int(n))
    return out


def build_mesh(domain, resolution):
    """Uniform mesh of an interval (a, b) or a rectangle ((a, b), (c, d)).

    Parameters
    ----------
    domain : (a, b) for an interval or ((a, b), (c, d)) for a rectangle.
    resolution : cells per axis; an int applies to every axis.

    In 2D every grid cell is split into two positively oriented triangles.
    """
    spans = _parse_domain(domain)
    res = _parse_resolution(resolution, len(spans))
    if len(spans) == 1:
        (a, b), n = spans[0], res[0]
        x = np.linspace(a, b, n + 1)
        vertices = x[:, None]
        elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        boundary = np.zeros(n + 1, dtype=bool)
        boundary[[0, n]] = True
        mesh = Mesh(1, vertices, elements, boundary)
        exact = b - a
    else:
        (a, b), (c, d) = spans
        nx, ny = res
        xs = np.linspace(a, b, nx + 1)
        ys = np.linspace(c, d, ny + 1)
        vertices = np.column_stack([np.tile(xs, ny + 1), np.repeat(ys, nx + 1)])
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        v00 = (j * (nx + 1) + i).reshape(-1)
        v10 = v00 + 1
        v01 = v00 + (nx + 1)
        v11 = v01 + 1
        lower = np.column_stack([v00, v10, v11])
        upper = np.column_stack([v00, v11, v01])
        elements = np.vstack([lower, upper])
        ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
        boundary = ((ii == 0) | (ii == nx) | (jj == 0) | (jj == ny))
        boundary = boundary.T.reshape(-1)
        mesh = Mesh(2, vertices, elements, boundary)
        exact = (b - a) * (d - c)
    if abs(mesh.total_measure - exact) > 1e-12 * abs(exact):
        raise InputError("element measures do not add up to the domain measure")
    return mesh


class FemFunction:
    """Piecewise-linear function stored as one value per mesh vertex."""

    def __init__(self, mesh, nodal_values):
        values = np.array(nodal_values, dtype=float).reshape(-1)
        if len(values) != mesh.num_vertices:
            raise InputError("nodal_values length must match the vertex count")
        values.flags.writeable = False
        self.mesh = mesh
        self.nodal_values = values


def sample_field(field, points):
    """Evaluate a scalar field at points of shape (..., dim); broadcasts
    scalar and lower-rank returns to shape (...)."""
    values = np.asarray(field(points), dtype=float)
    return np.broadcast_to(values, points.shape[:-1])


def interpolate(mesh, field):
    """Nodal interpolant of a field; nodal_values[i] = field(vertex_i)."""
    return FemFunction(mesh, sample_field(field, mesh.vertices))


def element_gradient(u, element_index):
    """Constant gradient of the affine interpolant on one element."""
    mesh = u.mesh
    if not 0 <= element_index < mesh.num_elements:
        raise InputError("element index out of range")
    idx = mesh.elements[element_index]
    return u.nodal_values[idx] @ mesh.basis_gradients[element_index]


def element_gradients(u):
    """Per-element gradients, shape (ne, dim)."""
    mesh = u.mesh
    return np.einsum("eki,ek->ei", mesh.basis_gradients,
                     u.nodal_values[mesh.elements])


def integrate(mesh, quad, integrand):
    """Quadrature of integrand(x, element) over the whole mesh.

    The integrand receives flattened quadrature points of shape (m, dim) and
    the owning element index per point; its return value is broadcast.
    """
    eq = mesh.quadrature(quad)
    elems = np.repeat(np.arange(mesh.num_elements), eq.num_points)
    values = np.asarray(integrand(eq.points_flat, elems), dtype=float)
    values = np.broadcast_to(values, elems.shape)
    return float(eq.weights_flat @ values)


def basis_load(mesh, eq, values_at_qp):
    """Pairing of pointwise values (ne, nq) with every nodal basis function.

    Accumulation runs in a fixed element order, so results are bitwise
    reproducible.
    """
    contrib = np.einsum("eq,qk->ek", eq.weights * values_at_qp, eq.basis)
    out = np.zeros(mesh.num_vertices)
    for k in range(mesh.elements.shape[1]):
        np.add.at(out, mesh.elements[:, k], contrib[:, k])
    return out


def is_dirichlet_conforming(u, tol=1e-12):
    """True when boundary nodal values vanish up to tol * max(1, |u|_inf)."""
    vals = u.nodal_values
    if not vals.size or not u.mesh.boundary_mask.any():
        return True
    scale = max(1.0, float(np.max(np.abs(vals))))
    return float(np.max(np.abs(vals[u.mesh.boundary_mask]))) <= tol * scale


def write_function_csv(u, path):
    """Write nodal values as x(, y), value rows in vertex order.

    Floats are written with repr so a re-import reproduces them bitwise.
    """
    mesh = u.mesh
    header = ["x", "value"] if mesh.dimension == 1 else ["x", "y", "value"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for coords, value in zip(mesh.vertices, u.nodal_values):
            writer.writerow([repr(float(c)) for c in coords] + [repr(float(value))])


def read_function_csv(mesh, path):
    """Read a function written by write_function_csv back onto its mesh."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    body = rows[1:]
    if len(body) != mesh.num_vertices:
        raise InputError(f"{path}: expected {mesh.num_vertices} rows, got {len(body)}")
    values = np.empty(mesh.num_vertices)
    for i, row in enumerate(body):
        if len(row) != mesh.dimension + 1:
            raise InputError(f"{path}: row {i + 2} has {len(row)} columns")
        coords = np.array([float(c) for c in row[:-1]])
        if not np.array_equal(coords, mesh.vertices[i]):
            raise InputError(f"{path}: row {i + 2} does not match vertex {i}")
        values[i] = float(row[-1])
    return FemFunction(mesh, values)
