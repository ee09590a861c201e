"""Exact connectivity certificates for quadric complements, quadrics and
complete intersections of two quadrics."""

import json

from . import _core
from ._core import FlexcertError

__all__ = [
    "FlexcertError",
    "form",
    "hyperbolic_normalize",
    "connect",
    "connect_on_x",
    "verify",
    "eacx_build",
    "pencil_smoothness",
]


def _point(p):
    if p is None:
        return None
    if isinstance(p, str):
        return p
    return ",".join(str(x) for x in p)


def form(matrix):
    """Form document from a symmetric matrix of rationals (ints, Fractions or strings)."""
    return {"matrix": [[str(x) for x in row] for row in matrix]}


def hyperbolic_normalize(form_doc):
    return json.loads(_core.hyperbolic_normalize(json.dumps(form_doc)))


def connect(kind, form_doc, p=None, q=None, seed=1, retry_limit=64):
    """Certificate joining p and q ("complement" or "quadric"); None picks a random point."""
    return json.loads(
        _core.connect(kind, json.dumps(form_doc), _point(p), _point(q), seed, retry_limit)
    )


def connect_on_x(pencil_doc, p=None, q=None, seed=1, retry_limit=64):
    return json.loads(
        _core.connect_on_x(json.dumps(pencil_doc), _point(p), _point(q), seed, retry_limit)
    )


def verify(certificate, input_doc):
    """Replay a certificate against a form (path certificates) or a pencil (ci)."""
    return json.loads(_core.verify(json.dumps(certificate), json.dumps(input_doc)))


def eacx_build(lambdas):
    return json.loads(_core.eacx_build([str(x) for x in lambdas]))


def pencil_smoothness(pencil_doc):
    return json.loads(_core.pencil_smoothness(json.dumps(pencil_doc)))
