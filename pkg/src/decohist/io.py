"""JSON/CSV formats for operators, schedules, models and reports.

Operators are ``{"dim": d, "re": [[...]], "im": [[...]]}``; ``"im"`` may be
omitted for real matrices.  Numbers are written with 17 significant digits
so that every float round-trips exactly, and key order is fixed so equal
inputs give byte-identical files.
"""

import csv
import io as _io
import json
import math

import numpy as np

from . import histories, qops
from .openquantum import LindbladModel
from .qops import KrausFamily, ProjectorFamily


class InputError(ValueError):
    """Malformed input document; ``where`` is a JSON-path-like location."""

    def __init__(self, where, message):
        self.where = where
        super().__init__(f"{where}: {message}")


# ---------------------------------------------------------------- writing

def _num(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x + 0.0, ".17g")


def _encode(obj, indent, level):
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ","
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode({"re": obj.real, "im": obj.imag}, indent, level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # keep numeric rows on one line
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, 0, 0) for v in obj) + "]"
        return "[" + pad + sep.join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """Deterministic JSON text with 17-significant-digit floats."""
    return _encode(obj, indent, 0) + "\n"


def csv_text(header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def operator_to_json(A):
    A = np.asarray(A, dtype=complex)
    return {"dim": int(A.shape[0]), "re": A.real.tolist(), "im": A.imag.tolist()}


# ---------------------------------------------------------------- reading

def _require(doc, key, where):
    if not isinstance(doc, dict):
        raise InputError(where, "expected an object")
    if key not in doc:
        raise InputError(f"{where}.{key}", "missing")
    return doc[key]


def _matrix(data, where):
    try:
        M = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(where, f"not a numeric array ({exc})") from None
    return M


def operator_from_json(doc, where="$", dim=None):
    re = _matrix(_require(doc, "re", where), f"{where}.re")
    im = _matrix(doc.get("im", np.zeros_like(re)), f"{where}.im")
    if re.shape != im.shape or re.ndim != 2 or re.shape[0] != re.shape[1]:
        raise InputError(where, f"re/im must be equal square matrices, got {re.shape} and {im.shape}")
    d = doc.get("dim", re.shape[0])
    if d != re.shape[0] or (dim is not None and d != dim):
        raise InputError(f"{where}.dim", f"dimension {d} does not match the data / document")
    try:
        return qops.as_operator(re + 1j * im)
    except ValueError as exc:
        raise InputError(where, str(exc)) from None


def state_from_json(doc, where, dim):
    """A density matrix (operator form) or ``{"ket": {"re": [...], "im": [...]}}``."""
    if isinstance(doc, dict) and "ket" in doc:
        k = doc["ket"]
        re = _matrix(_require(k, "re", f"{where}.ket"), f"{where}.ket.re").reshape(-1)
        im = _matrix(k.get("im", np.zeros_like(re)), f"{where}.ket.im").reshape(-1)
        if re.shape != im.shape or re.size != dim:
            raise InputError(f"{where}.ket", f"expected {dim} amplitudes")
        try:
            psi = qops.validate_state_vector(re + 1j * im, dim)
        except ValueError as exc:
            raise InputError(where, str(exc)) from None
        return qops.ket_to_dm(psi)
    rho = operator_from_json(doc, where, dim)
    try:
        return qops.validate_density_matrix(rho, dim)
    except ValueError as exc:
        raise InputError(where, str(exc)) from None


def _reject_unknown(doc, allowed, where):
    extra = set(doc) - set(allowed)
    if extra:
        raise InputError(where, f"unknown field(s) {sorted(extra)}")


def schedule_from_json(doc):
    """Parse a schedule document into (schedule, rho_i, rho_f or None, epsilon or None)."""
    _reject_unknown(doc, {"dim", "initial_state", "final_state", "events", "propagator", "epsilon"}, "$")
    d = _require(doc, "dim", "$")
    if not isinstance(d, int) or d < 1:
        raise InputError("$.dim", "must be a positive integer")
    events = _require(doc, "events", "$")
    if not isinstance(events, list) or not events:
        raise InputError("$.events", "need a non-empty list")
    times, fams = [], []
    for k, ev in enumerate(events):
        w = f"$.events[{k}]"
        _reject_unknown(ev, {"t", "family", "kind"}, w)
        times.append(float(_require(ev, "t", w)))
        ops = [operator_from_json(op, f"{w}.family[{a}]", d)
               for a, op in enumerate(_require(ev, "family", w))]
        kind = ev.get("kind", "projective")
        try:
            if kind == "projective":
                fams.append(ProjectorFamily(tuple(ops)))
            elif kind == "kraus":
                fams.append(KrausFamily(tuple(ops)))
            else:
                raise InputError(f"{w}.kind", f"unknown kind {kind!r}")
        except InputError:
            raise
        except ValueError as exc:
            raise InputError(f"{w}.family", str(exc)) from None
    prop = doc.get("propagator", {})
    _reject_unknown(prop, {"hamiltonian", "unitaries"}, "$.propagator")
    H = U = None
    if "hamiltonian" in prop:
        H = operator_from_json(prop["hamiltonian"], "$.propagator.hamiltonian", d)
    if "unitaries" in prop:
        U = [operator_from_json(u, f"$.propagator.unitaries[{g}]", d) for g, u in enumerate(prop["unitaries"])]
    try:
        sched = histories.EventSchedule(times, fams, hamiltonian=H, unitaries=U)
    except ValueError as exc:
        raise InputError("$.events", str(exc)) from None
    rho_i = state_from_json(_require(doc, "initial_state", "$"), "$.initial_state", d)
    rho_f = state_from_json(doc["final_state"], "$.final_state", d) if "final_state" in doc else None
    eps = doc.get("epsilon")
    return sched, rho_i, rho_f, (None if eps is None else float(eps))


def model_from_json(doc):
    _reject_unknown(doc, {"dim", "H", "channels"}, "$")
    d = _require(doc, "dim", "$")
    H = operator_from_json(_require(doc, "H", "$"), "$.H", d)
    chans = []
    for j, ch in enumerate(doc.get("channels", [])):
        w = f"$.channels[{j}]"
        _reject_unknown(ch, {"L", "gamma"}, w)
        L = operator_from_json(_require(ch, "L", w), f"{w}.L", d)
        g = _require(ch, "gamma", w)
        if not isinstance(g, (int, float)) or g < 0:
            raise InputError(f"{w}.gamma", "must be a non-negative number")
        chans.append((L, float(g)))
    try:
        return LindbladModel(H, tuple(chans))
    except ValueError as exc:
        raise InputError("$", str(exc)) from None


def model_to_json(model):
    return {"dim": model.dim, "H": operator_to_json(model.H),
            "channels": [{"L": operator_to_json(L), "gamma": g} for L, g in model.channels]}


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(str(path), exc.strerror or str(exc)) from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None


# ---------------------------------------------------------------- reports

def functional_report(D, epsilon=None):
    """{labels, D_re, D_im, probabilities, max_ratio, decoherent, epsilon, ...} for a functional.

    Dense tables cover every label when the label count permits, otherwise
    only the histories with nonzero class operators.
    """
    check = histories.is_decoherent(D, epsilon)
    if D.n_labels <= histories.MATERIALIZE_LIMIT:
        labels, M = D.labels, D.matrix()
    else:
        labels, M = D.support, D.support_matrix()
    if D.has_final_state:
        probs = None
    else:
        p = histories.history_probabilities(D)
        probs = [p[lab] for lab in labels]
    return {
        "labels": [list(lab) for lab in labels],
        "support_only": labels is D.support,
        "D_re": M.real,
        "D_im": M.imag,
        "diagonal": np.real(np.diag(M)),
        "probabilities": probs,
        "max_ratio": check.worst_ratio,
        "worst_pair": None if check.worst_pair is None else [list(x) for x in check.worst_pair],
        "n_defined_pairs": check.n_pairs,
        "decoherent": check.decoherent,
        "epsilon": check.epsilon,
        "max_offdiagonal": D.max_offdiagonal(),
        "normalization": D.normalization,
    }
