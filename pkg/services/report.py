"""
report.py: Loads and validates model specification files and turns an analysis into
the JSON report, checked against the schemas shipped in schemas/.
"""
import os
import math
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional
import jsonschema
from jsonschema.exceptions import best_match
from models.exprfn import ExpressionRate
from models.model import Model, RawRates, redimensionalize
from models.scenarios import Example1Spec, Example2Spec, build_example1, build_example2, build_constant
from models.equilibria import RESULTS
from helpers.errors import SpecFileError, ValidationError
from helpers.utils import load_json, dump_json

SCHEMA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'schemas')
REPORT_FORMAT = 'sirf-analysis/1'
POSITIVITY_NOTE = ('f was sampled on [0,1] only; results that assume f positive on all of R '
                   'are applied on the strength of the [0,1] check')


@dataclass
class ModelSpec:
    """
    A validated model specification.

    Attributes:
        model (Model): The model it describes.
        data (dict): The file content as given.
        redimensionalized (Redimensionalized | None): Derived values when raw rates were given.
    """

    model: Model
    data: dict
    redimensionalized: Optional[object] = None

    def echo(self):
        redim = self.redimensionalized
        return {
            'spec': self.data,
            'k': self.model.k,
            'f': self.model.f.describe(),
            'redimensionalized': None if redim is None else {
                'k': redim.k,
                'time_scale': redim.time_scale,
                'beta_tilde': redim.beta_tilde,
                'r0': redim.r0,
            },
        }


@lru_cache(maxsize=None)
def load_schema(name):
    return load_json(os.path.join(SCHEMA_DIR, name))


def validate_document(data, schema_name):
    """
    Validate data against a shipped schema.

    Raises:
        SpecFileError: With the most relevant schema violation.
    """
    validator = jsonschema.Draft7Validator(load_schema(schema_name))
    error = best_match(validator.iter_errors(data))
    if error is not None:
        where = '/'.join(str(part) for part in error.absolute_path) or '<root>'
        raise SpecFileError(f"{schema_name}: {where}: {error.message}")


def _resolve_k(data):
    """k from the top level, from raw rates, or from a scenario that carries its own."""
    f = data['f']
    top_k, raw = data.get('k'), data.get('raw')
    redim = None
    if top_k is not None and raw is not None:
        raise ValidationError("Give exactly one of 'k' or 'raw', not both")
    if raw is not None:
        beta = f.get('beta') if f['kind'] == 'constant' else None
        redim = redimensionalize(RawRates(raw['mu'], raw['gamma']), beta)
        k = redim.k
    elif top_k is not None:
        k = float(top_k)
    elif 'k' in f and f['kind'] != 'expr':
        k = float(f['k'])
    else:
        raise ValidationError("Give exactly one of 'k' or 'raw'")
    if 'k' in f and not math.isclose(float(f['k']), k, rel_tol=1e-12):
        raise ValidationError(f"f carries k = {f['k']} but the model has k = {k}")
    return k, redim


def parse_model_spec(data):
    """
    Build a model from the content of a model specification file.

    Args:
        data (dict): {"k": ..., "f": {...}} or {"raw": {"mu": ..., "gamma": ...}, "f": {...}}.

    Returns:
        ModelSpec: The model with its echo data.

    Raises:
        ValidationError: For schema violations, inconsistent k, or bad expressions.
        ConstructionError: If a scenario cannot be built.
    """
    validate_document(data, 'model_spec.schema.json')
    k, redim = _resolve_k(data)
    f = data['f']
    kind = f['kind']

    if kind == 'expr':
        model = Model(k, ExpressionRate.from_text(f['text']))
    elif kind == 'example1':
        model = build_example1(Example1Spec(int(f['n']), k, f.get('f0')))
    elif kind == 'example2':
        model = build_example2(Example2Spec(k))
    else:
        if 'beta' in f:
            if redim is None:
                raise ValidationError("A per-unit-time 'beta' needs 'raw' rates; use 'beta_tilde' with 'k'")
            beta_tilde = redim.beta_tilde
        else:
            beta_tilde = float(f['beta_tilde'])
        model = build_constant(beta_tilde, k)

    logging.info(f"Loaded model spec kind={kind}, k={k}")
    return ModelSpec(model, data, redim)


def load_model_spec(file_path):
    """Read and validate a model specification file."""
    data = load_json(file_path)
    if not isinstance(data, dict):
        raise SpecFileError(f"{file_path} must hold a JSON object")
    return parse_model_spec(data)


def _result(name):
    return {'name': name, 'smoothness': RESULTS[name]}


def equilibrium_to_dict(e):
    return {
        'id': e.id,
        'kind': e.kind,
        'I': float(e.I),
        'R': float(e.R),
        'classification': e.classification.value,
        'f': e.f,
        'df': e.df,
        'dg': e.dg,
        'margin': e.margin,
        'eigenvalues': [{'re': float(re), 'im': float(im)} for re, im in e.eigenvalues],
        'trace': e.trace,
        'det': e.det,
        'residual': e.residual,
        'thresholds': dict(e.thresholds),
        'result': 'disease-free-local' if e.kind == 'disease-free' else 'local-stability',
    }


def build_report(analysis, spec):
    """
    Assemble the JSON-ready analysis report.

    Args:
        analysis (Analysis): Output of analyze_model.
        spec (ModelSpec): The specification the model came from.

    Returns:
        dict: The report; validated against report.schema.json.
    """
    positivity = analysis.positivity
    certificates = analysis.certificates
    existence = certificates.existence
    uniqueness = certificates.uniqueness
    verdict = certificates.global_
    report = {
        'format': REPORT_FORMAT,
        'model': spec.echo(),
        'positivity': {
            'positive': positivity.positive,
            'witness': None if positivity.witness is None else float(positivity.witness),
            'min_value': positivity.min_value,
            'argmin': positivity.argmin,
            'grid_points': positivity.grid_points,
            'heuristic': True,
            'note': POSITIVITY_NOTE,
        },
        'disease_free': equilibrium_to_dict(analysis.disease_free),
        'endemic': [equilibrium_to_dict(e) for e in analysis.search.equilibria],
        'possible_tangencies': list(analysis.search.tangencies),
        'certificates': {
            'existence': {
                'verdict': existence.verdict,
                'witness': existence.witness,
                'shortcut': existence.shortcut,
                'below_threshold': existence.below_threshold,
                'touching': list(existence.touching),
                'grid_points': existence.grid_points,
                'result': _result(existence.result),
            },
            'uniqueness': {
                'verdict': uniqueness.verdict,
                'reason': uniqueness.reason,
                'monotone': uniqueness.monotone,
                'constant': uniqueness.constant,
                'heuristic': uniqueness.heuristic,
                'result': _result(uniqueness.result),
            },
            'global': {
                'verdict': verdict.verdict.value,
                'reason': verdict.reason,
                'result': _result(verdict.result) if verdict.result else None,
            },
        },
        'successors': [
            {
                'id': s.id,
                'applies': s.applies,
                'satisfied': s.satisfied,
                'next_id': s.next_id,
                'result': _result(s.result),
            }
            for s in analysis.successors
        ],
        'reproduction': dict(analysis.reproduction),
        'settings': dict(analysis.settings),
    }
    validate_report(report)
    return report


def validate_report(report):
    validate_document(report, 'report.schema.json')


def write_report(report, file_path=None):
    """Write the report as deterministic JSON and return the text."""
    return dump_json(report, file_path)


def load_report(file_path):
    """Read a report and check it against the schema."""
    report = load_json(file_path)
    validate_report(report)
    return report


def report_model(report):
    """Rebuild the model a report was computed for."""
    return parse_model_spec(report['model']['spec'])
